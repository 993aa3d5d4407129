//! Profile-space LP for the optimal Bayesian incentive-compatible mechanism
//! on a discretized instance.

use serde::{Deserialize, Serialize};

use super::simplex::{solve_lp, Direction, LinearProgram, LpStatus, Sense};
use crate::error::{Error, Result};
use crate::model::{
    indices, profile_count, profiles, type_grid, AgentType, Instance, IrMode, SetMask,
};

/// Largest number of joint profiles the oracle accepts.
pub const MAX_PROFILES: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleObjective {
    Revenue,
    Welfare,
}

/// A fully discrete instance: a finite type list per agent plus the feasible
/// winner sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteInstance {
    pub types: Vec<Vec<AgentType>>,
    /// Feasible sets in lexicographic order, the empty set first.
    pub sets: Vec<SetMask>,
}

impl DiscreteInstance {
    /// Discretizes every continuous value (and private budget) distribution
    /// to `grid_size` equal-mass atoms.
    pub fn from_instance(instance: &Instance, grid_size: usize) -> Self {
        DiscreteInstance {
            types: instance
                .agents()
                .iter()
                .map(|a| type_grid(a, grid_size, grid_size))
                .collect(),
            sets: instance.feasible_sets().to_vec(),
        }
    }

    pub fn n(&self) -> usize {
        self.types.len()
    }

    pub fn profile_count(&self) -> usize {
        profile_count(&self.types)
    }

    /// The same instance with agents reordered so that new agent `k` is old
    /// agent `order[k]`.
    pub fn permuted(&self, order: &[usize]) -> Self {
        let mut pos = vec![0; order.len()];
        for (k, &i) in order.iter().enumerate() {
            pos[i] = k;
        }
        let mut sets: Vec<SetMask> = self
            .sets
            .iter()
            .map(|&s| indices(s).fold(0, |m, i| m | (1 << pos[i])))
            .collect();
        sets.sort_by(|a, b| crate::model::lex_cmp(*a, *b));
        DiscreteInstance {
            types: order.iter().map(|&i| self.types[i].clone()).collect(),
            sets,
        }
    }
}

/// Optimal mechanism at one joint profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileRule {
    /// Type index per agent.
    pub profile: Vec<usize>,
    pub prob: f64,
    /// Probability of each feasible set (aligned with `DiscreteInstance::sets`).
    pub allocation: Vec<f64>,
    /// Expected payment per agent at this profile. Under interim IR this is
    /// the agent's interim payment, charged regardless of the outcome.
    pub payments: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub status: LpStatus,
    pub value: f64,
    pub ir_mode: IrMode,
    pub objective: OracleObjective,
    pub rules: Vec<ProfileRule>,
    /// Interim allocation probability per agent and type.
    pub interim_allocation: Vec<Vec<f64>>,
    /// Interim expected payment per agent and type.
    pub interim_payment: Vec<Vec<f64>>,
    pub max_residual: f64,
}

/// Convenience wrapper: discretize `instance` to `grid_size` atoms and solve.
pub fn optimal_bic_for(
    instance: &Instance,
    grid_size: usize,
    ir_mode: IrMode,
    objective: OracleObjective,
    budget_scale: f64,
) -> Result<OracleResult> {
    optimal_bic(
        &DiscreteInstance::from_instance(instance, grid_size),
        ir_mode,
        objective,
        budget_scale,
    )
}

/// Variable layout of the profile-space LP.
struct Layout {
    n: usize,
    ir_mode: IrMode,
    /// Nonempty feasible sets.
    sets: Vec<SetMask>,
    profiles: Vec<(Vec<usize>, f64)>,
    pay_base: usize,
    type_offset: Vec<usize>,
    /// Per agent and own type: profiles with the opponents' probability.
    by_type: Vec<Vec<Vec<(usize, f64)>>>,
    /// Per agent: indices into `sets` containing the agent.
    sets_with: Vec<Vec<usize>>,
}

impl Layout {
    fn new(inst: &DiscreteInstance, ir_mode: IrMode) -> Self {
        let n = inst.n();
        let sets: Vec<SetMask> = inst.sets.iter().copied().filter(|&s| s != 0).collect();
        let profiles: Vec<(Vec<usize>, f64)> = profiles(&inst.types).collect();
        let mut type_offset = vec![0; n + 1];
        for i in 0..n {
            type_offset[i + 1] = type_offset[i] + inst.types[i].len();
        }
        let mut by_type: Vec<Vec<Vec<(usize, f64)>>> = inst
            .types
            .iter()
            .map(|ts| vec![Vec::new(); ts.len()])
            .collect();
        for (p, (idx, prob)) in profiles.iter().enumerate() {
            for i in 0..n {
                by_type[i][idx[i]].push((p, prob / inst.types[i][idx[i]].prob));
            }
        }
        let sets_with = (0..n)
            .map(|i| {
                (0..sets.len())
                    .filter(|&s| sets[s] & (1 << i) != 0)
                    .collect()
            })
            .collect();
        Layout {
            n,
            ir_mode,
            pay_base: profiles.len() * sets.len(),
            sets,
            profiles,
            type_offset,
            by_type,
            sets_with,
        }
    }

    fn n_vars(&self) -> usize {
        match self.ir_mode {
            IrMode::ExPost => self.pay_base + self.profiles.len() * self.n,
            IrMode::Interim => self.pay_base + self.type_offset[self.n],
        }
    }

    fn x(&self, p: usize, s: usize) -> usize {
        p * self.sets.len() + s
    }

    fn epir_pay(&self, p: usize, i: usize) -> usize {
        self.pay_base + p * self.n + i
    }

    fn interim_pay(&self, i: usize, t: usize) -> usize {
        self.pay_base + self.type_offset[i] + t
    }

    /// Interim allocation probability of agent `i` at type `t` as sparse terms.
    fn q_terms(&self, i: usize, t: usize) -> Vec<(usize, f64)> {
        let mut out = Vec::new();
        for &(p, w) in &self.by_type[i][t] {
            for &s in &self.sets_with[i] {
                out.push((self.x(p, s), w));
            }
        }
        out
    }

    /// Interim expected payment of agent `i` at type `t` as sparse terms.
    fn m_terms(&self, i: usize, t: usize) -> Vec<(usize, f64)> {
        match self.ir_mode {
            IrMode::ExPost => self.by_type[i][t]
                .iter()
                .map(|&(p, w)| (self.epir_pay(p, i), w))
                .collect(),
            IrMode::Interim => vec![(self.interim_pay(i, t), 1.0)],
        }
    }
}

fn check(inst: &DiscreteInstance, budget_scale: f64) -> Result<()> {
    if inst.n() == 0 || inst.types.iter().any(|t| t.is_empty()) {
        return Err(Error::InvalidInstance(
            "oracle needs at least one type per agent".into(),
        ));
    }
    if !(budget_scale >= 0.0) {
        return Err(Error::InvalidInstance(format!(
            "budget scale {budget_scale} must be nonnegative"
        )));
    }
    let n_profiles = inst.profile_count();
    if n_profiles > MAX_PROFILES {
        return Err(Error::OracleTooLarge {
            profiles: n_profiles,
            cap: MAX_PROFILES,
        });
    }
    for (i, ts) in inst.types.iter().enumerate() {
        let total: f64 = ts.iter().map(|t| t.prob).sum();
        if (total - 1.0).abs() > 1e-9 || ts.iter().any(|t| !(t.prob > 0.0)) {
            return Err(Error::InvalidInstance(format!(
                "agent {i} type probabilities are invalid"
            )));
        }
    }
    Ok(())
}

fn build(
    inst: &DiscreteInstance,
    lay: &Layout,
    objective: OracleObjective,
    budget_scale: f64,
) -> Result<LinearProgram> {
    let n = lay.n;
    let budget = |i: usize, t: usize| inst.types[i][t].budget * budget_scale;
    let mut lp = LinearProgram::new(lay.n_vars(), Direction::Maximize);
    for (p, (idx, prob)) in lay.profiles.iter().enumerate() {
        if let OracleObjective::Welfare = objective {
            for (s, &set) in lay.sets.iter().enumerate() {
                let w: f64 = indices(set).map(|i| inst.types[i][idx[i]].value).sum();
                lp.set_objective(lay.x(p, s), prob * w)?;
            }
        }
        lp.add_constraint(
            (0..lay.sets.len()).map(|s| (lay.x(p, s), 1.0)).collect(),
            Sense::Le,
            1.0,
        )?;
    }
    if let OracleObjective::Revenue = objective {
        match lay.ir_mode {
            IrMode::ExPost => {
                for (p, (_, prob)) in lay.profiles.iter().enumerate() {
                    for i in 0..n {
                        lp.set_objective(lay.epir_pay(p, i), *prob)?;
                    }
                }
            }
            IrMode::Interim => {
                for i in 0..n {
                    for (t, ty) in inst.types[i].iter().enumerate() {
                        lp.set_objective(lay.interim_pay(i, t), ty.prob)?;
                    }
                }
            }
        }
    }

    match lay.ir_mode {
        IrMode::ExPost => {
            for (p, (idx, _)) in lay.profiles.iter().enumerate() {
                for i in 0..n {
                    let cap = inst.types[i][idx[i]].value.min(budget(i, idx[i]));
                    let mut row = vec![(lay.epir_pay(p, i), 1.0)];
                    row.extend(lay.sets_with[i].iter().map(|&s| (lay.x(p, s), -cap)));
                    lp.add_constraint(row, Sense::Le, 0.0)?;
                }
            }
        }
        IrMode::Interim => {
            for i in 0..n {
                for (t, ty) in inst.types[i].iter().enumerate() {
                    let b = budget(i, t);
                    if b.is_finite() {
                        lp.add_constraint(vec![(lay.interim_pay(i, t), 1.0)], Sense::Le, b)?;
                    }
                    let mut row = vec![(lay.interim_pay(i, t), 1.0)];
                    row.extend(
                        lay.q_terms(i, t)
                            .into_iter()
                            .map(|(j, w)| (j, -ty.value * w)),
                    );
                    lp.add_constraint(row, Sense::Le, 0.0)?;
                }
            }
        }
    }

    // v_t·Q(u) − M(u) ≤ v_t·Q(t) − M(t) for every imitable u.
    for i in 0..n {
        let ts = &inst.types[i];
        let q: Vec<Vec<(usize, f64)>> = (0..ts.len()).map(|t| lay.q_terms(i, t)).collect();
        let m: Vec<Vec<(usize, f64)>> = (0..ts.len()).map(|t| lay.m_terms(i, t)).collect();
        for t in 0..ts.len() {
            for u in 0..ts.len() {
                if u == t || ts[u].budget > ts[t].budget + 1e-12 {
                    continue;
                }
                let v = ts[t].value;
                let mut row = Vec::with_capacity(2 * (q[t].len() + m[t].len()));
                row.extend(q[u].iter().map(|&(j, w)| (j, v * w)));
                row.extend(q[t].iter().map(|&(j, w)| (j, -v * w)));
                row.extend(m[u].iter().map(|&(j, w)| (j, -w)));
                row.extend(m[t].iter().map(|&(j, w)| (j, w)));
                lp.add_constraint(row, Sense::Le, 0.0)?;
            }
        }
    }
    Ok(lp)
}

/// The linear program solved by [`optimal_bic`].
pub fn bic_program(
    inst: &DiscreteInstance,
    ir_mode: IrMode,
    objective: OracleObjective,
    budget_scale: f64,
) -> Result<LinearProgram> {
    check(inst, budget_scale)?;
    build(inst, &Layout::new(inst, ir_mode), objective, budget_scale)
}

/// Solves for the optimal BIC mechanism over all randomized allocation rules
/// on the discrete instance, with budgets multiplied by `budget_scale`.
///
/// Under ex-post IR a winner's payment is at most its value and scaled budget
/// and losers pay nothing; payments at a profile are aggregated over the
/// allocation lottery, which loses nothing since only their expectation enters
/// the incentive constraints. Under interim IR each type pays an interim
/// amount bounded by its budget and its interim value. A type may only
/// imitate types whose budget does not exceed its own.
pub fn optimal_bic(
    inst: &DiscreteInstance,
    ir_mode: IrMode,
    objective: OracleObjective,
    budget_scale: f64,
) -> Result<OracleResult> {
    check(inst, budget_scale)?;
    let lay = Layout::new(inst, ir_mode);
    let lp = build(inst, &lay, objective, budget_scale)?;
    let sol = solve_lp(&lp)?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::Internal(format!(
            "oracle LP ended with status {:?}",
            sol.status
        )));
    }
    let x = &sol.x;
    let n = lay.n;
    let interim = |terms: Vec<(usize, f64)>| terms.iter().map(|&(j, w)| w * x[j]).sum::<f64>();
    let interim_allocation: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..inst.types[i].len())
                .map(|t| interim(lay.q_terms(i, t)))
                .collect()
        })
        .collect();
    let interim_payment: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..inst.types[i].len())
                .map(|t| interim(lay.m_terms(i, t)))
                .collect()
        })
        .collect();
    let rules = lay
        .profiles
        .iter()
        .enumerate()
        .map(|(p, (idx, prob))| {
            let nonempty: Vec<f64> = (0..lay.sets.len())
                .map(|s| x[lay.x(p, s)].max(0.0))
                .collect();
            let mut allocation = Vec::with_capacity(inst.sets.len());
            let mut k = 0;
            for &s in &inst.sets {
                if s == 0 {
                    allocation.push((1.0 - nonempty.iter().sum::<f64>()).max(0.0));
                } else {
                    allocation.push(nonempty[k]);
                    k += 1;
                }
            }
            let payments = (0..n)
                .map(|i| match ir_mode {
                    IrMode::ExPost => x[lay.epir_pay(p, i)],
                    IrMode::Interim => x[lay.interim_pay(i, idx[i])],
                })
                .collect();
            ProfileRule {
                profile: idx.clone(),
                prob: *prob,
                allocation,
                payments,
            }
        })
        .collect();

    Ok(OracleResult {
        status: sol.status,
        value: sol.value,
        ir_mode,
        objective,
        rules,
        interim_allocation,
        interim_payment,
        max_residual: sol.max_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::Distribution;
    use crate::model::BudgetSpec;
    use crate::revenue_public::epir_iir_gap_instance;

    #[test]
    fn gap_instance_values() {
        let inst = DiscreteInstance::from_instance(&epir_iir_gap_instance(4, 1.0).unwrap(), 8);
        let iir = optimal_bic(&inst, IrMode::Interim, OracleObjective::Revenue, 1.0).unwrap();
        let epir = optimal_bic(&inst, IrMode::ExPost, OracleObjective::Revenue, 1.0).unwrap();
        assert!((iir.value - 1.0).abs() < 1e-6, "{}", iir.value);
        assert!((epir.value - 0.25).abs() < 1e-6, "{}", epir.value);
    }

    #[test]
    fn unbudgeted_single_agent_matches_best_posted_price() {
        let d = Distribution::discrete(vec![1.0, 2.0, 3.0, 5.0], vec![0.3, 0.3, 0.2, 0.2]).unwrap();
        let inst =
            Instance::single_item_iid(1, d.clone(), BudgetSpec::Public { amount: 10.0 }).unwrap();
        let r = optimal_bic_for(&inst, 8, IrMode::ExPost, OracleObjective::Revenue, 1.0).unwrap();
        let best = d
            .atoms()
            .iter()
            .map(|(p, _)| d.posted_price_revenue(*p))
            .fold(0.0, f64::max);
        assert!((r.value - best).abs() < 1e-9, "{} vs {best}", r.value);
    }

    #[test]
    fn zero_budget_scale_kills_revenue() {
        let inst = Instance::single_item_iid(
            2,
            Distribution::discrete(vec![1.0, 2.0], vec![0.5, 0.5]).unwrap(),
            BudgetSpec::Public { amount: 1.0 },
        )
        .unwrap();
        let d = DiscreteInstance::from_instance(&inst, 8);
        for mode in [IrMode::ExPost, IrMode::Interim] {
            let r = optimal_bic(&d, mode, OracleObjective::Revenue, 0.0).unwrap();
            assert!(r.value.abs() < 1e-9);
        }
    }

    #[test]
    fn allocations_are_distributions() {
        let inst = Instance::single_item_iid(
            2,
            Distribution::uniform(0.0, 1.0).unwrap(),
            BudgetSpec::Public { amount: 0.3 },
        )
        .unwrap();
        let r = optimal_bic_for(&inst, 4, IrMode::ExPost, OracleObjective::Welfare, 1.0).unwrap();
        for rule in &r.rules {
            assert!((rule.allocation.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(rule.allocation.iter().all(|p| *p >= 0.0));
        }
    }

    #[test]
    fn size_cap_is_enforced() {
        let inst = Instance::single_item_iid(
            5,
            Distribution::uniform(0.0, 1.0).unwrap(),
            BudgetSpec::Public { amount: 1.0 },
        )
        .unwrap();
        assert!(matches!(
            optimal_bic_for(&inst, 8, IrMode::ExPost, OracleObjective::Revenue, 1.0),
            Err(Error::OracleTooLarge { .. })
        ));
    }
}
