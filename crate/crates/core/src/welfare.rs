//! Welfare maximization under public budgets.

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::distributions::{support_index, Distribution};
use crate::error::{Error, Result};
use crate::model::{
    indices, max_weight_set, max_weight_sets, profile_of, profiles, type_grid, AgentType,
    BudgetMode, Instance, IrMode, Mechanism, Outcome, SetMask, TypeProfile,
};
use crate::revenue_public::CappedMyerson;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModifiedProfile {
    pub w: Vec<f64>,
}

/// `E[V | V > B]` per agent, or `None` when no value exceeds the budget.
fn tail_values(instance: &Instance, budgets: &[f64]) -> Vec<Option<f64>> {
    instance
        .agents()
        .iter()
        .zip(budgets)
        .map(|(a, b)| a.value.tail_expectation(*b).ok())
        .collect()
}

fn modified(values: &[f64], budgets: &[f64], tails: &[Option<f64>]) -> Result<Vec<f64>> {
    values
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            if v <= budgets[i] {
                Ok(v)
            } else {
                tails[i].ok_or_else(|| {
                    Error::MalformedProfile(format!(
                        "agent {i} reports {v} above budget {} but the prior has no mass there",
                        budgets[i]
                    ))
                })
            }
        })
        .collect()
}

/// Replaces every value above its budget by the expected value conditioned
/// on exceeding the budget.
pub fn modify_values(instance: &Instance, profile: &TypeProfile) -> Result<ModifiedProfile> {
    instance.check_profile(profile)?;
    let budgets = instance.public_budgets("modify_values")?;
    let tails = tail_values(instance, &budgets);
    Ok(ModifiedProfile {
        w: modified(&profile.values, &budgets, &tails)?,
    })
}

/// VCG on modified values. Winners maximize the total modified value (ties to
/// the lexicographically smallest set) and pay `min(τ, B, v)` where `τ` is the
/// VCG price on modified values.
#[derive(Debug, Clone)]
pub struct ModifiedVcg {
    budgets: Vec<f64>,
    tails: Vec<Option<f64>>,
    sets: Vec<SetMask>,
}

impl ModifiedVcg {
    pub fn new(instance: &Instance) -> Result<Self> {
        let budgets = instance.public_budgets("modified_vcg")?;
        let tails = tail_values(instance, &budgets);
        Ok(ModifiedVcg {
            budgets,
            tails,
            sets: instance.feasible_sets().to_vec(),
        })
    }

    pub fn budgets(&self) -> &[f64] {
        &self.budgets
    }

    fn allocate(&self, reported: &TypeProfile) -> Result<Outcome> {
        if reported.len() != self.budgets.len() {
            return Err(Error::ProfileMismatch {
                expected: self.budgets.len(),
                got: reported.len(),
            });
        }
        let w = modified(&reported.values, &self.budgets, &self.tails)?;
        let weights: Vec<Option<f64>> = w.iter().map(|x| Some(*x)).collect();
        let chosen = max_weight_set(&self.sets, &weights);
        let mut payments = vec![0.0; w.len()];
        for i in indices(chosen) {
            let mut without = weights.clone();
            without[i] = None;
            let best_without: f64 = indices(max_weight_set(&self.sets, &without))
                .map(|j| w[j])
                .sum();
            let others_in_chosen: f64 = indices(chosen).filter(|j| *j != i).map(|j| w[j]).sum();
            let tau = (best_without - others_in_chosen).max(0.0);
            payments[i] = tau.min(self.budgets[i]).min(reported.values[i]);
        }
        Ok(Outcome::from_mask(chosen, payments))
    }
}

impl Mechanism for ModifiedVcg {
    fn name(&self) -> &str {
        "modified_vcg"
    }

    fn budget_mode(&self) -> BudgetMode {
        BudgetMode::Public
    }

    fn run(&self, reported: &TypeProfile, _rng: &mut dyn RngCore) -> Result<Outcome> {
        self.allocate(reported)
    }

    fn outcome_lottery(&self, reported: &TypeProfile) -> Option<Result<Vec<(f64, Outcome)>>> {
        Some(self.allocate(reported).map(|o| vec![(1.0, o)]))
    }
}

pub fn modified_vcg(instance: &Instance) -> Result<ModifiedVcg> {
    ModifiedVcg::new(instance)
}

/// Allocation rules that can be converted to all-pay form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AllocationRule {
    /// The modified-value VCG allocation.
    ModifiedVcg,
    /// Maximum total true value, ties broken uniformly at random.
    WelfareOptimal,
}

/// How unconditional payments are derived from the allocation rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AllPayRule {
    /// Interim expectation of the modified-VCG payments.
    InterimExpectation,
    /// Largest interim payments that keep the allocation incentive compatible,
    /// interim individually rational and within budget.
    RevenueMaximal,
}

/// An all-pay mechanism over a discrete type grid: the allocation follows
/// `rule`, and every agent pays the interim amount fixed for the reported
/// type whether or not the agent wins.
#[derive(Debug, Clone)]
pub struct AllPay {
    name: String,
    rule: AllocationRule,
    types: Vec<Vec<AgentType>>,
    sets: Vec<SetMask>,
    vcg: ModifiedVcg,
    payments: Vec<Vec<f64>>,
    interim_allocation: Vec<Vec<f64>>,
}

impl AllPay {
    pub fn types(&self) -> &[Vec<AgentType>] {
        &self.types
    }

    /// Unconditional payment per agent and grid type.
    pub fn payments(&self) -> &[Vec<f64>] {
        &self.payments
    }

    /// Interim winning probability per agent and grid type.
    pub fn interim_allocation(&self) -> &[Vec<f64>] {
        &self.interim_allocation
    }

    /// Expected revenue under truthful reports drawn from the grid.
    pub fn expected_revenue(&self) -> f64 {
        self.types
            .iter()
            .zip(&self.payments)
            .map(|(ts, ps)| ts.iter().zip(ps).map(|(t, p)| t.prob * p).sum::<f64>())
            .sum()
    }

    fn type_index(&self, i: usize, v: f64) -> Result<usize> {
        let values: Vec<f64> = self.types[i].iter().map(|t| t.value).collect();
        support_index(&values, v).ok_or_else(|| {
            Error::MalformedProfile(format!("agent {i} reports {v}, which is not a grid type"))
        })
    }

    /// Winner sets with their probabilities at a reported profile.
    fn allocation(&self, reported: &TypeProfile) -> Result<Vec<(f64, SetMask)>> {
        match self.rule {
            AllocationRule::ModifiedVcg => Ok(vec![(1.0, self.vcg.allocate(reported)?.mask())]),
            AllocationRule::WelfareOptimal => {
                let weights: Vec<Option<f64>> = reported.values.iter().map(|v| Some(*v)).collect();
                let ties = max_weight_sets(&self.sets, &weights);
                let p = 1.0 / ties.len() as f64;
                Ok(ties.into_iter().map(|s| (p, s)).collect())
            }
        }
    }

    fn outcome(&self, winners: SetMask, reported: &TypeProfile) -> Result<Outcome> {
        let payments = (0..self.types.len())
            .map(|i| Ok(self.payments[i][self.type_index(i, reported.values[i])?]))
            .collect::<Result<Vec<f64>>>()?;
        Ok(Outcome::from_mask(winners, payments))
    }

    fn check(&self, reported: &TypeProfile) -> Result<()> {
        if reported.len() != self.types.len() {
            return Err(Error::ProfileMismatch {
                expected: self.types.len(),
                got: reported.len(),
            });
        }
        Ok(())
    }
}

impl Mechanism for AllPay {
    fn name(&self) -> &str {
        &self.name
    }

    fn budget_mode(&self) -> BudgetMode {
        BudgetMode::Public
    }

    fn ir_mode(&self) -> IrMode {
        IrMode::Interim
    }

    fn run(&self, reported: &TypeProfile, rng: &mut dyn RngCore) -> Result<Outcome> {
        self.check(reported)?;
        let alloc = self.allocation(reported)?;
        let winners = if alloc.len() == 1 {
            alloc[0].1
        } else {
            alloc[rng.gen_range(0..alloc.len())].1
        };
        self.outcome(winners, reported)
    }

    fn outcome_lottery(&self, reported: &TypeProfile) -> Option<Result<Vec<(f64, Outcome)>>> {
        let go = || -> Result<Vec<(f64, Outcome)>> {
            self.check(reported)?;
            self.allocation(reported)?
                .into_iter()
                .map(|(p, s)| Ok((p, self.outcome(s, reported)?)))
                .collect()
        };
        Some(go())
    }
}

/// All-pay conversion of modified-value VCG on the `grid_size` discretization:
/// each agent pays the interim expectation of its modified-VCG payment,
/// computed exactly over the opponents' grid types.
pub fn to_iir_allpay(instance: &Instance, grid_size: usize) -> Result<AllPay> {
    build_allpay(
        instance,
        grid_size,
        AllocationRule::ModifiedVcg,
        AllPayRule::InterimExpectation,
    )
}

/// All-pay mechanism for an allocation rule with the given payment rule.
pub fn build_allpay(
    instance: &Instance,
    grid_size: usize,
    rule: AllocationRule,
    pay: AllPayRule,
) -> Result<AllPay> {
    let budgets = instance.public_budgets("all-pay conversion")?;
    let discrete = instance.discretized(grid_size);
    let types: Vec<Vec<AgentType>> = discrete
        .agents()
        .iter()
        .map(|a| type_grid(a, grid_size, grid_size))
        .collect();
    let n = types.len();
    let mut mech = AllPay {
        name: match (rule, pay) {
            (AllocationRule::ModifiedVcg, AllPayRule::InterimExpectation) => "iir_allpay".into(),
            (AllocationRule::ModifiedVcg, AllPayRule::RevenueMaximal) => "iir_allpay_max".into(),
            (AllocationRule::WelfareOptimal, _) => "welfare_allpay".into(),
        },
        rule,
        vcg: ModifiedVcg::new(&discrete)?,
        sets: discrete.feasible_sets().to_vec(),
        payments: types.iter().map(|t| vec![0.0; t.len()]).collect(),
        interim_allocation: types.iter().map(|t| vec![0.0; t.len()]).collect(),
        types,
    };

    let mut expected_pay: Vec<Vec<f64>> = mech.types.iter().map(|t| vec![0.0; t.len()]).collect();
    for (idx, prob) in profiles(&mech.types) {
        let profile = profile_of(&mech.types, &idx);
        let vcg_pay = match rule {
            AllocationRule::ModifiedVcg => Some(mech.vcg.allocate(&profile)?.payments),
            AllocationRule::WelfareOptimal => None,
        };
        for (p, set) in mech.allocation(&profile)? {
            for i in indices(set) {
                let opp = prob / mech.types[i][idx[i]].prob;
                mech.interim_allocation[i][idx[i]] += opp * p;
            }
        }
        if let Some(pay) = vcg_pay {
            for i in 0..n {
                expected_pay[i][idx[i]] += prob / mech.types[i][idx[i]].prob * pay[i];
            }
        }
    }

    for i in 0..n {
        mech.payments[i] = match pay {
            AllPayRule::InterimExpectation => {
                if rule != AllocationRule::ModifiedVcg {
                    return Err(Error::InvalidInstance(
                        "interim-expectation payments need the modified-VCG allocation".into(),
                    ));
                }
                expected_pay[i].clone()
            }
            AllPayRule::RevenueMaximal => {
                let values: Vec<f64> = mech.types[i].iter().map(|t| t.value).collect();
                max_allpay_payments(&values, &mech.interim_allocation[i], budgets[i])?
            }
        };
        for (t, m) in mech.payments[i].iter().enumerate() {
            if *m > budgets[i] + 1e-9 {
                return Err(Error::Internal(format!(
                    "agent {i} type {t}: interim payment {m} exceeds budget {}",
                    budgets[i]
                )));
            }
        }
    }
    Ok(mech)
}

/// Largest interim payments for ascending types `values` with nondecreasing
/// interim allocation `q`, subject to local incentive constraints, interim
/// individual rationality and `m ≤ budget`. Each payment is pushed to its
/// downward-IC bound unless that would leave too little room below the budget
/// for the minimum increments of the higher types.
pub fn max_allpay_payments(values: &[f64], q: &[f64], budget: f64) -> Result<Vec<f64>> {
    let k = values.len();
    let dq: Vec<f64> = (0..k)
        .map(|j| q[j] - if j == 0 { 0.0 } else { q[j - 1] })
        .collect();
    if dq.iter().skip(1).any(|d| *d < -1e-9) {
        return Err(Error::Internal("interim allocation is not monotone".into()));
    }
    let mut reserve = vec![0.0; k + 1];
    for j in (1..k).rev() {
        reserve[j] = reserve[j + 1] + values[j - 1] * dq[j].max(0.0);
    }
    let mut m = vec![0.0; k];
    let mut prev = 0.0;
    for j in 0..k {
        let cap = budget - reserve[j + 1];
        if cap < -1e-9 {
            return Err(Error::Internal(
                "allocation cannot be implemented within the budget".into(),
            ));
        }
        let up = prev + values[j] * dq[j].max(0.0);
        m[j] = up.min(cap).max(0.0);
        prev = m[j];
    }
    Ok(m)
}

/// Welfare via the capped-value revenue mechanism. Requires MHR values.
pub fn welfare_via_revenue(instance: &Instance) -> Result<CappedMyerson> {
    for (i, a) in instance.agents().iter().enumerate() {
        if !a.value.is_mhr() {
            return Err(Error::NotMhr(i));
        }
    }
    Ok(CappedMyerson::new(instance)?.renamed("welfare_via_revenue"))
}

/// Item assignment for two unit-demand agents and two items; `items[i]` is
/// the item agent `i` receives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub items: [usize; 2],
}

impl Assignment {
    pub fn welfare(&self, values: &[[f64; 2]; 2]) -> f64 {
        values[0][self.items[0]] + values[1][self.items[1]]
    }

    /// Zero-budget mechanisms charge nothing.
    pub fn payments(&self) -> [f64; 2] {
        [0.0, 0.0]
    }
}

fn top_item(row: &[f64; 2]) -> usize {
    if row[1] > row[0] {
        1
    } else {
        0
    }
}

/// The matching that maximizes total expected value under the priors;
/// identity on ties.
pub fn ex_ante_matching(ex_ante: &[[Distribution; 2]; 2]) -> Assignment {
    let mean = |i: usize, j: usize| ex_ante[i][j].mean();
    if mean(0, 1) + mean(1, 0) > mean(0, 0) + mean(1, 1) {
        Assignment { items: [1, 0] }
    } else {
        Assignment { items: [0, 1] }
    }
}

/// Zero-budget mechanism for two agents and two items: each agent names a
/// preferred item (lower index on ties). Distinct favorites are granted;
/// otherwise the ex-ante optimal matching is used.
pub fn topchoice_2x2(values: &[[f64; 2]; 2], ex_ante: &[[Distribution; 2]; 2]) -> Assignment {
    let tops = [top_item(&values[0]), top_item(&values[1])];
    if tops[0] != tops[1] {
        Assignment { items: tops }
    } else {
        ex_ante_matching(ex_ante)
    }
}

/// Best matching for known values.
pub fn optimal_matching(values: &[[f64; 2]; 2]) -> Assignment {
    if values[0][1] + values[1][0] > values[0][0] + values[1][1] {
        Assignment { items: [1, 0] }
    } else {
        Assignment { items: [0, 1] }
    }
}

/// Exact expected welfare of a 2×2 mechanism and of the unconstrained optimum
/// when every entry is drawn independently from a discrete prior.
pub fn expected_2x2(
    ex_ante: &[[Distribution; 2]; 2],
    mech: impl Fn(&[[f64; 2]; 2]) -> Assignment,
) -> (f64, f64) {
    let atoms: Vec<Vec<(f64, f64)>> = (0..4).map(|k| ex_ante[k / 2][k % 2].atoms()).collect();
    let mut got = 0.0;
    let mut opt = 0.0;
    let mut idx = [0usize; 4];
    loop {
        let mut values = [[0.0; 2]; 2];
        let mut prob = 1.0;
        for k in 0..4 {
            let (v, p) = atoms[k][idx[k]];
            values[k / 2][k % 2] = v;
            prob *= p;
        }
        got += prob * mech(&values).welfare(&values);
        opt += prob * optimal_matching(&values).welfare(&values);
        let mut k = 0;
        loop {
            if k == 4 {
                return (got, opt);
            }
            idx[k] += 1;
            if idx[k] < atoms[k].len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}
