//! Revenue maximization with public budgets.

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::distributions::{Distribution, IronedCurve};
use crate::error::{Error, Result};
use crate::model::{
    max_weight_set, BudgetMode, BudgetSpec, Feasibility, Instance, LotteryOption, Mechanism, Menu,
    MenuMechanism, Outcome, SetMask, TypeProfile,
};
use crate::oracle::{solve_lp, Direction, LinearProgram, LpStatus, Sense};

/// LP options closer than this in both coordinates are merged.
const MERGE_TOL: f64 = 1e-7;
/// Allocation probabilities below this are treated as zero.
const Q_FLOOR: f64 = 1e-9;
/// Price discount per unit of allocation probability, so that a buyer who is
/// indifferent between two options takes the larger lottery.
const TIE_SHADE: f64 = 1e-8;

/// Optimal single-agent mechanism on a discrete grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingleAgentLp {
    /// Ascending value points with probabilities.
    pub grid: Vec<(f64, f64)>,
    pub budget: f64,
    /// Allocation probability per grid type.
    pub q: Vec<f64>,
    /// Expected payment per grid type.
    pub p: Vec<f64>,
    pub revenue: f64,
}

impl SingleAgentLp {
    /// Distinct `(q, t = p/q)` options with `q > 0`, merged within tolerance.
    pub fn options(&self) -> Vec<LotteryOption> {
        let mut out: Vec<LotteryOption> = Vec::new();
        for (q, p) in self.q.iter().zip(&self.p) {
            if *q <= Q_FLOOR {
                continue;
            }
            let q = q.min(1.0);
            let t = (p / q).max(0.0);
            if !out
                .iter()
                .any(|o| (o.q - q).abs() < MERGE_TOL && (o.t - t).abs() < MERGE_TOL)
            {
                out.push(LotteryOption { q, t });
            }
        }
        out
    }
}

/// Solves the single-agent revenue LP: maximize expected payment subject to
/// incentive compatibility between adjacent grid types (which, with the
/// monotone allocation it forces, implies it for every pair), `q ≤ 1` and
/// `p ≤ q·min(v, B)`.
pub fn solve_single_agent(
    d: &Distribution,
    budget: f64,
    grid_size: usize,
) -> Result<SingleAgentLp> {
    if budget.is_nan() || budget < 0.0 {
        return Err(Error::InvalidInstance(format!(
            "budget {budget} must be nonnegative"
        )));
    }
    d.validate()?;
    let grid = d.discretize(grid_size).atoms();
    let k = grid.len();
    let (qv, pv) = (|i: usize| i, |i: usize| k + i);
    let mut lp = LinearProgram::new(2 * k, Direction::Maximize);
    for (i, (v, prob)) in grid.iter().enumerate() {
        lp.set_objective(pv(i), *prob)?;
        lp.set_bounds(qv(i), 0.0, 1.0)?;
        lp.add_constraint(vec![(pv(i), 1.0), (qv(i), -v.min(budget))], Sense::Le, 0.0)?;
    }
    for i in 0..k.saturating_sub(1) {
        let (lo, hi) = (grid[i].0, grid[i + 1].0);
        // Type i does not envy i+1, and i+1 does not envy i.
        lp.add_constraint(
            vec![
                (qv(i + 1), lo),
                (pv(i + 1), -1.0),
                (qv(i), -lo),
                (pv(i), 1.0),
            ],
            Sense::Le,
            0.0,
        )?;
        lp.add_constraint(
            vec![
                (qv(i), hi),
                (pv(i), -1.0),
                (qv(i + 1), -hi),
                (pv(i + 1), 1.0),
            ],
            Sense::Le,
            0.0,
        )?;
    }
    let sol = solve_lp(&lp)?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::Internal(format!(
            "single-agent LP ended with status {:?}",
            sol.status
        )));
    }
    Ok(SingleAgentLp {
        q: sol.x[..k].iter().map(|q| q.clamp(0.0, 1.0)).collect(),
        p: sol.x[k..].iter().map(|p| p.max(0.0)).collect(),
        grid,
        budget,
        revenue: sol.value,
    })
}

/// Revenue-optimal menu for one agent with public budget `budget`.
/// Returns the menu mechanism and the LP's expected revenue.
pub fn optimal_single_agent(
    d: &Distribution,
    budget: f64,
    grid_size: usize,
) -> Result<(MenuMechanism, f64)> {
    let sol = solve_single_agent(d, budget, grid_size)?;
    let options = sol.options().into_iter().map(|o| LotteryOption {
        q: o.q,
        t: (o.t - TIE_SHADE * o.q).max(0.0),
    });
    let menu = Menu::new(options)?;
    let mech = MenuMechanism::named(
        "optimal_single_agent",
        vec![menu],
        Feasibility::SingleItem,
        BudgetMode::Public,
    );
    Ok((mech, sol.revenue))
}

/// Expected revenue of the best deterministic posted price not above the
/// budget, over the grid points of `d`'s discretization.
pub fn best_posted_price(d: &Distribution, budget: f64, grid_size: usize) -> (f64, f64) {
    let grid = d.discretize(grid_size);
    let mut best = (0.0, 0.0);
    for (p, _) in grid.atoms() {
        if p <= budget {
            let r = grid.posted_price_revenue(p);
            if r > best.1 + 1e-15 {
                best = (p, r);
            }
        }
    }
    let r = grid.posted_price_revenue(budget);
    if budget.is_finite() && r > best.1 + 1e-15 {
        best = (budget, r);
    }
    best
}

/// Myerson's auction on values capped at public budgets: each agent's report
/// is replaced by `min(v, B)`, winners maximize total nonnegative ironed
/// virtual value of the capped distributions, and each winner pays the
/// smallest capped report at which the agent would still win.
#[derive(Debug, Clone)]
pub struct CappedMyerson {
    name: String,
    caps: Vec<f64>,
    curves: Vec<IronedCurve>,
    sets: Vec<SetMask>,
}

impl CappedMyerson {
    pub fn new(instance: &Instance) -> Result<Self> {
        let caps = instance.public_budgets("capped_myerson")?;
        Ok(Self::with_caps(instance, caps, "capped_myerson"))
    }

    fn with_caps(instance: &Instance, caps: Vec<f64>, name: &str) -> Self {
        let curves = instance
            .agents()
            .iter()
            .zip(&caps)
            .map(|(a, b)| IronedCurve::new(&a.value.cap_at(*b)))
            .collect();
        CappedMyerson {
            name: name.to_string(),
            caps,
            curves,
            sets: instance.feasible_sets().to_vec(),
        }
    }

    pub fn renamed(mut self, name: &str) -> Self {
        self.name = name.to_string();
        self
    }

    pub fn caps(&self) -> &[f64] {
        &self.caps
    }

    pub fn curves(&self) -> &[IronedCurve] {
        &self.curves
    }

    fn weight(&self, i: usize, idx: Option<usize>) -> Option<f64> {
        let w = self.curves[i].ironed()[idx?];
        (w >= 0.0).then_some(w)
    }

    fn winners(&self, idx: &[Option<usize>]) -> SetMask {
        let weights: Vec<Option<f64>> = idx
            .iter()
            .enumerate()
            .map(|(i, k)| self.weight(i, *k))
            .collect();
        max_weight_set(&self.sets, &weights)
    }

    /// Grid index per agent of the capped report; `None` below the grid.
    pub fn grid_indices(&self, reported: &TypeProfile) -> Result<Vec<Option<usize>>> {
        if reported.values.len() != self.caps.len() {
            return Err(Error::ProfileMismatch {
                expected: self.caps.len(),
                got: reported.len(),
            });
        }
        Ok(reported
            .values
            .iter()
            .zip(&self.caps)
            .zip(&self.curves)
            .map(|((v, b), c)| c.index_of(v.min(*b)))
            .collect())
    }

    fn allocate(&self, reported: &TypeProfile) -> Result<Outcome> {
        let idx = self.grid_indices(reported)?;
        let winners = self.winners(&idx);
        let mut payments = vec![0.0; idx.len()];
        for i in crate::model::indices(winners) {
            // Smallest grid index at which i still wins; winning is monotone in it.
            let (mut lo, mut hi) = (0, idx[i].expect("winners have a grid index"));
            let mut probe = idx.clone();
            while lo < hi {
                let mid = (lo + hi) / 2;
                probe[i] = Some(mid);
                if self.winners(&probe) & (1 << i) != 0 {
                    hi = mid;
                } else {
                    lo = mid + 1;
                }
            }
            payments[i] = self.curves[i].grid()[lo];
        }
        Ok(Outcome::from_mask(winners, payments))
    }
}

impl Mechanism for CappedMyerson {
    fn name(&self) -> &str {
        &self.name
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

/// Capped-value Myerson auction. Rejects private budgets.
pub fn capped_myerson(instance: &Instance) -> Result<CappedMyerson> {
    CappedMyerson::new(instance)
}

/// Myerson's optimal auction ignoring budgets.
pub fn myerson(instance: &Instance) -> CappedMyerson {
    CappedMyerson::with_caps(instance, vec![f64::INFINITY; instance.n()], "myerson")
}

/// Single item, `n` agents with value `v` for sure and public budget `v/n`.
pub fn epir_iir_gap_instance(n: usize, v: f64) -> Result<Instance> {
    if n == 0 || !(v > 0.0) || !v.is_finite() {
        return Err(Error::InvalidInstance(format!(
            "gap instance needs n >= 1 and v > 0 (n={n}, v={v})"
        )));
    }
    Instance::single_item_iid(
        n,
        Distribution::atom(v)?,
        BudgetSpec::Public {
            amount: v / n as f64,
        },
    )
}
