//! Lottery menus for agents with private budgets.
//!
//! With monopoly price `p*` and a fraction `α ∈ (0, 1]`, the menu posts the
//! item at `π = α·p*` and, for every budget level `s < π`, sells a lottery
//! that charges `s` on winning and wins with probability `s/π`. A buyer either
//! spends a budget level or pays `π`.

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::distributions::Distribution;
use crate::error::{Error, Result};
use crate::model::{
    run_menu, AgentType, BudgetMode, BudgetSpec, Feasibility, Instance, LotteryOption, Mechanism,
    Menu, MenuMechanism, Outcome, TypeProfile,
};

/// Prices within this distance count as equal when classifying options.
const LEVEL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrivateMenuParams {
    /// Fixed monopoly fraction; chosen by exact revenue on the grid if unset.
    pub alpha: Option<f64>,
    /// Value quantiles used for the audit grid (discrete supports are used as is).
    pub value_points: usize,
    /// Budget quantiles used when the budget distribution is continuous.
    pub budget_points: usize,
}

impl Default for PrivateMenuParams {
    fn default() -> Self {
        PrivateMenuParams {
            alpha: None,
            value_points: 32,
            budget_points: 16,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarkedOption {
    pub option: LotteryOption,
    /// Price equals a budget level.
    pub budget_exhausting: bool,
    /// Price equals `α·p*`.
    pub monopoly_fraction: bool,
}

/// One agent's lottery menu together with the grid it was tuned on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrivateBudgetMenu {
    options: Vec<MarkedOption>,
    menu: Menu,
    monopoly_price: f64,
    alpha: f64,
    budget_levels: Vec<f64>,
    value_grid: Vec<(f64, f64)>,
    budget_grid: Vec<(f64, f64)>,
    mhr: bool,
}

/// Where the best options on the audit grid fall.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureReport {
    pub points: usize,
    /// Types buying nothing.
    pub null: usize,
    /// Types buying an option priced at a budget level.
    pub budget_exhausting: usize,
    /// Types spending exactly their own budget.
    pub own_budget: usize,
    pub monopoly_fraction: usize,
    /// Buying types whose option carries neither mark.
    pub unmarked: usize,
    pub mhr: bool,
}

impl StructureReport {
    pub fn holds(&self) -> bool {
        self.unmarked == 0
    }
}

impl PrivateBudgetMenu {
    pub fn options(&self) -> &[MarkedOption] {
        &self.options
    }

    pub fn menu(&self) -> &Menu {
        &self.menu
    }

    pub fn monopoly_price(&self) -> f64 {
        self.monopoly_price
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// The monopoly-fraction price `α·p*`.
    pub fn price(&self) -> f64 {
        self.alpha * self.monopoly_price
    }

    pub fn budget_levels(&self) -> &[f64] {
        &self.budget_levels
    }

    pub fn is_mhr(&self) -> bool {
        self.mhr
    }

    /// Product of the value and budget grids, ordered by value then budget.
    pub fn audit_grid(&self) -> Vec<AgentType> {
        let mut out = Vec::with_capacity(self.value_grid.len() * self.budget_grid.len());
        for (v, pv) in &self.value_grid {
            for (b, pb) in &self.budget_grid {
                out.push(AgentType {
                    value: *v,
                    budget: *b,
                    prob: pv * pb,
                });
            }
        }
        out
    }

    pub fn best(&self, v: f64, b: f64) -> LotteryOption {
        self.menu.best(v, b)
    }

    /// Expected revenue when types are drawn from the audit grid.
    pub fn revenue(&self) -> f64 {
        self.audit_grid()
            .iter()
            .map(|t| t.prob * self.best(t.value, t.budget).expected_payment())
            .sum()
    }

    pub fn mark(&self, o: &LotteryOption) -> (bool, bool) {
        let exhausting = self
            .budget_levels
            .iter()
            .any(|s| (s - o.t).abs() <= LEVEL_TOL);
        let fraction = (o.t - self.price()).abs() <= LEVEL_TOL;
        (exhausting, fraction)
    }

    pub fn structure(&self) -> StructureReport {
        let mut r = StructureReport {
            points: 0,
            null: 0,
            budget_exhausting: 0,
            own_budget: 0,
            monopoly_fraction: 0,
            unmarked: 0,
            mhr: self.mhr,
        };
        for t in self.audit_grid() {
            r.points += 1;
            let o = self.best(t.value, t.budget);
            if o.is_null() {
                r.null += 1;
                continue;
            }
            let (exhausting, fraction) = self.mark(&o);
            if exhausting {
                r.budget_exhausting += 1;
            }
            if (o.t - t.budget).abs() <= LEVEL_TOL {
                r.own_budget += 1;
            }
            if fraction {
                r.monopoly_fraction += 1;
            }
            if !exhausting && !fraction {
                r.unmarked += 1;
            }
        }
        r
    }
}

fn grid_of(d: &Distribution, points: usize) -> Vec<(f64, f64)> {
    d.discretize(points).atoms()
}

fn menu_for(alpha: f64, monopoly: f64, levels: &[f64]) -> Result<(Vec<MarkedOption>, Menu)> {
    let price = alpha * monopoly;
    let mut options = Vec::new();
    if price > 0.0 {
        for &s in levels.iter().filter(|s| **s > 0.0 && **s < price) {
            options.push(MarkedOption {
                option: LotteryOption::new(s / price, s)?,
                budget_exhausting: true,
                monopoly_fraction: false,
            });
        }
    }
    options.push(MarkedOption {
        option: LotteryOption::new(1.0, price)?,
        budget_exhausting: levels.iter().any(|s| (s - price).abs() <= LEVEL_TOL),
        monopoly_fraction: true,
    });
    let menu = Menu::new(options.iter().map(|o| o.option))?;
    Ok((options, menu))
}

/// Builds the lottery menu for one agent. Non-MHR value distributions are
/// accepted with a warning.
pub fn build_private_menu(
    value_dist: &Distribution,
    budget_dist: &Distribution,
    params: &PrivateMenuParams,
) -> Result<PrivateBudgetMenu> {
    value_dist.validate()?;
    budget_dist.validate()?;
    if budget_dist.support_bounds().0 < 0.0 {
        return Err(Error::InvalidDistribution(
            "budget support contains negative values".into(),
        ));
    }
    let mhr = value_dist.is_mhr();
    if !mhr {
        log::warn!("value distribution is not MHR; building the private-budget menu anyway");
    }
    let monopoly = value_dist.monopoly_price();
    let value_grid = grid_of(value_dist, params.value_points);
    let budget_grid = grid_of(budget_dist, params.budget_points);
    let levels: Vec<f64> = budget_grid.iter().map(|b| b.0).collect();
    let max_budget = levels.iter().copied().fold(0.0, f64::max);

    let candidates: Vec<f64> = match params.alpha {
        Some(a) if a > 0.0 && a <= 1.0 => vec![a],
        Some(a) => {
            return Err(Error::InvalidInstance(format!(
                "alpha {a} must lie in (0, 1]"
            )))
        }
        None => {
            let mut c: Vec<f64> = (1..=16).map(|k| k as f64 / 16.0).collect();
            if monopoly > 0.0 {
                c.extend(
                    levels
                        .iter()
                        .map(|b| b / monopoly)
                        .filter(|a| *a > 0.0 && *a <= 1.0),
                );
            }
            c.retain(|a| a * monopoly <= max_budget + LEVEL_TOL);
            if c.is_empty() {
                c.push(if monopoly > 0.0 {
                    (max_budget / monopoly).min(1.0)
                } else {
                    1.0
                });
            }
            c.sort_by(f64::total_cmp);
            c.dedup_by(|a, b| (*a - *b).abs() <= LEVEL_TOL);
            c
        }
    };

    let mut best: Option<(f64, PrivateBudgetMenu)> = None;
    for alpha in candidates {
        let (options, menu) = menu_for(alpha, monopoly, &levels)?;
        let candidate = PrivateBudgetMenu {
            options,
            menu,
            monopoly_price: monopoly,
            alpha,
            budget_levels: levels.clone(),
            value_grid: value_grid.clone(),
            budget_grid: budget_grid.clone(),
            mhr,
        };
        let r = candidate.revenue();
        if best.as_ref().is_none_or(|(b, _)| r > b + 1e-12) {
            best = Some((r, candidate));
        }
    }
    Ok(best.expect("at least one candidate fraction").1)
}

/// Every agent faces its own lottery menu; budgets are reported privately.
#[derive(Debug, Clone)]
pub struct PrivateMenuMechanism {
    menus: Vec<PrivateBudgetMenu>,
    inner: MenuMechanism,
}

impl PrivateMenuMechanism {
    pub fn new(menus: Vec<PrivateBudgetMenu>, feasibility: Feasibility) -> Self {
        let inner = MenuMechanism::named(
            "private_menu",
            menus.iter().map(|m| m.menu.clone()).collect(),
            feasibility,
            BudgetMode::Private,
        );
        PrivateMenuMechanism { menus, inner }
    }

    /// Builds one menu per agent; a public budget is treated as a point mass.
    pub fn for_instance(instance: &Instance, params: &PrivateMenuParams) -> Result<Self> {
        let menus = instance
            .agents()
            .iter()
            .map(|a| {
                let budget = match &a.budget {
                    BudgetSpec::Private { dist } => dist.clone(),
                    BudgetSpec::Public { amount } => Distribution::atom(*amount)?,
                };
                build_private_menu(&a.value, &budget, params)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::new(menus, instance.feasibility().clone()))
    }

    pub fn menus(&self) -> &[PrivateBudgetMenu] {
        &self.menus
    }

    pub fn as_menu_mechanism(&self) -> &MenuMechanism {
        &self.inner
    }
}

/// Resolves the agents' chosen lotteries under their realized budgets.
pub fn run_private(
    mech: &PrivateMenuMechanism,
    profile: &TypeProfile,
    rng: &mut dyn RngCore,
) -> Result<Outcome> {
    run_menu(&mech.inner, profile, rng)
}

impl Mechanism for PrivateMenuMechanism {
    fn name(&self) -> &str {
        "private_menu"
    }

    fn budget_mode(&self) -> BudgetMode {
        BudgetMode::Private
    }

    fn run(&self, reported: &TypeProfile, rng: &mut dyn RngCore) -> Result<Outcome> {
        run_private(self, reported, rng)
    }

    fn outcome_lottery(&self, reported: &TypeProfile) -> Option<Result<Vec<(f64, Outcome)>>> {
        self.inner.outcome_lottery(reported)
    }
}
