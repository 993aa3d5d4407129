//! Agents, instances, outcomes and the constraint predicates every mechanism
//! is audited against.

mod feasibility;
mod menu;
mod simple;

pub use feasibility::{
    indices, lex_cmp, max_weight_set, max_weight_sets, to_mask, Feasibility, SetMask, MAX_AGENTS,
};
pub use menu::{best_option, run_menu, LotteryOption, Menu, MenuMechanism};
pub use simple::{EmptyMechanism, FirstPrice, PostedPrice};

use std::cmp::Ordering;
use std::fmt;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::distributions::Distribution;
use crate::error::{Error, Result};

/// Slack allowed when comparing payments against values and budgets.
pub const PAYMENT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum BudgetSpec {
    /// Known to the mechanism. May be infinite.
    Public {
        amount: f64,
    },
    Private {
        dist: Distribution,
    },
}

impl BudgetSpec {
    pub fn public_amount(&self) -> Option<f64> {
        match self {
            BudgetSpec::Public { amount } => Some(*amount),
            BudgetSpec::Private { .. } => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            BudgetSpec::Public { amount } if amount.is_nan() || *amount < 0.0 => Err(
                Error::InvalidInstance(format!("public budget must be nonnegative, got {amount}")),
            ),
            BudgetSpec::Public { .. } => Ok(()),
            BudgetSpec::Private { dist } => {
                dist.validate()?;
                if dist.support_bounds().0 < 0.0 {
                    return Err(Error::InvalidInstance(
                        "budget distribution has negative support".into(),
                    ));
                }
                Ok(())
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            BudgetSpec::Public { amount } => *amount,
            BudgetSpec::Private { dist } => dist.sample(rng),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Agent {
    pub value: Distribution,
    pub budget: BudgetSpec,
}

impl Agent {
    pub fn new(value: Distribution, budget: BudgetSpec) -> Self {
        Agent { value, budget }
    }

    pub fn public(value: Distribution, budget: f64) -> Self {
        Agent {
            value,
            budget: BudgetSpec::Public { amount: budget },
        }
    }
}

/// Agents plus a downward-closed feasibility constraint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawInstance", into = "RawInstance")]
pub struct Instance {
    agents: Vec<Agent>,
    feasibility: Feasibility,
    feasible_sets: Vec<SetMask>,
}

#[derive(Serialize, Deserialize)]
struct RawInstance {
    agents: Vec<Agent>,
    feasibility: Feasibility,
}

impl TryFrom<RawInstance> for Instance {
    type Error = Error;
    fn try_from(raw: RawInstance) -> Result<Self> {
        Instance::new(raw.agents, raw.feasibility)
    }
}

impl From<Instance> for RawInstance {
    fn from(inst: Instance) -> Self {
        RawInstance {
            agents: inst.agents,
            feasibility: inst.feasibility,
        }
    }
}

impl Instance {
    pub fn new(agents: Vec<Agent>, feasibility: Feasibility) -> Result<Self> {
        if agents.is_empty() {
            return Err(Error::InvalidInstance(
                "an instance needs at least one agent".into(),
            ));
        }
        if agents.len() > MAX_AGENTS {
            return Err(Error::InvalidInstance(format!(
                "{} agents exceeds the limit of {MAX_AGENTS}",
                agents.len()
            )));
        }
        for (i, a) in agents.iter().enumerate() {
            a.value
                .validate()
                .map_err(|e| Error::InvalidInstance(format!("agent {i}: {e}")))?;
            a.budget
                .validate()
                .map_err(|e| Error::InvalidInstance(format!("agent {i}: {e}")))?;
            if a.value.support_bounds().0 < 0.0 {
                return Err(Error::InvalidInstance(format!(
                    "agent {i}: negative values"
                )));
            }
        }
        feasibility.validate(agents.len())?;
        let feasible_sets = feasibility.feasible_sets(agents.len());
        Ok(Instance {
            agents,
            feasibility,
            feasible_sets,
        })
    }

    /// `n` identical agents selling a single item.
    pub fn single_item_iid(n: usize, value: Distribution, budget: BudgetSpec) -> Result<Self> {
        Self::new(vec![Agent::new(value, budget); n], Feasibility::SingleItem)
    }

    pub fn agents(&self) -> &[Agent] {
        &self.agents
    }

    pub fn agent(&self, i: usize) -> &Agent {
        &self.agents[i]
    }

    pub fn n(&self) -> usize {
        self.agents.len()
    }

    pub fn feasibility(&self) -> &Feasibility {
        &self.feasibility
    }

    /// Feasible sets in lexicographic order.
    pub fn feasible_sets(&self) -> &[SetMask] {
        &self.feasible_sets
    }

    pub fn has_public_budgets(&self) -> bool {
        self.agents
            .iter()
            .all(|a| a.budget.public_amount().is_some())
    }

    /// Public budgets, or an error naming the mechanism that needs them.
    pub fn public_budgets(&self, mechanism: &str) -> Result<Vec<f64>> {
        self.agents
            .iter()
            .map(|a| a.budget.public_amount())
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| Error::BudgetModeMismatch {
                mechanism: mechanism.to_string(),
                required: "public",
            })
    }

    /// The same instance with every continuous distribution replaced by its
    /// `n`-point equal-mass discretization.
    pub fn discretized(&self, n: usize) -> Instance {
        let agents = self
            .agents
            .iter()
            .map(|a| Agent {
                value: a.value.discretize(n),
                budget: match &a.budget {
                    BudgetSpec::Private { dist } => BudgetSpec::Private {
                        dist: dist.discretize(n),
                    },
                    public => public.clone(),
                },
            })
            .collect();
        Instance {
            agents,
            ..self.clone()
        }
    }

    /// Draws a truthful type profile.
    pub fn sample_profile<R: Rng + ?Sized>(&self, rng: &mut R) -> TypeProfile {
        let mut values = Vec::with_capacity(self.n());
        let mut budgets = Vec::with_capacity(self.n());
        for a in &self.agents {
            values.push(a.value.sample(rng));
            budgets.push(a.budget.sample(rng));
        }
        TypeProfile { values, budgets }
    }

    pub fn check_profile(&self, profile: &TypeProfile) -> Result<()> {
        for len in [profile.values.len(), profile.budgets.len()] {
            if len != self.n() {
                return Err(Error::ProfileMismatch {
                    expected: self.n(),
                    got: len,
                });
            }
        }
        if profile
            .values
            .iter()
            .chain(&profile.budgets)
            .any(|x| x.is_nan() || *x < 0.0)
        {
            return Err(Error::MalformedProfile("negative or NaN entry".into()));
        }
        Ok(())
    }
}

/// One point of a discretized type space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentType {
    pub value: f64,
    pub budget: f64,
    pub prob: f64,
}

/// Discrete type space of an agent: the value support (or a `value_points`
/// equal-mass discretization) times the budget support (public budgets give a
/// single point; continuous private budgets use `budget_points` atoms).
/// Ordered by value, then budget.
pub fn type_grid(agent: &Agent, value_points: usize, budget_points: usize) -> Vec<AgentType> {
    let values = agent.value.discretize(value_points).atoms();
    let budgets = match &agent.budget {
        BudgetSpec::Public { amount } => vec![(*amount, 1.0)],
        BudgetSpec::Private { dist } => dist.discretize(budget_points).atoms(),
    };
    let mut out = Vec::with_capacity(values.len() * budgets.len());
    for (v, pv) in &values {
        for (b, pb) in &budgets {
            out.push(AgentType {
                value: *v,
                budget: *b,
                prob: pv * pb,
            });
        }
    }
    out
}

/// Enumerates joint type profiles as `(type index per agent, probability)`,
/// last agent varying fastest.
pub fn profiles(grids: &[Vec<AgentType>]) -> impl Iterator<Item = (Vec<usize>, f64)> + '_ {
    let total: usize = grids.iter().map(|g| g.len()).product();
    (0..total).map(move |mut code| {
        let mut idx = vec![0; grids.len()];
        let mut prob = 1.0;
        for i in (0..grids.len()).rev() {
            idx[i] = code % grids[i].len();
            code /= grids[i].len();
            prob *= grids[i][idx[i]].prob;
        }
        (idx, prob)
    })
}

/// Number of joint profiles of a product grid.
pub fn profile_count(grids: &[Vec<AgentType>]) -> usize {
    grids
        .iter()
        .map(|g| g.len())
        .try_fold(1usize, |a, b| a.checked_mul(b))
        .unwrap_or(usize::MAX)
}

/// Builds the profile with each agent at the given grid type.
pub fn profile_of(grids: &[Vec<AgentType>], idx: &[usize]) -> TypeProfile {
    TypeProfile {
        values: idx
            .iter()
            .enumerate()
            .map(|(i, k)| grids[i][*k].value)
            .collect(),
        budgets: idx
            .iter()
            .enumerate()
            .map(|(i, k)| grids[i][*k].budget)
            .collect(),
    }
}

/// Realized (or reported) values and budgets, one per agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeProfile {
    pub values: Vec<f64>,
    pub budgets: Vec<f64>,
}

impl TypeProfile {
    pub fn new(values: Vec<f64>, budgets: Vec<f64>) -> Self {
        TypeProfile { values, budgets }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Copy with agent `i`'s entry replaced.
    pub fn with_type(&self, i: usize, value: f64, budget: f64) -> TypeProfile {
        let mut p = self.clone();
        p.values[i] = value;
        p.budgets[i] = budget;
        p
    }
}

/// Winners (ascending indices) and per-agent payments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub winners: Vec<usize>,
    pub payments: Vec<f64>,
}

impl Outcome {
    pub fn empty(n: usize) -> Self {
        Outcome {
            winners: Vec::new(),
            payments: vec![0.0; n],
        }
    }

    pub fn from_mask(mask: SetMask, payments: Vec<f64>) -> Self {
        Outcome {
            winners: indices(mask).collect(),
            payments,
        }
    }

    pub fn mask(&self) -> SetMask {
        to_mask(&self.winners)
    }

    pub fn wins(&self, i: usize) -> bool {
        self.winners.contains(&i)
    }

    pub fn revenue(&self) -> f64 {
        self.payments.iter().sum()
    }

    pub fn welfare(&self, values: &[f64]) -> f64 {
        self.winners.iter().map(|i| values[*i]).sum()
    }
}

/// Extended-real utility; the budget cliff is a sentinel below every real.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Utility {
    NegInfinity,
    Finite(f64),
}

impl Utility {
    pub fn finite(self) -> Option<f64> {
        match self {
            Utility::Finite(u) => Some(u),
            Utility::NegInfinity => None,
        }
    }

    /// `self - other`, with the sentinel absorbing: any gain over the cliff is
    /// `+inf` and a fall onto it `-inf`. Both on the cliff gives zero.
    pub fn gain_over(self, other: Utility) -> f64 {
        match (self, other) {
            (Utility::Finite(a), Utility::Finite(b)) => a - b,
            (Utility::Finite(_), Utility::NegInfinity) => f64::INFINITY,
            (Utility::NegInfinity, Utility::Finite(_)) => f64::NEG_INFINITY,
            (Utility::NegInfinity, Utility::NegInfinity) => 0.0,
        }
    }

    /// Probability-weighted mean; the cliff on any positive-probability branch
    /// makes the expectation the cliff.
    pub fn expectation(branches: impl IntoIterator<Item = (f64, Utility)>) -> Utility {
        let mut total = 0.0;
        for (p, u) in branches {
            if p <= 0.0 {
                continue;
            }
            match u {
                Utility::Finite(x) => total += p * x,
                Utility::NegInfinity => return Utility::NegInfinity,
            }
        }
        Utility::Finite(total)
    }
}

impl PartialOrd for Utility {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match (self, other) {
            (Utility::NegInfinity, Utility::NegInfinity) => Some(Ordering::Equal),
            (Utility::NegInfinity, Utility::Finite(_)) => Some(Ordering::Less),
            (Utility::Finite(_), Utility::NegInfinity) => Some(Ordering::Greater),
            (Utility::Finite(a), Utility::Finite(b)) => a.partial_cmp(b),
        }
    }
}

impl fmt::Display for Utility {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Utility::NegInfinity => write!(f, "-inf"),
            Utility::Finite(u) => write!(f, "{u}"),
        }
    }
}

/// Every winner pays at most its value and every non-winner pays nothing.
pub fn is_epir(outcome: &Outcome, true_profile: &TypeProfile) -> bool {
    outcome.payments.iter().enumerate().all(|(i, p)| {
        if outcome.wins(i) {
            *p <= true_profile.values[i] + PAYMENT_TOL
        } else {
            p.abs() <= PAYMENT_TOL
        }
    })
}

/// Every payment is within the agent's realized budget.
pub fn is_budget_feasible(outcome: &Outcome, true_profile: &TypeProfile) -> bool {
    outcome
        .payments
        .iter()
        .zip(&true_profile.budgets)
        .all(|(p, b)| *p <= b + PAYMENT_TOL)
}

/// Quasilinear utility with the budget cliff.
pub fn utility(i: usize, outcome: &Outcome, true_profile: &TypeProfile) -> Utility {
    let pay = outcome.payments[i];
    if pay > true_profile.budgets[i] + PAYMENT_TOL {
        return Utility::NegInfinity;
    }
    let value = if outcome.wins(i) {
        true_profile.values[i]
    } else {
        0.0
    };
    Utility::Finite(value - pay)
}

/// Which budget information a mechanism relies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BudgetMode {
    Public,
    Private,
    Any,
}

/// The individual-rationality notion a mechanism is designed to satisfy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IrMode {
    ExPost,
    Interim,
}

/// A direct-revelation mechanism. `run` must be a pure function of the
/// reported profile and the generator state.
pub trait Mechanism: Send + Sync {
    fn name(&self) -> &str;

    fn budget_mode(&self) -> BudgetMode {
        BudgetMode::Any
    }

    fn ir_mode(&self) -> IrMode {
        IrMode::ExPost
    }

    fn run(&self, reported: &TypeProfile, rng: &mut dyn RngCore) -> Result<Outcome>;

    /// Exact distribution over outcomes as `(probability, outcome)` pairs, when
    /// the mechanism can enumerate it. Audits fall back to sampling otherwise.
    fn outcome_lottery(&self, _reported: &TypeProfile) -> Option<Result<Vec<(f64, Outcome)>>> {
        None
    }
}
