//! Budget-constrained Bayesian mechanism design.
//!
//! Revenue and welfare mechanisms for agents with hard budgets, an LP oracle
//! for the optimal Bayesian incentive-compatible mechanism on small discrete
//! instances, and an audit harness that checks incentive compatibility,
//! individual rationality and budget feasibility.

// Negated float comparisons reject NaN; index loops mirror the math.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod distributions;
pub mod error;
pub mod harness;
pub mod model;
pub mod oracle;
pub mod revenue_private;
pub mod revenue_public;
pub mod welfare;

pub use distributions::{Distribution, IronedCurve};
pub use error::{Error, Result};
pub use model::{
    Agent, BudgetSpec, Feasibility, Instance, LotteryOption, Mechanism, Menu, MenuMechanism,
    Outcome, TypeProfile, Utility,
};
