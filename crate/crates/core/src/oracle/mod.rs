//! Ground-truth optimizers: a dense simplex solver and the profile-space LP
//! for optimal Bayesian incentive-compatible mechanisms.

mod bic;
mod simplex;

pub use bic::{
    bic_program, optimal_bic, optimal_bic_for, DiscreteInstance, OracleObjective, OracleResult,
    ProfileRule, MAX_PROFILES,
};
pub use simplex::{
    solve_lp, Constraint, Direction, LinearProgram, LpSolution, LpStatus, Sense, PIVOT_TOL,
};
