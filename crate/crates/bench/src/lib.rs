//! Fixture instances shared by the benchmarks.

use budgetmech::{BudgetSpec, Distribution, Instance};

pub fn uniform_pair(budget: f64) -> Instance {
    Instance::single_item_iid(
        2,
        Distribution::uniform(0.0, 1.0).unwrap(),
        BudgetSpec::Public { amount: budget },
    )
    .unwrap()
}

pub fn exponential_trio(budget: f64) -> Instance {
    Instance::single_item_iid(
        3,
        Distribution::exponential(1.0).unwrap(),
        BudgetSpec::Public { amount: budget },
    )
    .unwrap()
}

/// One buyer with an exponential value and a continuous private budget.
pub fn private_single() -> Instance {
    Instance::single_item_iid(
        1,
        Distribution::exponential(2.0).unwrap(),
        BudgetSpec::Private {
            dist: Distribution::uniform(0.1, 0.5).unwrap(),
        },
    )
    .unwrap()
}
