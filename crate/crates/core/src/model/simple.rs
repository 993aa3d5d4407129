//! Reference mechanisms used as baselines and audit controls.

use rand::RngCore;

use super::{Feasibility, Mechanism, Outcome, TypeProfile};
use crate::error::{Error, Result};

/// Posts a fixed price to each agent. Agents whose report and budget both
/// cover their price buy, admitted in index order while feasible.
#[derive(Debug, Clone)]
pub struct PostedPrice {
    prices: Vec<f64>,
    feasibility: Feasibility,
}

impl PostedPrice {
    pub fn new(prices: Vec<f64>, feasibility: Feasibility) -> Self {
        PostedPrice {
            prices,
            feasibility,
        }
    }

    pub fn single(price: f64) -> Self {
        PostedPrice {
            prices: vec![price],
            feasibility: Feasibility::SingleItem,
        }
    }

    fn allocate(&self, reported: &TypeProfile) -> Result<Outcome> {
        if reported.len() != self.prices.len() {
            return Err(Error::ProfileMismatch {
                expected: self.prices.len(),
                got: reported.len(),
            });
        }
        let mut winners = 0u64;
        let mut payments = vec![0.0; self.prices.len()];
        for (i, p) in self.prices.iter().enumerate() {
            let wants = reported.values[i] >= *p && reported.budgets[i] >= *p;
            if wants && self.feasibility.is_feasible(winners | (1 << i)) {
                winners |= 1 << i;
                payments[i] = *p;
            }
        }
        Ok(Outcome::from_mask(winners, payments))
    }
}

impl Mechanism for PostedPrice {
    fn name(&self) -> &str {
        "posted_price"
    }

    fn run(&self, reported: &TypeProfile, _rng: &mut dyn RngCore) -> Result<Outcome> {
        self.allocate(reported)
    }

    fn outcome_lottery(&self, reported: &TypeProfile) -> Option<Result<Vec<(f64, Outcome)>>> {
        Some(self.allocate(reported).map(|o| vec![(1.0, o)]))
    }
}

/// Single-item first-price auction: highest report wins (lowest index on
/// ties) and pays its report. Not truthful; kept as a negative control.
#[derive(Debug, Clone, Default)]
pub struct FirstPrice;

impl FirstPrice {
    fn allocate(reported: &TypeProfile) -> Outcome {
        let mut best: Option<usize> = None;
        for (i, v) in reported.values.iter().enumerate() {
            if best.is_none_or(|b| *v > reported.values[b]) {
                best = Some(i);
            }
        }
        let mut payments = vec![0.0; reported.len()];
        let winners = match best {
            Some(w) => {
                payments[w] = reported.values[w];
                vec![w]
            }
            None => Vec::new(),
        };
        Outcome { winners, payments }
    }
}

impl Mechanism for FirstPrice {
    fn name(&self) -> &str {
        "first_price"
    }

    fn run(&self, reported: &TypeProfile, _rng: &mut dyn RngCore) -> Result<Outcome> {
        Ok(Self::allocate(reported))
    }

    fn outcome_lottery(&self, reported: &TypeProfile) -> Option<Result<Vec<(f64, Outcome)>>> {
        Some(Ok(vec![(1.0, Self::allocate(reported))]))
    }
}

/// Allocates nothing and charges nothing.
#[derive(Debug, Clone, Default)]
pub struct EmptyMechanism;

impl Mechanism for EmptyMechanism {
    fn name(&self) -> &str {
        "empty"
    }

    fn run(&self, reported: &TypeProfile, _rng: &mut dyn RngCore) -> Result<Outcome> {
        Ok(Outcome::empty(reported.len()))
    }

    fn outcome_lottery(&self, reported: &TypeProfile) -> Option<Result<Vec<(f64, Outcome)>>> {
        Some(Ok(vec![(1.0, Outcome::empty(reported.len()))]))
    }
}
