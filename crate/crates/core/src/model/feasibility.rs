use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Winner sets are bitmasks over agent indices.
pub type SetMask = u64;

/// Largest number of agents for which feasible sets are enumerated.
pub const MAX_AGENTS: usize = 20;

/// Downward-closed family of feasible winner sets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Feasibility {
    SingleItem,
    KUnits { k: usize },
    Explicit { sets: Vec<Vec<usize>> },
}

impl Feasibility {
    pub fn validate(&self, n: usize) -> Result<()> {
        match self {
            Feasibility::SingleItem => Ok(()),
            Feasibility::KUnits { k } if *k == 0 => {
                Err(Error::InvalidInstance("k-units needs k >= 1".into()))
            }
            Feasibility::KUnits { .. } => Ok(()),
            Feasibility::Explicit { sets } => {
                let masks = explicit_masks(sets, n)?;
                if !masks.contains(&0) {
                    return Err(Error::InvalidInstance(
                        "explicit feasibility must contain the empty set".into(),
                    ));
                }
                for &m in &masks {
                    for i in indices(m) {
                        if !masks.contains(&(m & !(1 << i))) {
                            return Err(Error::InvalidInstance(format!(
                                "explicit feasibility is not downward closed: {:?} is feasible but {:?} is not",
                                indices(m).collect::<Vec<_>>(),
                                indices(m & !(1 << i)).collect::<Vec<_>>()
                            )));
                        }
                    }
                }
                Ok(())
            }
        }
    }

    pub fn is_feasible(&self, set: SetMask) -> bool {
        match self {
            Feasibility::SingleItem => set.count_ones() <= 1,
            Feasibility::KUnits { k } => set.count_ones() as usize <= *k,
            Feasibility::Explicit { sets } => sets.iter().any(|s| to_mask(s) == set),
        }
    }

    /// Every feasible set over `n` agents, in lexicographic order of the sorted
    /// index lists (the empty set first).
    pub fn feasible_sets(&self, n: usize) -> Vec<SetMask> {
        let mut out: Vec<SetMask> = match self {
            Feasibility::SingleItem => std::iter::once(0)
                .chain((0..n).map(|i| 1u64 << i))
                .collect(),
            Feasibility::KUnits { k } => (0..(1u64 << n))
                .filter(|m| m.count_ones() as usize <= *k)
                .collect(),
            Feasibility::Explicit { sets } => {
                let mut v: Vec<SetMask> = sets.iter().map(|s| to_mask(s)).collect();
                v.sort_unstable();
                v.dedup();
                v
            }
        };
        out.sort_by(|a, b| lex_cmp(*a, *b));
        out
    }
}

fn explicit_masks(sets: &[Vec<usize>], n: usize) -> Result<Vec<SetMask>> {
    sets.iter()
        .map(|s| {
            if let Some(bad) = s.iter().find(|i| **i >= n) {
                Err(Error::InvalidInstance(format!(
                    "feasible set references agent {bad} but there are only {n} agents"
                )))
            } else {
                Ok(to_mask(s))
            }
        })
        .collect()
}

pub fn to_mask(set: &[usize]) -> SetMask {
    set.iter().fold(0, |m, i| m | (1 << i))
}

/// Ascending member indices of a mask.
pub fn indices(mut set: SetMask) -> impl Iterator<Item = usize> {
    std::iter::from_fn(move || {
        if set == 0 {
            None
        } else {
            let i = set.trailing_zeros() as usize;
            set &= set - 1;
            Some(i)
        }
    })
}

/// Lexicographic order on sorted index lists; a proper prefix sorts first.
pub fn lex_cmp(mut a: SetMask, mut b: SetMask) -> Ordering {
    loop {
        if a == b {
            return Ordering::Equal;
        }
        if a == 0 {
            return Ordering::Less;
        }
        if b == 0 {
            return Ordering::Greater;
        }
        let (la, lb) = (a.trailing_zeros(), b.trailing_zeros());
        if la != lb {
            return la.cmp(&lb);
        }
        a &= a - 1;
        b &= b - 1;
    }
}

/// Feasible set maximizing the total weight of its members; `None` weights
/// mark agents that may not win. Ties (within 1e-12) go to the
/// lexicographically smallest set.
pub fn max_weight_set(sets: &[SetMask], weights: &[Option<f64>]) -> SetMask {
    let mut best: Option<(SetMask, f64)> = None;
    'sets: for &s in sets {
        let mut total = 0.0;
        for i in indices(s) {
            match weights[i] {
                Some(w) => total += w,
                None => continue 'sets,
            }
        }
        match best {
            Some((_, b)) if total <= b + 1e-12 * b.abs().max(1.0) => {}
            _ => best = Some((s, total)),
        }
    }
    best.map(|b| b.0).unwrap_or(0)
}

/// All feasible sets attaining the maximum weight (within 1e-12), in lexicographic order.
pub fn max_weight_sets(sets: &[SetMask], weights: &[Option<f64>]) -> Vec<SetMask> {
    let scored: Vec<(SetMask, f64)> = sets
        .iter()
        .filter_map(|&s| {
            indices(s)
                .map(|i| weights[i])
                .sum::<Option<f64>>()
                .map(|t| (s, t))
        })
        .collect();
    let top = scored.iter().map(|x| x.1).fold(f64::NEG_INFINITY, f64::max);
    let tol = 1e-12 * top.abs().max(1.0);
    scored
        .into_iter()
        .filter(|x| x.1 >= top - tol)
        .map(|x| x.0)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lexicographic_order() {
        let mut sets = vec![0b110, 0b001, 0b000, 0b011, 0b010, 0b101];
        sets.sort_by(|a, b| lex_cmp(*a, *b));
        assert_eq!(sets, vec![0b000, 0b001, 0b011, 0b101, 0b010, 0b110]);
    }

    #[test]
    fn explicit_family_must_be_downward_closed() {
        let ok = Feasibility::Explicit {
            sets: vec![vec![], vec![0], vec![1], vec![0, 1]],
        };
        assert!(ok.validate(2).is_ok());
        let missing_empty = Feasibility::Explicit {
            sets: vec![vec![0]],
        };
        assert!(missing_empty.validate(1).is_err());
        let not_closed = Feasibility::Explicit {
            sets: vec![vec![], vec![0], vec![0, 1]],
        };
        assert!(not_closed.validate(2).is_err());
        let out_of_range = Feasibility::Explicit {
            sets: vec![vec![], vec![3]],
        };
        assert!(out_of_range.validate(2).is_err());
    }

    #[test]
    fn k_units_sets() {
        let f = Feasibility::KUnits { k: 2 };
        let sets = f.feasible_sets(3);
        assert_eq!(sets.len(), 7);
        assert!(!sets.contains(&0b111));
        assert!(f.is_feasible(0b101));
        assert!(!f.is_feasible(0b111));
    }

    #[test]
    fn max_weight_prefers_lexicographically_smallest_on_ties() {
        let sets = Feasibility::SingleItem.feasible_sets(3);
        assert_eq!(
            max_weight_set(&sets, &[Some(1.0), Some(1.0), Some(0.5)]),
            0b001
        );
        assert_eq!(max_weight_set(&sets, &[Some(0.0), Some(0.0), Some(0.0)]), 0);
        assert_eq!(
            max_weight_set(&sets, &[Some(-1.0), Some(-2.0), Some(-0.5)]),
            0
        );
        assert_eq!(max_weight_set(&sets, &[None, Some(0.2), Some(0.1)]), 0b010);
        assert_eq!(
            max_weight_sets(&sets, &[Some(1.0), Some(1.0), Some(0.5)]),
            vec![0b001, 0b010]
        );
    }
}
