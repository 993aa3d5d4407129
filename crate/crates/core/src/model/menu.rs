use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::{indices, BudgetMode, Feasibility, Mechanism, Outcome, SetMask, TypeProfile};
use crate::error::{Error, Result};

/// Utilities closer than this count as tied in [`best_option`].
const TIE_TOL: f64 = 1e-12;

/// Win with probability `q`; pay `t` only when allocated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LotteryOption {
    pub q: f64,
    pub t: f64,
}

impl LotteryOption {
    pub const NULL: LotteryOption = LotteryOption { q: 0.0, t: 0.0 };

    pub fn new(q: f64, t: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&q) || !(t >= 0.0 && t.is_finite()) {
            return Err(Error::Internal(format!(
                "invalid lottery option (q={q}, t={t})"
            )));
        }
        Ok(LotteryOption { q, t })
    }

    pub fn expected_payment(&self) -> f64 {
        self.q * self.t
    }

    pub fn expected_utility(&self, v: f64) -> f64 {
        self.q * (v - self.t)
    }

    pub fn is_null(&self) -> bool {
        self.q == 0.0
    }
}

/// Utility-maximizing affordable option (`t <= b`); ties go to the lower
/// price, then the lower probability. Returns the null option when nothing
/// affordable beats it.
pub fn best_option(menu: &[LotteryOption], v: f64, b: f64) -> LotteryOption {
    let mut affordable: Vec<LotteryOption> = menu.iter().copied().filter(|o| o.t <= b).collect();
    affordable.sort_by(|x, y| x.t.total_cmp(&y.t).then(x.q.total_cmp(&y.q)));
    let mut best = LotteryOption::NULL;
    let mut best_u = 0.0;
    let mut first = true;
    for o in affordable {
        let u = o.expected_utility(v);
        if first || u > best_u + TIE_TOL {
            best = o;
            best_u = u;
            first = false;
        }
    }
    best
}

/// A single agent's menu: always holds the null option, no duplicates, sorted by `(t, q)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Menu {
    options: Vec<LotteryOption>,
}

impl Menu {
    pub fn new(options: impl IntoIterator<Item = LotteryOption>) -> Result<Self> {
        let mut all: Vec<LotteryOption> = Vec::new();
        for o in options {
            all.push(LotteryOption::new(o.q, o.t)?);
        }
        all.push(LotteryOption::NULL);
        all.sort_by(|x, y| x.t.total_cmp(&y.t).then(x.q.total_cmp(&y.q)));
        all.dedup();
        Ok(Menu { options: all })
    }

    pub fn options(&self) -> &[LotteryOption] {
        &self.options
    }

    pub fn best(&self, v: f64, b: f64) -> LotteryOption {
        best_option(&self.options, v, b)
    }
}

/// Each agent picks the best option from its own menu; lotteries resolve
/// independently. When the tentative winners are infeasible, they are
/// admitted in uniformly random order while the set stays feasible; the rest
/// pay nothing.
#[derive(Debug, Clone)]
pub struct MenuMechanism {
    name: String,
    menus: Vec<Menu>,
    feasibility: Feasibility,
    budget_mode: BudgetMode,
}

impl MenuMechanism {
    pub fn new(menus: Vec<Menu>, feasibility: Feasibility) -> Self {
        Self::named("menu", menus, feasibility, BudgetMode::Any)
    }

    pub fn named(
        name: impl Into<String>,
        menus: Vec<Menu>,
        feasibility: Feasibility,
        budget_mode: BudgetMode,
    ) -> Self {
        MenuMechanism {
            name: name.into(),
            menus,
            feasibility,
            budget_mode,
        }
    }

    pub fn menus(&self) -> &[Menu] {
        &self.menus
    }

    pub fn feasibility(&self) -> &Feasibility {
        &self.feasibility
    }

    /// Option each agent selects under the reported profile.
    pub fn choices(&self, profile: &TypeProfile) -> Result<Vec<LotteryOption>> {
        if profile.len() != self.menus.len() || profile.budgets.len() != self.menus.len() {
            return Err(Error::ProfileMismatch {
                expected: self.menus.len(),
                got: profile.len(),
            });
        }
        Ok(self
            .menus
            .iter()
            .enumerate()
            .map(|(i, m)| m.best(profile.values[i], profile.budgets[i]))
            .collect())
    }

    fn ration(&self, mut order: Vec<usize>) -> SetMask {
        let mut kept: SetMask = 0;
        for i in order.drain(..) {
            if self.feasibility.is_feasible(kept | (1 << i)) {
                kept |= 1 << i;
            }
        }
        kept
    }

    fn outcome_for(&self, winners: SetMask, choices: &[LotteryOption]) -> Outcome {
        let payments = (0..choices.len())
            .map(|i| {
                if winners & (1 << i) != 0 {
                    choices[i].t
                } else {
                    0.0
                }
            })
            .collect();
        Outcome::from_mask(winners, payments)
    }
}

/// Resolves every agent's chosen lottery with `rng`.
pub fn run_menu(
    mech: &MenuMechanism,
    profile: &TypeProfile,
    rng: &mut dyn RngCore,
) -> Result<Outcome> {
    let choices = mech.choices(profile)?;
    let mut tentative: SetMask = 0;
    for (i, c) in choices.iter().enumerate() {
        let u: f64 = rng.gen();
        if u < c.q {
            tentative |= 1 << i;
        }
    }
    let winners = if mech.feasibility.is_feasible(tentative) {
        tentative
    } else {
        let mut order: Vec<usize> = indices(tentative).collect();
        order.shuffle(rng);
        mech.ration(order)
    };
    Ok(mech.outcome_for(winners, &choices))
}

/// Largest tentative set whose rationing orders are enumerated exactly.
const MAX_RATIONED: usize = 7;
/// Largest number of randomizing agents enumerated exactly.
const MAX_RANDOM_AGENTS: usize = 16;

impl Mechanism for MenuMechanism {
    fn name(&self) -> &str {
        &self.name
    }

    fn budget_mode(&self) -> BudgetMode {
        self.budget_mode
    }

    fn run(&self, reported: &TypeProfile, rng: &mut dyn RngCore) -> Result<Outcome> {
        run_menu(self, reported, rng)
    }

    fn outcome_lottery(&self, reported: &TypeProfile) -> Option<Result<Vec<(f64, Outcome)>>> {
        let choices = match self.choices(reported) {
            Ok(c) => c,
            Err(e) => return Some(Err(e)),
        };
        let sure: SetMask = (0..choices.len())
            .filter(|i| choices[*i].q >= 1.0)
            .fold(0, |m, i| m | (1 << i));
        let random: Vec<usize> = (0..choices.len())
            .filter(|i| choices[*i].q > 0.0 && choices[*i].q < 1.0)
            .collect();
        if random.len() > MAX_RANDOM_AGENTS {
            return None;
        }
        let mut dist: BTreeMap<SetMask, f64> = BTreeMap::new();
        for pick in 0u64..(1 << random.len()) {
            let mut p = 1.0;
            let mut tentative = sure;
            for (j, &i) in random.iter().enumerate() {
                if pick & (1 << j) != 0 {
                    p *= choices[i].q;
                    tentative |= 1 << i;
                } else {
                    p *= 1.0 - choices[i].q;
                }
            }
            if self.feasibility.is_feasible(tentative) {
                *dist.entry(tentative).or_default() += p;
                continue;
            }
            let members: Vec<usize> = indices(tentative).collect();
            if members.len() > MAX_RATIONED {
                return None;
            }
            let orders = permutations(&members);
            let share = p / orders.len() as f64;
            for order in orders {
                *dist.entry(self.ration(order)).or_default() += share;
            }
        }
        let mut out: Vec<(f64, Outcome)> = dist
            .into_iter()
            .map(|(m, p)| (p, self.outcome_for(m, &choices)))
            .collect();
        out.sort_by(|a, b| super::lex_cmp(a.1.mask(), b.1.mask()));
        Some(Ok(out))
    }
}

fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for (k, &first) in items.iter().enumerate() {
        let mut rest = items.to_vec();
        rest.remove(k);
        for mut tail in permutations(&rest) {
            tail.insert(0, first);
            out.push(tail);
        }
    }
    out
}
