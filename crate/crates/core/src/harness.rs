//! Incentive, participation and budget audits, plus Monte Carlo estimation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    is_budget_feasible, is_epir, profile_count, profiles, type_grid, utility, AgentType, Instance,
    Mechanism, Outcome, TypeProfile, Utility,
};

/// Utility gains at or below this are not violations.
pub const AUDIT_TOL: f64 = 1e-6;
/// Runs per expectation when a mechanism cannot enumerate its outcomes.
pub const SAMPLED_REPLICATIONS: usize = 10_000;
/// Samples per deterministic work unit in [`estimate`].
const CHUNK: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Property {
    Dsic,
    Bic,
    InterimIr,
    Epir,
    Budget,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub agent: usize,
    /// True `(value, budget)`.
    pub true_type: (f64, f64),
    /// Reported `(value, budget)`, for incentive audits.
    pub misreport: Option<(f64, f64)>,
    /// Utility gain from the misreport, or the size of the IR or budget
    /// breach. May be infinite when the budget cliff is involved.
    pub gain: f64,
    /// Full reported profile (DSIC) or sampled profile (EPIR, budget).
    pub profile: Option<TypeProfile>,
    /// Sampled run index for EPIR and budget audits.
    pub run: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub property: Property,
    pub mechanism: String,
    pub passed: bool,
    /// Largest gain found (incentive audits) or first violation (sampled audits).
    pub worst: Option<Violation>,
    pub checks: usize,
    pub grid: String,
}

/// Finite type grid per agent; misreports range over the same grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditGrid {
    pub types: Vec<Vec<AgentType>>,
}

impl AuditGrid {
    pub fn new(types: Vec<Vec<AgentType>>) -> Result<Self> {
        if types.is_empty() || types.iter().any(|t| t.is_empty()) {
            return Err(Error::InvalidInstance(
                "audit grid needs at least one type per agent".into(),
            ));
        }
        Ok(AuditGrid { types })
    }

    /// Discrete supports as is, continuous distributions at equal-mass points.
    pub fn from_instance(instance: &Instance, value_points: usize, budget_points: usize) -> Self {
        AuditGrid {
            types: instance
                .agents()
                .iter()
                .map(|a| type_grid(a, value_points, budget_points))
                .collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.types.len()
    }

    pub fn describe(&self) -> String {
        let sizes: Vec<String> = self.types.iter().map(|t| t.len().to_string()).collect();
        format!(
            "{} agents, types per agent [{}], {} profiles",
            self.n(),
            sizes.join(", "),
            profile_count(&self.types)
        )
    }

    fn profile(&self, idx: &[usize]) -> TypeProfile {
        crate::model::profile_of(&self.types, idx)
    }

    /// Opponent profiles for agent `i` as `(type indices with i's entry 0, probability)`.
    fn opponents(&self, i: usize) -> Vec<(Vec<usize>, f64)> {
        let mut others = self.types.clone();
        others[i] = vec![AgentType {
            value: 0.0,
            budget: 0.0,
            prob: 1.0,
        }];
        profiles(&others).collect()
    }
}

/// Expected utility of agent `i` with true type `truth` when `reported` is submitted.
fn expected_utility(
    mech: &dyn Mechanism,
    i: usize,
    truth: &AgentType,
    reported: &TypeProfile,
    seed: u64,
) -> Result<Utility> {
    let mut actual = reported.clone();
    actual.values[i] = truth.value;
    actual.budgets[i] = truth.budget;
    match mech.outcome_lottery(reported) {
        Some(lottery) => {
            let lottery = lottery?;
            Ok(Utility::expectation(
                lottery.iter().map(|(p, o)| (*p, utility(i, o, &actual))),
            ))
        }
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut total = 0.0;
            for _ in 0..SAMPLED_REPLICATIONS {
                let o = mech.run(reported, &mut rng)?;
                match utility(i, &o, &actual) {
                    Utility::Finite(u) => total += u,
                    Utility::NegInfinity => return Ok(Utility::NegInfinity),
                }
            }
            Ok(Utility::Finite(total / SAMPLED_REPLICATIONS as f64))
        }
    }
}

fn cell_seed(seed: u64, parts: &[usize]) -> u64 {
    parts.iter().fold(seed ^ 0x9E37_79B9_7F4A_7C15, |h, p| {
        (h ^ *p as u64)
            .wrapping_mul(0x0000_0100_0000_01B3)
            .rotate_left(17)
    })
}

/// Keeps the larger gain; ties keep the earlier violation.
fn worse(a: Option<Violation>, b: Option<Violation>) -> Option<Violation> {
    match (a, b) {
        (Some(x), Some(y)) => Some(if y.gain > x.gain { y } else { x }),
        (x, None) => x,
        (None, y) => y,
    }
}

fn finish(
    property: Property,
    mech: &dyn Mechanism,
    grid: String,
    checks: usize,
    worst: Option<Violation>,
) -> AuditReport {
    let passed = worst.as_ref().is_none_or(|v| v.gain <= AUDIT_TOL);
    AuditReport {
        property,
        mechanism: mech.name().to_string(),
        passed,
        worst,
        checks,
        grid,
    }
}

/// Checks that truth-telling is a dominant strategy on the grid: for every
/// agent, opponents' profile, true type and misreport, the expected utility
/// (over the mechanism's randomness) of truth is within [`AUDIT_TOL`] of the
/// misreport's.
pub fn audit_dsic(mech: &dyn Mechanism, grid: &AuditGrid, seed: u64) -> Result<AuditReport> {
    let cells: Vec<(usize, usize)> = (0..grid.n())
        .flat_map(|i| (0..grid.types[i].len()).map(move |t| (i, t)))
        .collect();
    let results: Vec<Result<(usize, Option<Violation>)>> = cells
        .par_iter()
        .map(|&(i, t)| {
            let truth = grid.types[i][t];
            let mut checks = 0;
            let mut worst: Option<Violation> = None;
            for (o, (mut idx, _)) in grid.opponents(i).into_iter().enumerate() {
                idx[i] = t;
                let honest = grid.profile(&idx);
                let u_true =
                    expected_utility(mech, i, &truth, &honest, cell_seed(seed, &[i, t, o, t]))?;
                for (m, lie) in grid.types[i].iter().enumerate() {
                    if m == t {
                        continue;
                    }
                    let mut reported = honest.clone();
                    reported.values[i] = lie.value;
                    reported.budgets[i] = lie.budget;
                    let u_lie = expected_utility(
                        mech,
                        i,
                        &truth,
                        &reported,
                        cell_seed(seed, &[i, t, o, m]),
                    )?;
                    checks += 1;
                    let gain = u_lie.gain_over(u_true);
                    if worst.as_ref().is_none_or(|w| gain > w.gain) {
                        worst = Some(Violation {
                            agent: i,
                            true_type: (truth.value, truth.budget),
                            misreport: Some((lie.value, lie.budget)),
                            gain,
                            profile: Some(reported),
                            run: None,
                        });
                    }
                }
            }
            Ok((checks, worst))
        })
        .collect();
    let mut checks = 0;
    let mut worst = None;
    for r in results {
        let (c, w) = r?;
        checks += c;
        worst = worse(worst, w);
    }
    Ok(finish(Property::Dsic, mech, grid.describe(), checks, worst))
}

/// Interim utility of each (true type, report) pair for agent `i`, in
/// expectation over the opponents' grid types.
fn interim_utilities(
    mech: &dyn Mechanism,
    grid: &AuditGrid,
    i: usize,
    seed: u64,
) -> Result<Vec<Vec<Utility>>> {
    let k = grid.types[i].len();
    let opponents = grid.opponents(i);
    (0..k)
        .into_par_iter()
        .map(|t| {
            let truth = grid.types[i][t];
            (0..k)
                .map(|m| {
                    let mut branches = Vec::with_capacity(opponents.len());
                    for (o, (idx, prob)) in opponents.iter().enumerate() {
                        let mut idx = idx.clone();
                        idx[i] = m;
                        let reported = grid.profile(&idx);
                        let u = expected_utility(
                            mech,
                            i,
                            &truth,
                            &reported,
                            cell_seed(seed, &[i, t, o, m]),
                        )?;
                        branches.push((*prob, u));
                    }
                    Ok(Utility::expectation(branches))
                })
                .collect()
        })
        .collect()
}

/// Checks Bayesian incentive compatibility: truth maximizes interim expected
/// utility given truthful opponents drawn from the grid.
pub fn audit_bic(mech: &dyn Mechanism, grid: &AuditGrid, seed: u64) -> Result<AuditReport> {
    let mut checks = 0;
    let mut worst = None;
    for i in 0..grid.n() {
        let u = interim_utilities(mech, grid, i, seed)?;
        for (t, row) in u.iter().enumerate() {
            let truth = grid.types[i][t];
            for (m, lie) in grid.types[i].iter().enumerate() {
                if m == t {
                    continue;
                }
                checks += 1;
                let gain = row[m].gain_over(row[t]);
                worst = worse(
                    worst,
                    Some(Violation {
                        agent: i,
                        true_type: (truth.value, truth.budget),
                        misreport: Some((lie.value, lie.budget)),
                        gain,
                        profile: None,
                        run: None,
                    }),
                );
            }
        }
    }
    Ok(finish(Property::Bic, mech, grid.describe(), checks, worst))
}

/// Checks interim individual rationality: truthful interim utility is
/// nonnegative for every grid type.
pub fn audit_interim_ir(mech: &dyn Mechanism, grid: &AuditGrid, seed: u64) -> Result<AuditReport> {
    let mut checks = 0;
    let mut worst = None;
    for i in 0..grid.n() {
        let opponents = grid.opponents(i);
        for (t, truth) in grid.types[i].iter().enumerate() {
            let mut branches = Vec::with_capacity(opponents.len());
            for (o, (idx, prob)) in opponents.iter().enumerate() {
                let mut idx = idx.clone();
                idx[i] = t;
                let u = expected_utility(
                    mech,
                    i,
                    truth,
                    &grid.profile(&idx),
                    cell_seed(seed, &[i, t, o, t]),
                )?;
                branches.push((*prob, u));
            }
            checks += 1;
            let gain = Utility::Finite(0.0).gain_over(Utility::expectation(branches));
            worst = worse(
                worst,
                Some(Violation {
                    agent: i,
                    true_type: (truth.value, truth.budget),
                    misreport: None,
                    gain,
                    profile: None,
                    run: None,
                }),
            );
        }
    }
    Ok(finish(
        Property::InterimIr,
        mech,
        grid.describe(),
        checks,
        worst,
    ))
}

fn sampled_audit(
    property: Property,
    mech: &dyn Mechanism,
    instance: &Instance,
    n_runs: usize,
    seed: u64,
    breach: impl Fn(&Outcome, &TypeProfile) -> Option<(usize, f64)> + Sync,
) -> Result<AuditReport> {
    if n_runs == 0 {
        return Err(Error::InvalidInstance(
            "audits need at least one run".into(),
        ));
    }
    let chunks = n_runs.div_ceil(CHUNK);
    let found: Vec<Result<Option<Violation>>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = chunk_rng(seed, c);
            for r in c * CHUNK..((c + 1) * CHUNK).min(n_runs) {
                let profile = instance.sample_profile(&mut rng);
                let outcome = mech.run(&profile, &mut rng)?;
                if let Some((agent, gain)) = breach(&outcome, &profile) {
                    return Ok(Some(Violation {
                        agent,
                        true_type: (profile.values[agent], profile.budgets[agent]),
                        misreport: None,
                        gain,
                        profile: Some(profile),
                        run: Some(r),
                    }));
                }
            }
            Ok(None)
        })
        .collect();
    let mut first = None;
    for f in found {
        if let Some(v) = f? {
            first = Some(v);
            break;
        }
    }
    let passed = first.is_none();
    Ok(AuditReport {
        property,
        mechanism: mech.name().to_string(),
        passed,
        worst: first,
        checks: n_runs,
        grid: format!("{n_runs} sampled runs, seed {seed}"),
    })
}

/// Samples `n_runs` truthful profiles and checks every outcome is ex-post IR.
pub fn audit_epir(
    mech: &dyn Mechanism,
    instance: &Instance,
    n_runs: usize,
    seed: u64,
) -> Result<AuditReport> {
    sampled_audit(Property::Epir, mech, instance, n_runs, seed, |o, p| {
        if is_epir(o, p) {
            return None;
        }
        (0..p.len())
            .map(|i| (i, o.payments[i] - if o.wins(i) { p.values[i] } else { 0.0 }))
            .max_by(|a, b| a.1.total_cmp(&b.1))
    })
}

/// Samples `n_runs` truthful profiles and checks every payment is within budget.
pub fn audit_budget(
    mech: &dyn Mechanism,
    instance: &Instance,
    n_runs: usize,
    seed: u64,
) -> Result<AuditReport> {
    sampled_audit(Property::Budget, mech, instance, n_runs, seed, |o, p| {
        if is_budget_feasible(o, p) {
            return None;
        }
        (0..p.len())
            .map(|i| (i, o.payments[i] - p.budgets[i]))
            .max_by(|a, b| a.1.total_cmp(&b.1))
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    Revenue,
    Welfare,
}

impl Metric {
    pub fn of(self, outcome: &Outcome, profile: &TypeProfile) -> f64 {
        match self {
            Metric::Revenue => outcome.revenue(),
            Metric::Welfare => outcome.welfare(&profile.values),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Revenue => "revenue",
            Metric::Welfare => "welfare",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerfEstimate {
    pub metric: Metric,
    pub mean: f64,
    /// 1.96 standard errors.
    pub half_width: f64,
    pub samples: usize,
    pub seed: u64,
}

fn chunk_rng(seed: u64, chunk: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk as u64);
    rng
}

/// Running count, mean and sum of squared deviations.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1.0;
        let d = x - self.mean;
        self.mean += d / self.n;
        self.m2 += d * (x - self.mean);
    }

    fn merge(self, o: Moments) -> Moments {
        if o.n == 0.0 {
            return self;
        }
        if self.n == 0.0 {
            return o;
        }
        let n = self.n + o.n;
        let d = o.mean - self.mean;
        Moments {
            n,
            mean: self.mean + d * o.n / n,
            m2: self.m2 + o.m2 + d * d * self.n * o.n / n,
        }
    }
}

/// Monte Carlo estimate of the expected metric under truthful reports.
/// Samples are split into fixed chunks with their own generator streams, so
/// the result depends only on the seed, not on the thread count.
pub fn estimate(
    mech: &dyn Mechanism,
    instance: &Instance,
    metric: Metric,
    n_samples: usize,
    seed: u64,
) -> Result<PerfEstimate> {
    if n_samples < 100 {
        return Err(Error::InvalidInstance(format!(
            "estimate needs at least 100 samples, got {n_samples}"
        )));
    }
    let chunks = n_samples.div_ceil(CHUNK);
    let parts: Vec<Result<Moments>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = chunk_rng(seed, c);
            let mut m = Moments::default();
            for _ in c * CHUNK..((c + 1) * CHUNK).min(n_samples) {
                let profile = instance.sample_profile(&mut rng);
                let outcome = mech.run(&profile, &mut rng)?;
                m.push(metric.of(&outcome, &profile));
            }
            Ok(m)
        })
        .collect();
    let mut total = Moments::default();
    for p in parts {
        total = total.merge(p?);
    }
    let var = if total.n > 1.0 {
        (total.m2 / (total.n - 1.0)).max(0.0)
    } else {
        0.0
    };
    Ok(PerfEstimate {
        metric,
        mean: total.mean,
        half_width: 1.96 * (var / total.n).sqrt(),
        samples: n_samples,
        seed,
    })
}

/// Exact expected metric over a discrete grid, using the mechanism's outcome
/// lottery (or `SAMPLED_REPLICATIONS` seeded runs when it has none).
pub fn exact_expectation(
    mech: &dyn Mechanism,
    grid: &AuditGrid,
    metric: Metric,
    seed: u64,
) -> Result<f64> {
    let all: Vec<(Vec<usize>, f64)> = profiles(&grid.types).collect();
    let parts: Vec<Result<f64>> = all
        .par_iter()
        .enumerate()
        .map(|(k, (idx, prob))| {
            let profile = grid.profile(idx);
            let value = match mech.outcome_lottery(&profile) {
                Some(lottery) => lottery?
                    .iter()
                    .map(|(p, o)| p * metric.of(o, &profile))
                    .sum(),
                None => {
                    let mut rng = ChaCha8Rng::seed_from_u64(cell_seed(seed, &[k]));
                    let mut total = 0.0;
                    for _ in 0..SAMPLED_REPLICATIONS {
                        total += metric.of(&mech.run(&profile, &mut rng)?, &profile);
                    }
                    total / SAMPLED_REPLICATIONS as f64
                }
            };
            Ok(prob * value)
        })
        .collect();
    parts.into_iter().sum()
}
