//! One-dimensional value and budget distributions.
//!
//! Continuous kinds are evaluated on a fixed value grid (see [`EVAL_GRID_POINTS`])
//! whenever an operation needs a finite search space: MHR detection, monopoly
//! pricing and ironing. Discrete kinds always use their support.

mod ironing;

pub use ironing::IronedCurve;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of points on the evaluation grid of a continuous distribution.
pub const EVAL_GRID_POINTS: usize = 1024;

/// Quantile trimmed from each end when building the evaluation grid.
pub const GRID_TAIL: f64 = 1e-6;

/// Tolerance on probability sums.
pub const PROB_TOL: f64 = 1e-12;

/// Default tolerance for comparing probabilities and hazard rates.
pub const CMP_TOL: f64 = 1e-9;

/// A distribution over nonnegative reals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Distribution {
    /// Finitely many atoms; `support` strictly ascending, `pmf` positive and summing to one.
    Discrete {
        support: Vec<f64>,
        pmf: Vec<f64>,
    },
    Uniform {
        lo: f64,
        hi: f64,
    },
    Exponential {
        rate: f64,
    },
    /// CDF given by linear interpolation between `(x, F(x))` knots. A repeated
    /// `x` encodes a jump (an atom); a first knot with `F > 0` is an atom at it.
    PiecewiseLinearCdf {
        knots: Vec<(f64, f64)>,
    },
    /// Law of `min(V, cap)` for a base distribution without a closed piecewise form.
    Capped {
        base: Box<Distribution>,
        cap: f64,
    },
}

impl Distribution {
    pub fn discrete(support: Vec<f64>, pmf: Vec<f64>) -> Result<Self> {
        let d = Distribution::Discrete { support, pmf };
        d.validate()?;
        Ok(d)
    }

    /// Builds a discrete distribution from unordered atoms, merging repeated points.
    pub fn from_atoms(atoms: &[(f64, f64)]) -> Result<Self> {
        let mut atoms: Vec<(f64, f64)> = atoms.iter().copied().filter(|a| a.1 > 0.0).collect();
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut support: Vec<f64> = Vec::with_capacity(atoms.len());
        let mut pmf: Vec<f64> = Vec::with_capacity(atoms.len());
        for (v, p) in atoms {
            match support.last() {
                Some(&last) if last == v => *pmf.last_mut().unwrap() += p,
                _ => {
                    support.push(v);
                    pmf.push(p);
                }
            }
        }
        let total: f64 = pmf.iter().sum();
        if (total - 1.0).abs() <= 1e-9 {
            pmf.iter_mut().for_each(|p| *p /= total);
        }
        Self::discrete(support, pmf)
    }

    pub fn atom(v: f64) -> Result<Self> {
        Self::discrete(vec![v], vec![1.0])
    }

    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        let d = Distribution::Uniform { lo, hi };
        d.validate()?;
        Ok(d)
    }

    pub fn exponential(rate: f64) -> Result<Self> {
        let d = Distribution::Exponential { rate };
        d.validate()?;
        Ok(d)
    }

    pub fn piecewise(knots: Vec<(f64, f64)>) -> Result<Self> {
        let d = Distribution::PiecewiseLinearCdf { knots };
        d.validate()?;
        Ok(d)
    }

    /// Checks the representation invariants of every kind.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidDistribution(msg));
        match self {
            Distribution::Discrete { support, pmf } => {
                if support.is_empty() || support.len() != pmf.len() {
                    return bad(format!(
                        "support has {} points but pmf has {}",
                        support.len(),
                        pmf.len()
                    ));
                }
                if support.iter().any(|v| !v.is_finite() || *v < 0.0) {
                    return bad("support points must be finite and nonnegative".into());
                }
                if support.windows(2).any(|w| w[0] >= w[1]) {
                    return bad("support must be strictly ascending".into());
                }
                if pmf.iter().any(|p| !(*p > 0.0) || !p.is_finite()) {
                    return bad("pmf entries must be positive".into());
                }
                let total: f64 = pmf.iter().sum();
                if (total - 1.0).abs() > PROB_TOL * pmf.len().max(1) as f64 {
                    return bad(format!("pmf sums to {total}, expected 1"));
                }
            }
            Distribution::Uniform { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite() && 0.0 <= *lo && lo < hi) {
                    return bad(format!("uniform needs 0 <= lo < hi, got [{lo}, {hi}]"));
                }
            }
            Distribution::Exponential { rate } => {
                if !(rate.is_finite() && *rate > 0.0) {
                    return bad(format!("exponential rate must be positive, got {rate}"));
                }
            }
            Distribution::PiecewiseLinearCdf { knots } => {
                if knots.is_empty() {
                    return bad("piecewise cdf needs at least one knot".into());
                }
                for (x, f) in knots {
                    if !x.is_finite() || *x < 0.0 || !(0.0..=1.0 + PROB_TOL).contains(f) {
                        return bad(format!("invalid knot ({x}, {f})"));
                    }
                }
                if knots.windows(2).any(|w| w[1].0 < w[0].0 || w[1].1 < w[0].1) {
                    return bad("knots must be nondecreasing in x and F".into());
                }
                let last = knots.last().unwrap().1;
                if (last - 1.0).abs() > PROB_TOL {
                    return bad(format!("cdf ends at {last}, expected 1"));
                }
            }
            Distribution::Capped { base, cap } => {
                base.validate()?;
                if !(cap.is_finite() && *cap >= 0.0) {
                    return bad(format!("cap must be finite and nonnegative, got {cap}"));
                }
            }
        }
        Ok(())
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self, Distribution::Discrete { .. })
    }

    /// Right-continuous CDF.
    pub fn cdf(&self, v: f64) -> f64 {
        match self {
            Distribution::Discrete { support, pmf } => {
                let k = support.partition_point(|s| *s <= v);
                if k == support.len() {
                    1.0
                } else {
                    pmf[..k].iter().sum::<f64>().min(1.0)
                }
            }
            Distribution::Uniform { lo, hi } => ((v - lo) / (hi - lo)).clamp(0.0, 1.0),
            Distribution::Exponential { rate } => {
                if v <= 0.0 {
                    0.0
                } else {
                    -(-rate * v).exp_m1()
                }
            }
            Distribution::PiecewiseLinearCdf { knots } => {
                if v < knots[0].0 {
                    return 0.0;
                }
                let i = knots.partition_point(|k| k.0 <= v) - 1;
                if i + 1 == knots.len() {
                    return 1.0;
                }
                let (x0, f0) = knots[i];
                let (x1, f1) = knots[i + 1];
                f0 + (f1 - f0) * (v - x0) / (x1 - x0)
            }
            Distribution::Capped { base, cap } => {
                if v >= *cap {
                    1.0
                } else {
                    base.cdf(v)
                }
            }
        }
    }

    /// Left limit `F(v⁻) = P(V < v)`.
    pub fn cdf_left(&self, v: f64) -> f64 {
        match self {
            Distribution::Discrete { support, pmf } => {
                let k = support.partition_point(|s| *s < v);
                if k == support.len() {
                    1.0
                } else {
                    pmf[..k].iter().sum::<f64>().min(1.0)
                }
            }
            Distribution::Uniform { .. } | Distribution::Exponential { .. } => self.cdf(v),
            Distribution::PiecewiseLinearCdf { knots } => {
                if v <= knots[0].0 {
                    return 0.0;
                }
                let i = knots.partition_point(|k| k.0 < v) - 1;
                if i + 1 == knots.len() {
                    return 1.0;
                }
                let (x0, f0) = knots[i];
                let (x1, f1) = knots[i + 1];
                f0 + (f1 - f0) * (v - x0) / (x1 - x0)
            }
            Distribution::Capped { base, cap } => {
                if v > *cap {
                    1.0
                } else {
                    base.cdf_left(v)
                }
            }
        }
    }

    /// `P(V >= v)`.
    pub fn prob_at_least(&self, v: f64) -> f64 {
        match self {
            Distribution::Discrete { support, pmf } => {
                let k = support.partition_point(|s| *s < v);
                pmf[k..].iter().sum::<f64>().min(1.0)
            }
            Distribution::Exponential { rate } => {
                if v <= 0.0 {
                    1.0
                } else {
                    (-rate * v).exp()
                }
            }
            _ => (1.0 - self.cdf_left(v)).max(0.0),
        }
    }

    /// `P(V > v)`.
    pub fn survival(&self, v: f64) -> f64 {
        match self {
            Distribution::Discrete { support, pmf } => {
                let k = support.partition_point(|s| *s <= v);
                pmf[k..].iter().sum::<f64>().min(1.0)
            }
            Distribution::Exponential { rate } => {
                if v <= 0.0 {
                    1.0
                } else {
                    (-rate * v).exp()
                }
            }
            _ => (1.0 - self.cdf(v)).max(0.0),
        }
    }

    /// Probability of the atom at `v` (zero off the atoms).
    pub fn mass_at(&self, v: f64) -> f64 {
        match self {
            Distribution::Discrete { support, pmf } => {
                support_index(support, v).map(|k| pmf[k]).unwrap_or(0.0)
            }
            Distribution::Uniform { .. } | Distribution::Exponential { .. } => 0.0,
            _ => (self.cdf(v) - self.cdf_left(v)).max(0.0),
        }
    }

    /// Density of the absolutely continuous part (right-continuous; zero for discrete).
    pub fn pdf(&self, v: f64) -> f64 {
        match self {
            Distribution::Discrete { .. } => 0.0,
            Distribution::Uniform { lo, hi } => {
                if *lo <= v && v < *hi {
                    1.0 / (hi - lo)
                } else {
                    0.0
                }
            }
            Distribution::Exponential { rate } => {
                if v < 0.0 {
                    0.0
                } else {
                    rate * (-rate * v).exp()
                }
            }
            Distribution::PiecewiseLinearCdf { knots } => {
                if v < knots[0].0 {
                    return 0.0;
                }
                let i = knots.partition_point(|k| k.0 <= v) - 1;
                if i + 1 == knots.len() {
                    return 0.0;
                }
                let (x0, f0) = knots[i];
                let (x1, f1) = knots[i + 1];
                (f1 - f0) / (x1 - x0)
            }
            Distribution::Capped { base, cap } => {
                if v < *cap {
                    base.pdf(v)
                } else {
                    0.0
                }
            }
        }
    }

    /// Generalized inverse CDF: the infimum of `v` with `cdf(v) >= p`.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::ProbabilityOutOfRange(p));
        }
        Ok(match self {
            Distribution::Discrete { support, pmf } => {
                let mut acc = 0.0;
                for (v, m) in support.iter().zip(pmf) {
                    acc += m;
                    if acc >= p - PROB_TOL {
                        return Ok(*v);
                    }
                }
                *support.last().unwrap()
            }
            Distribution::Uniform { lo, hi } => lo + p * (hi - lo),
            Distribution::Exponential { rate } => {
                if p >= 1.0 {
                    f64::INFINITY
                } else {
                    -(-p).ln_1p() / rate
                }
            }
            Distribution::PiecewiseLinearCdf { knots } => {
                let i = knots.partition_point(|k| k.1 < p);
                if i == 0 {
                    knots[0].0
                } else if i == knots.len() {
                    knots.last().unwrap().0
                } else {
                    let (x0, f0) = knots[i - 1];
                    let (x1, f1) = knots[i];
                    if x1 == x0 {
                        x1
                    } else {
                        x0 + (p - f0) / (f1 - f0) * (x1 - x0)
                    }
                }
            }
            Distribution::Capped { base, cap } => base.quantile(p)?.min(*cap),
        })
    }

    /// Inverse-transform sample; deterministic given the generator state.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.gen();
        self.quantile(u).expect("uniform draw lies in [0, 1)")
    }

    /// Smallest and largest support points (the upper end may be infinite).
    pub fn support_bounds(&self) -> (f64, f64) {
        (
            self.quantile(0.0).unwrap_or(0.0),
            self.quantile(1.0).unwrap_or(f64::INFINITY),
        )
    }

    /// Atoms as `(point, mass)` pairs, ascending.
    pub fn atoms(&self) -> Vec<(f64, f64)> {
        match self {
            Distribution::Discrete { support, pmf } => {
                support.iter().copied().zip(pmf.iter().copied()).collect()
            }
            Distribution::Uniform { .. } | Distribution::Exponential { .. } => Vec::new(),
            Distribution::PiecewiseLinearCdf { knots } => {
                let mut out = Vec::new();
                if knots[0].1 > 0.0 {
                    out.push(knots[0]);
                }
                for w in knots.windows(2) {
                    if w[0].0 == w[1].0 && w[1].1 > w[0].1 {
                        out.push((w[0].0, w[1].1 - w[0].1));
                    }
                }
                out
            }
            Distribution::Capped { base, cap } => {
                let mut out: Vec<(f64, f64)> =
                    base.atoms().into_iter().filter(|a| a.0 < *cap).collect();
                let top = base.prob_at_least(*cap);
                if top > 0.0 {
                    out.push((*cap, top));
                }
                out
            }
        }
    }

    /// Points on which grid-based operations evaluate the distribution.
    ///
    /// Discrete: the support. Otherwise [`EVAL_GRID_POINTS`] equispaced values over
    /// `[quantile(GRID_TAIL), quantile(1 - GRID_TAIL)]`, plus any atoms in that range.
    pub fn eval_grid(&self) -> Vec<f64> {
        if let Distribution::Discrete { support, .. } = self {
            return support.clone();
        }
        let lo = self.quantile(GRID_TAIL).unwrap();
        let hi = self.quantile(1.0 - GRID_TAIL).unwrap();
        let mut grid: Vec<f64> = if hi > lo {
            let step = (hi - lo) / (EVAL_GRID_POINTS - 1) as f64;
            (0..EVAL_GRID_POINTS)
                .map(|i| lo + step * i as f64)
                .collect()
        } else {
            vec![lo]
        };
        *grid.last_mut().unwrap() = hi;
        grid.extend(
            self.atoms()
                .into_iter()
                .map(|a| a.0)
                .filter(|a| *a >= lo && *a <= hi),
        );
        grid.sort_by(f64::total_cmp);
        grid.dedup_by(|a, b| (*a - *b).abs() <= 1e-15 * b.abs().max(1.0));
        grid
    }

    /// Hazard rate: `f(v)/(1 - F(v))` on the continuous part, `mass/(1 - F(v⁻))` at atoms.
    pub fn hazard_rate(&self, v: f64) -> Result<f64> {
        match self {
            Distribution::Discrete { support, pmf } => {
                let k = support_index(support, v).ok_or_else(|| self.outside(v))?;
                let tail: f64 = pmf[k..].iter().sum();
                Ok(pmf[k] / tail)
            }
            Distribution::Uniform { lo, hi } => {
                if v < *lo {
                    Err(self.outside(v))
                } else if v >= *hi {
                    Err(Error::HazardUndefined(v))
                } else {
                    Ok(1.0 / (hi - v))
                }
            }
            Distribution::Exponential { rate } => {
                if v < 0.0 {
                    Err(self.outside(v))
                } else {
                    Ok(*rate)
                }
            }
            _ => {
                let (lo, hi) = self.support_bounds();
                if v < lo {
                    return Err(self.outside(v));
                }
                let at_least = self.prob_at_least(v);
                if v > hi || at_least <= PROB_TOL {
                    return Err(Error::HazardUndefined(v));
                }
                let mass = self.mass_at(v);
                if mass > PROB_TOL {
                    Ok(mass / at_least)
                } else {
                    Ok(self.pdf(v) / at_least)
                }
            }
        }
    }

    /// Whether the hazard rate is nondecreasing over the evaluation grid.
    pub fn is_mhr(&self) -> bool {
        let mut prev = f64::NEG_INFINITY;
        for v in self.eval_grid() {
            let Ok(h) = self.hazard_rate(v) else { continue };
            if h < prev - CMP_TOL {
                return false;
            }
            prev = prev.max(h);
        }
        true
    }

    /// `E[V · 1{a < V <= b}]`.
    pub fn partial_expectation(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        match self {
            Distribution::Discrete { support, pmf } => support
                .iter()
                .zip(pmf)
                .filter(|(v, _)| **v > a && **v <= b)
                .map(|(v, p)| v * p)
                .sum(),
            Distribution::Uniform { lo, hi } => {
                let x0 = a.max(*lo);
                let x1 = b.min(*hi);
                if x1 <= x0 {
                    0.0
                } else {
                    (x1 * x1 - x0 * x0) / (2.0 * (hi - lo))
                }
            }
            Distribution::Exponential { rate } => {
                let x0 = a.max(0.0);
                let antiderivative = |x: f64| {
                    if x.is_infinite() {
                        0.0
                    } else {
                        -(x + 1.0 / rate) * (-rate * x).exp()
                    }
                };
                antiderivative(b) - antiderivative(x0)
            }
            Distribution::PiecewiseLinearCdf { knots } => {
                let mut total = 0.0;
                let (x0, f0) = knots[0];
                if f0 > 0.0 && x0 > a && x0 <= b {
                    total += x0 * f0;
                }
                for w in knots.windows(2) {
                    let ((xa, fa), (xb, fb)) = (w[0], w[1]);
                    if fb <= fa {
                        continue;
                    }
                    if xa == xb {
                        if xa > a && xa <= b {
                            total += xa * (fb - fa);
                        }
                        continue;
                    }
                    let lo = xa.max(a);
                    let hi = xb.min(b);
                    if hi > lo {
                        total += (fb - fa) / (xb - xa) * (hi * hi - lo * lo) / 2.0;
                    }
                }
                total
            }
            Distribution::Capped { base, cap } => {
                let mut total = base.partial_expectation(a, b.min(*cap));
                if *cap > a && *cap <= b {
                    total += cap * base.survival(*cap);
                }
                total
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            Distribution::Uniform { lo, hi } => (lo + hi) / 2.0,
            Distribution::Exponential { rate } => 1.0 / rate,
            _ => self.partial_expectation(f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    /// `E[V | V > b]`. Fails when `P(V > b) = 0`.
    pub fn tail_expectation(&self, b: f64) -> Result<f64> {
        match self {
            Distribution::Uniform { lo, hi } => {
                if b >= *hi {
                    Err(Error::EmptyTail(b))
                } else {
                    Ok((b.max(*lo) + hi) / 2.0)
                }
            }
            Distribution::Exponential { rate } => Ok(b.max(0.0) + 1.0 / rate),
            _ => {
                let tail = self.survival(b);
                if tail <= PROB_TOL {
                    return Err(Error::EmptyTail(b));
                }
                Ok(self.partial_expectation(b, f64::INFINITY) / tail)
            }
        }
    }

    /// Revenue of posting `p`: `p · P(V >= p)`.
    pub fn posted_price_revenue(&self, p: f64) -> f64 {
        p * self.prob_at_least(p)
    }

    /// Smallest maximizer of the posted-price revenue over the evaluation grid.
    pub fn monopoly_price(&self) -> f64 {
        let mut best = (f64::NEG_INFINITY, 0.0);
        for p in self.eval_grid() {
            let r = self.posted_price_revenue(p);
            if r > best.0 + PROB_TOL {
                best = (r, p);
            }
        }
        best.1
    }

    /// Myerson virtual value (forward-difference analogue on discrete supports).
    pub fn virtual_value(&self, v: f64) -> Result<f64> {
        match self {
            Distribution::Discrete { support, pmf } => {
                let k = support_index(support, v).ok_or_else(|| self.outside(v))?;
                if k + 1 == support.len() {
                    return Ok(support[k]);
                }
                let above: f64 = pmf[k + 1..].iter().sum();
                Ok(support[k] - above * (support[k + 1] - support[k]) / pmf[k])
            }
            Distribution::Uniform { lo, hi } => {
                if v < *lo || v > *hi {
                    Err(self.outside(v))
                } else {
                    Ok(2.0 * v - hi)
                }
            }
            Distribution::Exponential { rate } => {
                if v < 0.0 {
                    Err(self.outside(v))
                } else {
                    Ok(v - 1.0 / rate)
                }
            }
            _ => {
                let (lo, hi) = self.support_bounds();
                if v < lo || v > hi {
                    return Err(self.outside(v));
                }
                // The revenue curve is linear with slope v across an atom.
                if self.mass_at(v) > PROB_TOL {
                    return Ok(v);
                }
                let f = self.pdf(v);
                if f <= 0.0 {
                    return Err(self.outside(v));
                }
                Ok(v - self.survival(v) / f)
            }
        }
    }

    /// Derivative of the concave hull of the revenue curve in quantile space.
    pub fn ironed_virtual_value(&self, v: f64) -> Result<f64> {
        let (lo, hi) = self.support_bounds();
        if v < lo || v > hi {
            return Err(self.outside(v));
        }
        if let Distribution::Discrete { support, .. } = self {
            support_index(support, v).ok_or_else(|| self.outside(v))?;
        }
        let curve = IronedCurve::new(self);
        Ok(curve.ironed()[curve.index_of(v).unwrap_or(0)])
    }

    /// Law of `min(V, b)`: mass above `b` moves to an atom at `b`.
    pub fn cap_at(&self, b: f64) -> Distribution {
        let b = b.max(0.0);
        let atom_at_b = || Distribution::Discrete {
            support: vec![b],
            pmf: vec![1.0],
        };
        match self {
            Distribution::Discrete { support, pmf } => {
                let mut atoms: Vec<(f64, f64)> = Vec::new();
                let mut top = 0.0;
                for (v, p) in support.iter().zip(pmf) {
                    if *v < b {
                        atoms.push((*v, *p));
                    } else {
                        top += p;
                    }
                }
                if top > 0.0 {
                    atoms.push((b, top));
                }
                let (support, pmf) = atoms.into_iter().unzip();
                Distribution::Discrete { support, pmf }
            }
            Distribution::Uniform { lo, hi } => {
                if b >= *hi {
                    self.clone()
                } else if b <= *lo {
                    atom_at_b()
                } else {
                    Distribution::PiecewiseLinearCdf {
                        knots: vec![(*lo, 0.0), (b, (b - lo) / (hi - lo)), (b, 1.0)],
                    }
                }
            }
            Distribution::Exponential { .. } => {
                if b.is_infinite() {
                    self.clone()
                } else if b == 0.0 {
                    atom_at_b()
                } else {
                    Distribution::Capped {
                        base: Box::new(self.clone()),
                        cap: b,
                    }
                }
            }
            Distribution::PiecewiseLinearCdf { knots } => {
                if b >= knots.last().unwrap().0 {
                    return self.clone();
                }
                if b <= knots[0].0 {
                    return atom_at_b();
                }
                let mut kept: Vec<(f64, f64)> = knots.iter().copied().filter(|k| k.0 < b).collect();
                kept.push((b, self.cdf_left(b)));
                kept.push((b, 1.0));
                Distribution::PiecewiseLinearCdf { knots: kept }
            }
            Distribution::Capped { base, cap } => base.cap_at(cap.min(b)),
        }
    }

    /// Equal-mass discretization: `n` atoms at the quantile midpoints `(k + 1/2)/n`.
    /// Discrete distributions are returned unchanged.
    pub fn discretize(&self, n: usize) -> Distribution {
        if self.is_discrete() {
            return self.clone();
        }
        let n = n.max(1);
        let atoms: Vec<(f64, f64)> = (0..n)
            .map(|k| {
                let p = (k as f64 + 0.5) / n as f64;
                (self.quantile(p).unwrap(), 1.0 / n as f64)
            })
            .collect();
        Distribution::from_atoms(&atoms).expect("quantile midpoints form a valid pmf")
    }

    fn outside(&self, v: f64) -> Error {
        let (lo, hi) = self.support_bounds();
        Error::OutsideSupport { value: v, lo, hi }
    }
}

/// Index of `v` in an ascending support, matching up to a relative 1e-12.
pub(crate) fn support_index(support: &[f64], v: f64) -> Option<usize> {
    let tol = 1e-12 * v.abs().max(1.0);
    let k = support.partition_point(|s| *s < v - tol);
    (k < support.len() && (support[k] - v).abs() <= tol).then_some(k)
}

/// Whether the posted-price revenue over `grid` has a single local maximum
/// (plateaus count as one).
pub fn revenue_is_unimodal(d: &Distribution, grid: &[f64]) -> bool {
    let revenue: Vec<f64> = grid.iter().map(|p| d.posted_price_revenue(*p)).collect();
    let mut falling = false;
    for w in revenue.windows(2) {
        if w[1] < w[0] - CMP_TOL {
            falling = true;
        } else if w[1] > w[0] + CMP_TOL && falling {
            return false;
        }
    }
    true
}
