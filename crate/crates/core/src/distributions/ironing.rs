use super::{Distribution, PROB_TOL};
use crate::error::{Error, Result};

/// Virtual values and ironed virtual values on a finite value grid.
///
/// A report is mapped to the largest grid point not above it, so the curve
/// describes the distribution rounded down to the grid. Its revenue curve in
/// quantile space passes through `(P(V >= g_k), g_k · P(V >= g_k))` and `(0, 0)`;
/// segment `k` joins grid points `k` and `k + 1`. The raw virtual value of
/// point `k` is that segment's slope and the ironed value is the slope of the
/// upper concave hull over the same segment.
#[derive(Debug, Clone, PartialEq)]
pub struct IronedCurve {
    grid: Vec<f64>,
    at_least: Vec<f64>,
    virtual_values: Vec<f64>,
    ironed: Vec<f64>,
}

impl IronedCurve {
    /// Curve on the distribution's evaluation grid.
    pub fn new(d: &Distribution) -> Self {
        let grid = d.eval_grid();
        let at_least = match d {
            Distribution::Discrete { pmf, .. } => {
                let mut tail = vec![0.0; pmf.len()];
                let mut acc = 0.0;
                for k in (0..pmf.len()).rev() {
                    acc += pmf[k];
                    tail[k] = acc;
                }
                tail
            }
            _ => grid.iter().map(|g| d.prob_at_least(*g)).collect(),
        };
        Self::from_parts(grid, at_least)
    }

    /// Curve on a caller-supplied ascending grid inside the support.
    pub fn on_grid(d: &Distribution, grid: &[f64]) -> Result<Self> {
        if grid.is_empty() || grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidDistribution(
                "grid must be strictly ascending".into(),
            ));
        }
        let at_least: Vec<f64> = grid.iter().map(|g| d.prob_at_least(*g)).collect();
        if *at_least.last().unwrap() <= PROB_TOL {
            let (lo, hi) = d.support_bounds();
            return Err(Error::OutsideSupport {
                value: *grid.last().unwrap(),
                lo,
                hi,
            });
        }
        Ok(Self::from_parts(grid.to_vec(), at_least))
    }

    fn from_parts(grid: Vec<f64>, at_least: Vec<f64>) -> Self {
        let m = grid.len();
        let mass = |k: usize| at_least[k] - if k + 1 < m { at_least[k + 1] } else { 0.0 };
        let degenerate = |k: usize| mass(k) <= PROB_TOL;

        let mut virtual_values = vec![0.0; m];
        for k in 0..m {
            virtual_values[k] = if k + 1 == m {
                grid[k]
            } else if degenerate(k) {
                f64::NAN
            } else {
                grid[k] - at_least[k + 1] * (grid[k + 1] - grid[k]) / mass(k)
            };
        }

        // Points in ascending quantile order: position 0 is (0, 0), position
        // m - k is grid point k.
        let point = |pos: usize| -> (f64, f64) {
            if pos == 0 {
                (0.0, 0.0)
            } else {
                let k = m - pos;
                (at_least[k], grid[k] * at_least[k])
            }
        };
        let hull = upper_hull((0..=m).map(point).collect::<Vec<_>>().as_slice());

        let mut ironed = vec![f64::NAN; m];
        let mut edge = 0;
        for pos in 0..m {
            let k = m - 1 - pos;
            if degenerate(k) {
                continue;
            }
            while hull[edge + 1] < pos + 1 {
                edge += 1;
            }
            let (a, b) = (hull[edge], hull[edge + 1]);
            ironed[k] = if a == pos && b == pos + 1 {
                virtual_values[k]
            } else {
                let (pa, pb) = (point(a), point(b));
                (pb.1 - pa.1) / (pb.0 - pa.0)
            };
        }
        // Zero-mass cells inherit from the next point up.
        for k in (0..m).rev() {
            if ironed[k].is_nan() {
                ironed[k] = if k + 1 < m { ironed[k + 1] } else { grid[k] };
            }
            if virtual_values[k].is_nan() {
                virtual_values[k] = ironed[k];
            }
        }

        IronedCurve {
            grid,
            at_least,
            virtual_values,
            ironed,
        }
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn virtual_values(&self) -> &[f64] {
        &self.virtual_values
    }

    pub fn ironed(&self) -> &[f64] {
        &self.ironed
    }

    /// `P(V >= g_k)` for every grid point.
    pub fn prob_at_least(&self) -> &[f64] {
        &self.at_least
    }

    /// Revenue-curve points in ascending quantile order, starting at `(0, 0)`.
    pub fn revenue_points(&self) -> Vec<(f64, f64)> {
        std::iter::once((0.0, 0.0))
            .chain(
                self.grid
                    .iter()
                    .zip(&self.at_least)
                    .rev()
                    .map(|(g, q)| (*q, g * q)),
            )
            .collect()
    }

    /// Largest grid index whose point is at most `v`.
    pub fn index_of(&self, v: f64) -> Option<usize> {
        let tol = 1e-12 * v.abs().max(1.0);
        self.grid.partition_point(|g| *g <= v + tol).checked_sub(1)
    }
}

/// Indices of the upper concave hull of points sorted by ascending x.
fn upper_hull(points: &[(f64, f64)]) -> Vec<usize> {
    let cross = |o: (f64, f64), a: (f64, f64), b: (f64, f64)| {
        (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
    };
    let mut hull: Vec<usize> = Vec::with_capacity(points.len());
    for (i, p) in points.iter().enumerate() {
        if let Some(&last) = hull.last() {
            if (p.0 - points[last].0).abs() <= PROB_TOL {
                if p.1 > points[last].1 {
                    hull.pop();
                } else {
                    continue;
                }
            }
        }
        while hull.len() >= 2
            && cross(
                points[hull[hull.len() - 2]],
                points[hull[hull.len() - 1]],
                *p,
            ) >= 0.0
        {
            hull.pop();
        }
        hull.push(i);
    }
    hull
}
