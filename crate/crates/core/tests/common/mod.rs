//! Independent reference computations shared by integration tests.
#![allow(dead_code)]

use budgetmech::oracle::{solve_lp, Direction, LinearProgram, LpStatus, Sense};
use budgetmech::IronedCurve;

pub const TOL: f64 = 1e-7;

/// Dense row form `a·x (sense) b` used by the enumerator.
struct Row {
    a: Vec<f64>,
    sense: Sense,
    b: f64,
}

fn rows_of(lp: &LinearProgram) -> Vec<Row> {
    let n = lp.n_vars();
    let mut rows = Vec::new();
    for c in lp.constraints() {
        let mut a = vec![0.0; n];
        for &(j, v) in &c.coeffs {
            a[j] += v;
        }
        rows.push(Row {
            a,
            sense: c.sense,
            b: c.rhs,
        });
    }
    for (j, &(lo, hi)) in lp.bounds().iter().enumerate() {
        let mut a = vec![0.0; n];
        a[j] = 1.0;
        if lo.is_finite() {
            rows.push(Row {
                a: a.clone(),
                sense: Sense::Ge,
                b: lo,
            });
        }
        if hi.is_finite() {
            rows.push(Row {
                a,
                sense: Sense::Le,
                b: hi,
            });
        }
    }
    rows
}

fn solve_square(mut m: Vec<Vec<f64>>, mut rhs: Vec<f64>) -> Option<Vec<f64>> {
    let n = rhs.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &k| m[i][col].abs().total_cmp(&m[k][col].abs()))?;
        if m[piv][col].abs() < 1e-12 {
            return None;
        }
        m.swap(col, piv);
        rhs.swap(col, piv);
        for i in 0..n {
            if i != col {
                let f = m[i][col] / m[col][col];
                if f != 0.0 {
                    let pivot_row = m[col].clone();
                    for (x, p) in m[i][col..].iter_mut().zip(&pivot_row[col..]) {
                        *x -= f * p;
                    }
                    rhs[i] -= f * rhs[col];
                }
            }
        }
    }
    Some((0..n).map(|i| rhs[i] / m[i][i]).collect())
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            go(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// Best objective over all basic feasible points; `None` when there is none.
/// Only meaningful for programs whose feasible region is pointed and bounded
/// in the direction of optimization.
pub fn vertex_optimum(lp: &LinearProgram) -> Option<f64> {
    let n = lp.n_vars();
    let rows = rows_of(lp);
    let sign = if lp.direction() == Direction::Maximize {
        1.0
    } else {
        -1.0
    };
    let mut best: Option<f64> = None;
    for active in combinations(rows.len(), n) {
        let m = active.iter().map(|&r| rows[r].a.clone()).collect();
        let rhs = active.iter().map(|&r| rows[r].b).collect();
        let Some(x) = solve_square(m, rhs) else {
            continue;
        };
        let feasible = rows.iter().all(|r| {
            let lhs: f64 = r.a.iter().zip(&x).map(|(a, v)| a * v).sum();
            match r.sense {
                Sense::Le => lhs <= r.b + 1e-9,
                Sense::Ge => lhs >= r.b - 1e-9,
                Sense::Eq => (lhs - r.b).abs() <= 1e-9,
            }
        });
        if feasible {
            let v = sign * lp.evaluate(&x);
            best = Some(best.map_or(v, |b: f64| b.max(v)));
        }
    }
    best.map(|b| sign * b)
}

pub enum Expect {
    Optimal(f64),
    Infeasible,
    Unbounded,
}

fn lp(dir: Direction, c: &[f64], rows: &[(&[f64], Sense, f64)]) -> LinearProgram {
    let mut lp = match dir {
        Direction::Maximize => LinearProgram::maximize(c.to_vec()).unwrap(),
        Direction::Minimize => LinearProgram::minimize(c.to_vec()).unwrap(),
    };
    for (a, s, b) in rows {
        lp.add_dense(a, *s, *b).unwrap();
    }
    lp
}

use Direction::{Maximize as Max, Minimize as Min};
use Sense::{Eq, Ge, Le};

/// Reference programs as `(name, program, expected result, pointed)`; the
/// enumeration cross-check applies to pointed ones.
pub fn lp_cases() -> Vec<(&'static str, LinearProgram, Expect, bool)> {
    let mut out = Vec::new();
    let mut add = |name, lp, e, pointed| out.push((name, lp, e, pointed));

    add(
        "two-var max",
        lp(
            Max,
            &[1.0, 1.0],
            &[(&[1.0, 2.0], Le, 4.0), (&[3.0, 1.0], Le, 6.0)],
        ),
        Expect::Optimal(2.8),
        true,
    );
    add(
        "two-var min covering",
        lp(
            Min,
            &[1.0, 1.0],
            &[(&[1.0, 2.0], Ge, 4.0), (&[3.0, 1.0], Ge, 6.0)],
        ),
        Expect::Optimal(2.8),
        true,
    );
    add(
        "equality with bound",
        {
            let mut p = lp(Max, &[1.0, 1.0, 1.0], &[(&[1.0, 1.0, 1.0], Eq, 3.0)]);
            p.set_bounds(0, 0.0, 1.0).unwrap();
            p
        },
        Expect::Optimal(3.0),
        true,
    );
    // Cycles under the textbook largest-coefficient rule.
    add(
        "cycling example",
        lp(
            Max,
            &[0.75, -20.0, 0.5, -6.0],
            &[
                (&[0.25, -8.0, -1.0, 9.0], Le, 0.0),
                (&[0.5, -12.0, -0.5, 3.0], Le, 0.0),
                (&[0.0, 0.0, 1.0, 0.0], Le, 1.0),
            ],
        ),
        Expect::Optimal(1.25),
        true,
    );
    add(
        "infeasible inequalities",
        lp(
            Max,
            &[1.0, 1.0],
            &[(&[1.0, 1.0], Le, 1.0), (&[1.0, 1.0], Ge, 2.0)],
        ),
        Expect::Infeasible,
        true,
    );
    add(
        "infeasible equalities",
        lp(Max, &[1.0], &[(&[1.0], Eq, 1.0), (&[1.0], Eq, 2.0)]),
        Expect::Infeasible,
        true,
    );
    add(
        "unbounded ray",
        lp(Max, &[1.0, 0.0], &[(&[1.0, -1.0], Le, 1.0)]),
        Expect::Unbounded,
        true,
    );
    add(
        "free variable",
        {
            let mut p = lp(Min, &[1.0], &[(&[1.0], Ge, -3.0)]);
            p.set_bounds(0, f64::NEG_INFINITY, f64::INFINITY).unwrap();
            p
        },
        Expect::Optimal(-3.0),
        false,
    );
    add(
        "negative box",
        {
            let mut p = lp(Max, &[1.0], &[]);
            p.set_bounds(0, -5.0, -2.0).unwrap();
            p
        },
        Expect::Optimal(-2.0),
        true,
    );
    add(
        "upper bound only",
        {
            let mut p = lp(Max, &[1.0, -1.0], &[(&[1.0, 1.0], Ge, 1.0)]);
            p.set_bounds(0, f64::NEG_INFINITY, 4.0).unwrap();
            p
        },
        Expect::Optimal(4.0),
        false,
    );
    add(
        "redundant equalities",
        lp(
            Max,
            &[1.0, 0.0],
            &[(&[1.0, 1.0], Eq, 2.0), (&[2.0, 2.0], Eq, 4.0)],
        ),
        Expect::Optimal(2.0),
        true,
    );
    add(
        "degenerate origin",
        lp(
            Max,
            &[1.0, 1.0],
            &[
                (&[1.0, -1.0], Le, 0.0),
                (&[-1.0, 1.0], Le, 0.0),
                (&[1.0, 1.0], Le, 2.0),
                (&[1.0, 0.0], Le, 1.0),
            ],
        ),
        Expect::Optimal(2.0),
        true,
    );
    add(
        "cube walk",
        lp(
            Max,
            &[4.0, 2.0, 1.0],
            &[
                (&[1.0, 0.0, 0.0], Le, 5.0),
                (&[4.0, 1.0, 0.0], Le, 25.0),
                (&[8.0, 4.0, 1.0], Le, 125.0),
            ],
        ),
        Expect::Optimal(125.0),
        true,
    );
    // Supplies 20, 30; demands 10, 25, 15.
    add(
        "transportation",
        lp(
            Min,
            &[8.0, 6.0, 10.0, 9.0, 12.0, 13.0],
            &[
                (&[1.0, 1.0, 1.0, 0.0, 0.0, 0.0], Eq, 20.0),
                (&[0.0, 0.0, 0.0, 1.0, 1.0, 1.0], Eq, 30.0),
                (&[1.0, 0.0, 0.0, 1.0, 0.0, 0.0], Eq, 10.0),
                (&[0.0, 1.0, 0.0, 0.0, 1.0, 0.0], Eq, 25.0),
                (&[0.0, 0.0, 1.0, 0.0, 0.0, 1.0], Eq, 15.0),
            ],
        ),
        Expect::Optimal(20.0 * 6.0 + 10.0 * 9.0 + 5.0 * 12.0 + 15.0 * 13.0),
        true,
    );
    add(
        "assignment",
        {
            let w = [[4.0, 1.0, 3.0], [2.0, 0.0, 5.0], [3.0, 2.0, 2.0]];
            let mut p = LinearProgram::maximize(w.iter().flatten().copied().collect()).unwrap();
            for i in 0..3 {
                p.add_constraint((0..3).map(|j| (3 * i + j, 1.0)).collect(), Le, 1.0)
                    .unwrap();
                p.add_constraint((0..3).map(|j| (3 * j + i, 1.0)).collect(), Le, 1.0)
                    .unwrap();
            }
            p
        },
        Expect::Optimal(11.0),
        true,
    );
    add(
        "zero objective",
        lp(
            Max,
            &[0.0, 0.0],
            &[(&[1.0, 1.0], Ge, 1.0), (&[1.0, 1.0], Le, 3.0)],
        ),
        Expect::Optimal(0.0),
        true,
    );
    add(
        "slack lower row",
        lp(Max, &[-1.0, -1.0], &[(&[1.0, 1.0], Ge, -5.0)]),
        Expect::Optimal(0.0),
        true,
    );
    add(
        "negative equality rhs",
        lp(Min, &[1.0, 1.0], &[(&[1.0, -1.0], Eq, -2.0)]),
        Expect::Optimal(2.0),
        true,
    );
    add(
        "diet",
        lp(
            Min,
            &[0.6, 0.35],
            &[
                (&[5.0, 7.0], Ge, 8.0),
                (&[4.0, 2.0], Ge, 15.0),
                (&[2.0, 1.0], Ge, 3.0),
            ],
        ),
        Expect::Optimal(2.25),
        true,
    );
    add(
        "duplicated simplex rows",
        {
            let mut p = LinearProgram::maximize(vec![1.0; 4]).unwrap();
            for _ in 0..5 {
                p.add_dense(&[1.0; 4], Le, 1.0).unwrap();
            }
            p.add_dense(&[1.0, -1.0, 0.0, 0.0], Eq, 0.0).unwrap();
            p
        },
        Expect::Optimal(1.0),
        true,
    );
    out
}

/// Solves one reference program and checks status, value, feasibility and
/// agreement with vertex enumeration.
pub fn check_lp_case(
    name: &str,
    lp: &LinearProgram,
    expect: &Expect,
    pointed: bool,
) -> Result<(), String> {
    let sol = solve_lp(lp).map_err(|e| format!("{name}: {e}"))?;
    match expect {
        Expect::Optimal(v) => {
            if sol.status != LpStatus::Optimal {
                return Err(format!("{name}: status {:?}", sol.status));
            }
            if (sol.value - v).abs() > TOL {
                return Err(format!("{name}: value {} vs {v}", sol.value));
            }
            if sol.max_residual > TOL {
                return Err(format!("{name}: residual {}", sol.max_residual));
            }
            if pointed {
                match vertex_optimum(lp) {
                    Some(b) if (b - v).abs() <= TOL => {}
                    other => return Err(format!("{name}: enumeration gives {other:?}")),
                }
            }
        }
        Expect::Infeasible => {
            if sol.status != LpStatus::Infeasible || vertex_optimum(lp).is_some() {
                return Err(format!("{name}: expected infeasible, got {:?}", sol.status));
            }
        }
        Expect::Unbounded => {
            if sol.status != LpStatus::Unbounded {
                return Err(format!("{name}: expected unbounded, got {:?}", sol.status));
            }
        }
    }
    Ok(())
}

/// Upper concave envelope at each curve point by exhaustive search over
/// chords.
pub fn brute_envelope(pts: &[(f64, f64)]) -> Vec<f64> {
    (0..pts.len())
        .map(|x| {
            let mut best = pts[x].1;
            for i in 0..=x {
                for j in x..pts.len() {
                    let (qi, ri) = pts[i];
                    let (qj, rj) = pts[j];
                    if qj > qi {
                        let t = (pts[x].0 - qi) / (qj - qi);
                        best = best.max(ri + t * (rj - ri));
                    }
                }
            }
            best
        })
        .collect()
}

/// Largest gap between the curve's ironed values and the slopes of the
/// brute-force envelope.
pub fn hull_error(curve: &IronedCurve) -> f64 {
    let pts = curve.revenue_points();
    let env = brute_envelope(&pts);
    let m = curve.grid().len();
    let mut worst = 0.0f64;
    for k in 0..m {
        let pos = m - 1 - k;
        let dq = pts[pos + 1].0 - pts[pos].0;
        if dq <= 1e-12 {
            continue;
        }
        let slope = (env[pos + 1] - env[pos]) / dq;
        worst = worst.max((curve.ironed()[k] - slope).abs());
    }
    worst
}

/// `n` evenly spaced points from `lo` (inclusive) to `hi` (exclusive).
pub fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| lo + (hi - lo) * k as f64 / n as f64)
        .collect()
}
