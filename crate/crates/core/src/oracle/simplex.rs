//! Dense two-phase primal simplex with Dantzig pricing, a Bland fallback on
//! stalls and periodic refactoring of the basis.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pivot and reduced-cost tolerance.
pub const PIVOT_TOL: f64 = 1e-9;
/// Largest acceptable phase-one objective for a feasible program.
const FEAS_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Maximize,
    Minimize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    /// Sparse coefficients `(variable, coefficient)`; repeated variables add up.
    pub coeffs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

/// `optimize c·x` subject to linear rows and per-variable bounds.
/// Variables default to `[0, ∞)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearProgram {
    direction: Direction,
    objective: Vec<f64>,
    constraints: Vec<Constraint>,
    bounds: Vec<(f64, f64)>,
}

impl LinearProgram {
    pub fn new(n_vars: usize, direction: Direction) -> Self {
        LinearProgram {
            direction,
            objective: vec![0.0; n_vars],
            constraints: Vec::new(),
            bounds: vec![(0.0, f64::INFINITY); n_vars],
        }
    }

    pub fn maximize(objective: Vec<f64>) -> Result<Self> {
        Self::with_objective(objective, Direction::Maximize)
    }

    pub fn minimize(objective: Vec<f64>) -> Result<Self> {
        Self::with_objective(objective, Direction::Minimize)
    }

    fn with_objective(objective: Vec<f64>, direction: Direction) -> Result<Self> {
        if let Some(c) = objective.iter().find(|c| !c.is_finite()) {
            return Err(Error::MalformedLp(format!(
                "objective coefficient {c} is not finite"
            )));
        }
        let mut lp = Self::new(objective.len(), direction);
        lp.objective = objective;
        Ok(lp)
    }

    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn n_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn set_objective(&mut self, var: usize, coeff: f64) -> Result<()> {
        self.check_var(var)?;
        if !coeff.is_finite() {
            return Err(Error::MalformedLp(format!(
                "objective coefficient {coeff} is not finite"
            )));
        }
        self.objective[var] = coeff;
        Ok(())
    }

    pub fn set_bounds(&mut self, var: usize, lo: f64, hi: f64) -> Result<()> {
        self.check_var(var)?;
        if lo.is_nan() || hi.is_nan() || lo > hi || lo == f64::INFINITY || hi == f64::NEG_INFINITY {
            return Err(Error::MalformedLp(format!("bounds [{lo}, {hi}] on x{var}")));
        }
        self.bounds[var] = (lo, hi);
        Ok(())
    }

    pub fn add_constraint(
        &mut self,
        coeffs: Vec<(usize, f64)>,
        sense: Sense,
        rhs: f64,
    ) -> Result<()> {
        for &(j, a) in &coeffs {
            self.check_var(j)?;
            if !a.is_finite() {
                return Err(Error::MalformedLp(format!(
                    "coefficient {a} on x{j} is not finite"
                )));
            }
        }
        if !rhs.is_finite() {
            return Err(Error::MalformedLp(format!(
                "right-hand side {rhs} is not finite"
            )));
        }
        self.constraints.push(Constraint { coeffs, sense, rhs });
        Ok(())
    }

    /// Adds a row given as a dense coefficient vector, which must have one
    /// entry per variable.
    pub fn add_dense(&mut self, row: &[f64], sense: Sense, rhs: f64) -> Result<()> {
        if row.len() != self.n_vars() {
            return Err(Error::MalformedLp(format!(
                "row has {} coefficients, program has {} variables",
                row.len(),
                self.n_vars()
            )));
        }
        let coeffs = row
            .iter()
            .enumerate()
            .filter(|(_, a)| **a != 0.0)
            .map(|(j, a)| (j, *a))
            .collect();
        self.add_constraint(coeffs, sense, rhs)
    }

    fn check_var(&self, var: usize) -> Result<()> {
        if var >= self.n_vars() {
            Err(Error::MalformedLp(format!(
                "variable index {var} out of range for {} variables",
                self.n_vars()
            )))
        } else {
            Ok(())
        }
    }

    /// Largest violation of any row or bound at `x`.
    pub fn max_residual(&self, x: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for c in &self.constraints {
            let lhs: f64 = c.coeffs.iter().map(|(j, a)| a * x[*j]).sum();
            let r = match c.sense {
                Sense::Le => lhs - c.rhs,
                Sense::Ge => c.rhs - lhs,
                Sense::Eq => (lhs - c.rhs).abs(),
            };
            worst = worst.max(r);
        }
        for (xj, (lo, hi)) in x.iter().zip(&self.bounds) {
            worst = worst.max(lo - xj).max(xj - hi);
        }
        worst
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Objective value; NaN unless optimal.
    pub value: f64,
    /// Primal solution; empty unless optimal.
    pub x: Vec<f64>,
    pub max_residual: f64,
    pub pivots: usize,
}

/// How an original variable is expressed through nonnegative columns.
#[derive(Debug, Clone, Copy)]
enum VarMap {
    /// x = offset + y
    Shift { col: usize, offset: f64 },
    /// x = offset - y
    Flip { col: usize, offset: f64 },
    /// x = y⁺ - y⁻
    Free { pos: usize, neg: usize },
}

impl VarMap {
    fn value(&self, y: &[f64]) -> f64 {
        match *self {
            VarMap::Shift { col, offset } => offset + y[col],
            VarMap::Flip { col, offset } => offset - y[col],
            VarMap::Free { pos, neg } => y[pos] - y[neg],
        }
    }
}

struct Tableau {
    rows: usize,
    width: usize,
    /// Row-major, `width + 1` entries per row; the last is the right-hand side.
    a: Vec<f64>,
    /// Reduced costs of the current objective (minimizing form: entering
    /// columns have negative reduced cost); last entry is minus the value.
    z: Vec<f64>,
    basis: Vec<usize>,
    blocked: Vec<bool>,
    pivots: usize,
    limit: usize,
    /// Initial tableau, used to refactor the current basis.
    orig: Vec<f64>,
    init_basis: Vec<usize>,
    costs: Vec<f64>,
    since_refactor: usize,
}

impl Tableau {
    fn stride(&self) -> usize {
        self.width + 1
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.stride() + j]
    }

    fn rhs(&self, i: usize) -> f64 {
        self.a[i * self.stride() + self.width]
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let s = self.stride();
        let p = self.a[r * s + c];
        let (before, rest) = self.a.split_at_mut(r * s);
        let (prow, after) = rest.split_at_mut(s);
        for v in prow.iter_mut() {
            *v /= p;
        }
        prow[c] = 1.0;
        let nz: Vec<usize> = (0..s).filter(|&j| prow[j] != 0.0).collect();
        let eliminate = |row: &mut [f64]| {
            let f = row[c];
            if f != 0.0 {
                for &j in &nz {
                    let v = row[j] - f * prow[j];
                    row[j] = if v.abs() < 1e-14 { 0.0 } else { v };
                }
                row[c] = 0.0;
            }
        };
        for row in before.chunks_mut(s) {
            eliminate(row);
        }
        for row in after.chunks_mut(s) {
            eliminate(row);
        }
        eliminate(&mut self.z);
        self.basis[r] = c;
        self.pivots += 1;
        self.since_refactor += 1;
    }

    /// Pivots to optimality. Returns false if unbounded.
    ///
    /// Entering columns are priced by most negative reduced cost; after
    /// `STALL` consecutive degenerate pivots the smallest-index (Bland) rule
    /// takes over until the objective moves again, which rules out cycling.
    /// The basis is refactored from the original data periodically and again
    /// before optimality is declared.
    fn optimize(&mut self) -> Result<bool> {
        const STALL: usize = 8;
        const REFACTOR_EVERY: usize = 100;
        let mut degenerate = 0;
        let mut verified = false;
        loop {
            if self.since_refactor >= REFACTOR_EVERY {
                self.refactor();
            }
            let bland = degenerate >= STALL;
            let mut entering: Option<(usize, f64)> = None;
            for j in 0..self.width {
                let r = self.z[j];
                if self.blocked[j] || r >= -PIVOT_TOL {
                    continue;
                }
                if bland {
                    entering = Some((j, r));
                    break;
                }
                if entering.is_none_or(|(_, best)| r < best) {
                    entering = Some((j, r));
                }
            }
            let Some((c, _)) = entering else {
                if verified || self.since_refactor == 0 {
                    return Ok(true);
                }
                self.refactor();
                verified = true;
                continue;
            };
            verified = false;
            let leave = if bland {
                self.ratio_bland(c)
            } else {
                self.ratio_harris(c)
            };
            let Some((r, ratio)) = leave else {
                return Ok(false);
            };
            if self.pivots >= self.limit {
                return Err(Error::IterationLimit(self.pivots));
            }
            degenerate = if ratio <= 1e-12 { degenerate + 1 } else { 0 };
            self.pivot(r, c);
        }
    }

    /// Minimum ratio with ties broken toward the smallest basic index.
    fn ratio_bland(&self, c: usize) -> Option<(usize, f64)> {
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..self.rows {
            let aic = self.at(i, c);
            if aic > PIVOT_TOL {
                let ratio = self.rhs(i).max(0.0) / aic;
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((l, best)) => {
                        let tol = 1e-12 * best.abs().max(1.0);
                        if ratio < best - tol
                            || (ratio <= best + tol && self.basis[i] < self.basis[l])
                        {
                            Some((i, ratio))
                        } else {
                            Some((l, best))
                        }
                    }
                };
            }
        }
        leave
    }

    /// Two-pass ratio test: among rows whose ratio is within a small primal
    /// tolerance of the minimum, take the largest pivot element.
    fn ratio_harris(&self, c: usize) -> Option<(usize, f64)> {
        const DELTA: f64 = 1e-9;
        let mut bound = f64::INFINITY;
        for i in 0..self.rows {
            let aic = self.at(i, c);
            if aic > PIVOT_TOL {
                bound = bound.min((self.rhs(i).max(0.0) + DELTA) / aic);
            }
        }
        if bound.is_infinite() {
            return None;
        }
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..self.rows {
            let aic = self.at(i, c);
            if aic > PIVOT_TOL {
                let ratio = self.rhs(i).max(0.0) / aic;
                if ratio <= bound && leave.is_none_or(|(l, _)| aic > self.at(l, c)) {
                    leave = Some((i, ratio));
                }
            }
        }
        leave
    }

    /// Rebuilds the tableau for the current basis from the original rows by
    /// Gauss-Jordan elimination with partial pivoting, then reprices.
    fn refactor(&mut self) {
        let s = self.stride();
        let basis = std::mem::take(&mut self.basis);
        self.a.copy_from_slice(&self.orig);
        self.basis = self.init_basis.clone();
        let pivots = self.pivots;
        let mut assigned = vec![false; self.rows];
        // Columns outside the initial basis first; initial unit columns can
        // then fill the remaining rows.
        let initial: Vec<bool> = {
            let mut v = vec![false; self.width];
            for &j in &self.init_basis {
                v[j] = true;
            }
            v
        };
        let mut pending = basis;
        pending.sort_by_key(|&c| initial[c]);
        for &c in &pending {
            let mut best: Option<(usize, f64)> = None;
            for i in 0..self.rows {
                if assigned[i] {
                    continue;
                }
                let v = self.at(i, c).abs();
                if v > 1e-11 && best.is_none_or(|(_, b)| v > b) {
                    best = Some((i, v));
                }
            }
            if let Some((r, _)) = best {
                self.pivot(r, c);
                assigned[r] = true;
            }
        }
        self.pivots = pivots;
        for i in 0..self.rows {
            let v = self.a[i * s + self.width];
            if v < 0.0 && v > -1e-9 {
                self.a[i * s + self.width] = 0.0;
            }
        }
        let costs = std::mem::take(&mut self.costs);
        self.set_costs(&costs);
        self.since_refactor = 0;
    }

    /// Installs a cost vector (minimization form) and prices out the basis.
    fn set_costs(&mut self, costs: &[f64]) {
        let s = self.stride();
        self.costs = costs.to_vec();
        self.z = vec![0.0; s];
        self.z[..costs.len()].copy_from_slice(costs);
        for i in 0..self.rows {
            let cb = self.z[self.basis[i]];
            if cb != 0.0 {
                for j in 0..s {
                    self.z[j] -= cb * self.a[i * s + j];
                }
            }
        }
    }
}

/// Sparse row with its sense and right-hand side.
type Row = (Vec<(usize, f64)>, Sense, f64);

/// Solves the program, returning its status, value and an optimal basic
/// solution.
///
/// A maximization with only `≤` rows over nonnegative variables and many
/// more rows than variables is solved through its dual, which has one row
/// per variable; the primal point is read off the dual's reduced costs and
/// checked, with a fallback to the primal tableau.
pub fn solve_lp(lp: &LinearProgram) -> Result<LpSolution> {
    if let Some(sol) = solve_by_dual(lp)? {
        return Ok(sol);
    }
    solve_primal(lp).map(|(sol, _)| sol)
}

fn solve_by_dual(lp: &LinearProgram) -> Result<Option<LpSolution>> {
    let n = lp.n_vars();
    let m = lp.n_constraints();
    let eligible = lp.direction == Direction::Maximize
        && m > 2 * n
        && lp.constraints.iter().all(|c| c.sense == Sense::Le)
        && lp
            .bounds
            .iter()
            .all(|&(lo, hi)| lo == 0.0 && hi == f64::INFINITY);
    if !eligible {
        return Ok(None);
    }
    // min b·y  subject to  Aᵀy ≥ c,  y ≥ 0.
    let mut columns: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (i, c) in lp.constraints.iter().enumerate() {
        for &(j, a) in &c.coeffs {
            columns[j].push((i, a));
        }
    }
    let mut dual = LinearProgram::minimize(lp.constraints.iter().map(|c| c.rhs).collect())?;
    for (j, col) in columns.into_iter().enumerate() {
        dual.add_constraint(col, Sense::Ge, lp.objective[j])?;
    }
    let (sol, prices) = solve_primal(&dual)?;
    if sol.status != LpStatus::Optimal {
        return Ok(None);
    }
    let x: Vec<f64> = prices.iter().map(|p| p.max(0.0)).collect();
    let value = lp.evaluate(&x);
    let max_residual = lp.max_residual(&x);
    let scale = value.abs().max(1.0);
    if max_residual > 1e-9 * scale || (value - sol.value).abs() > 1e-9 * scale {
        log::debug!(
            "dual solve rejected: residual {max_residual}, gap {}",
            value - sol.value
        );
        return Ok(None);
    }
    Ok(Some(LpSolution {
        status: LpStatus::Optimal,
        value,
        x,
        max_residual,
        pivots: sol.pivots,
    }))
}

/// Solves with the two-phase tableau. Also returns, per constraint, the
/// final reduced cost of its slack or surplus column (NaN for equalities);
/// for a `≥` row of a minimization this is the row's dual price.
fn solve_primal(lp: &LinearProgram) -> Result<(LpSolution, Vec<f64>)> {
    let n = lp.n_vars();
    let sign = match lp.direction {
        Direction::Maximize => -1.0,
        Direction::Minimize => 1.0,
    };

    // Map original variables onto nonnegative columns.
    let mut maps = Vec::with_capacity(n);
    let mut ncols = 0;
    let mut extra_rows: Vec<(usize, f64)> = Vec::new();
    for &(lo, hi) in &lp.bounds {
        if lo.is_finite() {
            maps.push(VarMap::Shift {
                col: ncols,
                offset: lo,
            });
            if hi.is_finite() {
                extra_rows.push((ncols, hi - lo));
            }
            ncols += 1;
        } else if hi.is_finite() {
            maps.push(VarMap::Flip {
                col: ncols,
                offset: hi,
            });
            ncols += 1;
        } else {
            maps.push(VarMap::Free {
                pos: ncols,
                neg: ncols + 1,
            });
            ncols += 2;
        }
    }

    // Rows over y with nonnegative right-hand sides.
    let mut rows: Vec<Row> = Vec::new();
    for c in &lp.constraints {
        let mut coeffs = Vec::with_capacity(c.coeffs.len());
        let mut rhs = c.rhs;
        for &(j, a) in &c.coeffs {
            match maps[j] {
                VarMap::Shift { col, offset } => {
                    coeffs.push((col, a));
                    rhs -= a * offset;
                }
                VarMap::Flip { col, offset } => {
                    coeffs.push((col, -a));
                    rhs -= a * offset;
                }
                VarMap::Free { pos, neg } => {
                    coeffs.push((pos, a));
                    coeffs.push((neg, -a));
                }
            }
        }
        rows.push((coeffs, c.sense, rhs));
    }
    for (col, ub) in extra_rows {
        rows.push((vec![(col, 1.0)], Sense::Le, ub));
    }
    for row in rows.iter_mut() {
        if row.2 < 0.0 {
            for e in row.0.iter_mut() {
                e.1 = -e.1;
            }
            row.2 = -row.2;
            row.1 = match row.1 {
                Sense::Le => Sense::Ge,
                Sense::Ge => Sense::Le,
                Sense::Eq => Sense::Eq,
            };
        }
    }

    // Column layout: structural, then slack/surplus, then artificial.
    let m = rows.len();
    let n_slack = rows.iter().filter(|r| r.1 != Sense::Eq).count();
    let n_art = rows.iter().filter(|r| r.1 != Sense::Le).count();
    let width = ncols + n_slack + n_art;
    let stride = width + 1;
    let mut a = vec![0.0; m * stride];
    let mut basis = vec![0; m];
    let mut slack = ncols;
    let mut art = ncols + n_slack;
    let mut row_slack: Vec<Option<usize>> = vec![None; m];
    for (i, (coeffs, sense, rhs)) in rows.iter().enumerate() {
        let row = &mut a[i * stride..(i + 1) * stride];
        for &(j, v) in coeffs {
            row[j] += v;
        }
        row[width] = *rhs;
        match sense {
            Sense::Le => {
                row[slack] = 1.0;
                basis[i] = slack;
                row_slack[i] = Some(slack);
                slack += 1;
            }
            Sense::Ge => {
                row[slack] = -1.0;
                row_slack[i] = Some(slack);
                slack += 1;
                row[art] = 1.0;
                basis[i] = art;
                art += 1;
            }
            Sense::Eq => {
                row[art] = 1.0;
                basis[i] = art;
                art += 1;
            }
        }
    }
    let art_start = ncols + n_slack;
    let mut t = Tableau {
        rows: m,
        width,
        a,
        z: Vec::new(),
        basis,
        blocked: vec![false; width],
        pivots: 0,
        limit: 50 * (m + width) + 10_000,
        orig: Vec::new(),
        init_basis: Vec::new(),
        costs: Vec::new(),
        since_refactor: 0,
    };
    t.orig = t.a.clone();
    t.init_basis = t.basis.clone();

    // Phase one: minimize the sum of artificials.
    if n_art > 0 {
        let mut costs = vec![0.0; width];
        for c in costs.iter_mut().skip(art_start) {
            *c = 1.0;
        }
        t.set_costs(&costs);
        t.optimize()?;
        let infeasibility = -t.z[width];
        if infeasibility > FEAS_TOL {
            let sol = LpSolution {
                status: LpStatus::Infeasible,
                value: f64::NAN,
                x: Vec::new(),
                max_residual: infeasibility,
                pivots: t.pivots,
            };
            return Ok((sol, Vec::new()));
        }
        // Drive zero-level artificials out of the basis where possible;
        // rows where that fails are redundant and keep a frozen artificial.
        for i in 0..m {
            if t.basis[i] >= art_start {
                if let Some(j) = (0..art_start).find(|&j| t.at(i, j).abs() > PIVOT_TOL) {
                    t.pivot(i, j);
                }
            }
        }
        for b in t.blocked.iter_mut().skip(art_start) {
            *b = true;
        }
    }

    // Phase two.
    let mut costs = vec![0.0; width];
    for (j, map) in maps.iter().enumerate() {
        let c = sign * lp.objective[j];
        match *map {
            VarMap::Shift { col, .. } => costs[col] += c,
            VarMap::Flip { col, .. } => costs[col] -= c,
            VarMap::Free { pos, neg } => {
                costs[pos] += c;
                costs[neg] -= c;
            }
        }
    }
    t.set_costs(&costs);
    if !t.optimize()? {
        let sol = LpSolution {
            status: LpStatus::Unbounded,
            value: f64::NAN,
            x: Vec::new(),
            max_residual: 0.0,
            pivots: t.pivots,
        };
        return Ok((sol, Vec::new()));
    }

    let mut y = vec![0.0; width];
    for i in 0..m {
        y[t.basis[i]] = t.rhs(i).max(0.0);
    }
    let x: Vec<f64> = maps.iter().map(|mp| mp.value(&y)).collect();
    let prices = row_slack[..lp.n_constraints()]
        .iter()
        .map(|c| c.map_or(f64::NAN, |c| t.z[c]))
        .collect();
    let sol = LpSolution {
        status: LpStatus::Optimal,
        value: lp.evaluate(&x),
        max_residual: lp.max_residual(&x),
        x,
        pivots: t.pivots,
    };
    Ok((sol, prices))
}
