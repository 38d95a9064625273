//! Dense two-phase revised simplex.
//!
//! The problem is rewritten as `min c.z, A z = b, z >= 0, b >= 0`:
//! finite lower bounds are shifted out, upper-only variables are negated
//! and finite upper bounds become extra `<=` rows. Inequality rows get a
//! slack column. Free variables stay free: they may enter the basis in
//! either direction and never leave it through the ratio test.
//!
//! The starting basis uses every column that has a positive coefficient
//! in a single row (slacks first); only rows without one get an
//! artificial variable, so phase one is skipped entirely when the crash
//! basis is already feasible.
//!
//! The basis inverse is kept explicitly and updated with product-form
//! pivots, with a full refactorization every `refactor_every` pivots.
//! Pricing is Dantzig's rule; after a run of degenerate pivots the solver
//! falls back to Bland's rule until the objective moves again.

use super::{LpProblem, LpSolution, LpStatus, Sense, FEASIBILITY_TOL, OPTIMALITY_TOL};
use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-9;
const DEGENERATE_STEP: f64 = 1e-12;
const FEASIBILITY_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy)]
pub struct SimplexOptions {
    /// Consecutive degenerate pivots tolerated before switching to Bland's rule.
    pub bland_after: usize,
    pub refactor_every: Option<usize>,
    pub max_iterations: Option<usize>,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        SimplexOptions {
            bland_after: 50,
            refactor_every: None,
            max_iterations: None,
        }
    }
}

/// How an original variable is recovered from standard-form columns.
#[derive(Debug, Clone, Copy)]
enum VarMap {
    /// `x = offset + z[col]`
    Shift { col: usize, offset: f64 },
    /// `x = offset - z[col]`
    Mirror { col: usize, offset: f64 },
    /// `x = z[col]`, unrestricted in sign
    Free { col: usize },
}

#[derive(Debug, Clone)]
struct Column {
    entries: Vec<(usize, f64)>,
    cost: f64,
    artificial: bool,
    free: bool,
}

struct StandardForm {
    columns: Vec<Column>,
    rhs: Vec<f64>,
    n_struct: usize,
    maps: Vec<VarMap>,
    /// Initial basic column for each row.
    crash: Vec<usize>,
}

fn standardize(lp: &LpProblem) -> StandardForm {
    let n = lp.n_vars();
    let mut maps = Vec::with_capacity(n);
    let mut struct_cols: Vec<(usize, f64, bool)> = Vec::new(); // (orig var, sign, free)
    for b in &lp.bounds {
        let map = match (b.lower, b.upper) {
            (Some(l), _) => {
                struct_cols.push((maps.len(), 1.0, false));
                VarMap::Shift {
                    col: struct_cols.len() - 1,
                    offset: l,
                }
            }
            (None, Some(u)) => {
                struct_cols.push((maps.len(), -1.0, false));
                VarMap::Mirror {
                    col: struct_cols.len() - 1,
                    offset: u,
                }
            }
            (None, None) => {
                struct_cols.push((maps.len(), 1.0, true));
                VarMap::Free {
                    col: struct_cols.len() - 1,
                }
            }
        };
        maps.push(map);
    }
    let n_struct = struct_cols.len();

    // Rows as (dense coefficients over structural columns, sense, rhs).
    let mut rows: Vec<(Vec<f64>, Sense, f64)> = Vec::with_capacity(lp.n_rows());
    for ((row, &sense), &rhs) in lp.rows.iter().zip(&lp.senses).zip(&lp.rhs) {
        let mut coeffs = vec![0.0; n_struct];
        let mut b = rhs;
        for (j, &a) in row.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            match maps[j] {
                VarMap::Shift { col, offset } => {
                    coeffs[col] = a;
                    b -= a * offset;
                }
                VarMap::Mirror { col, offset } => {
                    coeffs[col] = -a;
                    b -= a * offset;
                }
                VarMap::Free { col } => {
                    coeffs[col] = a;
                }
            }
        }
        rows.push((coeffs, sense, b));
    }
    for (j, b) in lp.bounds.iter().enumerate() {
        if let (Some(l), Some(u)) = (b.lower, b.upper) {
            if let VarMap::Shift { col, .. } = maps[j] {
                let mut coeffs = vec![0.0; n_struct];
                coeffs[col] = 1.0;
                rows.push((coeffs, Sense::Le, u - l));
            }
        }
    }

    let n_rows = rows.len();
    let mut columns: Vec<Column> = struct_cols
        .iter()
        .map(|&(orig, sign, free)| Column {
            entries: Vec::new(),
            cost: sign * lp.objective[orig],
            artificial: false,
            free,
        })
        .collect();
    let mut rhs = Vec::with_capacity(n_rows);
    let mut slack_of_row: Vec<Option<usize>> = vec![None; n_rows];
    let mut flips = vec![1.0; n_rows];
    for (i, (_, sense, b)) in rows.iter().enumerate() {
        let slack_sign = match sense {
            Sense::Le => Some(1.0),
            Sense::Ge => Some(-1.0),
            Sense::Eq => None,
        };
        let flip = if *b < 0.0 || (*b == 0.0 && slack_sign == Some(-1.0)) {
            -1.0
        } else {
            1.0
        };
        flips[i] = flip;
        rhs.push(flip * b);
        if let Some(s) = slack_sign {
            columns.push(Column {
                entries: vec![(i, flip * s)],
                cost: 0.0,
                artificial: false,
                free: false,
            });
            slack_of_row[i] = Some(columns.len() - 1);
        }
    }
    for (i, (coeffs, _, _)) in rows.iter().enumerate() {
        for (j, &a) in coeffs.iter().enumerate() {
            if a != 0.0 {
                columns[j].entries.push((i, flips[i] * a));
            }
        }
    }

    let mut crash = vec![usize::MAX; n_rows];
    for i in 0..n_rows {
        if let Some(s) = slack_of_row[i] {
            if columns[s].entries[0].1 > 0.0 {
                crash[i] = s;
            }
        }
    }
    for (j, col) in columns.iter().enumerate().take(n_struct) {
        if let [(i, a)] = col.entries[..] {
            if a > 0.0 && crash[i] == usize::MAX {
                crash[i] = j;
            }
        }
    }
    for i in 0..n_rows {
        if crash[i] == usize::MAX {
            columns.push(Column {
                entries: vec![(i, 1.0)],
                cost: 0.0,
                artificial: true,
                free: false,
            });
            crash[i] = columns.len() - 1;
        }
    }

    StandardForm {
        columns,
        rhs,
        n_struct,
        maps,
        crash,
    }
}

enum Outcome {
    Optimal,
    Unbounded,
}

struct Solver<'a> {
    sf: &'a StandardForm,
    opts: SimplexOptions,
    rows: usize,
    basis: Vec<usize>,
    /// Row of each column in the basis, `usize::MAX` when nonbasic.
    position: Vec<usize>,
    binv: Vec<f64>,
    xb: Vec<f64>,
    y: Vec<f64>,
    cost: Vec<f64>,
    /// Orientation of each column; only free columns are ever flipped.
    sign: Vec<f64>,
    barred: Vec<bool>,
    iterations: usize,
    since_refactor: usize,
    degenerate_run: usize,
}

impl<'a> Solver<'a> {
    fn new(sf: &'a StandardForm, opts: SimplexOptions) -> Result<Self> {
        let rows = sf.rhs.len();
        let mut position = vec![usize::MAX; sf.columns.len()];
        for (i, &c) in sf.crash.iter().enumerate() {
            position[c] = i;
        }
        let mut s = Solver {
            sf,
            opts,
            rows,
            basis: sf.crash.clone(),
            position,
            binv: vec![0.0; rows * rows],
            xb: vec![0.0; rows],
            y: vec![0.0; rows],
            cost: vec![0.0; sf.columns.len()],
            sign: vec![1.0; sf.columns.len()],
            barred: vec![false; sf.columns.len()],
            iterations: 0,
            since_refactor: 0,
            degenerate_run: 0,
        };
        s.refactor()?;
        Ok(s)
    }

    fn refactor_interval(&self) -> usize {
        self.opts.refactor_every.unwrap_or(self.rows.max(64))
    }

    /// Rebuilds the basis inverse by Gauss-Jordan elimination with partial
    /// pivoting, then recomputes the basic values and duals.
    fn refactor(&mut self) -> Result<()> {
        let r = self.rows;
        let mut a = vec![0.0; r * r];
        for (k, &c) in self.basis.iter().enumerate() {
            for &(i, v) in &self.sf.columns[c].entries {
                a[i * r + k] = self.sign[c] * v;
            }
        }
        let mut inv = vec![0.0; r * r];
        for i in 0..r {
            inv[i * r + i] = 1.0;
        }
        for col in 0..r {
            let mut piv = col;
            let mut best = a[col * r + col].abs();
            for i in col + 1..r {
                let v = a[i * r + col].abs();
                if v > best {
                    best = v;
                    piv = i;
                }
            }
            if best < 1e-11 {
                return Err(Error::Numerical(format!(
                    "singular basis (pivot {best:e} in column {col})"
                )));
            }
            if piv != col {
                for k in 0..r {
                    a.swap(piv * r + k, col * r + k);
                    inv.swap(piv * r + k, col * r + k);
                }
            }
            let p = a[col * r + col];
            for k in 0..r {
                a[col * r + k] /= p;
                inv[col * r + k] /= p;
            }
            for i in 0..r {
                if i == col {
                    continue;
                }
                let f = a[i * r + col];
                if f != 0.0 {
                    for k in 0..r {
                        a[i * r + k] -= f * a[col * r + k];
                        inv[i * r + k] -= f * inv[col * r + k];
                    }
                }
            }
        }
        self.binv = inv;
        for i in 0..r {
            let row = &self.binv[i * r..(i + 1) * r];
            self.xb[i] = row.iter().zip(&self.sf.rhs).map(|(a, b)| a * b).sum();
        }
        self.recompute_duals();
        self.since_refactor = 0;
        Ok(())
    }

    fn recompute_duals(&mut self) {
        let r = self.rows;
        self.y.iter_mut().for_each(|v| *v = 0.0);
        for (k, &c) in self.basis.iter().enumerate() {
            let cb = self.sign[c] * self.cost[c];
            if cb != 0.0 {
                let row = &self.binv[k * r..(k + 1) * r];
                for (y, b) in self.y.iter_mut().zip(row) {
                    *y += cb * b;
                }
            }
        }
    }

    fn reduced_cost(&self, j: usize) -> f64 {
        let col = &self.sf.columns[j];
        let mut d = self.cost[j];
        for &(i, a) in &col.entries {
            d -= self.y[i] * a;
        }
        self.sign[j] * d
    }

    fn column_in_basis(&self, j: usize) -> Vec<f64> {
        let r = self.rows;
        let col = &self.sf.columns[j].entries;
        let sign = self.sign[j];
        (0..r)
            .map(|i| {
                let row = &self.binv[i * r..(i + 1) * r];
                sign * col.iter().map(|&(k, a)| row[k] * a).sum::<f64>()
            })
            .collect()
    }

    /// Entering column, its improving reduced cost, and whether the
    /// column (a free one) must be flipped to enter upwards.
    fn choose_entering(&self, bland: bool) -> Option<(usize, f64, bool)> {
        let mut best: Option<(usize, f64, bool)> = None;
        for j in 0..self.sf.columns.len() {
            if self.position[j] != usize::MAX || self.barred[j] {
                continue;
            }
            let d = self.reduced_cost(j);
            let (score, flip) = if d < -OPTIMALITY_TOL {
                (d, false)
            } else if self.sf.columns[j].free && d > OPTIMALITY_TOL {
                (-d, true)
            } else {
                continue;
            };
            if bland {
                return Some((j, score, flip));
            }
            if best.is_none_or(|(_, bd, _)| score < bd) {
                best = Some((j, score, flip));
            }
        }
        best
    }

    /// Two-pass (Harris) ratio test: the first pass finds the largest step
    /// keeping every basic value above `-FEASIBILITY_SLACK`, the second picks,
    /// among rows blocking within that step, the one with the largest pivot.
    /// Under Bland's rule the lowest basic index wins among pivots of
    /// comparable size.
    fn choose_leaving(&self, alpha: &[f64], bland: bool) -> Option<usize> {
        let eligible = |i: usize| alpha[i] > PIVOT_TOL && !self.sf.columns[self.basis[i]].free;
        let mut theta_max = f64::INFINITY;
        for i in (0..alpha.len()).filter(|&i| eligible(i)) {
            theta_max = theta_max.min((self.xb[i].max(0.0) + FEASIBILITY_SLACK) / alpha[i]);
        }
        if theta_max.is_infinite() {
            return None;
        }
        let candidates: Vec<usize> = (0..alpha.len())
            .filter(|&i| eligible(i) && self.xb[i].max(0.0) / alpha[i] <= theta_max)
            .collect();
        let amax = candidates.iter().map(|&i| alpha[i]).fold(0.0, f64::max);
        if bland {
            candidates
                .into_iter()
                .filter(|&i| alpha[i] >= 1e-2 * amax)
                .min_by_key(|&i| self.basis[i])
        } else {
            candidates.into_iter().find(|&i| alpha[i] == amax)
        }
    }

    fn pivot(&mut self, entering: usize, leave_row: usize, alpha: &[f64], d_entering: f64) {
        let r = self.rows;
        let piv = alpha[leave_row];
        let theta = self.xb[leave_row].max(0.0) / piv;
        for (x, &a) in self.xb.iter_mut().zip(alpha) {
            if a != 0.0 {
                *x -= theta * a;
            }
        }
        self.xb[leave_row] = theta;

        let (before, rest) = self.binv.split_at_mut(leave_row * r);
        let (pivot_row, after) = rest.split_at_mut(r);
        for v in pivot_row.iter_mut() {
            *v /= piv;
        }
        for (i, chunk) in before.chunks_exact_mut(r).enumerate() {
            let f = alpha[i];
            if f != 0.0 {
                for (v, p) in chunk.iter_mut().zip(pivot_row.iter()) {
                    *v -= f * p;
                }
            }
        }
        for (i, chunk) in after.chunks_exact_mut(r).enumerate() {
            let f = alpha[leave_row + 1 + i];
            if f != 0.0 {
                for (v, p) in chunk.iter_mut().zip(pivot_row.iter()) {
                    *v -= f * p;
                }
            }
        }
        for (y, p) in self.y.iter_mut().zip(pivot_row.iter()) {
            *y += d_entering * p;
        }

        let leaving = self.basis[leave_row];
        self.position[leaving] = usize::MAX;
        self.position[entering] = leave_row;
        self.basis[leave_row] = entering;

        if theta <= DEGENERATE_STEP {
            self.degenerate_run += 1;
        } else {
            self.degenerate_run = 0;
        }
        self.iterations += 1;
        self.since_refactor += 1;
    }

    fn iteration_cap(&self) -> usize {
        self.opts
            .max_iterations
            .unwrap_or(100 * (self.rows + self.sf.columns.len()) + 10_000)
    }

    fn run(&mut self) -> Result<Outcome> {
        let cap = self.iteration_cap();
        loop {
            if self.since_refactor >= self.refactor_interval() {
                self.refactor()?;
            }
            let bland = self.degenerate_run >= self.opts.bland_after;
            let Some((entering, d, flip)) = self.choose_entering(bland) else {
                if self.since_refactor == 0 {
                    return Ok(Outcome::Optimal);
                }
                // confirm optimality on a fresh factorization
                self.refactor()?;
                if self.choose_entering(false).is_none() {
                    return Ok(Outcome::Optimal);
                }
                continue;
            };
            if flip {
                self.sign[entering] = -self.sign[entering];
            }
            let alpha = self.column_in_basis(entering);
            let Some(leave_row) = self.choose_leaving(&alpha, bland) else {
                return Ok(Outcome::Unbounded);
            };
            self.pivot(entering, leave_row, &alpha, d);
            if self.iterations > cap {
                return Err(Error::Numerical(format!(
                    "iteration limit {cap} reached"
                )));
            }
        }
    }

    fn set_costs(&mut self, phase_one: bool) {
        for (j, col) in self.sf.columns.iter().enumerate() {
            self.cost[j] = if phase_one {
                if col.artificial {
                    1.0
                } else {
                    0.0
                }
            } else if col.artificial {
                0.0
            } else {
                col.cost
            };
        }
        self.recompute_duals();
        self.degenerate_run = 0;
    }

    /// Pivots zero-level artificials out of the basis where possible.
    fn drive_out_artificials(&mut self) {
        let r = self.rows;
        for row in 0..r {
            if !self.sf.columns[self.basis[row]].artificial {
                continue;
            }
            let binv_row = self.binv[row * r..(row + 1) * r].to_vec();
            let mut best: Option<(usize, f64)> = None;
            for (j, col) in self.sf.columns.iter().enumerate() {
                if col.artificial || self.position[j] != usize::MAX {
                    continue;
                }
                let v: f64 = col.entries.iter().map(|&(k, a)| binv_row[k] * a).sum();
                if v.abs() > PIVOT_TOL && best.is_none_or(|(_, b)| v.abs() > b.abs()) {
                    best = Some((j, v));
                }
            }
            if let Some((j, _)) = best {
                let alpha = self.column_in_basis(j);
                let d = self.reduced_cost(j);
                // a zero-level row: the step is degenerate, sign of alpha is irrelevant
                let keep = self.xb[row];
                self.xb[row] = 0.0;
                self.pivot(j, row, &alpha, d);
                self.xb[row] += keep.max(0.0) / alpha[row];
            }
        }
    }

    fn basic_values(&self) -> Vec<f64> {
        let mut z = vec![0.0; self.sf.columns.len()];
        for (i, &c) in self.basis.iter().enumerate() {
            z[c] = if self.sf.columns[c].free {
                self.sign[c] * self.xb[i]
            } else {
                self.xb[i].max(0.0)
            };
        }
        z
    }
}

/// Solves `lp` with default options.
pub fn solve_lp(lp: &LpProblem) -> Result<LpSolution> {
    solve_lp_with(lp, SimplexOptions::default())
}

pub fn solve_lp_with(lp: &LpProblem, opts: SimplexOptions) -> Result<LpSolution> {
    lp.validate()?;
    let sf = standardize(lp);
    let mut solver = Solver::new(&sf, opts)?;

    let rhs_scale = sf.rhs.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let has_artificial = sf.crash.iter().any(|&c| sf.columns[c].artificial);
    if has_artificial {
        solver.set_costs(true);
        solver.run()?;
        let infeasibility: f64 = solver
            .basis
            .iter()
            .zip(&solver.xb)
            .filter(|(&c, _)| sf.columns[c].artificial)
            .map(|(_, &v)| v.max(0.0))
            .sum();
        if infeasibility > FEASIBILITY_TOL * rhs_scale {
            return Ok(LpSolution {
                status: LpStatus::Infeasible,
                objective_value: f64::INFINITY,
                variable_values: Vec::new(),
                iterations: solver.iterations,
            });
        }
        solver.drive_out_artificials();
        for (j, col) in sf.columns.iter().enumerate() {
            solver.barred[j] = col.artificial;
        }
        solver.refactor()?;
    }
    solver.set_costs(false);
    let outcome = solver.run()?;
    if let Outcome::Unbounded = outcome {
        return Ok(LpSolution {
            status: LpStatus::Unbounded,
            objective_value: f64::NEG_INFINITY,
            variable_values: Vec::new(),
            iterations: solver.iterations,
        });
    }

    let worst = solver
        .basis
        .iter()
        .zip(&solver.xb)
        .filter(|(&c, _)| !sf.columns[c].free)
        .map(|(_, &v)| v)
        .reduce(f64::min);
    if let Some(worst) = worst {
        if worst < -FEASIBILITY_TOL * rhs_scale * 10.0 {
            return Err(Error::Numerical(format!(
                "basic variable drifted to {worst:e}"
            )));
        }
    }
    let z = solver.basic_values();
    let x: Vec<f64> = sf
        .maps
        .iter()
        .map(|m| match *m {
            VarMap::Shift { col, offset } => offset + z[col],
            VarMap::Mirror { col, offset } => offset - z[col],
            VarMap::Free { col } => z[col],
        })
        .collect();
    debug_assert!(sf.n_struct <= z.len());
    Ok(LpSolution {
        status: LpStatus::Optimal,
        objective_value: lp.objective_at(&x),
        variable_values: x,
        iterations: solver.iterations,
    })
}
