//! Standard-form linear programs and a dense two-phase primal simplex.
//!
//! Problems are `min c·z` subject to `A_eq z = b_eq`, `A_ub z ≤ b_ub`, `z ≥ 0`.
//! Pivoting follows Bland's rule (lowest-index entering column, lowest-index
//! basic variable among ratio-test ties), so a given program always produces
//! the same basis. After the simplex terminates the final basis is
//! re-factorized against the original data to recover clean primal values and
//! the dual prices of every row.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const PIVOT_TOL: f64 = 1e-10;
pub const FEAS_TOL: f64 = 1e-9;
const OPT_TOL: f64 = 1e-10;
const MAX_PIVOTS: usize = 200_000;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub a_eq: Vec<Vec<f64>>,
    pub b_eq: Vec<f64>,
    pub a_ub: Vec<Vec<f64>>,
    pub b_ub: Vec<f64>,
    pub names: Vec<String>,
}

impl LinearProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    /// Adds a nonnegative variable and returns its column index.
    pub fn add_var(&mut self, name: impl Into<String>, cost: f64) -> usize {
        self.objective.push(cost);
        self.names.push(name.into());
        for row in self.a_eq.iter_mut().chain(self.a_ub.iter_mut()) {
            row.push(0.0);
        }
        self.objective.len() - 1
    }

    fn dense(&self, terms: &[(usize, f64)]) -> Vec<f64> {
        let mut row = vec![0.0; self.num_vars()];
        for &(j, v) in terms {
            row[j] += v;
        }
        row
    }

    /// Adds `Σ terms = rhs` and returns the row index in the equality block.
    pub fn add_eq(&mut self, terms: &[(usize, f64)], rhs: f64) -> usize {
        let row = self.dense(terms);
        self.a_eq.push(row);
        self.b_eq.push(rhs);
        self.a_eq.len() - 1
    }

    /// Adds `Σ terms ≤ rhs` and returns the row index in the inequality block.
    pub fn add_le(&mut self, terms: &[(usize, f64)], rhs: f64) -> usize {
        let row = self.dense(terms);
        self.a_ub.push(row);
        self.b_ub.push(rhs);
        self.a_ub.len() - 1
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        if self.names.len() != n {
            return Err(Error::InvalidProgram(format!("{} names for {n} variables", self.names.len())));
        }
        if self.a_eq.len() != self.b_eq.len() || self.a_ub.len() != self.b_ub.len() {
            return Err(Error::InvalidProgram("row count differs from right-hand side length".into()));
        }
        for row in self.a_eq.iter().chain(&self.a_ub) {
            if row.len() != n {
                return Err(Error::InvalidProgram(format!("row of length {} for {n} variables", row.len())));
            }
        }
        let finite = self
            .objective
            .iter()
            .chain(self.b_eq.iter())
            .chain(self.b_ub.iter())
            .chain(self.a_eq.iter().flatten())
            .chain(self.a_ub.iter().flatten())
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidProgram("non-finite coefficient".into()));
        }
        Ok(())
    }

    /// `max(‖A_eq z − b_eq‖∞, max(A_ub z − b_ub)⁺, max(−z)⁺)`.
    pub fn residual(&self, z: &[f64]) -> f64 {
        let dot = |row: &[f64]| row.iter().zip(z).map(|(a, v)| a * v).sum::<f64>();
        let eq = self.a_eq.iter().zip(&self.b_eq).map(|(r, b)| (dot(r) - b).abs());
        let ub = self.a_ub.iter().zip(&self.b_ub).map(|(r, b)| (dot(r) - b).max(0.0));
        let nn = z.iter().map(|v| (-v).max(0.0));
        eq.chain(ub).chain(nn).fold(0.0, f64::max)
    }

    pub fn objective_value(&self, z: &[f64]) -> f64 {
        self.objective.iter().zip(z).map(|(c, v)| c * v).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LpSolution {
    pub status: LpStatus,
    pub objective: f64,
    /// Primal values of the structural variables (empty unless optimal).
    pub z: Vec<f64>,
    /// Sorted basic columns. Columns `0..n` are structural, `n + i` is the
    /// slack of inequality row `i`.
    pub basis: Vec<usize>,
    pub iterations: usize,
    /// Dual prices `∂(optimal value)/∂b_eq[i]`.
    pub duals_eq: Vec<f64>,
    /// Dual prices `∂(optimal value)/∂b_ub[i]` (nonpositive at an optimum).
    pub duals_ub: Vec<f64>,
}

impl LpSolution {
    fn without_point(status: LpStatus, iterations: usize) -> Self {
        let objective = match status {
            LpStatus::Unbounded => f64::NEG_INFINITY,
            _ => f64::NAN,
        };
        Self {
            status,
            objective,
            z: Vec::new(),
            basis: Vec::new(),
            iterations,
            duals_eq: Vec::new(),
            duals_ub: Vec::new(),
        }
    }
}

/// Dense tableau over the sign-normalized standard form.
struct Tableau {
    /// Structural + slack columns.
    n_real: usize,
    /// Total columns including artificials.
    n_cols: usize,
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    basis: Vec<usize>,
    /// Original row id (eq rows first, then ub rows) for each tableau row.
    origin: Vec<usize>,
    iterations: usize,
}

enum Outcome {
    Optimal,
    Unbounded,
}

impl Tableau {
    fn reduced_costs(&self, cost: &[f64]) -> Vec<f64> {
        let mut r = cost.to_vec();
        for (i, row) in self.rows.iter().enumerate() {
            let cb = cost[self.basis[i]];
            if cb != 0.0 {
                r.iter_mut().zip(row).for_each(|(rj, a)| *rj -= cb * a);
            }
        }
        r
    }

    fn objective(&self, cost: &[f64]) -> f64 {
        self.basis.iter().zip(&self.rhs).map(|(&b, v)| cost[b] * v).sum()
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.rows[r][c];
        self.rows[r].iter_mut().for_each(|v| *v /= p);
        self.rhs[r] /= p;
        self.rows[r][c] = 1.0;
        let pivot_row = self.rows[r].clone();
        let pivot_rhs = self.rhs[r];
        for i in 0..self.rows.len() {
            if i == r {
                continue;
            }
            let f = self.rows[i][c];
            if f == 0.0 {
                continue;
            }
            self.rows[i].iter_mut().zip(&pivot_row).for_each(|(v, p)| *v -= f * p);
            self.rows[i][c] = 0.0;
            self.rhs[i] -= f * pivot_rhs;
            if self.rhs[i].abs() < 1e-15 {
                self.rhs[i] = 0.0;
            }
        }
        self.basis[r] = c;
        self.iterations += 1;
    }

    /// Bland's rule over columns `0..allowed`.
    fn run(&mut self, cost: &[f64], allowed: usize) -> Result<Outcome> {
        loop {
            if self.iterations > MAX_PIVOTS {
                return Err(Error::NumericalFailure("simplex pivot limit exceeded".into()));
            }
            let r = self.reduced_costs(cost);
            let Some(enter) = (0..allowed).find(|&j| r[j] < -OPT_TOL && !self.basis.contains(&j)) else {
                return Ok(Outcome::Optimal);
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.rows.len() {
                let a = self.rows[i][enter];
                if a <= PIVOT_TOL {
                    continue;
                }
                let ratio = self.rhs[i].max(0.0) / a;
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((bi, br)) => {
                        let tie = (ratio - br).abs() <= 1e-12 * (1.0 + br.abs());
                        if ratio < br && !tie || tie && self.basis[i] < self.basis[bi] {
                            Some((i, ratio))
                        } else {
                            Some((bi, br))
                        }
                    }
                };
            }
            match leave {
                None => return Ok(Outcome::Unbounded),
                Some((i, _)) => self.pivot(i, enter),
            }
        }
    }
}

struct StandardForm {
    n: usize,
    m_eq: usize,
    /// Rows over structural + slack columns, sign-normalized so `rhs ≥ 0`.
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    /// `-1` where the original row was negated.
    sign: Vec<f64>,
}

impl StandardForm {
    fn new(lp: &LinearProgram) -> Self {
        let n = lp.num_vars();
        let m_eq = lp.a_eq.len();
        let m_ub = lp.a_ub.len();
        let n_real = n + m_ub;
        let mut rows = Vec::with_capacity(m_eq + m_ub);
        let mut rhs = Vec::with_capacity(m_eq + m_ub);
        let mut sign = Vec::with_capacity(m_eq + m_ub);
        let rows_in = lp.a_eq.iter().zip(&lp.b_eq).chain(lp.a_ub.iter().zip(&lp.b_ub));
        for (k, (row, &b)) in rows_in.enumerate() {
            let mut full = vec![0.0; n_real];
            full[..n].copy_from_slice(row);
            if k >= m_eq {
                full[n + k - m_eq] = 1.0;
            }
            let s = if b < 0.0 { -1.0 } else { 1.0 };
            if s < 0.0 {
                full.iter_mut().for_each(|v| *v = -*v);
            }
            rows.push(full);
            rhs.push(s * b);
            sign.push(s);
        }
        Self { n, m_eq, rows, rhs, sign }
    }

    fn n_real(&self) -> usize {
        self.rows.first().map_or(self.n, |r| r.len())
    }

    /// Initial tableau: nonnegated slacks start basic, other rows get an artificial.
    fn tableau(&self) -> Tableau {
        let n_real = self.n_real();
        let m = self.rows.len();
        let mut basis = Vec::with_capacity(m);
        let mut n_art = 0;
        for k in 0..m {
            if k >= self.m_eq && self.sign[k] > 0.0 {
                basis.push(self.n + k - self.m_eq);
            } else {
                basis.push(n_real + n_art);
                n_art += 1;
            }
        }
        let n_cols = n_real + n_art;
        let rows = self
            .rows
            .iter()
            .enumerate()
            .map(|(k, r)| {
                let mut full = r.clone();
                full.resize(n_cols, 0.0);
                if basis[k] >= n_real {
                    full[basis[k]] = 1.0;
                }
                full
            })
            .collect();
        Tableau {
            n_real,
            n_cols,
            rows,
            rhs: self.rhs.clone(),
            basis,
            origin: (0..m).collect(),
            iterations: 0,
        }
    }
}

/// Phase one. Returns the tableau with every artificial driven out of the
/// basis (redundant rows are dropped), or `None` when infeasible.
fn phase_one(sf: &StandardForm) -> Result<Option<Tableau>> {
    let mut t = sf.tableau();
    let cost: Vec<f64> = (0..t.n_cols).map(|j| if j >= t.n_real { 1.0 } else { 0.0 }).collect();
    if t.basis.iter().any(|&b| b >= t.n_real) {
        t.run(&cost, t.n_cols)?;
    }
    if t.objective(&cost) > FEAS_TOL {
        return Ok(None);
    }
    let mut i = 0;
    while i < t.rows.len() {
        if t.basis[i] < t.n_real {
            i += 1;
            continue;
        }
        match (0..t.n_real).find(|&j| t.rows[i][j].abs() > PIVOT_TOL && !t.basis.contains(&j)) {
            Some(j) => {
                t.pivot(i, j);
                i += 1;
            }
            None => {
                t.rows.remove(i);
                t.rhs.remove(i);
                t.basis.remove(i);
                t.origin.remove(i);
            }
        }
    }
    Ok(Some(t))
}

/// Rows on which the basic columns are nonsingular, chosen by elimination
/// with row pivoting over all original rows. Rows left out are redundant
/// and get a zero dual price.
fn independent_rows(rows: &[Vec<f64>], basis: &[usize]) -> Option<Vec<usize>> {
    let mut m: Vec<Vec<f64>> = rows.iter().map(|r| basis.iter().map(|&j| r[j]).collect()).collect();
    let mut free: Vec<usize> = (0..rows.len()).collect();
    let mut chosen = Vec::with_capacity(basis.len());
    for col in 0..basis.len() {
        let (pos, &piv) = free.iter().enumerate().max_by(|a, b| m[*a.1][col].abs().total_cmp(&m[*b.1][col].abs()))?;
        if m[piv][col].abs() < 1e-12 {
            return None;
        }
        free.remove(pos);
        chosen.push(piv);
        for &r in &free {
            let f = m[r][col] / m[piv][col];
            if f != 0.0 {
                for c in col..basis.len() {
                    m[r][c] -= f * m[piv][c];
                }
            }
        }
    }
    chosen.sort_unstable();
    Some(chosen)
}

/// Solves `m x = b` by Gaussian elimination with partial pivoting.
fn dense_solve(mut m: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[piv][col].abs() < 1e-14 {
            return None;
        }
        m.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = m[r][col] / m[col][col];
            if f != 0.0 {
                for c in col..n {
                    m[r][c] -= f * m[col][c];
                }
                b[r] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| m[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / m[r][r];
    }
    Some(x)
}

/// Solves `lp` to optimality, infeasibility, or unboundedness.
pub fn solve(lp: &LinearProgram) -> Result<LpSolution> {
    lp.validate()?;
    let sf = StandardForm::new(lp);
    let Some(mut t) = phase_one(&sf)? else {
        return Ok(LpSolution::without_point(LpStatus::Infeasible, 0));
    };
    let n = lp.num_vars();
    let mut cost = vec![0.0; t.n_cols];
    cost[..n].copy_from_slice(&lp.objective);
    if let Outcome::Unbounded = t.run(&cost, t.n_real)? {
        return Ok(LpSolution::without_point(LpStatus::Unbounded, t.iterations));
    }

    // Refactorize the final basis against the original rows.
    let m = t.rows.len();
    let kept = independent_rows(&sf.rows, &t.basis).unwrap_or_else(|| t.origin.clone());
    let bmat: Vec<Vec<f64>> = kept.iter().map(|&k| t.basis.iter().map(|&j| sf.rows[k][j]).collect()).collect();
    let brhs: Vec<f64> = kept.iter().map(|&k| sf.rhs[k]).collect();
    let mut values = vec![0.0; t.n_real];
    match dense_solve(bmat.clone(), brhs) {
        Some(xb) if xb.iter().all(|v| *v >= -FEAS_TOL) => {
            for (&j, v) in t.basis.iter().zip(xb) {
                values[j] = v.max(0.0);
            }
        }
        _ => {
            for (&j, &v) in t.basis.iter().zip(&t.rhs) {
                values[j] = v.max(0.0);
            }
        }
    }
    let transposed: Vec<Vec<f64>> = (0..m).map(|c| (0..m).map(|r| bmat[r][c]).collect()).collect();
    let cb: Vec<f64> = t.basis.iter().map(|&j| cost[j]).collect();
    let y = dense_solve(transposed, cb).unwrap_or_else(|| vec![0.0; m]);
    let mut duals = vec![0.0; sf.rows.len()];
    for (&k, yk) in kept.iter().zip(y) {
        duals[k] = sf.sign[k] * yk;
    }
    let duals_ub = duals.split_off(sf.m_eq);

    let z = values[..n].to_vec();
    let mut basis = t.basis.clone();
    basis.sort_unstable();
    Ok(LpSolution {
        status: LpStatus::Optimal,
        objective: lp.objective_value(&z),
        z,
        basis,
        iterations: t.iterations,
        duals_eq: duals,
        duals_ub,
    })
}

/// Phase-one feasibility test.
pub fn feasible(lp: &LinearProgram) -> Result<bool> {
    lp.validate()?;
    Ok(phase_one(&StandardForm::new(lp))?.is_some())
}
