//! Finite-alphabet probability objects: the auditing joint over `(A, X, Y)`,
//! row-stochastic channels, distortion matrices, and the discrimination and
//! distortion functionals evaluated on them.
//!
//! The sensitive attribute `A` is always binary (0 = majority, 1 = minority).
//! Labels and predictions share the alphabet `0..ny`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance for stochasticity checks on constructed objects.
pub const STOCHASTIC_TOL: f64 = 1e-12;
/// Absolute tolerance for stochasticity of objects recovered from LP solves.
pub const SOLVED_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Warning {
    /// `P_Y(y) = 0`; the label never occurs and carries zero objective weight.
    DegenerateMarginal { y: usize },
}

/// The auditing distribution `P_{A,X,Y}` with `|A| = 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDistribution {
    nx: usize,
    ny: usize,
    p: Vec<f64>,
}

impl JointDistribution {
    /// Builds a joint from a flat `[a][x][y]` tensor.
    pub fn new(nx: usize, ny: usize, p: Vec<f64>) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return Err(Error::InvalidInput(format!(
                "alphabet sizes must be at least 2 (got |X| = {nx}, |Y| = {ny})"
            )));
        }
        if p.len() != 2 * nx * ny {
            return Err(Error::InvalidInput(format!(
                "joint tensor has {} entries, expected {}",
                p.len(),
                2 * nx * ny
            )));
        }
        if let Some(v) = p.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidInput(format!("joint entry {v} is not a probability")));
        }
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > STOCHASTIC_TOL {
            return Err(Error::InvalidInput(format!("joint sums to {total}, not 1")));
        }
        Ok(Self { nx, ny, p })
    }

    /// Builds a joint from `f(a, x, y)`.
    pub fn from_fn(nx: usize, ny: usize, f: impl Fn(usize, usize, usize) -> f64) -> Result<Self> {
        let mut p = Vec::with_capacity(2 * nx * ny);
        for a in 0..2 {
            for x in 0..nx {
                for y in 0..ny {
                    p.push(f(a, x, y));
                }
            }
        }
        Self::new(nx, ny, p)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    #[inline]
    pub fn p(&self, a: usize, x: usize, y: usize) -> f64 {
        self.p[(a * self.nx + x) * self.ny + y]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.p
    }

    pub fn p_a(&self, a: usize) -> f64 {
        self.p[a * self.nx * self.ny..(a + 1) * self.nx * self.ny].iter().sum()
    }

    pub fn p_x(&self, x: usize) -> f64 {
        (0..2).map(|a| self.p_xa(x, a)).sum()
    }

    pub fn p_xa(&self, x: usize, a: usize) -> f64 {
        (0..self.ny).map(|y| self.p(a, x, y)).sum()
    }

    pub fn p_ya(&self, y: usize, a: usize) -> f64 {
        (0..self.nx).map(|x| self.p(a, x, y)).sum()
    }

    pub fn p_y(&self, y: usize) -> f64 {
        self.p_ya(y, 0) + self.p_ya(y, 1)
    }

    /// Marginal `P_Y` as a vector.
    pub fn label_marginal(&self) -> Vec<f64> {
        (0..self.ny).map(|y| self.p_y(y)).collect()
    }

    /// `P_{X|Y,A}(x | y, a)`.
    pub fn x_given_ya(&self, x: usize, y: usize, a: usize) -> Result<f64> {
        let m = self.p_ya(y, a);
        if m <= 0.0 {
            return Err(Error::DegenerateConditioning(format!("P(Y={y}, A={a}) = 0")));
        }
        Ok(self.p(a, x, y) / m)
    }

    /// `P_{Y|X}(y | x)`.
    pub fn y_given_x(&self, y: usize, x: usize) -> Result<f64> {
        let m = self.p_x(x);
        if m <= 0.0 {
            return Err(Error::DegenerateConditioning(format!("P(X={x}) = 0")));
        }
        Ok((self.p(0, x, y) + self.p(1, x, y)) / m)
    }

    /// `P_{Y|X,A}(y | x, a)`.
    pub fn y_given_xa(&self, y: usize, x: usize, a: usize) -> Result<f64> {
        let m = self.p_xa(x, a);
        if m <= 0.0 {
            return Err(Error::DegenerateConditioning(format!("P(X={x}, A={a}) = 0")));
        }
        Ok(self.p(a, x, y) / m)
    }

    pub fn warnings(&self) -> Vec<Warning> {
        (0..self.ny)
            .filter(|&y| self.p_y(y) <= 0.0)
            .map(|y| Warning::DegenerateMarginal { y })
            .collect()
    }

    /// Nested `[a][x][y]` view for serialization.
    pub fn to_nested(&self) -> Vec<Vec<Vec<f64>>> {
        (0..2)
            .map(|a| {
                (0..self.nx)
                    .map(|x| (0..self.ny).map(|y| self.p(a, x, y)).collect())
                    .collect()
            })
            .collect()
    }
}

/// Nonnegative integer counts over `(A, X, Y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CountTensor {
    nx: usize,
    ny: usize,
    counts: Vec<i64>,
}

impl CountTensor {
    pub fn zeros(nx: usize, ny: usize) -> Self {
        Self { nx, ny, counts: vec![0; 2 * nx * ny] }
    }

    pub fn from_vec(nx: usize, ny: usize, counts: Vec<i64>) -> Result<Self> {
        if counts.len() != 2 * nx * ny {
            return Err(Error::InvalidInput(format!(
                "count tensor has {} entries, expected {}",
                counts.len(),
                2 * nx * ny
            )));
        }
        Ok(Self { nx, ny, counts })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn add(&mut self, a: usize, x: usize, y: usize, k: i64) {
        self.counts[(a * self.nx + x) * self.ny + y] += k;
    }

    pub fn get(&self, a: usize, x: usize, y: usize) -> i64 {
        self.counts[(a * self.nx + x) * self.ny + y]
    }
}

/// A plug-in estimate of the joint, with any data-quality warnings.
#[derive(Debug, Clone)]
pub struct Estimate {
    pub joint: JointDistribution,
    pub warnings: Vec<Warning>,
}

/// Empirical joint `counts / total`.
pub fn normalize_counts(counts: &CountTensor) -> Result<Estimate> {
    if let Some(c) = counts.counts.iter().find(|c| **c < 0) {
        return Err(Error::InvalidInput(format!("negative count {c}")));
    }
    let total: i64 = counts.counts.iter().sum();
    if total == 0 {
        return Err(Error::EmptyData);
    }
    let p = counts.counts.iter().map(|&c| c as f64 / total as f64).collect::<Vec<_>>();
    // Renormalize in f64 so the sum check sees rounding from the division only once.
    let s: f64 = p.iter().sum();
    let p = p.into_iter().map(|v| v / s).collect();
    let joint = JointDistribution::new(counts.nx, counts.ny, p)?;
    let warnings = joint.warnings();
    Ok(Estimate { joint, warnings })
}

/// A row-stochastic matrix `k[i][j] = P(out = j | in = i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Channel {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Channel {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        Self::with_tolerance(rows, cols, data, STOCHASTIC_TOL)
    }

    pub fn with_tolerance(rows: usize, cols: usize, data: Vec<f64>, tol: f64) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidInput("channel must have at least one row and column".into()));
        }
        if data.len() != rows * cols {
            return Err(Error::InvalidInput(format!(
                "channel data has {} entries, expected {rows}x{cols}",
                data.len()
            )));
        }
        for (i, row) in data.chunks(cols).enumerate() {
            if row.iter().any(|v| !v.is_finite() || *v < -tol) {
                return Err(Error::InvalidInput(format!("channel row {i} has a negative entry")));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > tol {
                return Err(Error::InvalidInput(format!("channel row {i} sums to {s}")));
            }
        }
        Ok(Self { rows, cols, data })
    }

    /// Clamps tiny negatives left by a solver and renormalizes each row.
    pub(crate) fn from_solver(rows: usize, cols: usize, raw: &[f64]) -> Result<Self> {
        let mut data = Vec::with_capacity(rows * cols);
        for row in raw.chunks(cols) {
            let clamped: Vec<f64> = row.iter().map(|v| v.max(0.0)).collect();
            let s: f64 = clamped.iter().sum();
            if (s - 1.0).abs() > SOLVED_TOL {
                return Err(Error::NumericalFailure(format!("solver channel row sums to {s}")));
            }
            data.extend(clamped.iter().map(|v| v / s));
        }
        Self::with_tolerance(rows, cols, data, SOLVED_TOL)
    }

    pub fn identity(n: usize) -> Self {
        Self::deterministic(&(0..n).collect::<Vec<_>>(), n).expect("identity map is in range")
    }

    pub fn uniform(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![1.0 / cols as f64; rows * cols] }
    }

    /// Point-mass rows: input `i` maps to output `map[i]`.
    pub fn deterministic(map: &[usize], cols: usize) -> Result<Self> {
        let mut data = vec![0.0; map.len() * cols];
        for (i, &j) in map.iter().enumerate() {
            if j >= cols {
                return Err(Error::InvalidInput(format!("map target {j} out of range {cols}")));
            }
            data[i * cols + j] = 1.0;
        }
        Self::new(map.len(), cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn is_deterministic(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0 || v == 1.0)
    }

    /// `lambda * self + (1 - lambda) * other`.
    pub fn mix(&self, lambda: f64, other: &Channel) -> Result<Channel> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::InvalidInput("cannot mix channels of different shapes".into()));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(p, q)| lambda * p + (1.0 - lambda) * q)
            .collect();
        Channel::with_tolerance(self.rows, self.cols, data, SOLVED_TOL)
    }

    pub fn max_abs_diff(&self, other: &Channel) -> f64 {
        self.data.iter().zip(&other.data).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max)
    }
}

/// A channel that may depend on the sensitive attribute.
#[derive(Debug, Clone, PartialEq)]
pub enum AttrChannel {
    /// The same channel for both groups.
    Shared(Channel),
    /// One channel per value of `a`.
    ByGroup([Channel; 2]),
}

impl AttrChannel {
    pub fn group(&self, a: usize) -> &Channel {
        match self {
            AttrChannel::Shared(c) => c,
            AttrChannel::ByGroup(cs) => &cs[a],
        }
    }

    pub fn rows(&self) -> usize {
        self.group(0).rows()
    }

    pub fn cols(&self) -> usize {
        self.group(0).cols()
    }

    pub fn is_deterministic(&self) -> bool {
        (0..2).all(|a| self.group(a).is_deterministic())
    }

    pub fn mix(&self, lambda: f64, other: &AttrChannel) -> Result<AttrChannel> {
        match (self, other) {
            (AttrChannel::Shared(p), AttrChannel::Shared(q)) => Ok(AttrChannel::Shared(p.mix(lambda, q)?)),
            _ => Ok(AttrChannel::ByGroup([
                self.group(0).mix(lambda, other.group(0))?,
                self.group(1).mix(lambda, other.group(1))?,
            ])),
        }
    }
}

/// `d(y, ŷ)`: nonnegative, finite, zero on the diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistortionMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DistortionMatrix {
    pub fn new(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::InvalidInput(format!(
                "distortion matrix has {} entries, expected {n}x{n}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidInput("distortion entries must be finite and >= 0".into()));
        }
        if (0..n).any(|y| data[y * n + y] != 0.0) {
            return Err(Error::InvalidInput("distortion must vanish on the diagonal".into()));
        }
        Ok(Self { n, data })
    }

    pub fn zero_one(n: usize) -> Self {
        let data = (0..n * n).map(|k| if k / n == k % n { 0.0 } else { 1.0 }).collect();
        Self { n, data }
    }

    pub fn zero(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n] }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, y: usize, yhat: usize) -> f64 {
        self.data[y * self.n + yhat]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

/// The conditional prediction `P_{Ŷ|Y,A}`, one distribution over `Ŷ` per
/// `(y, a)` cell. Cells with `P_{Y,A}(y, a) = 0` are undefined.
#[derive(Debug, Clone, PartialEq)]
pub struct CondPrediction {
    ny: usize,
    m: usize,
    cells: Vec<Option<Vec<f64>>>,
}

impl CondPrediction {
    /// `cells` is indexed `a * ny + y`.
    pub fn new(ny: usize, m: usize, cells: Vec<Option<Vec<f64>>>) -> Result<Self> {
        if cells.len() != 2 * ny {
            return Err(Error::InvalidInput(format!("expected {} cells, got {}", 2 * ny, cells.len())));
        }
        for cell in cells.iter().flatten() {
            if cell.len() != m {
                return Err(Error::InvalidInput("prediction cell has wrong length".into()));
            }
            let s: f64 = cell.iter().sum();
            if cell.iter().any(|v| *v < -SOLVED_TOL) || (s - 1.0).abs() > SOLVED_TOL {
                return Err(Error::InvalidInput(format!("prediction cell sums to {s}")));
            }
        }
        Ok(Self { ny, m, cells })
    }

    /// Fully defined conditional from one `|Y| x |Ŷ|` channel per group.
    pub fn from_groups(groups: &[Channel; 2]) -> Result<Self> {
        let (ny, m) = (groups[0].rows(), groups[0].cols());
        if groups[1].rows() != ny || groups[1].cols() != m {
            return Err(Error::InvalidInput("group channels differ in shape".into()));
        }
        let cells = (0..2)
            .flat_map(|a| (0..ny).map(move |y| Some(groups[a].row(y).to_vec())))
            .collect();
        Self::new(ny, m, cells)
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn cell(&self, y: usize, a: usize) -> Option<&[f64]> {
        self.cells[a * self.ny + y].as_deref()
    }

    /// `P(ŷ | y, a)`, failing on an undefined cell.
    pub fn get(&self, yhat: usize, y: usize, a: usize) -> Result<f64> {
        self.cell(y, a)
            .map(|c| c[yhat])
            .ok_or_else(|| Error::DegenerateConditioning(format!("P(Y={y}, A={a}) = 0")))
    }

    /// Largest entrywise deviation over cells defined in both.
    pub fn max_abs_diff(&self, other: &CondPrediction) -> f64 {
        self.cells
            .iter()
            .zip(&other.cells)
            .filter_map(|(p, q)| Some((p.as_ref()?, q.as_ref()?)))
            .flat_map(|(p, q)| p.iter().zip(q).map(|(u, v)| (u - v).abs()))
            .fold(0.0, f64::max)
    }
}

/// `P_{Ŷ_F|Y,A}` induced by a pre-processor `pre` feeding classifier `w`.
pub fn induced_prediction_channel(
    pre: &AttrChannel,
    w: &Channel,
    joint: &JointDistribution,
) -> Result<CondPrediction> {
    let nx = joint.nx();
    if pre.rows() != nx || pre.cols() != nx || w.rows() != nx {
        return Err(Error::InvalidInput(format!(
            "shape mismatch: pre {}x{}, classifier {}x{}, |X| = {nx}",
            pre.rows(),
            pre.cols(),
            w.rows(),
            w.cols()
        )));
    }
    let m = w.cols();
    let mut cells = Vec::with_capacity(2 * joint.ny());
    for a in 0..2 {
        let k = pre.group(a);
        // Effective per-x prediction: sum_xt W(yhat|xt) K(xt|x,a).
        let eff: Vec<Vec<f64>> = (0..nx)
            .map(|x| (0..m).map(|yh| (0..nx).map(|xt| w.get(xt, yh) * k.get(x, xt)).sum()).collect())
            .collect();
        for y in 0..joint.ny() {
            let mass = joint.p_ya(y, a);
            if mass <= 0.0 {
                cells.push(None);
                continue;
            }
            let cell = (0..m)
                .map(|yh| (0..nx).map(|x| eff[x][yh] * joint.p(a, x, y)).sum::<f64>() / mass)
                .collect();
            cells.push(Some(cell));
        }
    }
    CondPrediction::new(joint.ny(), m, cells)
}

/// Per-group prediction marginals `P_{Ŷ_F|A}` for a pre-processor.
pub fn induced_group_prediction(
    pre: &AttrChannel,
    w: &Channel,
    joint: &JointDistribution,
) -> Result<[Option<Vec<f64>>; 2]> {
    let cond = induced_prediction_channel(pre, w, joint)?;
    Ok(group_marginals(&cond, |y, a| joint.p_ya(y, a)))
}

pub(crate) fn group_marginals(
    cond: &CondPrediction,
    p_ya: impl Fn(usize, usize) -> f64,
) -> [Option<Vec<f64>>; 2] {
    let one = |a: usize| {
        let pa: f64 = (0..cond.ny()).map(|y| p_ya(y, a)).sum();
        if pa <= 0.0 {
            return None;
        }
        let mut v = vec![0.0; cond.m()];
        for y in 0..cond.ny() {
            if let Some(c) = cond.cell(y, a) {
                let wgt = p_ya(y, a) / pa;
                v.iter_mut().zip(c).for_each(|(acc, p)| *acc += wgt * p);
            }
        }
        Some(v)
    };
    [one(0), one(1)]
}

fn check_weights(cond: &CondPrediction, p_y: &[f64]) -> Result<()> {
    if p_y.len() != cond.ny() {
        return Err(Error::InvalidInput(format!(
            "label marginal has length {}, expected {}",
            p_y.len(),
            cond.ny()
        )));
    }
    Ok(())
}

/// `Σ_y P_Y(y) Σ_ŷ |P(ŷ|y,0) − P(ŷ|y,1)|`, the linear-program objective scale (in `[0, 2]`).
pub fn tv_discrimination(cond: &CondPrediction, p_y: &[f64]) -> Result<f64> {
    check_weights(cond, p_y)?;
    let mut total = 0.0;
    for (y, &wy) in p_y.iter().enumerate() {
        if let (Some(p0), Some(p1)) = (cond.cell(y, 0), cond.cell(y, 1)) {
            total += wy * p0.iter().zip(p1).map(|(u, v)| (u - v).abs()).sum::<f64>();
        }
    }
    Ok(total)
}

/// `Σ_ŷ |P(ŷ|A=0) − P(ŷ|A=1)|` for demographic parity.
pub fn parity_discrimination(groups: &[Option<Vec<f64>>; 2]) -> f64 {
    match (&groups[0], &groups[1]) {
        (Some(p0), Some(p1)) => p0.iter().zip(p1).map(|(u, v)| (u - v).abs()).sum(),
        _ => 0.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DivergenceKind {
    /// Half the L1 distance.
    Tv,
    /// `KL(P(·|y,0) ‖ P(·|y,1))`.
    Kl,
    /// `KL(P(·|y,1) ‖ P(·|y,0))`.
    ReverseKl,
}

fn kl(p: &[f64], q: &[f64]) -> f64 {
    let mut total = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        if pi <= 0.0 {
            continue;
        }
        if qi <= 0.0 {
            return f64::INFINITY;
        }
        total += pi * (pi / qi).ln();
    }
    total.max(0.0)
}

/// `Σ_y P_Y(y) · D_f(P(·|y,0) ‖ P(·|y,1))` in nats; may be `+inf` for KL.
pub fn f_divergence_discrimination(cond: &CondPrediction, p_y: &[f64], kind: DivergenceKind) -> Result<f64> {
    check_weights(cond, p_y)?;
    let mut total = 0.0;
    for (y, &wy) in p_y.iter().enumerate() {
        let (Some(p0), Some(p1)) = (cond.cell(y, 0), cond.cell(y, 1)) else {
            continue;
        };
        if wy <= 0.0 {
            continue;
        }
        let d = match kind {
            DivergenceKind::Tv => 0.5 * p0.iter().zip(p1).map(|(u, v)| (u - v).abs()).sum::<f64>(),
            DivergenceKind::Kl => kl(p0, p1),
            DivergenceKind::ReverseKl => kl(p1, p0),
        };
        total += wy * d;
    }
    Ok(total)
}

/// `I(A; Ŷ | Y)` in nats via the per-label KL factorization.
pub fn mutual_info_discrimination(pred: &PredictionJoint) -> f64 {
    let n = pred.n();
    let mut total = 0.0;
    for y in 0..n {
        let py = pred.p_y(y);
        if py <= 0.0 {
            continue;
        }
        let mix: Vec<f64> = (0..n).map(|yh| (pred.q(yh, y, 0) + pred.q(yh, y, 1)) / py).collect();
        for a in 0..2 {
            let pya = pred.p_ya(y, a);
            if pya <= 0.0 {
                continue;
            }
            let slice: Vec<f64> = (0..n).map(|yh| pred.q(yh, y, a) / pya).collect();
            total += pya * kl(&slice, &mix);
        }
    }
    total.max(0.0)
}

/// `d̄(x̃, x) = Σ_{y,ŷ} W(ŷ|x̃) P_{Y|X}(y|x) d(y,ŷ)`.
pub fn dbar(xt: usize, x: usize, w: &Channel, joint: &JointDistribution, d: &DistortionMatrix) -> Result<f64> {
    check_classifier(w, joint, d)?;
    let mut total = 0.0;
    for y in 0..joint.ny() {
        let py = joint.y_given_x(y, x)?;
        for yh in 0..w.cols() {
            total += w.get(xt, yh) * py * d.get(y, yh);
        }
    }
    Ok(total)
}

pub(crate) fn check_classifier(w: &Channel, joint: &JointDistribution, d: &DistortionMatrix) -> Result<()> {
    if w.rows() != joint.nx() || w.cols() != joint.ny() || d.size() != joint.ny() {
        return Err(Error::InvalidInput(format!(
            "shape mismatch: classifier {}x{}, distortion {}x{}, |X| = {}, |Y| = {}",
            w.rows(),
            w.cols(),
            d.size(),
            d.size(),
            joint.nx(),
            joint.ny()
        )));
    }
    Ok(())
}

/// `c(x̃; x, a) = Σ_{y,ŷ} W(ŷ|x̃) P(a,x,y) d(y,ŷ)`, the joint-weighted cost of
/// sending `(x, a)` to `x̃`.
pub(crate) fn pre_cost(w: &Channel, joint: &JointDistribution, d: &DistortionMatrix, xt: usize, x: usize, a: usize) -> f64 {
    let mut total = 0.0;
    for y in 0..joint.ny() {
        let pxy = joint.p(a, x, y);
        if pxy == 0.0 {
            continue;
        }
        for yh in 0..w.cols() {
            total += w.get(xt, yh) * pxy * d.get(y, yh);
        }
    }
    total
}

/// `E[d(Y, Ŷ_F)]` for a pre-processor.
pub fn expected_distortion_pre(
    pre: &AttrChannel,
    w: &Channel,
    joint: &JointDistribution,
    d: &DistortionMatrix,
) -> Result<f64> {
    check_classifier(w, joint, d)?;
    if pre.rows() != joint.nx() || pre.cols() != joint.nx() {
        return Err(Error::InvalidInput("pre-processor must be |X| x |X|".into()));
    }
    let nx = joint.nx();
    let mut total = 0.0;
    for a in 0..2 {
        let k = pre.group(a);
        for x in 0..nx {
            for xt in 0..nx {
                let kx = k.get(x, xt);
                if kx != 0.0 {
                    total += kx * pre_cost(w, joint, d, xt, x, a);
                }
            }
        }
    }
    Ok(total)
}

/// `E[d(Y, Ŷ_F) | X = x]` for every `x`.
pub fn conditional_expected_distortion(
    pre: &AttrChannel,
    w: &Channel,
    joint: &JointDistribution,
    d: &DistortionMatrix,
) -> Result<Vec<f64>> {
    check_classifier(w, joint, d)?;
    let nx = joint.nx();
    (0..nx)
        .map(|x| {
            let px = joint.p_x(x);
            if px <= 0.0 {
                return Err(Error::DegenerateConditioning(format!("P(X={x}) = 0")));
            }
            let mut total = 0.0;
            for a in 0..2 {
                for xt in 0..nx {
                    total += pre.group(a).get(x, xt) * pre_cost(w, joint, d, xt, x, a);
                }
            }
            Ok(total / px)
        })
        .collect()
}

/// `E[d(Y, Ŷ)]` from a conditional prediction and the `(Y, A)` marginal.
pub fn distortion_of_conditional(
    cond: &CondPrediction,
    p_ya: impl Fn(usize, usize) -> f64,
    d: &DistortionMatrix,
) -> f64 {
    let mut total = 0.0;
    for a in 0..2 {
        for y in 0..cond.ny() {
            if let Some(c) = cond.cell(y, a) {
                total += p_ya(y, a) * c.iter().enumerate().map(|(yh, p)| p * d.get(y, yh)).sum::<f64>();
            }
        }
    }
    total
}

/// The prediction joint `q(ŷ_O, y, a)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionJoint {
    n: usize,
    q: Vec<f64>,
}

impl PredictionJoint {
    /// `q` is flat `[ŷ][y][a]`.
    pub fn new(n: usize, q: Vec<f64>) -> Result<Self> {
        if n < 2 || q.len() != 2 * n * n {
            return Err(Error::InvalidInput(format!(
                "prediction joint needs 2*{n}*{n} entries, got {}",
                q.len()
            )));
        }
        if q.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidInput("prediction joint entries must be >= 0".into()));
        }
        let s: f64 = q.iter().sum();
        if (s - 1.0).abs() > STOCHASTIC_TOL {
            return Err(Error::InvalidInput(format!("prediction joint sums to {s}")));
        }
        Ok(Self { n, q })
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize, usize) -> f64) -> Result<Self> {
        let mut q = Vec::with_capacity(2 * n * n);
        for yh in 0..n {
            for y in 0..n {
                for a in 0..2 {
                    q.push(f(yh, y, a));
                }
            }
        }
        Self::new(n, q)
    }

    /// Label (and prediction) alphabet size.
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn q(&self, yhat: usize, y: usize, a: usize) -> f64 {
        self.q[(yhat * self.n + y) * 2 + a]
    }

    pub fn p_ya(&self, y: usize, a: usize) -> f64 {
        (0..self.n).map(|yh| self.q(yh, y, a)).sum()
    }

    pub fn p_y(&self, y: usize) -> f64 {
        self.p_ya(y, 0) + self.p_ya(y, 1)
    }

    pub fn label_marginal(&self) -> Vec<f64> {
        (0..self.n).map(|y| self.p_y(y)).collect()
    }

    /// `P_{Ŷ_O|Y,A}`.
    pub fn cond_pred(&self) -> CondPrediction {
        let n = self.n;
        let cells = (0..2)
            .flat_map(|a| {
                (0..n).map(move |y| {
                    let m = self.p_ya(y, a);
                    (m > 0.0).then(|| (0..n).map(|yh| self.q(yh, y, a) / m).collect())
                })
            })
            .collect();
        CondPrediction::new(n, n, cells).expect("conditionals of a valid joint are stochastic")
    }

    /// Rebuilds the joint from a conditional and the `(Y, A)` marginal.
    pub fn from_conditional(cond: &CondPrediction, p_ya: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let n = cond.ny();
        Self::from_fn(n, |yh, y, a| cond.cell(y, a).map_or(0.0, |c| c[yh] * p_ya(y, a)))
    }
}

/// `P_{Ŷ_P|Y,A}` induced by a post-processor applied to `Ŷ_O`.
pub fn induced_post_channel(post: &[Channel; 2], pred: &PredictionJoint) -> Result<CondPrediction> {
    let n = pred.n();
    for g in post {
        if g.rows() != n || g.cols() != n {
            return Err(Error::InvalidInput(format!("post-processor must be {n}x{n}")));
        }
    }
    let mut cells = Vec::with_capacity(2 * n);
    for (a, g) in post.iter().enumerate() {
        for y in 0..n {
            let mass = pred.p_ya(y, a);
            if mass <= 0.0 {
                cells.push(None);
                continue;
            }
            let cell = (0..n)
                .map(|yp| (0..n).map(|yo| g.get(yo, yp) * pred.q(yo, y, a)).sum::<f64>() / mass)
                .collect();
            cells.push(Some(cell));
        }
    }
    CondPrediction::new(n, n, cells)
}

/// `E[d(Y, Ŷ_P)]` for a post-processor.
pub fn expected_distortion_post(post: &[Channel; 2], pred: &PredictionJoint, d: &DistortionMatrix) -> Result<f64> {
    if d.size() != pred.n() {
        return Err(Error::InvalidInput("distortion size differs from label alphabet".into()));
    }
    let cond = induced_post_channel(post, pred)?;
    Ok(distortion_of_conditional(&cond, |y, a| pred.p_ya(y, a), d))
}
