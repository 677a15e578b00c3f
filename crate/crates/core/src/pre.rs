//! Pre-processing: choose a feature channel `P_{X̃|X}` (or `P_{X̃|X,A}`) placed
//! in front of a fixed classifier so that the prediction is as fair as possible
//! under a distortion budget.

use crate::curve::{self, BudgetProblem, Grid, Solved, TradeoffCurve};
use crate::error::{Error, Result};
use crate::lp::{self, LinearProgram, LpStatus, FEAS_TOL};
use crate::prob::{
    check_classifier, expected_distortion_pre, induced_group_prediction,
    induced_prediction_channel, parity_discrimination, pre_cost, tv_discrimination, AttrChannel, Channel,
    DistortionMatrix, JointDistribution,
};
use crate::problem::{Criterion, DistortionMode};

#[derive(Debug, Clone)]
pub struct PreProblem {
    pub joint: JointDistribution,
    pub w: Channel,
    pub d: DistortionMatrix,
    /// Optimize `P_{X̃|X,A}` instead of a single `P_{X̃|X}`.
    pub use_a: bool,
    pub criterion: Criterion,
    pub distortion_mode: DistortionMode,
}

impl PreProblem {
    pub fn new(joint: JointDistribution, w: Channel, d: DistortionMatrix) -> Result<Self> {
        check_classifier(&w, &joint, &d)?;
        Ok(Self {
            joint,
            w,
            d,
            use_a: true,
            criterion: Criterion::EqualizedOdds,
            distortion_mode: DistortionMode::Global,
        })
    }

    pub fn with_use_a(mut self, use_a: bool) -> Self {
        self.use_a = use_a;
        self
    }

    pub fn with_criterion(mut self, criterion: Criterion) -> Self {
        self.criterion = criterion;
        self
    }

    pub fn with_distortion_mode(mut self, mode: DistortionMode) -> Self {
        self.distortion_mode = mode;
        self
    }

    fn groups(&self) -> usize {
        if self.use_a {
            2
        } else {
            1
        }
    }

    /// Discrimination under the configured criterion, through the composition path.
    pub fn discrimination(&self, pre: &AttrChannel) -> Result<f64> {
        match self.criterion {
            Criterion::EqualizedOdds => {
                let cond = induced_prediction_channel(pre, &self.w, &self.joint)?;
                tv_discrimination(&cond, &self.joint.label_marginal())
            }
            Criterion::DemographicParity => {
                Ok(parity_discrimination(&induced_group_prediction(pre, &self.w, &self.joint)?))
            }
        }
    }

    /// The constrained distortion: the global expectation, or the largest
    /// per-feature conditional expectation over features with mass.
    pub fn distortion(&self, pre: &AttrChannel) -> Result<f64> {
        match self.distortion_mode {
            DistortionMode::Global => expected_distortion_pre(pre, &self.w, &self.joint, &self.d),
            DistortionMode::PerX => {
                let joint = &self.joint;
                let mut worst = 0.0f64;
                for x in (0..joint.nx()).filter(|&x| joint.p_x(x) > 0.0) {
                    let mut total = 0.0;
                    for a in 0..2 {
                        for xt in 0..joint.nx() {
                            total += pre.group(a).get(x, xt) * pre_cost(&self.w, joint, &self.d, xt, x, a);
                        }
                    }
                    worst = worst.max(total / joint.p_x(x));
                }
                Ok(worst)
            }
        }
    }
}

/// Column indices of each variable block in a built pre-processing LP.
#[derive(Debug, Clone)]
pub struct PreLayout {
    pub t: Vec<usize>,
    /// `[g][x][x̃]` flattened, `g` ranging over 1 or 2 channel copies.
    pub channel: Vec<usize>,
    pub induced: Vec<usize>,
    /// Inequality-row indices of the distortion constraints.
    pub distortion_rows: Vec<usize>,
}

/// Builds the pre-processing linear program at budget `budget`.
pub fn build_pre_lp(prob: &PreProblem, budget: f64) -> Result<LinearProgram> {
    build(prob, budget).map(|(lp, _)| lp)
}

pub fn build(prob: &PreProblem, budget: f64) -> Result<(LinearProgram, PreLayout)> {
    check_classifier(&prob.w, &prob.joint, &prob.d)?;
    if !budget.is_finite() {
        return Err(Error::InvalidInput(format!("budget {budget} is not finite")));
    }
    let joint = &prob.joint;
    let (nx, ny) = (joint.nx(), joint.ny());
    let groups = prob.groups();
    let g_of = |a: usize| if prob.use_a { a } else { 0 };
    let p_y = joint.label_marginal();
    let mut lp = LinearProgram::new();

    // Discrimination slack variables.
    let t: Vec<usize> = match prob.criterion {
        Criterion::EqualizedOdds => (0..ny)
            .flat_map(|y| (0..ny).map(move |yh| (y, yh)))
            .map(|(y, yh)| lp.add_var(format!("t[y={y},yh={yh}]"), p_y[y]))
            .collect(),
        Criterion::DemographicParity => (0..ny).map(|yh| lp.add_var(format!("t[yh={yh}]"), 1.0)).collect(),
    };

    let mut channel = Vec::with_capacity(groups * nx * nx);
    for g in 0..groups {
        for x in 0..nx {
            for xt in 0..nx {
                let name = if prob.use_a {
                    format!("K[a={g},x={x},xt={xt}]")
                } else {
                    format!("K[x={x},xt={xt}]")
                };
                channel.push(lp.add_var(name, 0.0));
            }
        }
    }
    let k = |g: usize, x: usize, xt: usize| channel[(g * nx + x) * nx + xt];

    // Induced prediction: per (a, y) cell for equalized odds, per a for parity.
    let cells = match prob.criterion {
        Criterion::EqualizedOdds => ny,
        Criterion::DemographicParity => 1,
    };
    let mut induced = Vec::with_capacity(2 * cells * ny);
    for a in 0..2 {
        for c in 0..cells {
            for yh in 0..ny {
                let name = match prob.criterion {
                    Criterion::EqualizedOdds => format!("F[a={a},y={c},yh={yh}]"),
                    Criterion::DemographicParity => format!("F[a={a},yh={yh}]"),
                };
                induced.push(lp.add_var(name, 0.0));
            }
        }
    }
    let f = |a: usize, c: usize, yh: usize| induced[(a * cells + c) * ny + yh];

    // Cell masses: P_{Y,A}(y, a) or P_A(a).
    let cell_mass = |c: usize, a: usize| match prob.criterion {
        Criterion::EqualizedOdds => joint.p_ya(c, a),
        Criterion::DemographicParity => joint.p_a(a),
    };
    let cell_weight = |c: usize, a: usize, x: usize| match prob.criterion {
        Criterion::EqualizedOdds => joint.p(a, x, c),
        Criterion::DemographicParity => joint.p_xa(x, a),
    };

    // |F(·|c,0) − F(·|c,1)| ≤ t.
    for c in 0..cells {
        if cell_mass(c, 0) <= 0.0 || cell_mass(c, 1) <= 0.0 {
            continue;
        }
        for yh in 0..ny {
            let tv = t[c * ny + yh];
            lp.add_le(&[(f(0, c, yh), 1.0), (f(1, c, yh), -1.0), (tv, -1.0)], 0.0);
            lp.add_le(&[(f(1, c, yh), 1.0), (f(0, c, yh), -1.0), (tv, -1.0)], 0.0);
        }
    }

    // Distortion budget.
    let mut distortion_rows = Vec::new();
    match prob.distortion_mode {
        DistortionMode::Global => {
            let mut terms = Vec::with_capacity(2 * nx * nx);
            for a in 0..2 {
                for x in 0..nx {
                    for xt in 0..nx {
                        let cost = pre_cost(&prob.w, joint, &prob.d, xt, x, a);
                        if cost != 0.0 {
                            terms.push((k(g_of(a), x, xt), cost));
                        }
                    }
                }
            }
            distortion_rows.push(lp.add_le(&terms, budget));
        }
        DistortionMode::PerX => {
            for x in 0..nx {
                let px = joint.p_x(x);
                if px <= 0.0 {
                    continue;
                }
                let mut terms = Vec::with_capacity(2 * nx);
                for a in 0..2 {
                    for xt in 0..nx {
                        let cost = pre_cost(&prob.w, joint, &prob.d, xt, x, a) / px;
                        if cost != 0.0 {
                            terms.push((k(g_of(a), x, xt), cost));
                        }
                    }
                }
                distortion_rows.push(lp.add_le(&terms, budget));
            }
        }
    }

    // F(ŷ|c,a) = Σ_{x,x̃} W(ŷ|x̃) K(x̃|x,a) P(x|c,a).
    for a in 0..2 {
        for c in 0..cells {
            let mass = cell_mass(c, a);
            if mass <= 0.0 {
                continue;
            }
            for yh in 0..ny {
                let mut terms = vec![(f(a, c, yh), 1.0)];
                for x in 0..nx {
                    let px = cell_weight(c, a, x) / mass;
                    if px == 0.0 {
                        continue;
                    }
                    for xt in 0..nx {
                        let coef = prob.w.get(xt, yh) * px;
                        if coef != 0.0 {
                            terms.push((k(g_of(a), x, xt), -coef));
                        }
                    }
                }
                lp.add_eq(&terms, 0.0);
            }
        }
    }

    // Simplex rows on both channel blocks.
    for a in 0..2 {
        for c in 0..cells {
            let terms: Vec<(usize, f64)> = (0..ny).map(|yh| (f(a, c, yh), 1.0)).collect();
            lp.add_eq(&terms, 1.0);
        }
    }
    for g in 0..groups {
        for x in 0..nx {
            let terms: Vec<(usize, f64)> = (0..nx).map(|xt| (k(g, x, xt), 1.0)).collect();
            lp.add_eq(&terms, 1.0);
        }
    }

    Ok((lp, PreLayout { t, channel, induced, distortion_rows }))
}

/// Minimal discrimination at budget `budget`, with an optimal channel.
pub fn disc_pre(prob: &PreProblem, budget: f64) -> Result<Solved<AttrChannel>> {
    let (d_min, _) = d_min_pre(prob);
    if budget < d_min - FEAS_TOL {
        return Err(Error::InfeasibleBudget { budget, d_min });
    }
    let (lp, layout) = build(prob, budget)?;
    let sol = lp::solve(&lp)?;
    match sol.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => return Err(Error::InfeasibleBudget { budget, d_min }),
        LpStatus::Unbounded => return Err(Error::NumericalFailure("pre-processing LP reported unbounded".into())),
    }
    let nx = prob.joint.nx();
    let raw: Vec<f64> = layout.channel.iter().map(|&j| sol.z[j]).collect();
    let channel = if prob.use_a {
        AttrChannel::ByGroup([
            Channel::from_solver(nx, nx, &raw[..nx * nx])?,
            Channel::from_solver(nx, nx, &raw[nx * nx..])?,
        ])
    } else {
        AttrChannel::Shared(Channel::from_solver(nx, nx, &raw)?)
    };
    let slope = layout.distortion_rows.iter().map(|&r| sol.duals_ub[r]).sum();
    Ok(Solved { budget, disc: sol.objective.max(0.0), channel, basis: sol.basis, slope })
}

/// Smallest feasible budget and the deterministic channel attaining it.
///
/// Each `(x, a)` (or each `x`, when the channel ignores `A`) is sent to the
/// lowest-index `x̃` minimizing its joint-weighted cost.
pub fn d_min_pre(prob: &PreProblem) -> (f64, AttrChannel) {
    let joint = &prob.joint;
    let nx = joint.nx();
    let cost = |xt: usize, x: usize, a: usize| pre_cost(&prob.w, joint, &prob.d, xt, x, a);
    let argmin = |f: &dyn Fn(usize) -> f64| {
        let mut best = (0, f(0));
        for xt in 1..nx {
            let v = f(xt);
            if v < best.1 {
                best = (xt, v);
            }
        }
        best
    };

    // Per-(x, group) choice and its cost contribution per a.
    let mut maps = vec![vec![0usize; nx]; prob.groups()];
    let mut per_x = vec![0.0; nx];
    for x in 0..nx {
        if prob.use_a {
            for a in 0..2 {
                let (xt, v) = argmin(&|xt| cost(xt, x, a));
                maps[a][x] = xt;
                per_x[x] += v;
            }
        } else {
            let (xt, v) = argmin(&|xt| cost(xt, x, 0) + cost(xt, x, 1));
            maps[0][x] = xt;
            per_x[x] = v;
        }
    }
    let value = match prob.distortion_mode {
        DistortionMode::Global => per_x.iter().sum(),
        DistortionMode::PerX => (0..nx)
            .filter(|&x| joint.p_x(x) > 0.0)
            .map(|x| per_x[x] / joint.p_x(x))
            .fold(0.0, f64::max),
    };
    let det = |m: &[usize]| Channel::deterministic(m, nx).expect("argmin is in range");
    let channel = if prob.use_a {
        AttrChannel::ByGroup([det(&maps[0]), det(&maps[1])])
    } else {
        AttrChannel::Shared(det(&maps[0]))
    };
    (value, channel)
}

/// Distortion of the uniform pre-processor, at which discrimination is zero.
pub fn d_max_bound_pre(prob: &PreProblem) -> f64 {
    let joint = &prob.joint;
    let (nx, ny) = (joint.nx(), joint.ny());
    let w = &prob.w;
    let avg_cost = |weights: &dyn Fn(usize) -> f64| {
        let mut total = 0.0;
        for xt in 0..nx {
            for y in 0..ny {
                for yh in 0..ny {
                    total += w.get(xt, yh) * weights(y) * prob.d.get(y, yh);
                }
            }
        }
        total / nx as f64
    };
    match prob.distortion_mode {
        DistortionMode::Global => avg_cost(&|y| joint.p_y(y)),
        DistortionMode::PerX => (0..nx)
            .filter(|&x| joint.p_x(x) > 0.0)
            .map(|x| avg_cost(&|y| joint.y_given_x(y, x).unwrap_or(0.0)))
            .fold(0.0, f64::max),
    }
}

/// Smallest budget with discrimination at most `eps`.
pub fn d_max_exact(prob: &PreProblem, eps: f64) -> Result<f64> {
    curve::zero_disc_budget(prob, eps)
}

pub fn tradeoff_curve(prob: &PreProblem, grid: &Grid) -> Result<TradeoffCurve<AttrChannel>> {
    curve::tradeoff_curve(prob, grid)
}

impl BudgetProblem for PreProblem {
    type Channel = AttrChannel;

    fn d_min(&self) -> f64 {
        d_min_pre(self).0
    }

    fn d_max_bound(&self) -> f64 {
        d_max_bound_pre(self)
    }

    fn solve_at(&self, budget: f64) -> Result<Solved<AttrChannel>> {
        disc_pre(self, budget)
    }
}
