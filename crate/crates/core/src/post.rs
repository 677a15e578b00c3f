//! Post-processing: randomize the classifier's output with a channel
//! `P_{Ŷ_P|Ŷ_O,A}`, given only the prediction joint `P_{Ŷ_O,Y,A}`.

use crate::curve::{self, BudgetProblem, Grid, Solved, TradeoffCurve};
use crate::error::{Error, Result};
use crate::lp::{self, LinearProgram, LpStatus, FEAS_TOL};
use crate::prob::{
    check_classifier, distortion_of_conditional, group_marginals, induced_post_channel, parity_discrimination,
    tv_discrimination, Channel, DistortionMatrix, JointDistribution, PredictionJoint,
};
use crate::problem::Criterion;

#[derive(Debug, Clone)]
pub struct PostProblem {
    pub pred: PredictionJoint,
    pub d: DistortionMatrix,
    pub criterion: Criterion,
}

impl PostProblem {
    pub fn new(pred: PredictionJoint, d: DistortionMatrix) -> Result<Self> {
        if d.size() != pred.n() {
            return Err(Error::InvalidInput(format!(
                "distortion is {0}x{0} but the label alphabet has {1} symbols",
                d.size(),
                pred.n()
            )));
        }
        Ok(Self { pred, d, criterion: Criterion::EqualizedOdds })
    }

    pub fn with_criterion(mut self, criterion: Criterion) -> Self {
        self.criterion = criterion;
        self
    }

    pub fn discrimination(&self, post: &[Channel; 2]) -> Result<f64> {
        let cond = induced_post_channel(post, &self.pred)?;
        match self.criterion {
            Criterion::EqualizedOdds => tv_discrimination(&cond, &self.pred.label_marginal()),
            Criterion::DemographicParity => Ok(parity_discrimination(&group_marginals(&cond, |y, a| {
                self.pred.p_ya(y, a)
            }))),
        }
    }

    pub fn distortion(&self, post: &[Channel; 2]) -> Result<f64> {
        let cond = induced_post_channel(post, &self.pred)?;
        Ok(distortion_of_conditional(&cond, |y, a| self.pred.p_ya(y, a), &self.d))
    }

    /// `Σ_y q(ŷ_O, y, a) d(y, ŷ_P)`: the cost of relabeling `ŷ_O` as `ŷ_P` in group `a`.
    fn cost(&self, yo: usize, yp: usize, a: usize) -> f64 {
        (0..self.pred.n()).map(|y| self.pred.q(yo, y, a) * self.d.get(y, yp)).sum()
    }
}

/// `q(ŷ, y, a) = Σ_x W(ŷ|x) P(a, x, y)`.
pub fn derive_pred_joint(w: &Channel, joint: &JointDistribution) -> Result<PredictionJoint> {
    if w.rows() != joint.nx() || w.cols() != joint.ny() {
        return Err(Error::InvalidInput(format!(
            "classifier is {}x{} but the joint has |X| = {}, |Y| = {}",
            w.rows(),
            w.cols(),
            joint.nx(),
            joint.ny()
        )));
    }
    let q = PredictionJoint::from_fn(joint.ny(), |yh, y, a| {
        (0..joint.nx()).map(|x| w.get(x, yh) * joint.p(a, x, y)).sum()
    });
    match q {
        Ok(q) => Ok(q),
        // Rounding can push the total a hair past the construction tolerance.
        Err(_) => {
            let raw: Vec<f64> = (0..joint.ny())
                .flat_map(|yh| (0..joint.ny()).flat_map(move |y| (0..2).map(move |a| (yh, y, a))))
                .map(|(yh, y, a)| (0..joint.nx()).map(|x| w.get(x, yh) * joint.p(a, x, y)).sum())
                .collect();
            let s: f64 = raw.iter().sum();
            PredictionJoint::new(joint.ny(), raw.into_iter().map(|v| v / s).collect())
        }
    }
}

/// Builds a post-processing problem from a classifier and the auditing joint.
pub fn post_problem(w: &Channel, joint: &JointDistribution, d: &DistortionMatrix) -> Result<PostProblem> {
    check_classifier(w, joint, d)?;
    PostProblem::new(derive_pred_joint(w, joint)?, d.clone())
}

#[derive(Debug, Clone)]
pub struct PostLayout {
    pub t: Vec<usize>,
    /// `[a][ŷ_O][ŷ_P]` flattened.
    pub channel: Vec<usize>,
    pub induced: Vec<usize>,
    pub distortion_rows: Vec<usize>,
}

/// What the program constrains and optimizes.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Mode {
    /// Minimize discrimination subject to `E[d] ≤ budget`.
    Relaxed(f64),
    /// Minimize distortion subject to exact fairness.
    Exact,
}

fn build_mode(prob: &PostProblem, mode: Mode) -> Result<(LinearProgram, PostLayout)> {
    let pred = &prob.pred;
    let n = pred.n();
    let p_y = pred.label_marginal();
    let mut lp = LinearProgram::new();
    let relaxed = matches!(mode, Mode::Relaxed(_));

    let t: Vec<usize> = if relaxed {
        match prob.criterion {
            Criterion::EqualizedOdds => (0..n)
                .flat_map(|y| (0..n).map(move |yp| (y, yp)))
                .map(|(y, yp)| lp.add_var(format!("t[y={y},yp={yp}]"), p_y[y]))
                .collect(),
            Criterion::DemographicParity => (0..n).map(|yp| lp.add_var(format!("t[yp={yp}]"), 1.0)).collect(),
        }
    } else {
        Vec::new()
    };

    let mut channel = Vec::with_capacity(2 * n * n);
    for a in 0..2 {
        for yo in 0..n {
            for yp in 0..n {
                let cost = if relaxed { 0.0 } else { prob.cost(yo, yp, a) };
                channel.push(lp.add_var(format!("G[a={a},yo={yo},yp={yp}]"), cost));
            }
        }
    }
    let g = |a: usize, yo: usize, yp: usize| channel[(a * n + yo) * n + yp];

    let cells = match prob.criterion {
        Criterion::EqualizedOdds => n,
        Criterion::DemographicParity => 1,
    };
    let mut induced = Vec::with_capacity(2 * cells * n);
    for a in 0..2 {
        for c in 0..cells {
            for yp in 0..n {
                let name = match prob.criterion {
                    Criterion::EqualizedOdds => format!("F[a={a},y={c},yp={yp}]"),
                    Criterion::DemographicParity => format!("F[a={a},yp={yp}]"),
                };
                induced.push(lp.add_var(name, 0.0));
            }
        }
    }
    let f = |a: usize, c: usize, yp: usize| induced[(a * cells + c) * n + yp];

    let cell_mass = |c: usize, a: usize| match prob.criterion {
        Criterion::EqualizedOdds => pred.p_ya(c, a),
        Criterion::DemographicParity => (0..n).map(|y| pred.p_ya(y, a)).sum(),
    };
    // P(ŷ_O = yo, cell c, A = a).
    let cell_weight = |yo: usize, c: usize, a: usize| match prob.criterion {
        Criterion::EqualizedOdds => pred.q(yo, c, a),
        Criterion::DemographicParity => (0..n).map(|y| pred.q(yo, y, a)).sum(),
    };

    for c in 0..cells {
        if cell_mass(c, 0) <= 0.0 || cell_mass(c, 1) <= 0.0 {
            continue;
        }
        for yp in 0..n {
            if relaxed {
                let tv = t[c * n + yp];
                lp.add_le(&[(f(0, c, yp), 1.0), (f(1, c, yp), -1.0), (tv, -1.0)], 0.0);
                lp.add_le(&[(f(1, c, yp), 1.0), (f(0, c, yp), -1.0), (tv, -1.0)], 0.0);
            } else {
                lp.add_eq(&[(f(0, c, yp), 1.0), (f(1, c, yp), -1.0)], 0.0);
            }
        }
    }

    let mut distortion_rows = Vec::new();
    if let Mode::Relaxed(budget) = mode {
        let mut terms = Vec::with_capacity(2 * n * n);
        for a in 0..2 {
            for yo in 0..n {
                for yp in 0..n {
                    let cost = prob.cost(yo, yp, a);
                    if cost != 0.0 {
                        terms.push((g(a, yo, yp), cost));
                    }
                }
            }
        }
        distortion_rows.push(lp.add_le(&terms, budget));
    }

    // F(ŷ_P|c,a) = Σ_{ŷ_O} G(ŷ_P|ŷ_O,a) P(ŷ_O|c,a).
    for a in 0..2 {
        for c in 0..cells {
            let mass = cell_mass(c, a);
            if mass <= 0.0 {
                continue;
            }
            for yp in 0..n {
                let mut terms = vec![(f(a, c, yp), 1.0)];
                for yo in 0..n {
                    let coef = cell_weight(yo, c, a) / mass;
                    if coef != 0.0 {
                        terms.push((g(a, yo, yp), -coef));
                    }
                }
                lp.add_eq(&terms, 0.0);
            }
        }
    }

    for a in 0..2 {
        for c in 0..cells {
            let terms: Vec<(usize, f64)> = (0..n).map(|yp| (f(a, c, yp), 1.0)).collect();
            lp.add_eq(&terms, 1.0);
        }
    }
    for a in 0..2 {
        for yo in 0..n {
            let terms: Vec<(usize, f64)> = (0..n).map(|yp| (g(a, yo, yp), 1.0)).collect();
            lp.add_eq(&terms, 1.0);
        }
    }

    Ok((lp, PostLayout { t, channel, induced, distortion_rows }))
}

pub fn build_post_lp(prob: &PostProblem, budget: f64) -> Result<LinearProgram> {
    build(prob, budget).map(|(lp, _)| lp)
}

pub fn build(prob: &PostProblem, budget: f64) -> Result<(LinearProgram, PostLayout)> {
    if !budget.is_finite() {
        return Err(Error::InvalidInput(format!("budget {budget} is not finite")));
    }
    build_mode(prob, Mode::Relaxed(budget))
}

fn extract_channel(prob: &PostProblem, layout: &PostLayout, z: &[f64]) -> Result<[Channel; 2]> {
    let n = prob.pred.n();
    let raw: Vec<f64> = layout.channel.iter().map(|&j| z[j]).collect();
    Ok([Channel::from_solver(n, n, &raw[..n * n])?, Channel::from_solver(n, n, &raw[n * n..])?])
}

pub fn disc_post(prob: &PostProblem, budget: f64) -> Result<Solved<[Channel; 2]>> {
    let (d_min, _) = d_min_post(prob);
    if budget < d_min - FEAS_TOL {
        return Err(Error::InfeasibleBudget { budget, d_min });
    }
    let (lp, layout) = build(prob, budget)?;
    let sol = lp::solve(&lp)?;
    match sol.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => return Err(Error::InfeasibleBudget { budget, d_min }),
        LpStatus::Unbounded => return Err(Error::NumericalFailure("post-processing LP reported unbounded".into())),
    }
    let channel = extract_channel(prob, &layout, &sol.z)?;
    let slope = layout.distortion_rows.iter().map(|&r| sol.duals_ub[r]).sum();
    Ok(Solved { budget, disc: sol.objective.max(0.0), channel, basis: sol.basis, slope })
}

/// Smallest feasible budget: each `(ŷ_O, a)` is relabeled to the
/// lowest-index cheapest `ŷ_P`.
pub fn d_min_post(prob: &PostProblem) -> (f64, [Channel; 2]) {
    let n = prob.pred.n();
    let mut value = 0.0;
    let mut maps = [vec![0usize; n], vec![0usize; n]];
    for (a, map) in maps.iter_mut().enumerate() {
        for (yo, target) in map.iter_mut().enumerate() {
            let mut best = (0, prob.cost(yo, 0, a));
            for yp in 1..n {
                let c = prob.cost(yo, yp, a);
                if c < best.1 {
                    best = (yp, c);
                }
            }
            *target = best.0;
            value += best.1;
        }
    }
    let det = |m: &[usize]| Channel::deterministic(m, n).expect("argmin is in range");
    (value, [det(&maps[0]), det(&maps[1])])
}

/// Distortion of the uniform post-processor.
pub fn d_max_bound_post(prob: &PostProblem) -> f64 {
    let n = prob.pred.n();
    let mut total = 0.0;
    for y in 0..n {
        let py = prob.pred.p_y(y);
        for yp in 0..n {
            total += py * prob.d.get(y, yp);
        }
    }
    total / n as f64
}

pub fn d_max_exact_post(prob: &PostProblem, eps: f64) -> Result<f64> {
    curve::zero_disc_budget(prob, eps)
}

/// Minimal distortion subject to exact fairness, and the channel attaining it.
pub fn exact_eo_post(prob: &PostProblem) -> Result<(f64, [Channel; 2])> {
    let (lp, layout) = build_mode(prob, Mode::Exact)?;
    let sol = lp::solve(&lp)?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::NumericalFailure(format!("exact-fairness LP ended {:?}", sol.status)));
    }
    Ok((sol.objective, extract_channel(prob, &layout, &sol.z)?))
}

pub fn tradeoff_curve_post(prob: &PostProblem, grid: &Grid) -> Result<TradeoffCurve<[Channel; 2]>> {
    curve::tradeoff_curve(prob, grid)
}

impl BudgetProblem for PostProblem {
    type Channel = [Channel; 2];

    fn d_min(&self) -> f64 {
        d_min_post(self).0
    }

    fn d_max_bound(&self) -> f64 {
        d_max_bound_post(self)
    }

    fn solve_at(&self, budget: f64) -> Result<Solved<[Channel; 2]>> {
        disc_post(self, budget)
    }
}
