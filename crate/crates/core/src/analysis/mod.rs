//! Comparative results for binary labels: substituting post-processors with
//! pre-processors, properness, the pre-vs-post dominance comparison, and the
//! detection/false-alarm geometry behind it.

mod brute;
mod scatter;

pub use brute::{brute_force_disc, BruteForce, BruteTarget};
pub use scatter::{hand_built_skewed_joint, sample_prediction_joint, tv_mi_scatter, ScatterPoint};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::post::{d_min_post, derive_pred_joint, disc_post, PostProblem};
use crate::pre::{d_min_pre, disc_pre, PreProblem};
use crate::prob::{AttrChannel, Channel, CondPrediction, DistortionMatrix, JointDistribution, PredictionJoint};

/// Strict-inequality margin used for verdicts.
pub const MARGIN: f64 = 1e-9;

/// `(P(Ŷ=1 | Y=0, A=a), P(Ŷ=1 | Y=1, A=a))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OperatingPoint {
    pub false_alarm: f64,
    pub detection: f64,
}

fn require_binary(what: &str, n: usize) -> Result<()> {
    if n != 2 {
        return Err(Error::UnsupportedShape(format!("{what} must be binary, has {n} symbols")));
    }
    Ok(())
}

/// Per-group operating points of a binary conditional prediction.
pub fn operating_points(cond: &CondPrediction) -> Result<[OperatingPoint; 2]> {
    require_binary("label alphabet", cond.ny())?;
    require_binary("prediction alphabet", cond.m())?;
    let point = |a: usize| -> Result<OperatingPoint> {
        Ok(OperatingPoint { false_alarm: cond.get(1, 0, a)?, detection: cond.get(1, 1, a)? })
    };
    Ok([point(0)?, point(1)?])
}

/// Lowest-index features the classifier labels 0 and 1 with certainty (within `tol`).
pub fn check_substitution(w: &Channel, tol: f64) -> Option<(usize, usize)> {
    if w.cols() != 2 {
        return None;
    }
    let x0 = (0..w.rows()).find(|&x| w.get(x, 1).abs() <= tol)?;
    let x1 = (0..w.rows()).find(|&x| (1.0 - w.get(x, 1)).abs() <= tol)?;
    Some((x0, x1))
}

/// Builds a pre-processor reproducing the post-processor's induced conditional.
///
/// Row `(x, a)` splits its mass between the witnesses `x0` and `x1` so that
/// `P(Ŷ_F = 1 | x, a) = Σ_{ŷ_O} P(Ŷ_P = 1 | ŷ_O, a) W(ŷ_O | x)`.
pub fn substitute_post_with_pre(
    post: &[Channel; 2],
    w: &Channel,
    joint: &JointDistribution,
    x0: usize,
    x1: usize,
) -> Result<AttrChannel> {
    require_binary("classifier output", w.cols())?;
    let nx = joint.nx();
    if w.rows() != nx || post.iter().any(|g| g.rows() != 2 || g.cols() != 2) {
        return Err(Error::InvalidInput("shape mismatch between post-processor, classifier and joint".into()));
    }
    if x0 >= nx || x1 >= nx || w.get(x0, 1) > 1e-9 || w.get(x1, 1) < 1.0 - 1e-9 {
        return Err(Error::SubstitutionUnavailable);
    }
    let group = |g: &Channel| -> Result<Channel> {
        let mut data = vec![0.0; nx * nx];
        for x in 0..nx {
            let tau = (0..2).map(|yo| g.get(yo, 1) * w.get(x, yo)).sum::<f64>().clamp(0.0, 1.0);
            data[x * nx + x0] += 1.0 - tau;
            data[x * nx + x1] += tau;
        }
        Channel::new(nx, nx, data)
    };
    Ok(AttrChannel::ByGroup([group(&post[0])?, group(&post[1])?]))
}

/// Correct-classification cells strictly dominate both error cells in each group.
pub fn is_proper(pred: &PredictionJoint) -> Result<bool> {
    require_binary("label alphabet", pred.n())?;
    Ok((0..2).all(|a| {
        let errors = [pred.q(1, 0, a), pred.q(0, 1, a)];
        errors.iter().all(|&e| pred.q(1, 1, a) > e && pred.q(0, 0, a) > e)
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WitnessSide {
    /// A minority feature (not the classifier's most-positive one) that is more likely qualified.
    MinorityXI,
    /// A majority feature (not the classifier's most-negative one) that is more likely unqualified.
    MajorityXJ,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Prop4Witness {
    pub side: WitnessSide,
    pub x: usize,
}

fn argmin_by(n: usize, f: impl Fn(usize) -> f64) -> usize {
    (1..n).fold(0, |best, x| if f(x) < f(best) { x } else { best })
}

/// Checks the minority-underprivileged convention: group 0 has both the
/// higher false-alarm and the higher detection rate.
pub fn check_convention(pred: &PredictionJoint) -> Result<()> {
    let ops = operating_points(&pred.cond_pred())?;
    if ops[0].false_alarm > ops[1].false_alarm && ops[0].detection > ops[1].detection {
        Ok(())
    } else {
        Err(Error::ConventionViolated(format!(
            "group 0 at (FA {:.6}, DET {:.6}) does not dominate group 1 at (FA {:.6}, DET {:.6})",
            ops[0].false_alarm, ops[0].detection, ops[1].false_alarm, ops[1].detection
        )))
    }
}

/// The dominance condition: a minority feature `x_i ≠ x_max` with
/// `P(Y=0 | x_i, 1) < P(Y=1 | x_i, 1)`, or a majority feature `x_j ≠ x_min`
/// with `P(Y=1 | x_j, 0) < P(Y=0 | x_j, 0)`. Returns the lowest-index witness.
pub fn prop4_condition(joint: &JointDistribution, w: &Channel) -> Result<Option<Prop4Witness>> {
    require_binary("label alphabet", joint.ny())?;
    let pred = derive_pred_joint(w, joint)?;
    check_convention(&pred)?;
    let nx = joint.nx();
    let x_min = argmin_by(nx, |x| w.get(x, 1));
    let x_max = argmin_by(nx, |x| -w.get(x, 1));
    let minority = (0..nx)
        .find(|&x| x != x_max && joint.p_xa(x, 1) > 0.0 && joint.p(1, x, 0) < joint.p(1, x, 1))
        .map(|x| Prop4Witness { side: WitnessSide::MinorityXI, x });
    let majority = || {
        (0..nx)
            .find(|&x| x != x_min && joint.p_xa(x, 0) > 0.0 && joint.p(0, x, 1) < joint.p(0, x, 0))
            .map(|x| Prop4Witness { side: WitnessSide::MajorityXJ, x })
    };
    Ok(minority.or_else(majority))
}

/// The explicit dominating pre-processor built from a witness: identity
/// everywhere except the witness row in its group, which moves mass `alpha`
/// to `x_max` (minority witness) or `x_min` (majority witness).
pub fn witness_channel(w: &Channel, witness: Prop4Witness, alpha: f64) -> Result<AttrChannel> {
    let nx = w.rows();
    let (group, target) = match witness.side {
        WitnessSide::MinorityXI => (1, argmin_by(nx, |x| -w.get(x, 1))),
        WitnessSide::MajorityXJ => (0, argmin_by(nx, |x| w.get(x, 1))),
    };
    let mut data = Channel::identity(nx).data().to_vec();
    let row = witness.x * nx;
    data[row + witness.x] -= alpha;
    data[row + target] += alpha;
    let moved = Channel::new(nx, nx, data)?;
    Ok(if group == 1 {
        AttrChannel::ByGroup([Channel::identity(nx), moved])
    } else {
        AttrChannel::ByGroup([moved, Channel::identity(nx)])
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConstructedPre {
    pub alpha: f64,
    pub distortion: f64,
    pub disc: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    /// Pre-processing has both the lower minimal distortion and the lower discrimination there.
    PreDominates,
    PostDominates,
    /// Equal discrimination at the respective minimal budgets.
    Tie,
    /// Each side wins on one axis.
    Mixed,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub d_min_pre_a: f64,
    pub d_min_post: f64,
    pub disc_at_dmin_pre: f64,
    pub disc_at_dmin_post: f64,
    /// Discrimination of the unprocessed classifier.
    pub disc_original: f64,
    pub substitution_witness: Option<(usize, usize)>,
    pub proper: bool,
    pub convention_holds: bool,
    /// False when the predictor is not proper or the convention fails.
    pub prop4_applicable: bool,
    pub prop4_witness: Option<Prop4Witness>,
    /// Best witness channel over `alpha ∈ {0.1, …, 1.0}` that beats the
    /// post-processor on both axes, or failing that the first such one
    /// while halving `alpha` from 0.05.
    pub constructed: Option<ConstructedPre>,
    pub dominance_verdict: Verdict,
}

impl ComparisonReport {
    /// A witness must come with both strict inequalities.
    pub fn is_consistent(&self) -> bool {
        match self.prop4_witness {
            Some(_) if self.prop4_applicable => {
                self.d_min_pre_a < self.d_min_post - MARGIN && self.disc_at_dmin_pre < self.disc_at_dmin_post - MARGIN
            }
            _ => true,
        }
    }
}

fn verdict(dist_pre: f64, dist_post: f64, disc_pre: f64, disc_post: f64) -> Verdict {
    if (disc_pre - disc_post).abs() <= MARGIN {
        return Verdict::Tie;
    }
    let pre_fairer = disc_pre < disc_post;
    let pre_cheaper = dist_pre < dist_post - MARGIN;
    let post_cheaper = dist_post < dist_pre - MARGIN;
    match (pre_fairer, pre_cheaper, post_cheaper) {
        (true, true, _) => Verdict::PreDominates,
        (false, _, true) => Verdict::PostDominates,
        (true, false, false) => Verdict::PreDominates,
        (false, false, false) => Verdict::PostDominates,
        _ => Verdict::Mixed,
    }
}

/// Compares A-aware pre-processing with post-processing at their minimal budgets.
pub fn compare_pre_post(joint: &JointDistribution, w: &Channel, d: &DistortionMatrix) -> Result<ComparisonReport> {
    require_binary("label alphabet", joint.ny())?;
    let pred = derive_pred_joint(w, joint)?;
    let pre = PreProblem::new(joint.clone(), w.clone(), d.clone())?;
    let post = PostProblem::new(pred.clone(), d.clone())?;

    let (d_min_pre_a, _) = d_min_pre(&pre);
    let (d_min_post, _) = d_min_post(&post);
    let disc_at_dmin_pre = disc_pre(&pre, d_min_pre_a)?.disc;
    let disc_at_dmin_post = disc_post(&post, d_min_post)?.disc;
    let identity = [Channel::identity(2), Channel::identity(2)];
    let disc_original = post.discrimination(&identity)?;

    let proper = is_proper(&pred)?;
    let convention_holds = check_convention(&pred).is_ok();
    let prop4_applicable = proper && convention_holds;
    let prop4_witness = if prop4_applicable { prop4_condition(joint, w)? } else { None };

    let constructed = match prop4_witness {
        Some(witness) => {
            let try_alpha = |alpha: f64| -> Result<Option<ConstructedPre>> {
                let ch = witness_channel(w, witness, alpha)?;
                let cand = ConstructedPre { alpha, distortion: pre.distortion(&ch)?, disc: pre.discrimination(&ch)? };
                let beats = cand.distortion < d_min_post - MARGIN && cand.disc < disc_at_dmin_post - MARGIN;
                Ok(beats.then_some(cand))
            };
            let mut best: Option<ConstructedPre> = None;
            for step in 1..=10 {
                if let Some(cand) = try_alpha(step as f64 / 10.0)? {
                    if best.map_or(true, |b| cand.disc < b.disc) {
                        best = Some(cand);
                    }
                }
            }
            // The move only helps locally on some instances; shrink it.
            let mut alpha = 0.05;
            while best.is_none() && alpha > 1e-6 {
                best = try_alpha(alpha)?;
                alpha /= 2.0;
            }
            best
        }
        None => None,
    };

    Ok(ComparisonReport {
        d_min_pre_a,
        d_min_post,
        disc_at_dmin_pre,
        disc_at_dmin_post,
        disc_original,
        substitution_witness: check_substitution(w, 1e-9),
        proper,
        convention_holds,
        prop4_applicable,
        prop4_witness,
        constructed,
        dominance_verdict: verdict(d_min_pre_a, d_min_post, disc_at_dmin_pre, disc_at_dmin_post),
    })
}
