mod common;

use common::{random_channel, random_joint, rng, simplex};
use fairproc::analysis::{brute_force_disc, BruteTarget};
use fairproc::curve::Grid;
use fairproc::post::*;
use fairproc::prob::*;
use fairproc::{Criterion, Error};
use rand::Rng;

fn random_problem(r: &mut impl Rng, n: usize) -> PostProblem {
    let joint = random_joint(r, 3, n);
    let w = random_channel(r, 3, n);
    PostProblem::new(derive_pred_joint(&w, &joint).unwrap(), DistortionMatrix::zero_one(n)).unwrap()
}

fn all_deterministic_post(n: usize) -> Vec<[Channel; 2]> {
    let total = n.pow(2 * n as u32);
    (0..total)
        .map(|mut code| {
            let mut map = vec![0; 2 * n];
            for m in map.iter_mut() {
                *m = code % n;
                code /= n;
            }
            [Channel::deterministic(&map[..n], n).unwrap(), Channel::deterministic(&map[n..], n).unwrap()]
        })
        .collect()
}

/// Prediction joint whose conditionals are the same for both groups.
fn fair_pred(r: &mut impl Rng) -> PredictionJoint {
    let p_ya = simplex(r, 4);
    let cond: Vec<Vec<f64>> = (0..2).map(|_| simplex(r, 2)).collect();
    PredictionJoint::from_fn(2, |yh, y, a| p_ya[2 * a + y] * cond[y][yh]).unwrap()
}

fn identity_pair(n: usize) -> [Channel; 2] {
    [Channel::identity(n), Channel::identity(n)]
}

#[test]
fn derived_joint_matches_triple_loop() {
    let mut r = rng(51);
    for _ in 0..20 {
        let (nx, ny) = (r.gen_range(2..5), r.gen_range(2..4));
        let joint = random_joint(&mut r, nx, ny);
        let w = random_channel(&mut r, nx, ny);
        let pred = derive_pred_joint(&w, &joint).unwrap();
        for yh in 0..ny {
            for y in 0..ny {
                for a in 0..2 {
                    let mut s = 0.0;
                    for x in 0..nx {
                        s += w.get(x, yh) * joint.p(a, x, y);
                    }
                    assert!((pred.q(yh, y, a) - s).abs() < 1e-15);
                }
            }
        }
        for y in 0..ny {
            for a in 0..2 {
                assert!((pred.p_ya(y, a) - joint.p_ya(y, a)).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn derived_joint_for_perfect_and_uniform_classifiers() {
    let joint = JointDistribution::from_fn(2, 2, |a, x, y| if x == y { [0.3, 0.2][a] } else { 0.0 }).unwrap();
    let perfect = derive_pred_joint(&Channel::identity(2), &joint).unwrap();
    let uniform = derive_pred_joint(&Channel::uniform(2, 2), &joint).unwrap();
    for yh in 0..2 {
        for y in 0..2 {
            for a in 0..2 {
                let want = if yh == y { joint.p_ya(y, a) } else { 0.0 };
                assert!((perfect.q(yh, y, a) - want).abs() < 1e-15);
                assert!((uniform.q(yh, y, a) - joint.p_ya(y, a) / 2.0).abs() < 1e-15);
            }
        }
    }
    assert!(derive_pred_joint(&Channel::identity(3), &joint).is_err());
}

#[test]
fn variable_counts() {
    let mut r = rng(52);
    let prob = random_problem(&mut r, 2);
    let (_, layout) = build(&prob, 0.5).unwrap();
    assert_eq!((layout.t.len(), layout.channel.len(), layout.induced.len()), (4, 8, 8));
}

#[test]
fn identity_is_feasible_at_the_status_quo() {
    let mut r = rng(53);
    for _ in 0..10 {
        let prob = random_problem(&mut r, 2);
        let id = identity_pair(2);
        let budget = prob.distortion(&id).unwrap();
        let sol = disc_post(&prob, budget).unwrap();
        let tv0 = prob.discrimination(&id).unwrap();
        assert!(sol.disc <= tv0 + 1e-9);
    }
}

#[test]
fn zero_discrimination_at_the_uniform_channel() {
    let mut r = rng(54);
    for _ in 0..10 {
        let prob = random_problem(&mut r, 3);
        let uni = [Channel::uniform(3, 3), Channel::uniform(3, 3)];
        let budget = prob.distortion(&uni).unwrap();
        assert!(disc_post(&prob, budget).unwrap().disc < 1e-9);
        assert!(d_max_bound_post(&prob) <= budget + 1e-12);
    }
}

#[test]
fn fair_predictor_needs_no_correction() {
    let mut r = rng(55);
    let pred = fair_pred(&mut r);
    let prob = PostProblem::new(pred, DistortionMatrix::zero_one(2)).unwrap();
    let id = identity_pair(2);
    let status_quo = prob.distortion(&id).unwrap();
    assert!(disc_post(&prob, status_quo).unwrap().disc < 1e-9);
    let (dist, ch) = exact_eo_post(&prob).unwrap();
    assert!(dist <= status_quo + 1e-9);
    assert!(prob.discrimination(&ch).unwrap() < 1e-9);
}

#[test]
fn returned_channels_are_achievable() {
    let mut r = rng(56);
    for _ in 0..20 {
        let crit = if r.gen_bool(0.5) { Criterion::EqualizedOdds } else { Criterion::DemographicParity };
        let n = r.gen_range(2..4);
        let prob = random_problem(&mut r, n).with_criterion(crit);
        let budget = d_min_post(&prob).0 + r.gen_range(0.0..0.2);
        let sol = disc_post(&prob, budget).unwrap();
        assert!(prob.distortion(&sol.channel).unwrap() <= budget + 1e-9);
        assert!((prob.discrimination(&sol.channel).unwrap() - sol.disc).abs() < 1e-9);
        assert!((0.0..=2.0 + 1e-12).contains(&sol.disc));
    }
}

#[test]
fn budget_below_d_min_is_rejected() {
    let mut r = rng(57);
    let prob = random_problem(&mut r, 2);
    let (dmin, _) = d_min_post(&prob);
    assert!(matches!(disc_post(&prob, dmin - 1e-3), Err(Error::InfeasibleBudget { .. })));
}

#[test]
fn d_min_matches_enumeration() {
    let mut r = rng(58);
    for n in [2, 3] {
        for _ in 0..10 {
            let prob = random_problem(&mut r, n);
            let best = all_deterministic_post(n)
                .iter()
                .map(|c| prob.distortion(c).unwrap())
                .fold(f64::INFINITY, f64::min);
            let (v, ch) = d_min_post(&prob);
            assert!(ch.iter().all(Channel::is_deterministic));
            assert!((v - best).abs() < 1e-12);
            assert!((prob.distortion(&ch).unwrap() - v).abs() < 1e-12);
        }
    }
}

#[test]
fn proper_predictor_keeps_identity_at_d_min() {
    // P(y = ŷ | ŷ, a) > 1/2 in every cell.
    let pred = PredictionJoint::from_fn(2, |yh, y, a| {
        let hit = [[0.3, 0.26], [0.28, 0.27]][a][yh];
        (if y == yh { hit } else { 0.5 - hit }) / 2.0
    })
    .unwrap();
    let prob = PostProblem::new(pred, DistortionMatrix::zero_one(2)).unwrap();
    let (v, ch) = d_min_post(&prob);
    assert_eq!(ch, identity_pair(2));
    assert!((v - prob.distortion(&identity_pair(2)).unwrap()).abs() < 1e-15);
    let best = all_deterministic_post(2)
        .iter()
        .map(|c| prob.distortion(c).unwrap())
        .fold(f64::INFINITY, f64::min);
    assert_eq!(best, v);
}

#[test]
fn zero_distortion_matrix() {
    let mut r = rng(59);
    let joint = random_joint(&mut r, 3, 2);
    let w = random_channel(&mut r, 3, 2);
    let prob = PostProblem::new(derive_pred_joint(&w, &joint).unwrap(), DistortionMatrix::zero(2)).unwrap();
    let (v, ch) = d_min_post(&prob);
    assert_eq!(v, 0.0);
    let zero = Channel::deterministic(&[0, 0], 2).unwrap();
    assert_eq!(ch, [zero.clone(), zero]);
}

#[test]
fn exact_equalized_odds_is_feasible_and_bounded_by_constants() {
    let mut r = rng(60);
    for _ in 0..10 {
        let prob = random_problem(&mut r, 2);
        let (dist, ch) = exact_eo_post(&prob).unwrap();
        let induced = induced_post_channel(&ch, &prob.pred).unwrap();
        for y in 0..2 {
            let (p0, p1) = (induced.cell(y, 0).unwrap(), induced.cell(y, 1).unwrap());
            assert!(p0.iter().zip(p1).all(|(u, v)| (u - v).abs() < 1e-9));
        }
        let p_y = prob.pred.label_marginal();
        assert!(dist <= p_y[0].min(p_y[1]) + 1e-12);
    }
}

#[test]
fn maximally_biased_instance_collapses_to_a_constant() {
    // Group 0 is always predicted 0, group 1 always 1, whatever the label.
    let pred = PredictionJoint::from_fn(2, |yh, y, a| if yh == a { [0.3, 0.2][y] } else { 0.0 }).unwrap();
    let prob = PostProblem::new(pred, DistortionMatrix::zero_one(2)).unwrap();
    let (dist, _) = exact_eo_post(&prob).unwrap();
    assert!((dist - 0.4).abs() < 1e-9, "{dist}");
}

#[test]
fn exact_equalized_odds_matches_the_relaxed_sweep() {
    let mut r = rng(61);
    for _ in 0..10 {
        let prob = random_problem(&mut r, 2);
        let (exact, _) = exact_eo_post(&prob).unwrap();
        let swept = d_max_exact_post(&prob, 1e-9).unwrap();
        assert!((exact - swept).abs() < 1e-6, "{exact} vs {swept}");
        let (dmin, _) = d_min_post(&prob);
        let tv0 = prob.discrimination(&identity_pair(2)).unwrap();
        if exact - 1e-4 > dmin && tv0 > 1e-6 {
            assert!(disc_post(&prob, exact - 1e-4).unwrap().disc > 0.0);
        }
    }
}

#[test]
fn grid_oracle_on_binary_instances() {
    let mut r = rng(62);
    for _ in 0..3 {
        let prob = random_problem(&mut r, 2);
        let (dmin, _) = d_min_post(&prob);
        let budget = dmin + 0.5 * (d_max_bound_post(&prob) - dmin);
        let lp = disc_post(&prob, budget).unwrap().disc;
        let grid = brute_force_disc(BruteTarget::Post(&prob), budget, 0.01).unwrap();
        assert!(lp <= grid.disc + 1e-9);
        assert!(grid.disc - lp <= 1e-2 + 1e-12, "{lp} vs {}", grid.disc);
    }
}

#[test]
fn post_curve_shape() {
    let mut r = rng(63);
    for _ in 0..10 {
        let prob = random_problem(&mut r, 2);
        let curve = tradeoff_curve_post(&prob, &Grid::Auto(17)).unwrap();
        assert!(curve.checks.convex && curve.checks.non_increasing && curve.checks.chord_linear);
        assert!((curve.points[0].budget - d_min_post(&prob).0).abs() < 1e-12);
        assert!(curve.points.last().unwrap().disc < 1e-9);
    }
    // Fair and proper: the d_min channel is the identity, so the whole curve is flat.
    let cond = [[0.8, 0.2], [0.3, 0.7]];
    let pred = PredictionJoint::from_fn(2, |yh, y, _| 0.25 * cond[y][yh]).unwrap();
    let fair = PostProblem::new(pred, DistortionMatrix::zero_one(2)).unwrap();
    assert_eq!(d_min_post(&fair).1, identity_pair(2));
    let curve = tradeoff_curve_post(&fair, &Grid::Auto(9)).unwrap();
    assert!(curve.breakpoints.is_empty());
    assert!(curve.points.iter().all(|p| p.disc < 1e-9));
}
