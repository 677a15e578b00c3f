//! Grid search over channel parameters, independent of the LP machinery.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::post::PostProblem;
use crate::pre::PreProblem;
use crate::problem::{Criterion, DistortionMode};

/// Largest number of free channel parameters the grid search accepts.
pub const MAX_PARAMS: usize = 4;

#[derive(Debug, Clone, Copy)]
pub enum BruteTarget<'a> {
    Pre(&'a PreProblem),
    Post(&'a PostProblem),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BruteForce {
    /// Smallest discrimination over feasible grid points, `+inf` if none is feasible.
    pub disc: f64,
    /// Moving every row by at most `h` in sup-norm changes the objective by at most `lipschitz * h`.
    pub lipschitz: f64,
    pub grid_points: usize,
    pub feasible_points: usize,
}

/// One channel row: for each output choice, its linear effect on the induced
/// vectors (group, coordinate, coefficient) and on the distortion components.
struct Row {
    effects: Vec<Vec<(usize, usize, f64)>>,
    costs: Vec<Vec<(usize, f64)>>,
}

struct Model {
    /// Rows grouped by the channel block they belong to; blocks vary independently.
    blocks: Vec<Vec<Row>>,
    weights: Vec<f64>,
    dims: usize,
}

fn pre_model(p: &PreProblem) -> Model {
    let joint = &p.joint;
    let (nx, ny) = (joint.nx(), joint.ny());
    let m = p.w.cols();
    let both = |y: Option<usize>| -> bool {
        (0..2).all(|a| match y {
            Some(y) => joint.p_ya(y, a) > 0.0,
            None => joint.p_a(a) > 0.0,
        })
    };
    let (dims, weights): (usize, Vec<f64>) = match p.criterion {
        Criterion::EqualizedOdds => (
            ny * m,
            (0..ny * m).map(|k| if both(Some(k / m)) { joint.p_y(k / m) } else { 0.0 }).collect(),
        ),
        Criterion::DemographicParity => (m, vec![if both(None) { 1.0 } else { 0.0 }; m]),
    };
    let row = |x: usize, groups: &[usize]| -> Row {
        let mut effects = Vec::with_capacity(nx);
        let mut costs = Vec::with_capacity(nx);
        for xt in 0..nx {
            let mut eff = Vec::new();
            let mut cost = 0.0;
            for &a in groups {
                match p.criterion {
                    Criterion::EqualizedOdds => {
                        for y in 0..ny {
                            let pya = joint.p_ya(y, a);
                            if pya > 0.0 {
                                for yh in 0..m {
                                    eff.push((a, y * m + yh, p.w.get(xt, yh) * joint.p(a, x, y) / pya));
                                }
                            }
                        }
                    }
                    Criterion::DemographicParity => {
                        let pa = joint.p_a(a);
                        if pa > 0.0 {
                            for yh in 0..m {
                                eff.push((a, yh, p.w.get(xt, yh) * joint.p_xa(x, a) / pa));
                            }
                        }
                    }
                }
                for y in 0..ny {
                    for yh in 0..m {
                        cost += p.w.get(xt, yh) * joint.p(a, x, y) * p.d.get(y, yh);
                    }
                }
            }
            effects.push(eff);
            costs.push(match p.distortion_mode {
                DistortionMode::Global => vec![(0, cost)],
                DistortionMode::PerX if joint.p_x(x) > 0.0 => vec![(x, cost / joint.p_x(x))],
                DistortionMode::PerX => vec![],
            });
        }
        Row { effects, costs }
    };
    let blocks = if p.use_a {
        (0..2).map(|a| (0..nx).map(|x| row(x, &[a])).collect()).collect()
    } else {
        vec![(0..nx).map(|x| row(x, &[0, 1])).collect()]
    };
    Model { blocks, weights, dims }
}

fn post_model(p: &PostProblem) -> Result<Model> {
    let pred = &p.pred;
    let n = pred.n();
    let p_a = |a: usize| -> f64 { (0..n).map(|y| pred.p_ya(y, a)).sum() };
    let (dims, weights): (usize, Vec<f64>) = match p.criterion {
        Criterion::EqualizedOdds => (
            n * n,
            (0..n * n)
                .map(|k| {
                    let y = k / n;
                    if pred.p_ya(y, 0) > 0.0 && pred.p_ya(y, 1) > 0.0 {
                        pred.p_y(y)
                    } else {
                        0.0
                    }
                })
                .collect(),
        ),
        Criterion::DemographicParity => (n, vec![if p_a(0) > 0.0 && p_a(1) > 0.0 { 1.0 } else { 0.0 }; n]),
    };
    let blocks = (0..2)
        .map(|a| {
            (0..n)
                .map(|yo| {
                    let mut effects = Vec::with_capacity(n);
                    let mut costs = Vec::with_capacity(n);
                    for yp in 0..n {
                        let mut eff = Vec::new();
                        match p.criterion {
                            Criterion::EqualizedOdds => {
                                for y in 0..n {
                                    let pya = pred.p_ya(y, a);
                                    if pya > 0.0 {
                                        eff.push((a, y * n + yp, pred.q(yo, y, a) / pya));
                                    }
                                }
                            }
                            Criterion::DemographicParity => {
                                let pa = p_a(a);
                                if pa > 0.0 {
                                    let mass: f64 = (0..n).map(|y| pred.q(yo, y, a)).sum();
                                    eff.push((a, yp, mass / pa));
                                }
                            }
                        }
                        effects.push(eff);
                        let cost = (0..n).map(|y| pred.q(yo, y, a) * p.d.get(y, yp)).sum();
                        costs.push(vec![(0, cost)]);
                    }
                    Row { effects, costs }
                })
                .collect()
        })
        .collect();
    Ok(Model { blocks, weights, dims })
}

/// All points `k / units` of the simplex with `len` coordinates.
fn simplex_grid(len: usize, units: usize) -> Vec<Vec<f64>> {
    fn rec(len: usize, left: usize, units: usize, cur: &mut Vec<f64>, out: &mut Vec<Vec<f64>>) {
        if len == 1 {
            cur.push(left as f64 / units as f64);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for k in 0..=left {
            cur.push(k as f64 / units as f64);
            rec(len - 1, left - k, units, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(len, units, units, &mut Vec::with_capacity(len), &mut out);
    out
}

/// Induced vectors of both groups and the distortion components, one entry per grid point.
struct BlockPoints {
    v: [Vec<f64>; 2],
    cost: Vec<f64>,
    len: usize,
}

fn enumerate_block(rows: &[Row], units: usize, dims: usize, cdims: usize) -> BlockPoints {
    let grids: Vec<Vec<Vec<f64>>> = rows.iter().map(|r| simplex_grid(r.effects.len(), units)).collect();
    let total: usize = grids.iter().map(Vec::len).product();
    let mut out = BlockPoints { v: [vec![0.0; total * dims], vec![0.0; total * dims]], cost: vec![0.0; total * cdims], len: total };
    let mut idx = vec![0usize; rows.len()];
    for point in 0..total {
        for (r, row) in rows.iter().enumerate() {
            let k = &grids[r][idx[r]];
            for (j, &kj) in k.iter().enumerate() {
                if kj == 0.0 {
                    continue;
                }
                for &(g, c, coef) in &row.effects[j] {
                    out.v[g][point * dims + c] += kj * coef;
                }
                for &(c, coef) in &row.costs[j] {
                    out.cost[point * cdims + c] += kj * coef;
                }
            }
        }
        for r in 0..rows.len() {
            idx[r] += 1;
            if idx[r] < grids[r].len() {
                break;
            }
            idx[r] = 0;
        }
    }
    out
}

/// Minimum discrimination over a grid of step `step` on every channel row,
/// subject to the distortion budget. Only small shapes are accepted.
pub fn brute_force_disc(target: BruteTarget<'_>, budget: f64, step: f64) -> Result<BruteForce> {
    if !(step > 0.0 && step <= 0.1) {
        return Err(Error::InvalidInput(format!("grid step must lie in (0, 0.1], got {step}")));
    }
    let (model, cdims) = match target {
        BruteTarget::Pre(p) => {
            let cdims = if p.distortion_mode == DistortionMode::PerX { p.joint.nx() } else { 1 };
            (pre_model(p), cdims)
        }
        BruteTarget::Post(p) => (post_model(p)?, 1),
    };
    let params: usize = model.blocks.iter().flatten().map(|r| r.effects.len() - 1).sum();
    if params > MAX_PARAMS {
        return Err(Error::TooLarge { params });
    }
    let units = {
        let r = (1.0 / step).round();
        if (r * step - 1.0).abs() < 1e-9 {
            r as usize
        } else {
            (1.0 / step).ceil() as usize
        }
    };
    let dims = model.dims;
    let w = &model.weights;

    let mut lipschitz = 0.0;
    for row in model.blocks.iter().flatten() {
        for g in 0..2 {
            for k in 0..dims {
                let coefs: Vec<f64> = row
                    .effects
                    .iter()
                    .map(|e| e.iter().filter(|t| t.0 == g && t.1 == k).map(|t| t.2).sum())
                    .collect();
                let hi = coefs.iter().cloned().fold(f64::MIN, f64::max);
                let lo = coefs.iter().cloned().fold(f64::MAX, f64::min);
                lipschitz += 0.5 * row.effects.len() as f64 * w[k] * (hi - lo);
            }
        }
    }

    let pts: Vec<BlockPoints> = model.blocks.iter().map(|b| enumerate_block(b, units, dims, cdims)).collect();
    let limit = budget + 1e-12;
    let objective = |v0: &[f64], v1: &[f64]| -> f64 { (0..dims).map(|k| w[k] * (v0[k] - v1[k]).abs()).sum() };

    let mut best = f64::INFINITY;
    let mut feasible = 0usize;
    let grid_points;
    match pts.as_slice() {
        [only] => {
            grid_points = only.len;
            for i in 0..only.len {
                if only.cost[i * cdims..(i + 1) * cdims].iter().all(|&c| c <= limit) {
                    feasible += 1;
                    let v = |g: usize| &only.v[g][i * dims..(i + 1) * dims];
                    best = best.min(objective(v(0), v(1)));
                }
            }
        }
        [b0, b1] => {
            grid_points = b0.len * b1.len;
            for i in 0..b0.len {
                let c0 = &b0.cost[i * cdims..(i + 1) * cdims];
                if c0.iter().any(|&c| c > limit) {
                    continue;
                }
                let v0 = &b0.v[0][i * dims..(i + 1) * dims];
                for j in 0..b1.len {
                    let c1 = &b1.cost[j * cdims..(j + 1) * cdims];
                    if c0.iter().zip(c1).all(|(a, b)| a + b <= limit) {
                        feasible += 1;
                        best = best.min(objective(v0, &b1.v[1][j * dims..(j + 1) * dims]));
                    }
                }
            }
        }
        _ => unreachable!("models have one or two blocks"),
    }
    Ok(BruteForce { disc: best, lipschitz, grid_points, feasible_points: feasible })
}
