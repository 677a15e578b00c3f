#![allow(dead_code)]

use fairproc::lp::LinearProgram;
use fairproc::prob::{Channel, JointDistribution};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform point of the simplex with `n` coordinates.
pub fn simplex(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| -rng.gen::<f64>().max(1e-300).ln()).collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / s).collect()
}

pub fn random_joint(rng: &mut impl Rng, nx: usize, ny: usize) -> JointDistribution {
    JointDistribution::new(nx, ny, simplex(rng, 2 * nx * ny)).unwrap()
}

pub fn random_channel(rng: &mut impl Rng, rows: usize, cols: usize) -> Channel {
    let data: Vec<f64> = (0..rows).flat_map(|_| simplex(rng, cols)).collect();
    Channel::with_tolerance(rows, cols, data, 1e-12).unwrap()
}

/// Solves `m x = b` by Gaussian elimination with partial pivoting.
pub fn gauss(mut m: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[piv][col].abs() < 1e-11 {
            return None;
        }
        m.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = m[r][col] / m[col][col];
            for c in col..n {
                m[r][c] -= f * m[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| m[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / m[r][r];
    }
    Some(x)
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// Optimum over all basic feasible solutions, `None` if there are none.
/// Assumes the constraint rows (with slacks) have full row rank.
pub fn vertex_enumeration(lp: &LinearProgram) -> Option<(f64, Vec<f64>)> {
    let n = lp.num_vars();
    let m_ub = lp.a_ub.len();
    let rows: Vec<Vec<f64>> = lp
        .a_eq
        .iter()
        .map(|r| {
            let mut r = r.clone();
            r.extend(std::iter::repeat(0.0).take(m_ub));
            r
        })
        .chain(lp.a_ub.iter().enumerate().map(|(i, r)| {
            let mut r = r.clone();
            r.extend((0..m_ub).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        }))
        .collect();
    let rhs: Vec<f64> = lp.b_eq.iter().chain(&lp.b_ub).copied().collect();
    let m = rows.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for cols in combinations(n + m_ub, m) {
        let sq: Vec<Vec<f64>> = rows.iter().map(|r| cols.iter().map(|&c| r[c]).collect()).collect();
        let Some(xb) = gauss(sq, rhs.clone()) else { continue };
        if xb.iter().any(|&v| v < -1e-9) {
            continue;
        }
        let mut z = vec![0.0; n];
        for (&c, v) in cols.iter().zip(xb) {
            if c < n {
                z[c] = v;
            }
        }
        let obj: f64 = z.iter().zip(&lp.objective).map(|(a, b)| a * b).sum();
        if best.as_ref().map_or(true, |(b, _)| obj < *b) {
            best = Some((obj, z));
        }
    }
    best
}

/// A bounded random LP: `n` variables, `m_eq` equalities, `m_ub` inequalities
/// plus a box `Σ z ≤ 10`, with integer-ish coefficients.
pub fn random_lp(rng: &mut impl Rng, n: usize, m_eq: usize, m_ub: usize) -> LinearProgram {
    let mut lp = LinearProgram::new();
    for j in 0..n {
        lp.add_var(format!("z{j}"), rng.gen_range(-5..=5) as f64);
    }
    for _ in 0..m_eq {
        let terms: Vec<(usize, f64)> = (0..n).map(|j| (j, rng.gen_range(-3..=4) as f64)).collect();
        lp.add_eq(&terms, rng.gen_range(0..=6) as f64);
    }
    for _ in 0..m_ub {
        let terms: Vec<(usize, f64)> = (0..n).map(|j| (j, rng.gen_range(-3..=4) as f64)).collect();
        lp.add_le(&terms, rng.gen_range(-2..=8) as f64);
    }
    let all: Vec<(usize, f64)> = (0..n).map(|j| (j, 1.0)).collect();
    lp.add_le(&all, 10.0);
    lp
}
