//! Budget sweeps shared by the pre- and post-processing problems: the
//! zero-discrimination budget search and piecewise-linear trade-off curves
//! with basis-change breakpoints.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lp::FEAS_TOL;

/// LP values at or below this count as zero discrimination.
pub const ZERO_DISC_EPS: f64 = 1e-9;
/// Width to which breakpoints and budget searches are bisected.
pub const BUDGET_TOL: f64 = 1e-6;
pub const DEFAULT_GRID: usize = 33;
const MAX_TRANSITIONS: usize = 64;

/// One optimal solve at a fixed budget.
#[derive(Debug, Clone)]
pub struct Solved<C> {
    pub budget: f64,
    pub disc: f64,
    pub channel: C,
    pub basis: Vec<usize>,
    /// `∂ disc / ∂ budget` read off the distortion rows' dual prices.
    pub slope: f64,
}

impl<C> Solved<C> {
    pub fn basis_id(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.basis.hash(&mut h);
        h.finish()
    }
}

/// A discrimination-minimization problem parameterized by a distortion budget.
pub trait BudgetProblem: Sync {
    type Channel: Clone + Send + Sync;

    /// Smallest feasible budget.
    fn d_min(&self) -> f64;
    /// A budget at which zero discrimination is known to be attainable.
    fn d_max_bound(&self) -> f64;
    fn solve_at(&self, budget: f64) -> Result<Solved<Self::Channel>>;
}

/// Smallest budget whose optimum is at most `eps`, by bisection on
/// `[d_min, d_max_bound]` down to a width of `BUDGET_TOL / 10`.
pub fn zero_disc_budget<P: BudgetProblem>(prob: &P, eps: f64) -> Result<f64> {
    let mut lo = prob.d_min();
    let mut hi = prob.d_max_bound().max(lo);
    if prob.solve_at(lo)?.disc <= eps {
        return Ok(lo);
    }
    while hi - lo > BUDGET_TOL / 10.0 {
        let mid = 0.5 * (lo + hi);
        if prob.solve_at(mid)?.disc <= eps {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Grid {
    /// Evenly spaced budgets on `[d_min, d_max_bound]`.
    Auto(usize),
    Explicit(Vec<f64>),
}

impl Default for Grid {
    fn default() -> Self {
        Grid::Auto(DEFAULT_GRID)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CurvePoint<C> {
    pub budget: f64,
    pub disc: f64,
    #[serde(skip)]
    pub channel: C,
    pub basis_id: u64,
    pub breakpoint: bool,
}

/// Shape diagnostics attached to every curve.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct CurveChecks {
    /// Largest `disc[i+1] − disc[i]` over adjacent points.
    pub max_increase: f64,
    /// Largest amount by which a point lies above the chord of its neighbours.
    pub max_convexity_defect: f64,
    /// Largest midpoint-vs-chord gap over segments between breakpoints.
    pub max_chord_error: f64,
    pub non_increasing: bool,
    pub convex: bool,
    pub chord_linear: bool,
    /// Adjacent points with positive discrimination strictly decrease.
    pub strictly_decreasing: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct TradeoffCurve<C> {
    pub points: Vec<CurvePoint<C>>,
    pub breakpoints: Vec<f64>,
    pub d_min: f64,
    pub d_max_bound: f64,
    pub d_max: f64,
    pub checks: CurveChecks,
}

impl<C> TradeoffCurve<C> {
    /// Grid and breakpoint values as `(budget, disc, is_breakpoint)`.
    pub fn rows(&self) -> impl Iterator<Item = (f64, f64, bool)> + '_ {
        self.points.iter().map(|p| (p.budget, p.disc, p.breakpoint))
    }
}

fn grid_budgets<P: BudgetProblem>(prob: &P, grid: &Grid) -> Result<Vec<f64>> {
    let d_min = prob.d_min();
    let mut budgets = match grid {
        Grid::Auto(n) => {
            let hi = prob.d_max_bound().max(d_min);
            let n = (*n).max(2);
            (0..n).map(|i| d_min + (hi - d_min) * i as f64 / (n - 1) as f64).collect::<Vec<_>>()
        }
        Grid::Explicit(v) => {
            if v.is_empty() {
                return Err(Error::InvalidInput("empty budget grid".into()));
            }
            if let Some(&b) = v.iter().find(|b| !b.is_finite() || **b < d_min - FEAS_TOL) {
                return Err(Error::InfeasibleBudget { budget: b, d_min });
            }
            v.clone()
        }
    };
    budgets.sort_by(f64::total_cmp);
    budgets.dedup();
    Ok(budgets)
}

fn slopes_differ(a: f64, b: f64) -> bool {
    (a - b).abs() > 1e-8 * (1.0 + a.abs().max(b.abs()))
}

/// Breakpoints strictly between two solved budgets with different bases.
///
/// Bisection isolates each basis transition to within `BUDGET_TOL`; the
/// reported breakpoint is then the intersection of the two supporting lines
/// (value plus dual slope) on either side. Transitions whose sides share a
/// slope are degenerate basis swaps inside one linear piece and are skipped.
fn refine<P: BudgetProblem>(prob: &P, left: &Solved<P::Channel>, right: &Solved<P::Channel>) -> Result<Vec<f64>> {
    let mut found = Vec::new();
    let mut cur = left.clone();
    for _ in 0..MAX_TRANSITIONS {
        if cur.basis == right.basis {
            break;
        }
        let mut lo = cur.clone();
        let mut hi = right.clone();
        while hi.budget - lo.budget > BUDGET_TOL {
            let mid = prob.solve_at(0.5 * (lo.budget + hi.budget))?;
            if mid.basis == cur.basis {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        // Past the zero crossing the curve is flat, and at d_min the dual is
        // only a one-sided subgradient, so neither can mark a kink.
        let flat = lo.disc <= ZERO_DISC_EPS;
        let at_start = lo.budget <= prob.d_min() + BUDGET_TOL;
        if !flat && !at_start && slopes_differ(lo.slope, hi.slope) {
            let x = (hi.disc - lo.disc + lo.slope * lo.budget - hi.slope * hi.budget) / (lo.slope - hi.slope);
            let x = if x.is_finite() { x.clamp(lo.budget, hi.budget) } else { 0.5 * (lo.budget + hi.budget) };
            found.push(x);
        }
        if hi.budget >= right.budget {
            break;
        }
        cur = hi;
    }
    Ok(found)
}

fn convexity_defect(p0: (f64, f64), p1: (f64, f64), p2: (f64, f64)) -> f64 {
    let span = p2.0 - p0.0;
    if span <= 0.0 {
        return 0.0;
    }
    let chord = ((p2.0 - p1.0) * p0.1 + (p1.0 - p0.0) * p2.1) / span;
    p1.1 - chord
}

/// Solves on the grid, locates basis breakpoints, and attaches shape checks.
pub fn tradeoff_curve<P: BudgetProblem>(prob: &P, grid: &Grid) -> Result<TradeoffCurve<P::Channel>> {
    let budgets = grid_budgets(prob, grid)?;
    let solved: Vec<Solved<P::Channel>> =
        budgets.par_iter().map(|&b| prob.solve_at(b)).collect::<Result<_>>()?;

    let mut breakpoints: Vec<f64> = solved
        .par_windows(2)
        .map(|w| if w[0].basis == w[1].basis { Ok(Vec::new()) } else { refine(prob, &w[0], &w[1]) })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    breakpoints.sort_by(f64::total_cmp);
    breakpoints.dedup_by(|a, b| (*a - *b).abs() <= BUDGET_TOL);

    let extra: Vec<Solved<P::Channel>> = breakpoints
        .par_iter()
        .filter(|bp| !budgets.iter().any(|b| (b - **bp).abs() <= 1e-12))
        .map(|&bp| prob.solve_at(bp))
        .collect::<Result<_>>()?;

    let mut points: Vec<CurvePoint<P::Channel>> = solved
        .into_iter()
        .map(|s| (s, false))
        .chain(extra.into_iter().map(|s| (s, true)))
        .map(|(s, breakpoint)| CurvePoint {
            budget: s.budget,
            disc: s.disc,
            basis_id: s.basis_id(),
            channel: s.channel,
            breakpoint,
        })
        .collect();
    points.sort_by(|a, b| a.budget.total_cmp(&b.budget));

    // Chord test on each piece between consecutive breakpoints.
    let first = points.first().map(|p| (p.budget, p.disc));
    let last = points.last().map(|p| (p.budget, p.disc));
    let mut knots: Vec<(f64, f64)> = first.into_iter().collect();
    knots.extend(points.iter().filter(|p| p.breakpoint).map(|p| (p.budget, p.disc)));
    knots.extend(last);
    knots.dedup_by(|a, b| a.0 == b.0);
    let chord_errors: Vec<f64> = knots
        .par_windows(2)
        .map(|w| {
            let mid = 0.5 * (w[0].0 + w[1].0);
            let chord = 0.5 * (w[0].1 + w[1].1);
            prob.solve_at(mid).map(|s| (s.disc - chord).abs())
        })
        .collect::<Result<_>>()?;
    let max_chord_error = chord_errors.into_iter().fold(0.0, f64::max);

    let vals: Vec<(f64, f64)> = points.iter().map(|p| (p.budget, p.disc)).collect();
    let max_increase = vals.windows(2).map(|w| w[1].1 - w[0].1).fold(f64::NEG_INFINITY, f64::max);
    let max_convexity_defect =
        vals.windows(3).map(|w| convexity_defect(w[0], w[1], w[2])).fold(f64::NEG_INFINITY, f64::max);
    let strictly_decreasing = vals.windows(2).all(|w| w[0].1 <= ZERO_DISC_EPS || w[1].1 < w[0].1);

    let d_max = zero_disc_budget(prob, ZERO_DISC_EPS)?;
    let checks = CurveChecks {
        max_increase: max_increase.max(0.0),
        max_convexity_defect: max_convexity_defect.max(0.0),
        max_chord_error,
        non_increasing: max_increase <= 1e-9,
        convex: max_convexity_defect <= 1e-7,
        chord_linear: max_chord_error <= 1e-7,
        strictly_decreasing,
    };
    Ok(TradeoffCurve { points, breakpoints, d_min: prob.d_min(), d_max_bound: prob.d_max_bound(), d_max, checks })
}
