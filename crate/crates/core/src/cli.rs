//! Command-line front end.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::analysis::{
    brute_force_disc, check_substitution, compare_pre_post, substitute_post_with_pre, tv_mi_scatter, BruteTarget,
};
use crate::curve::{CurvePoint, Grid, TradeoffCurve, DEFAULT_GRID};
use crate::error::{Error, Result};
use crate::io;
use crate::post::{self, derive_pred_joint};
use crate::pre::{self, PreProblem};
use crate::prob::{induced_post_channel, induced_prediction_channel, normalize_counts, Channel, DistortionMatrix, JointDistribution};
use crate::problem::{Criterion, DistortionMode};

#[derive(Debug, Parser)]
#[command(name = "fairproc", version, about = "Fairness-distortion trade-offs for pre- and post-processing channels")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate the joint distribution of (A, X, Y) from a dataset or counts file.
    Estimate(InputArgs),
    /// Trade-off curve for pre-processing the classifier's input.
    PreCurve(CurveArgs),
    /// Trade-off curve for post-processing the classifier's output.
    PostCurve(CurveArgs),
    /// Compare A-aware pre-processing with post-processing at their minimal budgets.
    Compare(CompareArgs),
    /// Sample prediction joints and report TV against mutual-information discrimination.
    Scatter(ScatterArgs),
    /// Replace a post-processor with an equivalent pre-processor.
    Substitute(SubstituteArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CriterionArg {
    Eo,
    Dp,
}

impl From<CriterionArg> for Criterion {
    fn from(c: CriterionArg) -> Self {
        match c {
            CriterionArg::Eo => Criterion::EqualizedOdds,
            CriterionArg::Dp => Criterion::DemographicParity,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct InputArgs {
    /// Dataset CSV with header `a,x,y`.
    #[arg(long, conflicts_with_all = ["counts", "joint"])]
    pub data: Option<PathBuf>,
    /// Counts CSV with header `a,x,y,count`.
    #[arg(long, conflicts_with = "joint")]
    pub counts: Option<PathBuf>,
    /// Joint distribution JSON as written by `estimate`.
    #[arg(long)]
    pub joint: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads (0 picks the number of cores).
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ModelArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Classifier channel JSON `{rows, cols, data}` giving W(ŷ|x).
    #[arg(long)]
    pub classifier: PathBuf,
    /// `zero-one` or a JSON file holding the matrix d[y][ŷ].
    #[arg(long, default_value = "zero-one")]
    pub distortion: String,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CurveArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, value_enum, default_value = "eo")]
    pub criterion: CriterionArg,
    /// Let the pre-processor depend on A.
    #[arg(long)]
    pub use_a: bool,
    /// Bound the distortion conditionally on every feature value.
    #[arg(long)]
    pub per_x: bool,
    /// Number of evenly spaced budgets.
    #[arg(long, conflicts_with = "d_list")]
    pub grid: Option<usize>,
    /// Explicit comma-separated budgets.
    #[arg(long, value_delimiter = ',')]
    pub d_list: Option<Vec<f64>>,
    /// Cross-check every grid point against a grid search over the channel.
    #[arg(long)]
    pub oracle: bool,
    #[arg(long, default_value_t = 0.02)]
    pub step: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write the linear program at every grid budget as JSON.
    #[arg(long)]
    pub dump_lp: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CompareArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ScatterArgs {
    #[arg(long, default_value_t = 10000)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SubstituteArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Post-processing channel JSON: an array of two 2x2 channels indexed by a.
    #[arg(long)]
    pub post_channel: PathBuf,
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
}

/// Process exit code for an error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InfeasibleBudget { .. } => 3,
        Error::SubstitutionUnavailable => 4,
        Error::NumericalFailure(_) | Error::InvalidProgram(_) => 1,
        _ => 2,
    }
}

fn set_jobs(jobs: usize) {
    if jobs > 0 {
        // A second call in the same process is harmless; the first pool wins.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }
}

fn ensure_exists(path: &Path) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("file not found: {}", path.display())))
    }
}

fn load_joint(input: &InputArgs) -> Result<(JointDistribution, Vec<String>)> {
    let counts = match (&input.data, &input.counts, &input.joint) {
        (Some(p), _, _) => {
            ensure_exists(p)?;
            io::read_dataset_csv(p)?
        }
        (_, Some(p), _) => {
            ensure_exists(p)?;
            io::read_counts_csv(p)?
        }
        (_, _, Some(p)) => {
            ensure_exists(p)?;
            return Ok((io::read_joint_json(p)?, Vec::new()));
        }
        _ => return Err(Error::InvalidInput("one of --data, --counts or --joint is required".into())),
    };
    let est = normalize_counts(&counts)?;
    let warnings = est.warnings.iter().map(|w| format!("{w:?}")).collect();
    Ok((est.joint, warnings))
}

fn load_model(m: &ModelArgs) -> Result<(JointDistribution, Channel, DistortionMatrix, Vec<String>)> {
    let (joint, warnings) = load_joint(&m.input)?;
    ensure_exists(&m.classifier)?;
    let w = io::read_channel(&m.classifier)?;
    let d = if m.distortion == "zero-one" {
        DistortionMatrix::zero_one(joint.ny())
    } else {
        let p = Path::new(&m.distortion);
        ensure_exists(p)?;
        io::read_distortion(p)?
    };
    Ok((joint, w, d, warnings))
}

fn out_dir(path: &Path) -> Result<PathBuf> {
    fs::create_dir_all(path)?;
    Ok(path.to_path_buf())
}

fn base_rate_gap(joint: &JointDistribution) -> Option<f64> {
    let rate = |a: usize| {
        let pa = joint.p_a(a);
        (pa > 0.0).then(|| joint.p_ya(1, a) / pa)
    };
    Some(rate(0)? - rate(1)?)
}

fn cmd_estimate(args: &InputArgs) -> Result<i32> {
    set_jobs(args.jobs);
    let (joint, warnings) = load_joint(args)?;
    let dir = out_dir(&args.out)?;
    io::write_json(&dir.join("joint.json"), &io::joint_to_json(&joint))?;
    let summary = json!({
        "config": args,
        "nx": joint.nx(),
        "ny": joint.ny(),
        "p_y": joint.label_marginal(),
        "base_rate_gap": base_rate_gap(&joint),
        "warnings": warnings,
    });
    io::write_json(&dir.join("estimate.json"), &summary)?;
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(0)
}

fn grid_of(args: &CurveArgs) -> Result<Grid> {
    match (&args.grid, &args.d_list) {
        (Some(0), _) => Err(Error::InvalidInput("--grid needs at least one point".into())),
        (Some(n), _) => Ok(Grid::Auto(*n)),
        (None, Some(list)) => Ok(Grid::Explicit(list.clone())),
        (None, None) => Ok(Grid::Auto(DEFAULT_GRID)),
    }
}

fn check_oracle_step(args: &CurveArgs) -> Result<()> {
    if args.oracle && !(args.step > 0.0 && args.step <= 0.1) {
        return Err(Error::InvalidInput(format!("--step must lie in (0, 0.1], got {}", args.step)));
    }
    Ok(())
}

#[derive(Serialize)]
struct OraclePoint {
    budget: f64,
    lp: f64,
    grid: f64,
    gap: f64,
    lipschitz: f64,
}

fn oracle_section(points: Vec<OraclePoint>, step: f64) -> Value {
    let max_gap = points.iter().map(|p| p.gap).fold(0.0, f64::max);
    let min_gap = points.iter().map(|p| p.gap).fold(f64::INFINITY, f64::min);
    json!({ "step": step, "max_gap": max_gap, "min_gap": min_gap, "points": points })
}

/// Writes the curve CSV, one channel file per point, and the report.
fn emit_curve<C>(
    dir: &Path,
    side: &str,
    curve: &TradeoffCurve<C>,
    to_json: impl Fn(&C) -> Value,
    mut report: serde_json::Map<String, Value>,
) -> Result<()> {
    let mut csv = Vec::new();
    io::write_curve_csv(&mut csv, curve.rows())?;
    fs::write(dir.join(format!("curve_{side}.csv")), csv)?;
    let ch_dir = dir.join(format!("channels_{side}"));
    fs::create_dir_all(&ch_dir)?;
    let mut listed = Vec::new();
    for (i, p) in curve.points.iter().enumerate() {
        let name = format!("point_{i:03}.json");
        let CurvePoint { budget, disc, basis_id, breakpoint, .. } = p;
        io::write_json(&ch_dir.join(&name), &json!({ "side": side, "budget": budget, "disc": disc, "channel": to_json(&p.channel) }))?;
        listed.push(json!({
            "budget": budget,
            "disc": disc,
            "basis_id": format!("{basis_id:016x}"),
            "breakpoint": breakpoint,
            "channel_file": format!("channels_{side}/{name}"),
        }));
    }
    report.insert("side".into(), json!(side));
    report.insert("d_min".into(), json!(curve.d_min));
    report.insert("d_max_bound".into(), json!(curve.d_max_bound));
    report.insert("d_max_exact".into(), json!(curve.d_max));
    report.insert("breakpoints".into(), json!(curve.breakpoints));
    report.insert("checks".into(), serde_json::to_value(&curve.checks)?);
    report.insert("points".into(), Value::Array(listed));
    io::write_json(&dir.join(format!("report_{side}.json")), &Value::Object(report))
}

fn cmd_pre_curve(args: &CurveArgs) -> Result<i32> {
    set_jobs(args.model.input.jobs);
    check_oracle_step(args)?;
    let grid = grid_of(args)?;
    let (joint, w, d, warnings) = load_model(&args.model)?;
    let mode = if args.per_x { DistortionMode::PerX } else { DistortionMode::Global };
    let prob = PreProblem::new(joint, w, d)?
        .with_use_a(args.use_a)
        .with_criterion(args.criterion.into())
        .with_distortion_mode(mode);
    let curve = pre::tradeoff_curve(&prob, &grid)?;
    let dir = out_dir(&args.model.input.out)?;

    let mut report = serde_json::Map::new();
    report.insert("config".into(), serde_json::to_value(args)?);
    report.insert("warnings".into(), json!(warnings));
    if args.oracle {
        let mut pts = Vec::new();
        for p in curve.points.iter().filter(|p| !p.breakpoint) {
            let bf = brute_force_disc(BruteTarget::Pre(&prob), p.budget, args.step)?;
            pts.push(OraclePoint { budget: p.budget, lp: p.disc, grid: bf.disc, gap: bf.disc - p.disc, lipschitz: bf.lipschitz });
        }
        report.insert("oracle".into(), oracle_section(pts, args.step));
    }
    if args.dump_lp {
        let lp_dir = dir.join("lp_pre");
        fs::create_dir_all(&lp_dir)?;
        for (i, p) in curve.points.iter().enumerate() {
            io::write_json(&lp_dir.join(format!("point_{i:03}.json")), &pre::build_pre_lp(&prob, p.budget)?)?;
        }
    }
    emit_curve(&dir, "pre", &curve, io::attr_channel_to_json, report)?;
    println!("pre curve: {} points, d_min {}, d_max {}", curve.points.len(), curve.d_min, curve.d_max);
    Ok(0)
}

fn cmd_post_curve(args: &CurveArgs) -> Result<i32> {
    set_jobs(args.model.input.jobs);
    check_oracle_step(args)?;
    if args.per_x || args.use_a {
        return Err(Error::InvalidInput("--per-x and --use-a apply to pre-processing only".into()));
    }
    let grid = grid_of(args)?;
    let (joint, w, d, warnings) = load_model(&args.model)?;
    let prob = post::post_problem(&w, &joint, &d)?.with_criterion(args.criterion.into());
    let curve = post::tradeoff_curve_post(&prob, &grid)?;
    let dir = out_dir(&args.model.input.out)?;

    let mut report = serde_json::Map::new();
    report.insert("config".into(), serde_json::to_value(args)?);
    report.insert("warnings".into(), json!(warnings));
    if args.criterion == CriterionArg::Eo {
        let (dist, _) = post::exact_eo_post(&prob)?;
        report.insert("exact_eo_distortion".into(), json!(dist));
    }
    if args.oracle {
        let mut pts = Vec::new();
        for p in curve.points.iter().filter(|p| !p.breakpoint) {
            let bf = brute_force_disc(BruteTarget::Post(&prob), p.budget, args.step)?;
            pts.push(OraclePoint { budget: p.budget, lp: p.disc, grid: bf.disc, gap: bf.disc - p.disc, lipschitz: bf.lipschitz });
        }
        report.insert("oracle".into(), oracle_section(pts, args.step));
    }
    if args.dump_lp {
        let lp_dir = dir.join("lp_post");
        fs::create_dir_all(&lp_dir)?;
        for (i, p) in curve.points.iter().enumerate() {
            io::write_json(&lp_dir.join(format!("point_{i:03}.json")), &post::build_post_lp(&prob, p.budget)?)?;
        }
    }
    emit_curve(&dir, "post", &curve, io::group_channels_to_json, report)?;
    println!("post curve: {} points, d_min {}, d_max {}", curve.points.len(), curve.d_min, curve.d_max);
    Ok(0)
}

fn cmd_compare(args: &CompareArgs) -> Result<i32> {
    set_jobs(args.model.input.jobs);
    let (joint, w, d, warnings) = load_model(&args.model)?;
    let report = compare_pre_post(&joint, &w, &d)?;
    let dir = out_dir(&args.model.input.out)?;
    let consistent = report.is_consistent();
    let mut value = serde_json::to_value(&report)?;
    let obj = value.as_object_mut().expect("report is an object");
    obj.insert("config".into(), serde_json::to_value(args)?);
    obj.insert("warnings".into(), json!(warnings));
    obj.insert("consistent".into(), json!(consistent));
    io::write_json(&dir.join("compare.json"), &value)?;
    println!("verdict: {:?} (consistent: {consistent})", report.dominance_verdict);
    Ok(if consistent { 0 } else { 1 })
}

fn cmd_scatter(args: &ScatterArgs) -> Result<i32> {
    set_jobs(args.jobs);
    if args.n == 0 {
        return Err(Error::InvalidInput("--n must be at least 1".into()));
    }
    let points = tv_mi_scatter(args.n, args.seed);
    let dir = out_dir(&args.out)?;
    let mut buf = Vec::new();
    io::write_scatter_csv(&mut buf, args.seed, &points)?;
    fs::write(dir.join("scatter.csv"), buf)?;
    println!("scatter: {} points, seed {}", points.len(), args.seed);
    Ok(0)
}

fn cmd_substitute(args: &SubstituteArgs) -> Result<i32> {
    set_jobs(args.model.input.jobs);
    let (joint, w, _d, warnings) = load_model(&args.model)?;
    ensure_exists(&args.post_channel)?;
    let post = io::read_group_channels(&args.post_channel)?;
    let (x0, x1) = check_substitution(&w, args.tol).ok_or(Error::SubstitutionUnavailable)?;
    let pre = substitute_post_with_pre(&post, &w, &joint, x0, x1)?;
    let pred = derive_pred_joint(&w, &joint)?;
    let fidelity = induced_prediction_channel(&pre, &w, &joint)?.max_abs_diff(&induced_post_channel(&post, &pred)?);
    let dir = out_dir(&args.model.input.out)?;
    io::write_json(&dir.join("pre_channel.json"), &io::attr_channel_to_json(&pre))?;
    let report = json!({
        "config": args,
        "warnings": warnings,
        "witnesses": [x0, x1],
        "max_induced_deviation": fidelity,
        "pre_channel_file": "pre_channel.json",
    });
    io::write_json(&dir.join("substitute.json"), &report)?;
    println!("substitution via x0 = {x0}, x1 = {x1}; max deviation {fidelity:e}");
    Ok(0)
}

/// Runs a parsed command and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let res = match &cli.command {
        Command::Estimate(a) => cmd_estimate(a),
        Command::PreCurve(a) => cmd_pre_curve(a),
        Command::PostCurve(a) => cmd_post_curve(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Scatter(a) => cmd_scatter(a),
        Command::Substitute(a) => cmd_substitute(a),
    };
    match res {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
