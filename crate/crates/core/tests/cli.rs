use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fairproc::io::{attr_channel_from_json, read_attr_channel, read_joint_json};
use fairproc::lp::{solve, LinearProgram};
use fairproc::post::{derive_pred_joint, PostProblem};
use fairproc::pre::PreProblem;
use fairproc::prob::{AttrChannel, Channel, DistortionMatrix};
use serde_json::Value;
use tempfile::TempDir;

const COUNTS: &str = "a,x,y,count\n0,0,0,3\n0,0,1,1\n0,1,0,1\n0,1,1,4\n1,0,0,2\n1,0,1,1\n1,1,0,2\n1,1,1,5\n";
const CLASSIFIER: &str = r#"{"rows":2,"cols":2,"data":[0.8,0.2,0.3,0.7]}"#;

struct Workspace {
    dir: TempDir,
}

impl Workspace {
    fn new() -> Self {
        let ws = Workspace { dir: tempfile::tempdir().unwrap() };
        ws.write("counts.csv", COUNTS);
        ws.write("w.json", CLASSIFIER);
        ws
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn write(&self, name: &str, contents: &str) {
        fs::write(self.path(name), contents).unwrap();
    }

    fn run(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_fairproc")).current_dir(self.dir.path()).args(args).output().unwrap()
    }

    fn json(&self, name: &str) -> Value {
        serde_json::from_str(&fs::read_to_string(self.path(name)).unwrap()).unwrap()
    }
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Every file under `dir`, keyed by relative path.
fn snapshot(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

/// The channel stored in a curve point's file, checked against the report entry.
fn point_channel(ws: &Workspace, dir: &str, point: &Value) -> Value {
    let file = ws.json(&format!("{dir}/{}", point["channel_file"].as_str().unwrap()));
    assert_eq!(file["budget"], point["budget"]);
    assert_eq!(file["disc"], point["disc"]);
    file["channel"].clone()
}

#[test]
fn estimate_uniform_rows_and_equivalent_counts() {
    let ws = Workspace::new();
    let mut rows = String::from("a,x,y\n");
    for a in 0..2 {
        for x in 0..2 {
            for y in 0..2 {
                rows += &format!("{a},{x},{y}\n");
            }
        }
    }
    ws.write("rows.csv", &rows);
    let out = ws.run(&["estimate", "--data", "rows.csv", "--out", "e1"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let joint = read_joint_json(&ws.path("e1/joint.json")).unwrap();
    assert!(joint.as_slice().iter().all(|p| *p == 0.125));

    let expanded: String = COUNTS
        .lines()
        .skip(1)
        .flat_map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            let k: usize = f[3].parse().unwrap();
            std::iter::repeat(format!("{},{},{}\n", f[0], f[1], f[2])).take(k)
        })
        .collect();
    ws.write("expanded.csv", &format!("a,x,y\n{expanded}"));
    assert_eq!(code(&ws.run(&["estimate", "--data", "expanded.csv", "--out", "e2"])), 0);
    assert_eq!(code(&ws.run(&["estimate", "--counts", "counts.csv", "--out", "e3"])), 0);
    assert_eq!(fs::read(ws.path("e2/joint.json")).unwrap(), fs::read(ws.path("e3/joint.json")).unwrap());
}

#[test]
fn malformed_rows_exit_with_the_line_number() {
    let ws = Workspace::new();
    ws.write("bad.csv", "a,x,y\n0,0,1\n1,x,0\n");
    let out = ws.run(&["estimate", "--data", "bad.csv"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("line 3"), "{}", stderr(&out));
    assert_eq!(code(&ws.run(&["estimate", "--data", "missing.csv"])), 2);
}

#[test]
fn pre_curve_with_oracle_is_reproducible() {
    let ws = Workspace::new();
    let args = |out: &'static str| {
        vec!["pre-curve", "--counts", "counts.csv", "--classifier", "w.json", "--use-a", "--grid", "6", "--oracle", "--step", "0.02", "--out", out]
    };
    let out = ws.run(&args("a"));
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let first = snapshot(&ws.path("a"));
    fs::remove_dir_all(ws.path("a")).unwrap();
    assert_eq!(code(&ws.run(&args("a"))), 0);
    assert_eq!(first, snapshot(&ws.path("a")));

    let report = ws.json("a/report_pre.json");
    assert!(report["oracle"]["max_gap"].as_f64().unwrap() <= 2e-2);
    assert!(report["checks"]["convex"].as_bool().unwrap());
    assert_eq!(report["config"]["use_a"], Value::Bool(true));
    let csv = fs::read_to_string(ws.path("a/curve_pre.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("D,disc,breakpoint_flag"));
    assert_eq!(csv.lines().count() - 1, report["points"].as_array().unwrap().len());
}

#[test]
fn emitted_channels_round_trip() {
    let ws = Workspace::new();
    let joint = {
        assert_eq!(code(&ws.run(&["estimate", "--counts", "counts.csv", "--out", "e"])), 0);
        read_joint_json(&ws.path("e/joint.json")).unwrap()
    };
    let w: Channel = fairproc::io::read_channel(&ws.path("w.json")).unwrap();
    let d = DistortionMatrix::zero_one(2);

    assert_eq!(code(&ws.run(&["pre-curve", "--joint", "e/joint.json", "--classifier", "w.json", "--use-a", "--out", "p"])), 0);
    let pre = PreProblem::new(joint.clone(), w.clone(), d.clone()).unwrap();
    let report = ws.json("p/report_pre.json");
    for point in report["points"].as_array().unwrap() {
        let ch = attr_channel_from_json(point_channel(&ws, "p", point)).unwrap();
        let budget = point["budget"].as_f64().unwrap();
        assert!((pre.discrimination(&ch).unwrap() - point["disc"].as_f64().unwrap()).abs() < 1e-9);
        assert!(pre.distortion(&ch).unwrap() <= budget + 1e-9);
    }

    assert_eq!(code(&ws.run(&["post-curve", "--joint", "e/joint.json", "--classifier", "w.json", "--out", "q"])), 0);
    let post = PostProblem::new(derive_pred_joint(&w, &joint).unwrap(), d).unwrap();
    let report = ws.json("q/report_post.json");
    assert!(report["exact_eo_distortion"].is_number());
    for point in report["points"].as_array().unwrap() {
        let ch = match attr_channel_from_json(point_channel(&ws, "q", point)).unwrap() {
            AttrChannel::ByGroup(g) => g,
            AttrChannel::Shared(c) => [c.clone(), c],
        };
        assert!((post.discrimination(&ch).unwrap() - point["disc"].as_f64().unwrap()).abs() < 1e-9);
        assert!(post.distortion(&ch).unwrap() <= point["budget"].as_f64().unwrap() + 1e-9);
    }
}

#[test]
fn dumped_programs_reproduce_the_curve() {
    let ws = Workspace::new();
    let out = ws.run(&["pre-curve", "--counts", "counts.csv", "--classifier", "w.json", "--grid", "4", "--dump-lp", "--out", "l"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report = ws.json("l/report_pre.json");
    for (i, point) in report["points"].as_array().unwrap().iter().enumerate() {
        let text = fs::read_to_string(ws.path(&format!("l/lp_pre/point_{i:03}.json"))).unwrap();
        let lp: LinearProgram = serde_json::from_str(&text).unwrap();
        let sol = solve(&lp).unwrap();
        assert!((sol.objective - point["disc"].as_f64().unwrap()).abs() < 1e-9);
    }
}

#[test]
fn budget_below_d_min_exits_three() {
    let ws = Workspace::new();
    for side in ["pre-curve", "post-curve"] {
        let out = ws.run(&[side, "--counts", "counts.csv", "--classifier", "w.json", "--d-list", "0.01,0.6"]);
        assert_eq!(code(&out), 3);
        assert!(stderr(&out).contains("d_min"));
    }
}

#[test]
fn invalid_configuration_exits_two() {
    let ws = Workspace::new();
    let base = ["pre-curve", "--counts", "counts.csv", "--classifier", "w.json"];
    let with = |extra: &[&'static str]| {
        let mut v = base.to_vec();
        v.extend_from_slice(extra);
        ws.run(&v)
    };
    assert_eq!(code(&with(&["--oracle", "--step", "0.5"])), 2);
    assert_eq!(code(&with(&["--distortion", "nope.json"])), 2);
    ws.write("wide.json", r#"{"rows":3,"cols":2,"data":[1,0,0,1,0.5,0.5]}"#);
    assert_eq!(code(&ws.run(&["pre-curve", "--counts", "counts.csv", "--classifier", "wide.json"])), 2);
    assert_eq!(code(&ws.run(&["pre-curve", "--counts", "counts.csv"])), 2);
}

#[test]
fn fair_data_gives_a_flat_zero_curve() {
    let ws = Workspace::new();
    // A is independent of (X, Y).
    let mut counts = String::from("a,x,y,count\n");
    for (x, y, k) in [(0, 0, 4), (0, 1, 1), (1, 0, 2), (1, 1, 5)] {
        counts += &format!("0,{x},{y},{}\n1,{x},{y},{}\n", 3 * k, k);
    }
    ws.write("fair.csv", &counts);
    let out = ws.run(&["pre-curve", "--counts", "fair.csv", "--classifier", "w.json", "--grid", "5", "--out", "f"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let csv = fs::read_to_string(ws.path("f/curve_pre.csv")).unwrap();
    for line in csv.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        assert!(f[1].parse::<f64>().unwrap().abs() < 1e-9);
        assert_eq!(f[2], "0");
    }
    let out = ws.run(&["compare", "--counts", "fair.csv", "--classifier", "w.json", "--out", "c"]);
    assert_eq!(code(&out), 0);
    assert_eq!(ws.json("c/compare.json")["dominance_verdict"], "tie");
}

#[test]
fn compare_writes_every_field() {
    let ws = Workspace::new();
    let out = ws.run(&["compare", "--counts", "counts.csv", "--classifier", "w.json", "--out", "c"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let rep = &ws.json("c/compare.json");
    for key in [
        "d_min_pre_a",
        "d_min_post",
        "disc_at_dmin_pre",
        "disc_at_dmin_post",
        "substitution_witness",
        "proper",
        "prop4_witness",
        "dominance_verdict",
    ] {
        assert!(rep.get(key).is_some(), "missing {key}");
    }
    assert!(rep["substitution_witness"].is_null());
}

#[test]
fn scatter_records_seed_and_is_deterministic() {
    let ws = Workspace::new();
    assert_eq!(code(&ws.run(&["scatter", "--n", "40", "--seed", "9", "--out", "s1"])), 0);
    assert_eq!(code(&ws.run(&["scatter", "--n", "40", "--seed", "9", "--jobs", "1", "--out", "s2"])), 0);
    let a = fs::read_to_string(ws.path("s1/scatter.csv")).unwrap();
    assert_eq!(a, fs::read_to_string(ws.path("s2/scatter.csv")).unwrap());
    let mut lines = a.lines();
    assert_eq!(lines.next(), Some("# seed=9"));
    assert_eq!(lines.next(), Some("tv,mi"));
    assert_eq!(lines.count(), 40);
}

#[test]
fn substitute_round_trips_or_exits_four() {
    let ws = Workspace::new();
    ws.write("w3.json", r#"{"rows":3,"cols":2,"data":[1,0,0.4,0.6,0,1]}"#);
    ws.write("c3.csv", &format!("{COUNTS}0,2,1,3\n1,2,0,1\n"));
    ws.write("post.json", r#"[{"rows":2,"cols":2,"data":[0.9,0.1,0.2,0.8]},{"rows":2,"cols":2,"data":[0.7,0.3,0.1,0.9]}]"#);
    let out = ws.run(&["substitute", "--counts", "c3.csv", "--classifier", "w3.json", "--post-channel", "post.json", "--out", "s"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report = ws.json("s/substitute.json");
    assert!(report["max_induced_deviation"].as_f64().unwrap() < 1e-9);
    let pre = read_attr_channel(&ws.path("s/pre_channel.json")).unwrap();
    assert_eq!(pre.rows(), 3);

    let out = ws.run(&["substitute", "--counts", "counts.csv", "--classifier", "w.json", "--post-channel", "post.json"]);
    assert_eq!(code(&out), 4);
}
