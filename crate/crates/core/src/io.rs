//! File formats: dataset and counts CSV, joint/channel/distortion JSON, curve and scatter CSV.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::analysis::ScatterPoint;
use crate::error::{Error, Result};
use crate::prob::{AttrChannel, Channel, CountTensor, DistortionMatrix, JointDistribution};

fn parse_field(raw: &str, line: usize, name: &str) -> Result<i64> {
    raw.trim()
        .parse::<i64>()
        .map_err(|_| Error::Parse { line, msg: format!("column `{name}` is not an integer: {raw:?}") })
}

/// Reads `a,x,y` (one record per row) or, with `with_count`, `a,x,y,count`.
/// Alphabet sizes are the largest code plus one, and at least 2.
fn read_tally(path: &Path, with_count: bool) -> Result<CountTensor> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_path(path)?;
    let expected: &[&str] = if with_count { &["a", "x", "y", "count"] } else { &["a", "x", "y"] };
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != expected {
        return Err(Error::Parse { line: 1, msg: format!("expected header `{}`, found `{}`", expected.join(","), header.join(",")) });
    }
    let mut entries = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            Error::Parse { line, msg: e.to_string() }
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != expected.len() {
            return Err(Error::Parse { line, msg: format!("expected {} fields, found {}", expected.len(), rec.len()) });
        }
        let mut vals = [0i64; 4];
        for (i, name) in expected.iter().enumerate() {
            vals[i] = parse_field(&rec[i], line, name)?;
        }
        let [a, x, y, count] = vals;
        if !(0..=1).contains(&a) {
            return Err(Error::Parse { line, msg: format!("attribute must be 0 or 1, found {a}") });
        }
        if x < 0 || y < 0 {
            return Err(Error::Parse { line, msg: "feature and label codes must be nonnegative".into() });
        }
        if with_count && count < 0 {
            return Err(Error::Parse { line, msg: format!("negative count {count}") });
        }
        entries.push((a as usize, x as usize, y as usize, if with_count { count } else { 1 }));
    }
    let nx = entries.iter().map(|e| e.1 + 1).max().unwrap_or(0).max(2);
    let ny = entries.iter().map(|e| e.2 + 1).max().unwrap_or(0).max(2);
    let mut counts = CountTensor::zeros(nx, ny);
    for (a, x, y, k) in entries {
        counts.add(a, x, y, k);
    }
    Ok(counts)
}

pub fn read_dataset_csv(path: &Path) -> Result<CountTensor> {
    read_tally(path, false)
}

pub fn read_counts_csv(path: &Path) -> Result<CountTensor> {
    read_tally(path, true)
}

#[derive(Debug, Serialize, Deserialize)]
struct JointFile {
    nx: usize,
    ny: usize,
    /// `p[a][x][y]`.
    p: Vec<Vec<Vec<f64>>>,
}

pub fn joint_to_json(joint: &JointDistribution) -> Value {
    serde_json::to_value(JointFile { nx: joint.nx(), ny: joint.ny(), p: joint.to_nested() }).expect("plain data")
}

pub fn read_joint_json(path: &Path) -> Result<JointDistribution> {
    let f: JointFile = serde_json::from_str(&fs::read_to_string(path)?)?;
    let flat: Vec<f64> = f.p.iter().flatten().flatten().copied().collect();
    if f.p.len() != 2 || f.p.iter().any(|px| px.len() != f.nx || px.iter().any(|py| py.len() != f.ny)) {
        return Err(Error::InvalidInput(format!("joint tensor is not 2x{}x{}", f.nx, f.ny)));
    }
    JointDistribution::new(f.nx, f.ny, flat)
}

#[derive(Debug, Serialize, Deserialize)]
struct ChannelFile {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl ChannelFile {
    fn into_channel(self) -> Result<Channel> {
        Channel::new(self.rows, self.cols, self.data)
    }
}

pub fn channel_to_json(ch: &Channel) -> Value {
    serde_json::json!({ "rows": ch.rows(), "cols": ch.cols(), "data": ch.data() })
}

/// A shared channel is one object; an A-conditioned one is an array of two indexed by `a`.
pub fn attr_channel_to_json(ch: &AttrChannel) -> Value {
    match ch {
        AttrChannel::Shared(c) => channel_to_json(c),
        AttrChannel::ByGroup(g) => Value::Array(g.iter().map(channel_to_json).collect()),
    }
}

pub fn group_channels_to_json(g: &[Channel; 2]) -> Value {
    Value::Array(g.iter().map(channel_to_json).collect())
}

pub fn attr_channel_from_json(v: Value) -> Result<AttrChannel> {
    match v {
        Value::Array(items) => {
            if items.len() != 2 {
                return Err(Error::InvalidInput(format!("expected 2 group channels, found {}", items.len())));
            }
            let mut it = items.into_iter().map(|i| serde_json::from_value::<ChannelFile>(i)?.into_channel());
            let (c0, c1) = (it.next().expect("len 2")?, it.next().expect("len 2")?);
            Ok(AttrChannel::ByGroup([c0, c1]))
        }
        other => Ok(AttrChannel::Shared(serde_json::from_value::<ChannelFile>(other)?.into_channel()?)),
    }
}

pub fn read_channel(path: &Path) -> Result<Channel> {
    serde_json::from_str::<ChannelFile>(&fs::read_to_string(path)?)?.into_channel()
}

pub fn read_attr_channel(path: &Path) -> Result<AttrChannel> {
    attr_channel_from_json(serde_json::from_str(&fs::read_to_string(path)?)?)
}

/// Post-processing channels: an array of two, or one object used for both groups.
pub fn read_group_channels(path: &Path) -> Result<[Channel; 2]> {
    Ok(match read_attr_channel(path)? {
        AttrChannel::Shared(c) => [c.clone(), c],
        AttrChannel::ByGroup(g) => g,
    })
}

/// A distortion matrix file is a JSON array of rows, `d[y][ŷ]`.
pub fn read_distortion(path: &Path) -> Result<DistortionMatrix> {
    let rows: Vec<Vec<f64>> = serde_json::from_str(&fs::read_to_string(path)?)?;
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidInput("distortion matrix must be square".into()));
    }
    DistortionMatrix::new(n, rows.into_iter().flatten().collect())
}

pub fn write_curve_csv(out: &mut impl Write, rows: impl Iterator<Item = (f64, f64, bool)>) -> Result<()> {
    writeln!(out, "D,disc,breakpoint_flag")?;
    for (d, disc, bp) in rows {
        writeln!(out, "{d},{disc},{}", u8::from(bp))?;
    }
    Ok(())
}

pub fn write_scatter_csv(out: &mut impl Write, seed: u64, points: &[ScatterPoint]) -> Result<()> {
    writeln!(out, "# seed={seed}")?;
    writeln!(out, "tv,mi")?;
    for p in points {
        writeln!(out, "{},{}", p.tv, p.mi)?;
    }
    Ok(())
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}
