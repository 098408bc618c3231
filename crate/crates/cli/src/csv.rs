//! CSV emission and the minimal reader `compare` needs.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};
use nmsse_core::{BlochSeries, BlochVector, ComparisonMetrics};

/// Scientific notation with 12 significant digits.
fn sci(v: f64) -> String {
    format!("{v:.11e}")
}

pub fn bloch_csv(series: &BlochSeries) -> String {
    let mut out = String::from("t,x,y,z,sx,sy,sz\n");
    for ((t, v), e) in series.times.iter().zip(&series.values).zip(&series.stderr) {
        let cols = [*t, v.x, v.y, v.z, e[0], e[1], e[2]].map(sci);
        writeln!(out, "{}", cols.join(",")).unwrap();
    }
    out
}

pub fn diff_csv(m: &ComparisonMetrics) -> String {
    let mut out = String::from("t,dx,dy,dz\n");
    for i in 0..m.times.len() {
        let cols = [m.times[i], m.dx[i], m.dy[i], m.dz[i]].map(sci);
        writeln!(out, "{}", cols.join(",")).unwrap();
    }
    out
}

pub fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Parses a `t,x,y,z[,sx,sy,sz]` file.
pub fn parse_bloch(text: &str, name: &str) -> Result<BlochSeries> {
    let mut lines = text.lines();
    let header = lines.next().unwrap_or("");
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols.len() < 4 || cols[..4] != ["t", "x", "y", "z"] {
        bail!("{name}: expected header starting with t,x,y,z, found `{header}`");
    }
    let with_err = cols.len() >= 7 && cols[4..7] == ["sx", "sy", "sz"];
    let (mut times, mut values, mut stderr) = (Vec::new(), Vec::new(), Vec::new());
    for (n, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<f64> = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .with_context(|| format!("{name}: line {}: bad number", n + 2))?;
        if f.len() < cols.len() {
            bail!("{name}: line {}: expected {} columns", n + 2, cols.len());
        }
        times.push(f[0]);
        values.push(BlochVector::new(f[1], f[2], f[3]));
        stderr.push(if with_err { [f[4], f[5], f[6]] } else { [0.0; 3] });
    }
    Ok(BlochSeries::new(times, values, stderr)?)
}
