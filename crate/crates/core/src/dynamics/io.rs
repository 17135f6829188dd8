use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::systems::SystemSpec;
use super::trajectory::{ObservedTrajectory, Origin};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Writes one sample per row. Values use the shortest representation that
/// parses back to the same bits.
pub fn save_trajectory<T: Real>(
    path: impl AsRef<Path>,
    traj: &ObservedTrajectory<T>,
    header: bool,
) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    if header {
        let names: Vec<String> = (0..traj.dim()).map(|j| format!("f{j}")).collect();
        writeln!(w, "{}", names.join(","))?;
    }
    let mut line = String::new();
    for row in traj.samples().rows() {
        line.clear();
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                line.push(',');
            }
            write!(line, "{v}").expect("write to String");
        }
        line.push('\n');
        w.write_all(line.as_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a comma-separated numeric table; blank lines are skipped.
pub fn load_trajectory<T: Real>(
    path: impl AsRef<Path>,
    dt: T,
    header: bool,
) -> Result<ObservedTrajectory<T>> {
    let path = path.as_ref();
    let reader = BufReader::new(fs::File::open(path)?);
    let parse_err = |line: usize, reason: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let mut data = Vec::new();
    let mut width = None;
    let mut header_pending = header;
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if header_pending {
            header_pending = false;
            continue;
        }
        let mut count = 0;
        for field in trimmed.split(',') {
            let field = field.trim();
            let v: T = field
                .parse()
                .map_err(|_| parse_err(lineno, format!("cannot parse `{field}` as a number")))?;
            if !v.is_finite() {
                return Err(parse_err(lineno, format!("non-finite entry `{field}`")));
            }
            data.push(v);
            count += 1;
        }
        match width {
            None => width = Some(count),
            Some(w) if w != count => {
                return Err(parse_err(
                    lineno,
                    format!("row has {count} columns, expected {w}"),
                ))
            }
            _ => {}
        }
    }
    let d = width.unwrap_or(0);
    let n = data.len().checked_div(d).unwrap_or(0);
    let samples = Array2::from_shape_vec((n, d), data)
        .map_err(|e| Error::Shape(e.to_string()))?;
    ObservedTrajectory::new(
        samples,
        dt,
        Origin::External {
            path: path.to_path_buf(),
        },
    )
}

/// Sidecar describing how a trajectory file was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub dt: f64,
    pub n: usize,
    pub d: usize,
    pub header: bool,
    pub origin: Origin,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub system: Option<SystemSpec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub spinup: Option<f64>,
}

impl TrajectoryMeta {
    pub fn describe<T: Real>(traj: &ObservedTrajectory<T>, header: bool) -> Self {
        TrajectoryMeta {
            dt: traj.dt().as_f64(),
            n: traj.len(),
            d: traj.dim(),
            header,
            origin: traj.origin().clone(),
            system: None,
            spinup: None,
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let text = toml::to_string_pretty(self).map_err(|e| Error::Metadata(e.to_string()))?;
        fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| Error::Metadata(e.to_string()))
    }
}

/// `traj.csv` → `traj.meta.toml`.
pub fn sidecar_path(csv: impl AsRef<Path>) -> PathBuf {
    csv.as_ref().with_extension("meta.toml")
}
