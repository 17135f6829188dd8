//! Cross-Q diagnostic tables built from finished pipeline artifacts.

use std::path::{Path, PathBuf};

use koopman_core::diagnostics::pair_gaps;

use crate::config::q_dir;
use crate::error::{CliError, CliResult};
use crate::export::{create_dir, num, read_table, read_toml, write_table, Table};
use crate::manifest::Manifest;
use crate::run::{GalerkinStats, KernelStats};

pub const DIAGNOSTICS_DIR: &str = "diagnostics";
/// Leading eigenvalue pairs whose gaps are reported.
pub const GAP_PAIRS: usize = 5;
/// Leading-by-energy solutions in the Dirichlet table.
pub const DIRICHLET_ROWS: usize = 6;

#[derive(Debug, Clone)]
pub struct QDiagnostics {
    pub q: usize,
    pub commutator: f64,
    pub dispersion_cv: f64,
    pub gaps: Vec<f64>,
    pub skew: f64,
    /// `(Re γ, θE, relative residual)` for the leading solutions.
    pub dirichlet: Vec<(f64, f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct Report {
    pub rows: Vec<QDiagnostics>,
    pub dir: PathBuf,
}

fn require(path: PathBuf, stage: &'static str) -> CliResult<PathBuf> {
    if path.exists() {
        return Ok(path);
    }
    let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let what = path
        .file_name()
        .map(|f| f.to_string_lossy().into_owned())
        .unwrap_or_default();
    Err(CliError::Missing { what, dir, stage })
}

fn column(t: &Table, name: &str, path: &Path) -> CliResult<Vec<f64>> {
    t.column(name).ok_or_else(|| CliError::Table {
        path: path.to_path_buf(),
        reason: format!("no `{name}` column"),
    })
}

fn collect(out: &Path, q: usize) -> CliResult<QDiagnostics> {
    let dir = q_dir(out, q);
    let kstats: KernelStats = read_toml(&require(dir.join("kernel_stats.toml"), "pipeline")?)?;
    let eig_path = require(dir.join("eigenvalues.csv"), "pipeline")?;
    let lambdas = column(&read_table(&eig_path)?, "lambda", &eig_path)?;
    let gstats: GalerkinStats = read_toml(&require(dir.join("galerkin_stats.toml"), "pipeline")?)?;
    let gam_path = require(dir.join("gammas.csv"), "pipeline")?;
    let gammas = read_table(&gam_path)?;
    let re = column(&gammas, "re", &gam_path)?;
    let energy = column(&gammas, "energy", &gam_path)?;
    let rel = column(&gammas, "dirichlet_relative", &gam_path)?;
    let dirichlet = (0..re.len().min(DIRICHLET_ROWS))
        .map(|r| (re[r], gstats.theta * energy[r], rel[r]))
        .collect();
    Ok(QDiagnostics {
        q,
        commutator: kstats.commutator,
        dispersion_cv: kstats.dispersion.cv,
        gaps: pair_gaps(&lambdas, GAP_PAIRS),
        skew: gstats.skew_residual,
        dirichlet,
    })
}

/// Reads every per-Q artifact named in the manifest and writes the tables.
pub fn diagnose(out: &Path) -> CliResult<Report> {
    let manifest_path = require(Manifest::path(out), "pipeline")?;
    let manifest = Manifest::load(&manifest_path)?;
    if manifest.runs.is_empty() {
        return Err(CliError::Missing {
            what: "per-Q results".into(),
            dir: out.to_path_buf(),
            stage: "pipeline",
        });
    }
    let mut qs: Vec<usize> = manifest.runs.iter().map(|r| r.q).collect();
    qs.sort_unstable();
    qs.dedup();
    let rows = qs.iter().map(|&q| collect(out, q)).collect::<CliResult<Vec<_>>>()?;

    let dir = out.join(DIAGNOSTICS_DIR);
    create_dir(&dir)?;
    let base = &rows[0];
    write_table(
        &dir.join("commutator.csv"),
        &["q", "commutator", "ratio_to_smallest_q"].map(String::from),
        rows.iter().map(|r| {
            vec![r.q.to_string(), num(r.commutator), num(r.commutator / base.commutator)]
        }),
    )?;
    write_table(
        &dir.join("dispersion.csv"),
        &["q", "cv", "ratio_to_smallest_q"].map(String::from),
        rows.iter().map(|r| {
            vec![r.q.to_string(), num(r.dispersion_cv), num(r.dispersion_cv / base.dispersion_cv)]
        }),
    )?;
    write_table(
        &dir.join("pair_gaps.csv"),
        &["q", "k", "gap"].map(String::from),
        rows.iter().flat_map(|r| {
            r.gaps
                .iter()
                .enumerate()
                .map(move |(k, &g)| vec![r.q.to_string(), (k + 1).to_string(), num(g)])
        }),
    )?;
    write_table(
        &dir.join("skew.csv"),
        &["q", "skew_residual"].map(String::from),
        rows.iter().map(|r| vec![r.q.to_string(), num(r.skew)]),
    )?;
    write_table(
        &dir.join("dirichlet.csv"),
        &["q", "rank", "re_gamma", "theta_energy", "relative_residual"].map(String::from),
        rows.iter().flat_map(|r| {
            r.dirichlet.iter().enumerate().map(move |(k, &(re, te, rel))| {
                vec![r.q.to_string(), k.to_string(), num(re), num(te), num(rel)]
            })
        }),
    )?;
    Ok(Report { rows, dir })
}

impl Report {
    pub fn summary(&self) -> String {
        let mut s = String::new();
        for r in &self.rows {
            let gaps: Vec<String> = r.gaps.iter().map(|g| format!("{g:.3}")).collect();
            let worst = r.dirichlet.iter().map(|d| d.2).fold(0.0, f64::max);
            s.push_str(&format!(
                "Q={}: commutator {:.3e}, dispersion cv {:.4}, pair gaps [{}], skew {:.4}, dirichlet residual {:.3}\n",
                r.q,
                r.commutator,
                r.dispersion_cv,
                gaps.join(", "),
                r.skew,
                worst
            ));
        }
        s.push_str(&format!("tables written to {}\n", self.dir.display()));
        s
    }
}
