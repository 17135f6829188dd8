//! Stage drivers: trajectory, kernel, spectrum, Galerkin.

use std::path::{Path, PathBuf};
use std::time::Instant;

use koopman_core::cache;
use koopman_core::delay_kernel::{
    default_grid, delay_distance_matrix, into_gaussian_kernel, sparsify_knn, tune_bandwidth,
};
use koopman_core::diagnostics::{distance_dispersion, shift_commutator, Dispersion};
use koopman_core::dynamics::{generate, load_trajectory, save_trajectory, sidecar_path, TrajectoryMeta};
use koopman_core::markov::into_markov;
use koopman_core::spectrum::{eigendecompose_with, EigenOptions};
use koopman_core::{Generator, Kernel, Spectrum, Trajectory};
use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::ResolvedConfig;
use crate::error::{CliError, CliResult};
use crate::export::{create_dir, num, read_toml, write_table, write_toml};
use crate::manifest::{Manifest, QRecord, StageSeconds, TrajectoryRecord, Versions};

pub const TRAJECTORY_FILE: &str = "trajectory.csv";
/// Pairs visited when estimating the distance dispersion.
const DISPERSION_PAIRS: usize = 1 << 20;
/// Galerkin solutions exported as time series.
const Z_SERIES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Generate,
    Kernel,
    Spectrum,
    Galerkin,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Generate => "generate",
            Stage::Kernel => "kernel",
            Stage::Spectrum => "spectrum",
            Stage::Galerkin => "galerkin",
        }
    }
}

/// Per-Q kernel summary, cached next to the kernel matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelStats {
    pub q: usize,
    pub n_emb: usize,
    pub epsilon: f64,
    pub epsilon_auto: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub flat: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_slope: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_nn: Option<usize>,
    pub commutator: f64,
    pub dispersion: Dispersion,
    /// Rows `(ε, S(ε), slope)` of the bandwidth scan.
    #[serde(default)]
    pub bandwidth: Vec<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumStats {
    pub q: usize,
    pub m: usize,
    pub epsilon: f64,
    pub markov_residual: f64,
    pub max_eigen_residual: f64,
    pub solver: koopman_core::spectrum::Solver,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GalerkinStats {
    pub q: usize,
    pub m: usize,
    pub theta: f64,
    pub skew_residual: f64,
    pub solutions: usize,
}

pub fn trajectory_hash(traj: &Trajectory) -> String {
    let mut h = Sha256::new();
    h.update(traj.dt().to_bits().to_le_bytes());
    h.update((traj.len() as u64).to_le_bytes());
    h.update((traj.dim() as u64).to_le_bytes());
    for v in traj.samples().iter() {
        h.update(v.to_bits().to_le_bytes());
    }
    hex(&h.finalize())
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn key_of(parts: &[String]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p.as_bytes());
    }
    hex(&h.finalize())
}

pub fn kernel_key(traj_hash: &str, cfg: &ResolvedConfig, q: usize) -> String {
    key_of(&[
        "kernel".into(),
        traj_hash.into(),
        q.to_string(),
        cfg.raw.epsilon.key(),
        cfg.raw.k_nn.map_or("none".into(), |k| k.to_string()),
    ])
}

pub fn spectrum_key(kernel_key: &str, cfg: &ResolvedConfig) -> String {
    key_of(&[
        "spectrum".into(),
        kernel_key.into(),
        cfg.galerkin.m.to_string(),
        format!("{:?}", cfg.raw.solver),
    ])
}

fn cache_file(cfg: &ResolvedConfig, key: &str, ext: &str) -> PathBuf {
    cfg.cache_dir().join(format!("{key}.{ext}"))
}

/// Generates or loads the trajectory and writes it to the output directory.
pub fn trajectory(cfg: &ResolvedConfig) -> CliResult<(Trajectory, TrajectoryRecord)> {
    let t = Instant::now();
    let stage = CliError::stage("generate");
    let (traj, meta) = match &cfg.raw.data {
        Some(path) => {
            let traj = load_trajectory(path, cfg.raw.dt, cfg.raw.header).map_err(|e| match e {
                koopman_core::Error::Io(source) => CliError::Io {
                    context: format!("reading {}", path.display()),
                    source,
                },
                e => stage(e),
            })?;
            let meta = TrajectoryMeta::describe(&traj, true);
            (traj, meta)
        }
        None => {
            let traj =
                generate(&cfg.spec, cfg.raw.seed, cfg.raw.dt, cfg.n, cfg.spinup).map_err(stage)?;
            let mut meta = TrajectoryMeta::describe(&traj, true);
            meta.system = Some(cfg.spec.clone());
            meta.spinup = Some(cfg.spinup);
            (traj, meta)
        }
    };
    create_dir(cfg.out())?;
    let path = cfg.out().join(TRAJECTORY_FILE);
    save_trajectory(&path, &traj, true).map_err(CliError::stage("generate"))?;
    meta.save(sidecar_path(&path)).map_err(CliError::stage("generate"))?;
    let record = TrajectoryRecord {
        path,
        sha256: trajectory_hash(&traj),
        n: traj.len(),
        d: traj.dim(),
        dt: traj.dt(),
        seconds: t.elapsed().as_secs_f64(),
    };
    info!("trajectory: {} samples of dimension {}", record.n, record.d);
    Ok((traj, record))
}

struct KernelOutcome {
    kernel: Option<Kernel>,
    stats: KernelStats,
    key: String,
    hit: bool,
}

/// Loads the kernel from the cache or builds it. With `need_matrix == false`
/// a cache hit only reads the summary.
fn kernel_stage(
    cfg: &ResolvedConfig,
    traj: &Trajectory,
    traj_hash: &str,
    q: usize,
    need_matrix: bool,
) -> CliResult<KernelOutcome> {
    let stage = || CliError::stage("kernel");
    let key = kernel_key(traj_hash, cfg, q);
    let bin = cache_file(cfg, &key, "kernel.bin");
    let meta = cache_file(cfg, &key, "kernel.toml");
    if bin.exists() && meta.exists() {
        let stats: KernelStats = read_toml(&meta)?;
        let kernel = if need_matrix {
            Some(cache::load_kernel(&bin).map_err(stage())?)
        } else {
            None
        };
        info!("cache hit: kernel for Q={q} ({key})");
        return Ok(KernelOutcome {
            kernel,
            stats,
            key,
            hit: true,
        });
    }

    let d = delay_distance_matrix(traj, q).map_err(stage())?;
    let dispersion = distance_dispersion(&d, q, DISPERSION_PAIRS);
    let (epsilon, tuning) = match cfg.raw.epsilon.value() {
        Some(e) => (e, None),
        None => {
            let tuning = tune_bandwidth(&d, &default_grid(&d)).map_err(stage())?;
            (tuning.epsilon, Some(tuning))
        }
    };
    let mut kernel = into_gaussian_kernel(d, epsilon).map_err(stage())?;
    if let Some(k) = cfg.raw.k_nn {
        kernel = sparsify_knn(&kernel, k).map_err(stage())?;
    }
    let stats = KernelStats {
        q,
        n_emb: kernel.n_emb(),
        epsilon,
        epsilon_auto: tuning.is_some(),
        flat: tuning.as_ref().map(|t| t.flat),
        max_slope: tuning.as_ref().map(|t| t.max_slope),
        k_nn: cfg.raw.k_nn,
        commutator: shift_commutator(&kernel.kernel),
        dispersion,
        bandwidth: tuning
            .map(|t| t.table.iter().map(|r| [r.epsilon, r.kernel_sum, r.slope]).collect())
            .unwrap_or_default(),
    };
    create_dir(&cfg.cache_dir())?;
    cache::save_kernel(&bin, &kernel).map_err(stage())?;
    write_toml(&meta, &stats)?;
    info!("kernel for Q={q}: epsilon = {epsilon}, cached as {key}");
    Ok(KernelOutcome {
        kernel: Some(kernel),
        stats,
        key,
        hit: false,
    })
}

fn export_kernel(dir: &Path, stats: &KernelStats) -> CliResult<()> {
    write_toml(&dir.join("kernel_stats.toml"), stats)?;
    if !stats.bandwidth.is_empty() {
        write_table(
            &dir.join("bandwidth.csv"),
            &["epsilon".into(), "kernel_sum".into(), "slope".into()],
            stats.bandwidth.iter().map(|r| r.iter().map(|&v| num(v)).collect()),
        )?;
    }
    Ok(())
}

fn spectrum_stage(
    cfg: &ResolvedConfig,
    kernel: Kernel,
    key: &str,
) -> CliResult<(Spectrum, SpectrumStats)> {
    let stage = || CliError::stage("spectrum");
    let q = kernel.q;
    let epsilon = kernel.epsilon;
    let markov = into_markov(kernel).map_err(stage())?;
    let markov_residual = markov.row_stochastic_residual();
    let opts = EigenOptions {
        solver: cfg.raw.solver.into(),
        ..EigenOptions::default()
    };
    let spectrum = eigendecompose_with(&markov, cfg.galerkin.m, &opts).map_err(stage())?;
    let stats = SpectrumStats {
        q,
        m: cfg.galerkin.m,
        epsilon,
        markov_residual,
        max_eigen_residual: spectrum.residuals.iter().copied().fold(0.0, f64::max),
        solver: spectrum.solver,
    };
    cache::save_spectrum(cache_file(cfg, key, "spectrum.bin"), &spectrum, q, epsilon)
        .map_err(stage())?;
    write_toml(&cache_file(cfg, key, "spectrum.toml"), &stats)?;
    Ok((spectrum, stats))
}

fn cached_spectrum(cfg: &ResolvedConfig, key: &str) -> CliResult<Option<(Spectrum, SpectrumStats)>> {
    let bin = cache_file(cfg, key, "spectrum.bin");
    let meta = cache_file(cfg, key, "spectrum.toml");
    if !(bin.exists() && meta.exists()) {
        return Ok(None);
    }
    let (spectrum, _, _) = cache::load_spectrum(&bin).map_err(CliError::stage("spectrum"))?;
    Ok(Some((spectrum, read_toml(&meta)?)))
}

fn export_spectrum(dir: &Path, spectrum: &Spectrum, stats: &SpectrumStats, dt: f64) -> CliResult<()> {
    write_toml(&dir.join("spectrum_stats.toml"), stats)?;
    write_table(
        &dir.join("eigenvalues.csv"),
        &["j".into(), "lambda".into(), "eta".into(), "residual".into()],
        (0..spectrum.lambdas.len()).map(|j| {
            vec![
                j.to_string(),
                num(spectrum.lambdas[j]),
                num(spectrum.etas[j]),
                num(spectrum.residuals[j]),
            ]
        }),
    )?;
    let m = spectrum.m();
    let mut header = vec!["n".to_string(), "t".to_string()];
    header.extend((1..=m).map(|j| format!("phi_{j}")));
    write_table(
        &dir.join("eigenfunctions.csv"),
        &header,
        spectrum.phis.rows().into_iter().enumerate().map(|(n, row)| {
            let mut r = vec![n.to_string(), num(n as f64 * dt)];
            r.extend(row.iter().skip(1).map(|&v| num(v)));
            r
        }),
    )
}

fn export_galerkin(
    dir: &Path,
    q: usize,
    spectrum: &Spectrum,
    sol: &Generator,
    dt: f64,
) -> CliResult<GalerkinStats> {
    let k = sol.v_mat.ncols();
    let mut header = vec!["row".to_string()];
    header.extend((0..k).map(|j| format!("v_{j}")));
    write_table(
        &dir.join("v_matrix.csv"),
        &header,
        sol.v_mat.rows().into_iter().enumerate().map(|(i, row)| {
            let mut r = vec![i.to_string()];
            r.extend(row.iter().map(|&v| num(v)));
            r
        }),
    )?;
    write_table(
        &dir.join("gammas.csv"),
        &["rank", "re", "im", "energy", "residual", "dirichlet_relative"].map(String::from),
        sol.gammas.iter().enumerate().map(|(r, g)| {
            let e = sol.energies[r];
            vec![
                r.to_string(),
                num(g.re),
                num(g.im),
                num(e),
                num(sol.residuals[r]),
                num(koopman_core::diagnostics::dirichlet_relative_residual(g.re, sol.theta, e)),
            ]
        }),
    )?;
    let count = sol.len().min(Z_SERIES);
    let series: Vec<_> = (0..count).map(|j| sol.reconstruct(spectrum, j)).collect();
    let mut header = vec!["n".to_string(), "t".to_string()];
    for j in 0..count {
        header.push(format!("re_{j}"));
        header.push(format!("im_{j}"));
    }
    write_table(
        &dir.join("z_series.csv"),
        &header,
        (0..spectrum.n_emb()).map(|n| {
            let mut r = vec![n.to_string(), num(n as f64 * dt)];
            for z in &series {
                r.push(num(z[n].re));
                r.push(num(z[n].im));
            }
            r
        }),
    )?;
    let stats = GalerkinStats {
        q,
        m: sol.len(),
        theta: sol.theta,
        skew_residual: sol.skew_residual(),
        solutions: sol.len(),
    };
    write_toml(&dir.join("galerkin_stats.toml"), &stats)?;
    Ok(stats)
}

/// Runs every stage up to `last` for one delay count.
fn run_q(
    cfg: &ResolvedConfig,
    traj: &Trajectory,
    traj_hash: &str,
    q: usize,
    last: Stage,
) -> CliResult<QRecord> {
    let dir = cfg.q_dir(q);
    create_dir(&dir)?;
    let mut seconds = StageSeconds::default();

    let t = Instant::now();
    let key = kernel_key(traj_hash, cfg, q);
    let skey = spectrum_key(&key, cfg);
    let spectrum_cached = last >= Stage::Spectrum && cached_spectrum_exists(cfg, &skey);
    let kern = kernel_stage(cfg, traj, traj_hash, q, last >= Stage::Spectrum && !spectrum_cached)?;
    export_kernel(&dir, &kern.stats)?;
    seconds.kernel = Some(t.elapsed().as_secs_f64());
    let mut record = QRecord {
        q,
        epsilon: kern.stats.epsilon,
        kernel_key: kern.key.clone(),
        kernel_cache_hit: kern.hit,
        spectrum_key: None,
        spectrum_cache_hit: None,
        seconds,
    };
    if last < Stage::Spectrum {
        return Ok(record);
    }

    let t = Instant::now();
    let (spectrum, sstats, hit) = match cached_spectrum(cfg, &skey)? {
        Some((s, st)) => {
            info!("cache hit: spectrum for Q={q} ({skey})");
            (s, st, true)
        }
        None => {
            let kernel = kern.kernel.expect("kernel matrix loaded when the spectrum is not cached");
            let (s, st) = spectrum_stage(cfg, kernel, &skey)?;
            (s, st, false)
        }
    };
    export_spectrum(&dir, &spectrum, &sstats, traj.dt())?;
    record.spectrum_key = Some(skey);
    record.spectrum_cache_hit = Some(hit);
    record.seconds.spectrum = Some(t.elapsed().as_secs_f64());
    info!("spectrum for Q={q}: lambda_1 = {}", spectrum.lambdas.get(1).copied().unwrap_or(f64::NAN));
    if last < Stage::Galerkin {
        return Ok(record);
    }

    let t = Instant::now();
    let sol = koopman_core::galerkin::solve_generator(&spectrum, traj.dt(), &cfg.galerkin)
        .map_err(CliError::stage("galerkin"))?;
    let gstats = export_galerkin(&dir, q, &spectrum, &sol, traj.dt())?;
    record.seconds.galerkin = Some(t.elapsed().as_secs_f64());
    info!("galerkin for Q={q}: skew residual {}", gstats.skew_residual);
    Ok(record)
}

fn cached_spectrum_exists(cfg: &ResolvedConfig, key: &str) -> bool {
    cache_file(cfg, key, "spectrum.bin").exists() && cache_file(cfg, key, "spectrum.toml").exists()
}

/// Runs the stages up to `last` for every configured Q and writes the manifest.
pub fn run(cfg: &ResolvedConfig, last: Stage, command: &str) -> CliResult<Manifest> {
    let (traj, record) = trajectory(cfg)?;
    let mut runs = Vec::new();
    if last > Stage::Generate {
        let hash = record.sha256.clone();
        runs = if cfg.raw.parallel_q {
            cfg.qs
                .par_iter()
                .map(|&q| run_q(cfg, &traj, &hash, q, last))
                .collect::<CliResult<Vec<_>>>()?
        } else {
            cfg.qs
                .iter()
                .map(|&q| run_q(cfg, &traj, &hash, q, last))
                .collect::<CliResult<Vec<_>>>()?
        };
    }
    let manifest = Manifest {
        command: command.into(),
        versions: Versions::current(),
        config: cfg.explicit(),
        trajectory: record,
        runs,
    };
    manifest.save(cfg.out())?;
    Ok(manifest)
}
