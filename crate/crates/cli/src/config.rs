//! Flat key-value pipeline configuration, file values overridden by flags.

use std::path::{Path, PathBuf};

use clap::Args;
use koopman_core::dynamics::{default_spinup, SystemKind, SystemSpec};
use koopman_core::galerkin::{Boundary, FdOrder, GalerkinOptions};
use koopman_core::spectrum::Solver;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const DESK_N: usize = 8000;
pub const DESK_Q: usize = 400;
pub const FULL_N: usize = 50_000;
pub const FULL_Q: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SchemeName {
    Forward,
    Central,
}

impl From<SchemeName> for FdOrder {
    fn from(s: SchemeName) -> Self {
        match s {
            SchemeName::Forward => FdOrder::FirstForward,
            SchemeName::Central => FdOrder::SecondCentral,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryName {
    Zero,
    Trim,
}

impl From<BoundaryName> for Boundary {
    fn from(b: BoundaryName) -> Self {
        match b {
            BoundaryName::Zero => Boundary::Zero,
            BoundaryName::Trim => Boundary::Trim,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SolverName {
    Auto,
    Dense,
    Lanczos,
}

impl From<SolverName> for Solver {
    fn from(s: SolverName) -> Self {
        match s {
            SolverName::Auto => Solver::Auto,
            SolverName::Dense => Solver::Dense,
            SolverName::Lanczos => Solver::Lanczos,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SystemName {
    FayadTorusProduct,
    L63Product,
    L63Pure,
    CircleRotation,
}

impl From<SystemName> for SystemKind {
    fn from(s: SystemName) -> Self {
        match s {
            SystemName::FayadTorusProduct => SystemKind::FayadTorusProduct,
            SystemName::L63Product => SystemKind::L63Product,
            SystemName::L63Pure => SystemKind::L63Pure,
            SystemName::CircleRotation => SystemKind::CircleRotation,
        }
    }
}

/// `"auto"` or a positive number.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EpsilonSetting {
    Value(f64),
    Name(String),
}

impl EpsilonSetting {
    pub fn auto() -> Self {
        EpsilonSetting::Name("auto".into())
    }

    pub fn value(&self) -> Option<f64> {
        match self {
            EpsilonSetting::Value(v) => Some(*v),
            EpsilonSetting::Name(_) => None,
        }
    }

    /// Stable text used in cache keys.
    pub fn key(&self) -> String {
        match self {
            EpsilonSetting::Value(v) => format!("{:016x}", v.to_bits()),
            EpsilonSetting::Name(s) => s.clone(),
        }
    }
}

impl std::str::FromStr for EpsilonSetting {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(s.parse::<f64>()
            .map(EpsilonSetting::Value)
            .unwrap_or_else(|_| EpsilonSetting::Name(s.to_string())))
    }
}

/// Everything a run depends on. Unset optional keys take desk-scale or
/// full-scale defaults when resolved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub system: SystemName,
    /// External CSV; replaces the generator when set.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<PathBuf>,
    /// Whether `data` starts with a header row.
    pub header: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    pub dt: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spinup: Option<f64>,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<Vec<usize>>,
    pub epsilon: EpsilonSetting,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_nn: Option<usize>,
    pub m: usize,
    pub theta: f64,
    pub scheme: SchemeName,
    pub antisymmetrize: bool,
    pub boundary: BoundaryName,
    pub solver: SolverName,
    pub k_max: usize,
    pub omega: f64,
    pub out: PathBuf,
    pub full_scale: bool,
    /// Run the Q branches concurrently.
    pub parallel_q: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            system: SystemName::FayadTorusProduct,
            data: None,
            header: false,
            n: None,
            dt: 0.01,
            spinup: None,
            seed: 0,
            q: None,
            epsilon: EpsilonSetting::auto(),
            k_nn: None,
            m: 50,
            theta: 1e-4,
            scheme: SchemeName::Forward,
            antisymmetrize: false,
            boundary: BoundaryName::Zero,
            solver: SolverName::Auto,
            k_max: koopman_core::dynamics::DEFAULT_K_MAX,
            omega: 1.0,
            out: PathBuf::from("out"),
            full_scale: false,
            parallel_q: false,
        }
    }
}

/// Command-line mirror of [`PipelineConfig`]; set flags win over the file.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// TOML configuration file.
    #[arg(long, short = 'c')]
    pub config: Option<PathBuf>,
    /// Take the configuration recorded in a previous run's manifest.
    #[arg(long, conflicts_with = "config")]
    pub from_manifest: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub system: Option<SystemName>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub header: Option<bool>,
    #[arg(long, short = 'n')]
    pub n: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    pub dt: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub spinup: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Comma-separated delay counts.
    #[arg(long, short = 'q', value_delimiter = ',')]
    pub q: Option<Vec<usize>>,
    /// `auto` or a positive number.
    #[arg(long, allow_negative_numbers = true)]
    pub epsilon: Option<EpsilonSetting>,
    #[arg(long)]
    pub k_nn: Option<usize>,
    #[arg(long, short = 'm')]
    pub m: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    pub theta: Option<f64>,
    #[arg(long, value_enum)]
    pub scheme: Option<SchemeName>,
    #[arg(long)]
    pub antisymmetrize: Option<bool>,
    #[arg(long, value_enum)]
    pub boundary: Option<BoundaryName>,
    #[arg(long, value_enum)]
    pub solver: Option<SolverName>,
    #[arg(long)]
    pub k_max: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    pub omega: Option<f64>,
    #[arg(long, short = 'o')]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub full_scale: Option<bool>,
    #[arg(long)]
    pub parallel_q: Option<bool>,
}

macro_rules! override_fields {
    ($cfg:expr, $args:expr; $($plain:ident),*; $($opt:ident),*) => {
        $(if let Some(v) = $args.$plain.clone() { $cfg.$plain = v; })*
        $(if let Some(v) = $args.$opt.clone() { $cfg.$opt = Some(v); })*
    };
}

impl ConfigArgs {
    pub fn load(&self) -> CliResult<PipelineConfig> {
        let mut cfg = match (&self.config, &self.from_manifest) {
            (Some(p), _) => PipelineConfig::from_file(p)?,
            (None, Some(p)) => crate::manifest::Manifest::load(p)?.config,
            (None, None) => PipelineConfig::default(),
        };
        override_fields!(cfg, self;
            system, header, dt, seed, epsilon, m, theta, scheme, antisymmetrize, boundary,
            solver, k_max, omega, out, full_scale, parallel_q;
            data, n, spinup, q, k_nn);
        Ok(cfg)
    }
}

impl PipelineConfig {
    pub fn from_file(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(CliError::io(format!("reading {}", path.display())))?;
        Self::from_toml(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn from_toml(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.message().to_string())
    }

    /// Checks every key and reports all offenders at once.
    pub fn validate(&self) -> CliResult<ResolvedConfig> {
        let mut bad: Vec<String> = Vec::new();
        let mut flag = |key: &str, why: &str| bad.push(format!("{key} ({why})"));
        let n = self.n.unwrap_or(if self.full_scale { FULL_N } else { DESK_N });
        let qs = self
            .q
            .clone()
            .unwrap_or_else(|| vec![if self.full_scale { FULL_Q } else { DESK_Q }]);
        let kind: SystemKind = self.system.into();
        if self.data.is_none() && n < 3 {
            flag("n", "need at least 3 samples");
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            flag("dt", "must be positive");
        }
        if let Some(s) = self.spinup {
            if !(s >= 0.0 && s.is_finite()) {
                flag("spinup", "must be nonnegative");
            }
        }
        if qs.is_empty() {
            flag("q", "list must be nonempty");
        }
        if qs.contains(&0) {
            flag("q", "delays must be at least 1");
        }
        match &self.epsilon {
            EpsilonSetting::Value(v) if !(*v > 0.0 && v.is_finite()) => {
                flag("epsilon", "must be positive or \"auto\"")
            }
            EpsilonSetting::Name(s) if s != "auto" => flag("epsilon", "must be positive or \"auto\""),
            _ => {}
        }
        if self.k_nn == Some(0) {
            flag("k_nn", "must be at least 1");
        }
        if self.m == 0 {
            flag("m", "must be at least 1");
        }
        if !(self.theta >= 0.0 && self.theta.is_finite()) {
            flag("theta", "must be nonnegative");
        }
        if kind.has_rotation() && !(self.omega > 0.0 && self.omega.is_finite()) {
            flag("omega", "must be positive");
        }
        if !bad.is_empty() {
            return Err(CliError::Config(format!("offending keys: {}", bad.join(", "))));
        }
        let mut spec = SystemSpec::new(kind);
        spec.omega = self.omega;
        spec.k_max = self.k_max;
        Ok(ResolvedConfig {
            spec,
            n,
            qs,
            spinup: self.spinup.unwrap_or_else(|| default_spinup(kind, self.full_scale)),
            galerkin: GalerkinOptions {
                m: self.m,
                theta: self.theta,
                order: self.scheme.into(),
                antisymmetrize: self.antisymmetrize,
                boundary: self.boundary.into(),
            },
            raw: self.clone(),
        })
    }
}

/// Validated configuration with every default filled in.
#[derive(Debug, Clone)]
pub struct ResolvedConfig {
    pub spec: SystemSpec<f64>,
    pub n: usize,
    pub qs: Vec<usize>,
    pub spinup: f64,
    pub galerkin: GalerkinOptions<f64>,
    pub raw: PipelineConfig,
}

impl ResolvedConfig {
    /// The raw configuration with every default written out, so that a rerun
    /// does not depend on the defaults of a later version.
    pub fn explicit(&self) -> PipelineConfig {
        let mut c = self.raw.clone();
        c.n = Some(self.n);
        c.q = Some(self.qs.clone());
        c.spinup = Some(self.spinup);
        c
    }

    pub fn out(&self) -> &Path {
        &self.raw.out
    }

    pub fn q_dir(&self, q: usize) -> PathBuf {
        q_dir(self.out(), q)
    }

    pub fn cache_dir(&self) -> PathBuf {
        self.out().join("cache")
    }
}

pub fn q_dir(out: &Path, q: usize) -> PathBuf {
    out.join(format!("q{q}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_resolve_to_desk_scale() {
        let r = PipelineConfig::default().validate().unwrap();
        assert_eq!((r.n, r.qs.clone()), (DESK_N, vec![DESK_Q]));
        assert_eq!(r.galerkin.m, 50);
        assert_eq!(r.raw.dt, 0.01);
        let mut c = PipelineConfig::default();
        c.full_scale = true;
        let r = c.validate().unwrap();
        assert_eq!((r.n, r.qs), (FULL_N, vec![FULL_Q]));
    }

    #[test]
    fn parses_file_and_rejects_unknown_keys() {
        let c = PipelineConfig::from_toml("system = \"l63_pure\"\nq = [1, 400]\nepsilon = 0.5\n").unwrap();
        assert_eq!(c.system, SystemName::L63Pure);
        assert_eq!(c.epsilon.value(), Some(0.5));
        assert!(PipelineConfig::from_toml("bogus = 1\n").is_err());
        let c = PipelineConfig::from_toml("epsilon = \"auto\"\n").unwrap();
        assert_eq!(c.epsilon, EpsilonSetting::auto());
    }

    #[test]
    fn lists_every_offending_key() {
        let mut c = PipelineConfig::default();
        c.dt = -1.0;
        c.q = Some(vec![]);
        c.epsilon = EpsilonSetting::Name("wide".into());
        let CliError::Config(msg) = c.validate().unwrap_err() else {
            panic!("expected a config error");
        };
        for key in ["dt", "q", "epsilon"] {
            assert!(msg.contains(key), "{msg}");
        }
    }

    #[test]
    fn explicit_config_round_trips() {
        let r = PipelineConfig::default().validate().unwrap();
        let text = toml::to_string(&r.explicit()).unwrap();
        assert_eq!(PipelineConfig::from_toml(&text).unwrap(), r.explicit());
    }
}
