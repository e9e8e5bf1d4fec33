//! Experiment configuration.
//!
//! A config is a TOML document:
//!
//! ```toml
//! experiment = "leftmost-scaling"
//! lambda = 1.0
//! n = 10000
//! dt = 0.01
//! b = 0.01          # horizon s = 1 / b²
//! replicas = 50
//! seed = 20240101
//!
//! [analysis]        # every key optional
//! times = [1.0, 10.0, 100.0]
//! bin_width = 0.5
//!
//! [engine]          # every key optional
//! block_steps = 256
//! ```
//!
//! Command-line flags override file values, and the output directory is
//! resolved as flag, then `ATLAS_OUT_DIR`, then the file, then `./out`.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use atlas_core::dynamics::{FarFieldBlocking, ResortStrategy, StepConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{LabError, Result};

pub const OUT_DIR_ENV: &str = "ATLAS_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "out";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentTag {
    LeftmostScaling,
    DensityProfile,
    ParticleCount,
    QuantileLaw,
    SpacingsEquilibrium,
    Domination,
}

impl ExperimentTag {
    pub const ALL: [ExperimentTag; 6] = [
        ExperimentTag::LeftmostScaling,
        ExperimentTag::DensityProfile,
        ExperimentTag::ParticleCount,
        ExperimentTag::QuantileLaw,
        ExperimentTag::SpacingsEquilibrium,
        ExperimentTag::Domination,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentTag::LeftmostScaling => "leftmost-scaling",
            ExperimentTag::DensityProfile => "density-profile",
            ExperimentTag::ParticleCount => "particle-count",
            ExperimentTag::QuantileLaw => "quantile-law",
            ExperimentTag::SpacingsEquilibrium => "spacings-equilibrium",
            ExperimentTag::Domination => "domination",
        }
    }

    /// Whether the horizon is the diffusive time `1 / b²` rather than the
    /// last analysis time.
    pub fn uses_diffusive_scale(self) -> bool {
        !matches!(self, ExperimentTag::SpacingsEquilibrium | ExperimentTag::Domination)
    }
}

impl fmt::Display for ExperimentTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentTag {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.to_ascii_lowercase().replace('_', "-");
        Self::ALL
            .into_iter()
            .find(|t| t.as_str() == key || t.as_str().replace('-', "") == key)
            .ok_or_else(|| LabError::Config(format!("unknown experiment tag `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisGrid {
    /// Unscaled sample times for the spacings experiments.
    pub times: Vec<f64>,
    /// Bin width in rescaled coordinates.
    pub bin_width: f64,
    /// Window in rescaled coordinates relative to the front coefficient; the
    /// absolute window is `[κ + lo, κ + hi]`.
    pub window: [f64; 2],
    /// Scales for the surrogate-distance sweep.
    pub b_sweep: Vec<f64>,
    pub dstar_r_max: usize,
    /// Masses `q` for ranked-particle quantiles `Y_{q√s}`.
    pub quantiles: Vec<f64>,
    /// Half-widths `ε` of the spacing windows.
    pub epsilons: Vec<f64>,
    /// Number of leading spacings pooled for goodness of fit.
    pub spacings: usize,
    /// 1-based spacing index for the tail comparison.
    pub rank: usize,
    pub z_grid: Vec<f64>,
    /// Overrides the default tolerance of the experiment.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
}

impl Default for AnalysisGrid {
    fn default() -> Self {
        Self {
            times: vec![1.0, 10.0, 100.0],
            bin_width: 0.5,
            window: [0.5, 3.0],
            b_sweep: vec![0.1, 0.05, 0.02, 0.01],
            dstar_r_max: 4,
            quantiles: vec![1.0],
            epsilons: vec![0.1, 0.05],
            spacings: 50,
            rank: 1,
            z_grid: (1..=20).map(|k| k as f64 * 0.1).collect(),
            tolerance: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ResortChoice {
    Insertion,
    FullSort,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineOptions {
    pub far_field: bool,
    pub block_steps: usize,
    pub margin_sigmas: f64,
    pub resort: ResortChoice,
}

impl Default for EngineOptions {
    fn default() -> Self {
        let ff = FarFieldBlocking::default();
        Self {
            far_field: true,
            block_steps: ff.block_steps,
            margin_sigmas: ff.margin_sigmas,
            resort: ResortChoice::Insertion,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentTag,
    pub lambda: f64,
    pub n: usize,
    pub dt: f64,
    pub b: f64,
    pub replicas: usize,
    pub seed: u64,
    #[serde(default)]
    pub analysis: AnalysisGrid,
    #[serde(default)]
    pub engine: EngineOptions,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Defaults sized for a desk-scale verification of each experiment.
    pub fn preset(experiment: ExperimentTag) -> Self {
        let base = Self {
            experiment,
            lambda: 1.0,
            n: 10_000,
            dt: 0.01,
            b: 0.01,
            replicas: 50,
            seed: 1,
            analysis: AnalysisGrid::default(),
            engine: EngineOptions::default(),
            output_dir: None,
        };
        match experiment {
            ExperimentTag::SpacingsEquilibrium => Self {
                n: 1000,
                dt: 1e-3,
                b: 1.0,
                replicas: 200,
                ..base
            },
            ExperimentTag::Domination => Self {
                n: 200,
                dt: 1e-3,
                b: 1.0,
                replicas: 2000,
                analysis: AnalysisGrid {
                    times: vec![1.0, 10.0],
                    ..AnalysisGrid::default()
                },
                ..base
            },
            _ => base,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(LabError::Config(what.to_string()));
        let positive = |x: f64| x.is_finite() && x > 0.0;
        if !positive(self.lambda) {
            return bad("lambda must be positive");
        }
        if self.n == 0 {
            return bad("n must be at least 1");
        }
        if !positive(self.dt) {
            return bad("dt must be positive");
        }
        if !positive(self.b) || self.b > 1.0 {
            return bad("b must lie in (0, 1]");
        }
        if self.replicas == 0 {
            return bad("replicas must be at least 1");
        }
        let a = &self.analysis;
        if !a.times.iter().all(|&t| positive(t)) || a.times.windows(2).any(|w| w[0] >= w[1]) {
            return bad("analysis.times must be positive and strictly increasing");
        }
        if !positive(a.bin_width) || !(a.window[0] < a.window[1]) {
            return bad("analysis window must be nonempty with positive bin width");
        }
        if a.b_sweep.iter().any(|&b| !positive(b) || b > 1.0) {
            return bad("analysis.b_sweep entries must lie in (0, 1]");
        }
        if a.quantiles.iter().chain(&a.epsilons).any(|&x| !positive(x)) {
            return bad("quantiles and epsilons must be positive");
        }
        if a.spacings == 0 || a.rank == 0 || a.dstar_r_max == 0 {
            return bad("spacings, rank and dstar_r_max must be at least 1");
        }
        if a.tolerance.is_some_and(|t| !positive(t)) {
            return bad("tolerance must be positive");
        }
        if !self.experiment.uses_diffusive_scale() && a.times.is_empty() {
            return bad("this experiment needs analysis.times");
        }
        let e = &self.engine;
        if e.block_steps == 0 || !positive(e.margin_sigmas) {
            return bad("engine block_steps and margin_sigmas must be positive");
        }
        Ok(())
    }

    /// Unscaled simulation horizon.
    pub fn horizon(&self) -> f64 {
        if self.experiment.uses_diffusive_scale() {
            1.0 / (self.b * self.b)
        } else {
            self.analysis.times.last().copied().unwrap_or(0.0)
        }
    }

    pub fn step_config(&self) -> Result<StepConfig> {
        let resort = match self.engine.resort {
            ResortChoice::Insertion => ResortStrategy::AdaptiveInsertion,
            ResortChoice::FullSort => ResortStrategy::FullSort,
        };
        let cfg = StepConfig::new(self.dt)?.with_resort(resort);
        Ok(if self.engine.far_field {
            cfg.with_far_field(FarFieldBlocking {
                block_steps: self.engine.block_steps,
                margin_sigmas: self.engine.margin_sigmas,
            })
        } else {
            cfg
        })
    }

    pub fn replica_seed(&self, replica: usize) -> u64 {
        self.seed.wrapping_add(replica as u64)
    }

    pub fn seeds(&self) -> Vec<u64> {
        (0..self.replicas).map(|r| self.replica_seed(r)).collect()
    }

    /// SHA-256 of the canonical JSON form, without the output directory.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output_dir = None;
        let bytes = serde_json::to_vec(&canonical).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn output_dir(&self, flag: Option<&Path>) -> PathBuf {
        resolve_output_dir(
            flag,
            std::env::var_os(OUT_DIR_ENV).map(PathBuf::from),
            self.output_dir.as_deref(),
        )
    }
}

pub fn resolve_output_dir(flag: Option<&Path>, env: Option<PathBuf>, file: Option<&Path>) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or(env.filter(|p| !p.as_os_str().is_empty()))
        .or_else(|| file.map(Path::to_path_buf))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

/// Values given on the command line.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub lambda: Option<f64>,
    pub n: Option<usize>,
    pub dt: Option<f64>,
    pub b: Option<f64>,
    pub replicas: Option<usize>,
    pub seed: Option<u64>,
    pub times: Option<Vec<f64>>,
    pub tolerance: Option<f64>,
    pub far_field: Option<bool>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut ExperimentConfig) -> Result<()> {
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = self.$field.clone() {
                    cfg.$field = v;
                }
            )*};
        }
        set!(lambda, n, dt, b, replicas, seed);
        if let Some(t) = &self.times {
            cfg.analysis.times = t.clone();
        }
        if let Some(t) = self.tolerance {
            cfg.analysis.tolerance = Some(t);
        }
        if let Some(f) = self.far_field {
            cfg.engine.far_field = f;
        }
        cfg.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_are_valid() {
        for tag in ExperimentTag::ALL {
            ExperimentConfig::preset(tag).validate().unwrap();
        }
    }

    #[test]
    fn minimal_file_fills_defaults() {
        let cfg = ExperimentConfig::from_toml_str(
            "experiment = \"quantile-law\"\nlambda = 2.0\nn = 100\ndt = 0.01\nb = 0.1\nreplicas = 3\nseed = 9\n",
        )
        .unwrap();
        assert_eq!(cfg.experiment, ExperimentTag::QuantileLaw);
        assert_eq!(cfg.analysis, AnalysisGrid::default());
        assert!((cfg.horizon() - 100.0).abs() < 1e-9);
        assert_eq!(cfg.seeds(), vec![9, 10, 11]);
    }

    #[test]
    fn rejects_bad_values() {
        let base = ExperimentConfig::preset(ExperimentTag::LeftmostScaling);
        for broken in [
            ExperimentConfig {
                lambda: 0.0,
                ..base.clone()
            },
            ExperimentConfig { b: 1.5, ..base.clone() },
            ExperimentConfig {
                replicas: 0,
                ..base.clone()
            },
            ExperimentConfig {
                dt: -1.0,
                ..base.clone()
            },
        ] {
            assert!(broken.validate().is_err());
        }
        assert!(ExperimentConfig::from_toml_str("experiment = \"nope\"").is_err());
        let unknown = format!("{}\nmystery = 1\n", base.to_toml_string().unwrap());
        assert!(ExperimentConfig::from_toml_str(&unknown).is_err());
    }

    #[test]
    fn toml_round_trip() {
        let cfg = ExperimentConfig::preset(ExperimentTag::Domination);
        let back = ExperimentConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn hash_ignores_output_dir_only() {
        let a = ExperimentConfig::preset(ExperimentTag::DensityProfile);
        let b = ExperimentConfig {
            output_dir: Some("elsewhere".into()),
            ..a.clone()
        };
        assert_eq!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
        let c = ExperimentConfig { seed: 2, ..a.clone() };
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn tags_parse_loosely() {
        for tag in ExperimentTag::ALL {
            assert_eq!(tag.as_str().parse::<ExperimentTag>().unwrap(), tag);
        }
        assert_eq!(
            "LeftmostScaling".parse::<ExperimentTag>().unwrap(),
            ExperimentTag::LeftmostScaling
        );
        assert_eq!(
            "quantile_law".parse::<ExperimentTag>().unwrap(),
            ExperimentTag::QuantileLaw
        );
    }

    #[test]
    fn output_dir_precedence() {
        let flag = Path::new("from-flag");
        let file = Path::new("from-file");
        assert_eq!(
            resolve_output_dir(Some(flag), Some("env".into()), Some(file)),
            PathBuf::from("from-flag")
        );
        assert_eq!(
            resolve_output_dir(None, Some("env".into()), Some(file)),
            PathBuf::from("env")
        );
        assert_eq!(resolve_output_dir(None, None, Some(file)), PathBuf::from("from-file"));
        assert_eq!(resolve_output_dir(None, None, None), PathBuf::from(DEFAULT_OUT_DIR));
    }

    #[test]
    fn overrides_win_and_revalidate() {
        let mut cfg = ExperimentConfig::preset(ExperimentTag::LeftmostScaling);
        let o = Overrides {
            lambda: Some(4.0),
            seed: Some(77),
            ..Default::default()
        };
        o.apply(&mut cfg).unwrap();
        assert_eq!((cfg.lambda, cfg.seed), (4.0, 77));
        let bad = Overrides {
            b: Some(0.0),
            ..Default::default()
        };
        assert!(bad.apply(&mut cfg).is_err());
    }
}
