//! Experiment configuration, read from a flat TOML file.

use std::path::{Path, PathBuf};

use qmr_core::{BlockSource, CorruptionRecipe, FinalWeights, NqmrConfig, RnqmrConfig, SynthSpec};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// Grid used for any hyperparameter left unspecified in a sweep.
pub const DEFAULT_GRID: [f64; 4] = [0.01, 0.1, 1.0, 10.0];

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Solver {
    #[default]
    Nqmr,
    Rnqmr,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightsMode {
    #[default]
    Last,
    FinalE0,
}

impl From<WeightsMode> for FinalWeights {
    fn from(m: WeightsMode) -> Self {
        match m {
            WeightsMode::Last => FinalWeights::LastIteration,
            WeightsMode::FinalE0 => FinalWeights::FromFinalE0,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlockFill {
    /// An image patch: `patch` if given, else the built-in pattern.
    #[default]
    Patch,
    Noise,
}

/// Every setting of one run. Keys mirror the field names.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// `path,classId,split` manifest. Mutually exclusive with `synth_*`.
    pub manifest: Option<PathBuf>,
    pub synth_classes: Option<usize>,
    pub synth_per_class: Option<usize>,
    pub synth_noise_std: Option<f64>,
    /// Images are resized to this size (manifest) or generated at it (synth).
    pub rows: Option<usize>,
    pub cols: Option<usize>,

    pub solver: Solver,
    pub lambda: f64,
    pub mu: f64,
    pub eps_rel: f64,
    pub max_iter: usize,
    pub omega: f64,
    pub alpha: f64,
    pub beta: f64,
    pub eta: f64,
    pub epsilon_log: f64,
    pub weights: WeightsMode,
    /// Sweep omega, alpha and beta; unset grids fall back to [`DEFAULT_GRID`].
    pub sweep: bool,
    pub omega_grid: Option<Vec<f64>>,
    pub alpha_grid: Option<Vec<f64>>,
    pub beta_grid: Option<Vec<f64>>,

    pub block_fraction: f64,
    pub block_source: BlockFill,
    pub patch: Option<PathBuf>,
    pub sp_probability: f64,
    pub gaussian_variance: f64,

    /// Seeds both the synthetic data and the corruption.
    pub seed: u64,
    pub out: PathBuf,
    /// Worker threads; 0 uses every core.
    pub threads: usize,
    /// Fill the `wallTimeMs` column. Off by default so reruns are
    /// byte-identical.
    pub record_wall_time: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let n = NqmrConfig::default();
        let r = RnqmrConfig::default();
        Self {
            manifest: None,
            synth_classes: None,
            synth_per_class: None,
            synth_noise_std: None,
            rows: None,
            cols: None,
            solver: Solver::default(),
            lambda: n.lambda,
            mu: n.mu,
            eps_rel: n.eps_rel,
            max_iter: n.max_iter,
            omega: r.omega,
            alpha: r.alpha,
            beta: r.beta,
            eta: r.eta,
            epsilon_log: r.epsilon_log,
            weights: WeightsMode::default(),
            sweep: false,
            omega_grid: None,
            alpha_grid: None,
            beta_grid: None,
            block_fraction: 0.0,
            block_source: BlockFill::default(),
            patch: None,
            sp_probability: 0.0,
            gaussian_variance: 0.0,
            seed: 0,
            out: PathBuf::from("results"),
            threads: 1,
            record_wall_time: false,
        }
    }
}

/// Where the images come from.
#[derive(Clone, Debug, PartialEq)]
pub enum DataSource {
    Manifest { path: PathBuf, size: (usize, usize) },
    Synth(SynthSpec),
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Reads a config file; a relative `manifest`, `patch` or `out` resolves
    /// against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(p) = cfg.manifest.as_mut() {
            rebase(p);
        }
        if let Some(p) = cfg.patch.as_mut() {
            rebase(p);
        }
        rebase(&mut cfg.out);
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.data_source()?;
        self.nqmr_config().validate().map_err(config_error)?;
        self.rnqmr_config().validate().map_err(config_error)?;
        let is_sweep = self.is_sweep();
        if is_sweep && self.solver == Solver::Nqmr {
            return Err(CliError::Config("hyperparameter grids apply to the rnqmr solver only".into()));
        }
        for (name, grid) in [
            ("omega_grid", &self.omega_grid),
            ("alpha_grid", &self.alpha_grid),
            ("beta_grid", &self.beta_grid),
        ] {
            if let Some(g) = grid {
                if g.is_empty() {
                    return Err(CliError::Config(format!("{name} is empty")));
                }
                if let Some(v) = g.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
                    return Err(CliError::Config(format!("{name} entry {v} must be finite and nonnegative")));
                }
            }
        }
        if self.patch.is_some() && self.block_source == BlockFill::Noise {
            return Err(CliError::Config("patch given but block_source is noise".into()));
        }
        let recipe = CorruptionRecipe {
            block_fraction: self.block_fraction,
            block_source: BlockSource::Noise,
            sp_probability: self.sp_probability,
            gaussian_variance: self.gaussian_variance,
            seed: self.seed,
        };
        recipe.validate().map_err(config_error)
    }

    pub fn data_source(&self) -> Result<DataSource> {
        let synth = self.synth_classes.is_some() || self.synth_per_class.is_some() || self.synth_noise_std.is_some();
        match (&self.manifest, synth) {
            (Some(_), true) => Err(CliError::Config("set either manifest or synth_* keys, not both".into())),
            (None, false) => Err(CliError::Config("no data source: set manifest or synth_classes".into())),
            (Some(path), false) => {
                let size = match (self.rows, self.cols) {
                    (Some(r), Some(c)) if r > 0 && c > 0 => (r, c),
                    _ => return Err(CliError::Config("manifest data needs positive rows and cols".into())),
                };
                Ok(DataSource::Manifest {
                    path: path.clone(),
                    size,
                })
            }
            (None, true) => {
                let classes = self.synth_classes.unwrap_or(5);
                let per_class = self.synth_per_class.unwrap_or(4);
                let size = (self.rows.unwrap_or(8), self.cols.unwrap_or(8));
                if classes < 2 || per_class == 0 || size.0 == 0 || size.1 == 0 {
                    return Err(CliError::Config(
                        "synthetic data needs at least 2 classes, 1 image per class and a nonzero size".into(),
                    ));
                }
                let mut spec = SynthSpec::new(classes, per_class, size, self.seed);
                if let Some(std) = self.synth_noise_std {
                    if !(std >= 0.0 && std.is_finite()) {
                        return Err(CliError::Config(format!("synth_noise_std {std} must be finite and nonnegative")));
                    }
                    spec.noise_std = std;
                }
                Ok(DataSource::Synth(spec))
            }
        }
    }

    pub fn nqmr_config(&self) -> NqmrConfig {
        NqmrConfig {
            lambda: self.lambda,
            mu: self.mu,
            eps_rel: self.eps_rel,
            max_iter: self.max_iter,
        }
    }

    pub fn rnqmr_config(&self) -> RnqmrConfig {
        RnqmrConfig {
            omega: self.omega,
            alpha: self.alpha,
            beta: self.beta,
            eta: self.eta,
            mu: self.mu,
            epsilon_log: self.epsilon_log,
            eps_rel: self.eps_rel,
            max_iter: self.max_iter,
        }
    }

    pub fn is_sweep(&self) -> bool {
        self.sweep || self.omega_grid.is_some() || self.alpha_grid.is_some() || self.beta_grid.is_some()
    }

    /// `(omega, alpha, beta)` triples in sweep order: omega outermost, beta
    /// innermost. Without a sweep this is the single configured triple.
    pub fn grid(&self) -> Vec<(f64, f64, f64)> {
        if !self.is_sweep() {
            return vec![(self.omega, self.alpha, self.beta)];
        }
        let axis = |g: &Option<Vec<f64>>| g.clone().unwrap_or_else(|| DEFAULT_GRID.to_vec());
        let (omegas, alphas, betas) = (axis(&self.omega_grid), axis(&self.alpha_grid), axis(&self.beta_grid));
        let mut out = Vec::with_capacity(omegas.len() * alphas.len() * betas.len());
        for &o in &omegas {
            for &a in &alphas {
                for &b in &betas {
                    out.push((o, a, b));
                }
            }
        }
        out
    }
}

fn config_error(e: qmr_core::QmrError) -> CliError {
    CliError::Config(e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_keys_parse() {
        let cfg = ExperimentConfig::from_toml(
            r#"
            synth_classes = 3
            solver = "rnqmr"
            omega_grid = [0.1, 1.0]
            block_fraction = 0.3
            weights = "final-e0"
            "#,
        )
        .unwrap();
        assert_eq!(cfg.solver, Solver::Rnqmr);
        assert_eq!(cfg.weights, WeightsMode::FinalE0);
        cfg.validate().unwrap();
        let grid = cfg.grid();
        assert_eq!(grid.len(), 2 * 4 * 4);
        assert_eq!(grid[0], (0.1, 0.01, 0.01));
        assert_eq!(grid[1], (0.1, 0.01, 0.1));
    }

    #[test]
    fn unknown_key_is_rejected() {
        assert!(matches!(
            ExperimentConfig::from_toml("synth_classes = 3\nlamda = 2.0"),
            Err(CliError::Config(_))
        ));
    }

    #[test]
    fn exactly_one_data_source() {
        let none = ExperimentConfig::default();
        assert!(none.validate().is_err());
        let both = ExperimentConfig {
            manifest: Some("m.csv".into()),
            synth_classes: Some(3),
            ..Default::default()
        };
        assert!(both.validate().is_err());
        let manifest_without_size = ExperimentConfig {
            manifest: Some("m.csv".into()),
            ..Default::default()
        };
        assert!(manifest_without_size.validate().is_err());
    }

    #[test]
    fn grid_rules() {
        let base = ExperimentConfig {
            synth_classes: Some(3),
            ..Default::default()
        };
        assert_eq!(base.grid(), vec![(0.1, 0.1, 1.0)]);
        let nqmr_sweep = ExperimentConfig {
            sweep: true,
            ..base.clone()
        };
        assert!(nqmr_sweep.validate().is_err());
        let empty = ExperimentConfig {
            solver: Solver::Rnqmr,
            beta_grid: Some(vec![]),
            ..base.clone()
        };
        assert!(empty.validate().is_err());
        let full = ExperimentConfig {
            solver: Solver::Rnqmr,
            sweep: true,
            ..base
        };
        assert_eq!(full.grid().len(), 64);
    }

    #[test]
    fn bad_values_are_config_errors() {
        let base = ExperimentConfig {
            synth_classes: Some(3),
            ..Default::default()
        };
        for cfg in [
            ExperimentConfig { mu: 0.0, ..base.clone() },
            ExperimentConfig { block_fraction: 1.5, ..base.clone() },
            ExperimentConfig { max_iter: 0, ..base.clone() },
            ExperimentConfig { synth_classes: Some(1), ..base.clone() },
        ] {
            assert!(matches!(cfg.validate(), Err(CliError::Config(_))), "{cfg:?}");
        }
    }

    #[test]
    fn toml_round_trip() {
        let cfg = ExperimentConfig {
            synth_classes: Some(4),
            solver: Solver::Rnqmr,
            alpha_grid: Some(vec![0.5]),
            ..Default::default()
        };
        assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }
}
