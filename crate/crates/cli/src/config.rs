use std::path::{Path, PathBuf};

use cffq::globalfit::GlobalFitConfig;
use cffq::models::ModelClass;
use cffq::physics::PhysicsConstants;
use cffq::pseudodata::GeneratorSet;
use cffq::training::{FitConfig, ResampleMode, SeedPolicy};
use serde::{Deserialize, Serialize};

pub const OUTPUT_ENV: &str = "CFFQ_OUTPUT_DIR";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Worker threads; 0 uses one per core.
    pub threads: usize,
    pub paths: Paths,
    pub physics: PhysicsConstants,
    pub models: Models,
    pub fit: FitConfig,
    pub pseudodata: Pseudodata,
    pub evaluate: Evaluate,
    pub qualifier: Qualifier,
    pub global: Global,
}

/// Relative paths are resolved against the directory of the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub data: PathBuf,
    pub truth: Option<PathBuf>,
    /// External CFF curves (xB, t, Q2, ReH, ReE, ReHt, DVCS) for comparison.
    pub reference: Option<PathBuf>,
    pub output: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Self { data: "data.csv".into(), truth: None, reference: None, output: "output".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Models {
    pub classes: Vec<ModelClass>,
    pub n_replicas: usize,
    pub resample: ResampleMode,
    pub seed_policy: SeedPolicy,
}

impl Default for Models {
    fn default() -> Self {
        Self {
            classes: vec![ModelClass::Cdnn, ModelClass::Fqdnn],
            n_replicas: 20,
            resample: ResampleMode::Gaussian,
            seed_policy: SeedPolicy::PerReplica,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorChoice {
    Basic,
    Realistic,
}

impl GeneratorChoice {
    pub fn set(self) -> GeneratorSet {
        match self {
            Self::Basic => GeneratorSet::BASIC,
            Self::Realistic => GeneratorSet::REALISTIC,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Pseudodata {
    /// Kinematic templates (data schema); synthetic templates when absent.
    pub template: Option<PathBuf>,
    pub synthetic_templates: usize,
    pub catalog_seed: u64,
    pub generators: GeneratorChoice,
    pub noise_scale: f64,
    pub seed: u64,
    /// Also write the 2500-replica qualifier manifest per bin.
    pub qualifier_grid: bool,
}

impl Default for Pseudodata {
    fn default() -> Self {
        Self {
            template: None,
            synthetic_templates: 20,
            catalog_seed: 0,
            generators: GeneratorChoice::Basic,
            noise_scale: 1.0,
            seed: 0,
            qualifier_grid: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Evaluate {
    /// Identical-data replicas per bin for the algorithmic error; 0 skips.
    pub algorithmic_replicas: usize,
    /// Perturbed-generator draws per bin for the methodological error; 0 skips.
    pub methodological_draws: usize,
    /// Relative uniform spread of each generator parameter.
    pub parameter_spread: f64,
}

impl Default for Evaluate {
    fn default() -> Self {
        Self { algorithmic_replicas: 0, methodological_draws: 0, parameter_spread: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Qualifier {
    /// Error scaling s used for the average scaled error of measured data.
    pub noise_scale: f64,
    /// |score| at or below this is reported as a tie.
    pub tie_threshold: f64,
    pub quantum_model: ModelClass,
}

impl Default for Qualifier {
    fn default() -> Self {
        Self { noise_scale: 1.0, tie_threshold: 0.0, quantum_model: ModelClass::Fqdnn }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Global {
    /// Pick each bin's model from the qualifier output when present.
    pub use_qualifier: bool,
    pub fallback_model: ModelClass,
    pub grid_points: [usize; 3],
    /// Fractional widening of the data range in each grid axis.
    pub grid_padding: f64,
    pub fit: GlobalFitConfig,
}

impl Default for Global {
    fn default() -> Self {
        Self {
            use_qualifier: true,
            fallback_model: ModelClass::Cdnn,
            grid_points: [10, 10, 5],
            grid_padding: 0.1,
            fit: GlobalFitConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let mut cfg: RunConfig = toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.resolve(base);
        cfg.validate()?;
        Ok(cfg)
    }

    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.paths.data);
        fix(&mut self.paths.output);
        if let Some(p) = &mut self.paths.truth {
            fix(p);
        }
        if let Some(p) = &mut self.paths.reference {
            fix(p);
        }
        if let Some(p) = &mut self.pseudodata.template {
            fix(p);
        }
    }

    /// Applies the output-directory environment override.
    pub fn apply_env(&mut self) {
        if let Some(dir) = std::env::var_os(OUTPUT_ENV) {
            if !dir.is_empty() {
                self.paths.output = dir.into();
            }
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        self.physics.validate().map_err(|e| e.to_string())?;
        if self.models.classes.is_empty() {
            return Err("models.classes is empty".into());
        }
        if self.models.n_replicas < 2 {
            return Err("models.n_replicas must be at least 2".into());
        }
        for c in &self.models.classes {
            self.fit.validate(*c).map_err(|e| e.to_string())?;
        }
        if !(self.pseudodata.noise_scale >= 0.0) {
            return Err("pseudodata.noise_scale must be >= 0".into());
        }
        if !(self.qualifier.noise_scale >= 0.0) || !(self.qualifier.tie_threshold >= 0.0) {
            return Err("qualifier.noise_scale and tie_threshold must be >= 0".into());
        }
        if !(self.evaluate.parameter_spread >= 0.0) {
            return Err("evaluate.parameter_spread must be >= 0".into());
        }
        if self.global.grid_points.contains(&0) {
            return Err("global.grid_points entries must be positive".into());
        }
        self.global.fit.validate().map_err(|e| e.to_string())?;
        Ok(())
    }
}
