use std::path::{Path, PathBuf};

use observer_synth::linalg::Mat;
use observer_synth::lipschitz::{EstimateConfig, GeneralizedSearchConfig, VerifyConfig};
use observer_synth::{DesignOptions, SimConfig, SolveOptions};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeKind {
    Lipschitz,
    Generalized,
}

fn default_kappa() -> Option<f64> {
    DesignOptions::default().kappa_max
}

mod opt_rows {
    use observer_synth::linalg::{from_rows, to_rows, Mat};
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &Option<Mat>, s: S) -> Result<S::Ok, S::Error> {
        m.as_ref().map(to_rows).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Mat>, D::Error> {
        match Option::<Vec<Vec<f64>>>::deserialize(d)? {
            None => Ok(None),
            Some(rows) => from_rows(&rows, 0).map(Some).ok_or_else(|| serde::de::Error::custom("ragged matrix rows")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignSection {
    pub mode: ModeKind,
    /// Lipschitz constant; estimated from the model domain when absent.
    #[serde(default)]
    pub ell: Option<f64>,
    /// Generalized weights; searched for when absent.
    #[serde(default, with = "opt_rows")]
    pub v: Option<Mat>,
    #[serde(default, with = "opt_rows")]
    pub w: Option<Mat>,
    #[serde(default)]
    pub generalized_search: GeneralizedSearchConfig,
    #[serde(default)]
    pub solver: SolveOptions,
    #[serde(default = "default_kappa")]
    pub kappa_max: Option<f64>,
    #[serde(default)]
    pub p_bound: Option<f64>,
    #[serde(default)]
    pub margin: Option<f64>,
    #[serde(default)]
    pub export_sdpa: bool,
    /// Solution vector from an external SDPA run, used instead of the in-repo solver.
    #[serde(default)]
    pub sdpa_solution: Option<PathBuf>,
}

impl Default for DesignSection {
    fn default() -> Self {
        Self {
            mode: ModeKind::Lipschitz,
            ell: None,
            v: None,
            w: None,
            generalized_search: GeneralizedSearchConfig::default(),
            solver: SolveOptions::default(),
            kappa_max: default_kappa(),
            p_bound: None,
            margin: None,
            export_sdpa: false,
            sdpa_solution: None,
        }
    }
}

impl DesignSection {
    pub fn options(&self) -> DesignOptions {
        DesignOptions { kappa_max: self.kappa_max, p_bound: self.p_bound, margin: self.margin }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LipschitzSection {
    #[serde(default)]
    pub estimate: EstimateConfig,
    #[serde(default)]
    pub verify: VerifyConfig,
}

/// Top-level run configuration. Relative paths are resolved against the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: PathBuf,
    #[serde(default)]
    pub lipschitz: LipschitzSection,
    #[serde(default)]
    pub design: DesignSection,
    /// Defaults to the SIDARTHE-V experiment when absent.
    #[serde(default)]
    pub sim: Option<SimConfig>,
    pub out_dir: PathBuf,
}

/// A parsed config together with the directory its relative paths hang off.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub base: PathBuf,
    pub out_override: Option<PathBuf>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::validation(format!("config: {e}")))
    }

    /// Canonical pretty JSON (field order follows the struct definitions).
    pub fn to_canonical_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes") + "\n"
    }

    pub fn load(path: &Path) -> Result<LoadedConfig, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::validation(format!("cannot read config {}: {e}", path.display())))?;
        let config = Self::parse(&text)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(LoadedConfig { config, base, out_override: None })
    }

    /// Overrides every seed in the config.
    pub fn set_seed(&mut self, seed: u64) {
        self.lipschitz.estimate.seed = seed;
        self.lipschitz.verify.seed = seed;
        self.design.generalized_search.seed = seed;
        self.design.solver.seed = seed;
        if let Some(sim) = self.sim.as_mut() {
            sim.seed = seed;
        } else {
            let mut sim = SimConfig::sidarthe_default();
            sim.seed = seed;
            self.sim = Some(sim);
        }
    }
}

impl LoadedConfig {
    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    pub fn model_path(&self) -> PathBuf {
        self.resolve(&self.config.model)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out_override.clone().unwrap_or_else(|| self.resolve(&self.config.out_dir))
    }

    pub fn sim(&self) -> SimConfig {
        self.config.sim.clone().unwrap_or_else(SimConfig::sidarthe_default)
    }

    /// Checks that referenced files exist.
    pub fn validate(&self) -> Result<(), CliError> {
        let model = self.model_path();
        if !model.is_file() {
            return Err(CliError::validation(format!("model file not found: {}", model.display())));
        }
        if let Some(sol) = &self.config.design.sdpa_solution {
            let sol = self.resolve(sol);
            if !sol.is_file() {
                return Err(CliError::validation(format!("SDPA solution file not found: {}", sol.display())));
            }
        }
        if self.config.design.mode == ModeKind::Generalized && self.config.design.v.is_some() != self.config.design.w.is_some() {
            return Err(CliError::validation("generalized mode needs both v and w, or neither"));
        }
        Ok(())
    }
}
