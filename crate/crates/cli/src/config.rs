use std::fs;
use std::path::{Path, PathBuf};

use bev_core::datagen::SceneConfig;
use bev_core::eval::DEFAULT_BUCKET_EDGES;
use bev_core::filter::RuleSet;
use bev_core::neuralnet::Hyper;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub cell_px: u32,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { cell_px: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    /// Feature file; synthetic class-prototype vectors are used when absent.
    pub file: Option<PathBuf>,
    pub dim: usize,
    pub perturbation: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            file: None,
            dim: bev_core::models::DEFAULT_FEATURE_DIM,
            perturbation: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub bucket_edges: Vec<f64>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            bucket_edges: DEFAULT_BUCKET_EDGES.to_vec(),
        }
    }
}

/// Everything a run can be configured with. `seed` feeds every random
/// source, so the per-section seeds are overwritten from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub scene: SceneConfig,
    pub rules: RuleSet,
    pub hyper: Hyper,
    pub grid: GridConfig,
    pub features: FeatureConfig,
    pub eval: EvalConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            scene: SceneConfig::default(),
            rules: RuleSet::synthetic_defaults(),
            hyper: Hyper::default(),
            grid: GridConfig::default(),
            features: FeatureConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, String> {
        match path {
            None => Ok(Self::default()),
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
                toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
            }
        }
    }

    pub fn apply_seed(&mut self, seed: Option<u64>) {
        if let Some(seed) = seed {
            self.seed = seed;
        }
        self.scene.rng_seed = self.seed;
        self.hyper.rng_seed = self.seed;
    }

    pub fn to_toml(&self) -> Result<String, String> {
        toml::to_string(self).map_err(|e| e.to_string())
    }
}
