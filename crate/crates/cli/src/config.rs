//! TOML run configuration. Every section is optional; command-line flags win.

use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};
use sparce::dataset::NormalizationKind;
use sparce::metrics::{TsneConfig, DEFAULT_ZERO_TOL};
use sparce::movingbox::MovingBoxConfig;
use sparce::training::{ClassifierTrainConfig, IcsConfig, TrainConfig};

use crate::UsageError;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub movingbox: MovingBoxConfig,
    pub data: DataConfig,
    pub classifier: ClassifierTrainConfig,
    pub train: TrainConfig,
    pub ics: IcsConfig,
    pub explain: ExplainSection,
    pub tsne: TsneConfig,
}

/// How a dataset is split and normalised before training.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DataConfig {
    pub test_fraction: f64,
    pub split_seed: u64,
    pub normalization: NormalizationKind,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            test_fraction: 0.2,
            split_seed: 0,
            normalization: NormalizationKind::Zscore,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExplainSection {
    pub reps: usize,
    pub zero_tol: f64,
    pub max_queries: Option<usize>,
}

impl Default for ExplainSection {
    fn default() -> Self {
        Self {
            reps: 5,
            zero_tol: DEFAULT_ZERO_TOL,
            max_queries: None,
        }
    }
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| UsageError(format!("config {}: {e}", path.display())).into())
    }
}

/// Written by `train-classifier` next to the checkpoint so later commands
/// rebuild the identical split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataRecord {
    pub dataset: PathBuf,
    pub dataset_hash: String,
    #[serde(flatten)]
    pub data: DataConfig,
}

pub const DATA_RECORD: &str = "data.json";

impl DataRecord {
    pub fn save(&self, dir: &Path) -> anyhow::Result<()> {
        let path = dir.join(DATA_RECORD);
        std::fs::write(&path, serde_json::to_string_pretty(self)?).with_context(|| format!("writing {}", path.display()))
    }

    pub fn load(dir: &Path) -> anyhow::Result<Self> {
        let path = dir.join(DATA_RECORD);
        let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg: FileConfig = toml::from_str("").unwrap();
        assert_eq!(cfg, FileConfig::default());
        assert_eq!(cfg.explain.reps, 5);
        assert_eq!(cfg.train.epochs, 100);
    }

    #[test]
    fn sections_override_selected_fields() {
        let cfg: FileConfig = toml::from_str(
            "[train]\nepochs = 3\napproach = \"countergan\"\n[train.loss_weights]\nlambda1 = 1\nlambda2 = 1\nlambda3 = 1\nlambda4 = 0\nlambda5 = 0\n[movingbox]\nn_samples = 10\n",
        )
        .unwrap();
        assert_eq!(cfg.train.epochs, 3);
        assert_eq!(cfg.train.approach, sparce::Approach::Countergan);
        assert_eq!(cfg.train.loss_weights.sparsity, 0.0);
        assert_eq!(cfg.train.batch_size, 32);
        assert_eq!(cfg.movingbox.n_samples, 10);
        assert_eq!(cfg.movingbox.n_timesteps, 50);
    }

    #[test]
    fn unknown_sections_are_rejected() {
        assert!(toml::from_str::<FileConfig>("[trian]\nepochs = 3\n").is_err());
    }
}
