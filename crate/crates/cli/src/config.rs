use std::path::{Path, PathBuf};

use hatelab_core::corpus::PipelineConfig;
use hatelab_core::models::{ModelSpec, ModelType};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const CONFIG_ENV: &str = "HATELAB_CONFIG";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub posts: Option<PathBuf>,
    pub corpus: Option<PathBuf>,
    pub lexicons: Vec<PathBuf>,
    pub dictionary: Option<PathBuf>,
    pub stopwords: Option<PathBuf>,
    pub rules: Option<PathBuf>,
    pub markers: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub plan: Option<PathBuf>,
    /// Directory for trained models.
    pub models: Option<PathBuf>,
    pub accounts: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineSettings {
    pub min_syllables: usize,
    pub ratio_threshold: f64,
    pub encoding_threshold: f64,
}

impl Default for PipelineSettings {
    fn default() -> Self {
        let d = PipelineConfig::with_seed(0);
        PipelineSettings {
            min_syllables: d.min_syllables,
            ratio_threshold: d.ratio_threshold,
            encoding_threshold: d.encoding_threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AssignmentSettings {
    pub batch_size: usize,
    pub paired_rounds: usize,
}

impl Default for AssignmentSettings {
    fn default() -> Self {
        AssignmentSettings { batch_size: 100, paired_rounds: 4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSettings {
    pub model: Option<ModelType>,
    /// Full spec; wins over `model` defaults.
    pub spec: Option<ModelSpec>,
    pub grid: Vec<ModelSpec>,
    pub oversample: bool,
    pub cv: usize,
}

impl Default for ModelSettings {
    fn default() -> Self {
        ModelSettings { model: None, spec: None, grid: Vec::new(), oversample: false, cv: 5 }
    }
}

/// Everything a run depends on. Loaded from `HATELAB_CONFIG` when set,
/// overridden by flags, and written into every report.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub paths: Paths,
    pub seed: Option<u64>,
    pub pipeline: PipelineSettings,
    pub assignment: AssignmentSettings,
    pub model: ModelSettings,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Data(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Data(format!("config {}: {e}", path.display())))
    }

    /// From `HATELAB_CONFIG`, or defaults when unset.
    pub fn from_env() -> Result<Self, CliError> {
        match std::env::var_os(CONFIG_ENV) {
            Some(p) if !p.is_empty() => Self::load(Path::new(&p)),
            _ => Ok(RunConfig::default()),
        }
    }

    pub fn pipeline_config(&self, seed: u64) -> PipelineConfig {
        PipelineConfig {
            min_syllables: self.pipeline.min_syllables,
            ratio_threshold: self.pipeline.ratio_threshold,
            encoding_threshold: self.pipeline.encoding_threshold,
            seed,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_files_fill_defaults() {
        let cfg: RunConfig = serde_json::from_str(r#"{"seed": 7, "model": {"oversample": true}}"#).unwrap();
        assert_eq!(cfg.seed, Some(7));
        assert!(cfg.model.oversample);
        assert_eq!(cfg.model.cv, 5);
        assert_eq!(cfg.pipeline, PipelineSettings::default());
        assert!(serde_json::from_str::<RunConfig>(r#"{"sed": 7}"#).is_err());
    }

    #[test]
    fn round_trips() {
        let mut cfg = RunConfig::default();
        cfg.paths.lexicons.push("a.tsv".into());
        cfg.model.spec = Some(ModelSpec::default_for(ModelType::Brf));
        let back: RunConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }
}
