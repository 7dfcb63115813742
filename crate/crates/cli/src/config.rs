//! Run configuration: TOML file, environment overrides, command-line flags.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use phee_core::filtering::StatsMode;
use phee_core::metrics::{Averaging, Semantics, Tail};
use phee_core::prompting::{
    DemoOrder, PromptStrategy, DEFAULT_BUDGET_TOKENS, DEFAULT_MODEL, EXTRACTION_TEMPERATURE,
};
use phee_core::retrieval::{SelectionStrategy, DEFAULT_MAX_PATH};
use phee_core::synthesis::DataSetting;
use serde::{Deserialize, Serialize};

pub const ENV_ENDPOINT: &str = "PHEE_ENDPOINT";
pub const ENV_API_KEY: &str = "PHEE_API_KEY";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputFormat {
    /// One canonical instance record per line.
    #[default]
    Canonical,
    /// Upstream PHEE release layout.
    Phee,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub format: InputFormat,
    /// train / validation / test proportions.
    pub ratios: [f64; 3],
    pub folds: usize,
    /// Apply the subject.disorder revision.
    pub revise: bool,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig { format: InputFormat::Canonical, ratios: [0.6, 0.2, 0.2], folds: 5, revise: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LlmConfig {
    pub endpoint: Option<String>,
    /// Never written to run records.
    #[serde(skip_serializing)]
    pub api_key: Option<String>,
    pub model: String,
    pub cache_dir: Option<PathBuf>,
    pub cache_only: bool,
    pub concurrency: usize,
    pub timeout_secs: u64,
    pub max_attempts: u32,
    pub base_delay_ms: u64,
}

impl Default for LlmConfig {
    fn default() -> Self {
        LlmConfig {
            endpoint: None,
            api_key: None,
            model: DEFAULT_MODEL.to_string(),
            cache_dir: None,
            cache_only: false,
            concurrency: 4,
            timeout_secs: 120,
            max_attempts: 5,
            base_delay_ms: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractConfig {
    pub strategy: PromptStrategy,
    /// Demonstrations per event type; 0 is zero-shot.
    pub shots: usize,
    pub select: SelectionStrategy,
    pub temperature: f64,
    pub budget_tokens: usize,
    pub order: DemoOrder,
    /// Dataset split to extract from.
    pub split: String,
    pub trees: Option<PathBuf>,
    pub tree_manifest: Option<PathBuf>,
    pub max_path: usize,
    pub embeddings: Option<PathBuf>,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        ExtractConfig {
            strategy: PromptStrategy::Explanation,
            shots: 0,
            select: SelectionStrategy::Bm25,
            temperature: EXTRACTION_TEMPERATURE,
            budget_tokens: DEFAULT_BUDGET_TOKENS,
            order: DemoOrder::default(),
            split: "test".into(),
            trees: None,
            tree_manifest: None,
            max_path: DEFAULT_MAX_PATH,
            embeddings: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthesisConfig {
    /// Only the first N templates (by id).
    pub limit: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    pub mode: Option<DataSetting>,
    pub stats_mode: StatsMode,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateConfig {
    pub semantics: Semantics,
    pub averaging: Averaging,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportConfig {
    pub tail: Tail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub data: DataConfig,
    pub llm: LlmConfig,
    pub extract: ExtractConfig,
    pub synthesis: SynthesisConfig,
    pub filter: FilterConfig,
    pub evaluate: EvaluateConfig,
    pub report: ReportConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 13,
            data: DataConfig::default(),
            llm: LlmConfig::default(),
            extract: ExtractConfig::default(),
            synthesis: SynthesisConfig::default(),
            filter: FilterConfig::default(),
            evaluate: EvaluateConfig::default(),
            report: ReportConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| anyhow::anyhow!("invalid configuration: {e}"))
    }

    /// Defaults, then the file if given, then environment overrides.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let mut cfg = match path {
            Some(p) => {
                let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                Self::from_toml(&text).with_context(|| format!("in {}", p.display()))?
            }
            None => RunConfig::default(),
        };
        cfg.apply_env(|k| std::env::var(k).ok());
        Ok(cfg)
    }

    pub fn apply_env(&mut self, get: impl Fn(&str) -> Option<String>) {
        if let Some(v) = get(ENV_ENDPOINT).filter(|v| !v.is_empty()) {
            self.llm.endpoint = Some(v);
        }
        if let Some(v) = get(ENV_API_KEY).filter(|v| !v.is_empty()) {
            self.llm.api_key = Some(v);
        }
    }

    /// Checks value ranges; errors name the offending field.
    pub fn validate(&self) -> Result<()> {
        let d = &self.data;
        if d.ratios.iter().any(|r| !r.is_finite() || *r < 0.0) || (d.ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            bail!("data.ratios: must be three non-negative numbers summing to 1, got {:?}", d.ratios);
        }
        if d.folds < 2 {
            bail!("data.folds: must be at least 2, got {}", d.folds);
        }
        if self.llm.concurrency == 0 {
            bail!("llm.concurrency: must be at least 1");
        }
        if self.llm.max_attempts == 0 {
            bail!("llm.max_attempts: must be at least 1");
        }
        if self.llm.model.trim().is_empty() {
            bail!("llm.model: must not be empty");
        }
        if !(0.0..=2.0).contains(&self.extract.temperature) {
            bail!("extract.temperature: must be within [0, 2], got {}", self.extract.temperature);
        }
        if self.extract.budget_tokens == 0 {
            bail!("extract.budget_tokens: must be positive");
        }
        if self.extract.max_path == 0 {
            bail!("extract.max_path: must be positive");
        }
        if self.extract.split.parse::<phee_core::corpus::Split>().is_err() {
            bail!("extract.split: unknown split {:?} (train | validation | test)", self.extract.split);
        }
        if self.extract.strategy == PromptStrategy::Pipeline && self.extract.shots > 0 {
            bail!("extract.shots: few-shot prompting is not available for the pipeline strategy");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = RunConfig::default();
        let text = toml::to_string(&cfg).unwrap();
        assert_eq!(RunConfig::from_toml(&text).unwrap(), cfg);
        assert_eq!(RunConfig::from_toml("").unwrap(), cfg);
    }

    #[test]
    fn parses_nested_values() {
        let cfg = RunConfig::from_toml(
            "seed = 7\n[extract]\nstrategy = \"code\"\nshots = 5\nselect = \"tree_kernel\"\n[filter]\nmode = \"Tr. Fil.+Aug. Fil.\"\nstats_mode = \"shared\"\n",
        )
        .unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.extract.strategy, PromptStrategy::Code);
        assert_eq!(cfg.extract.select, SelectionStrategy::TreeKernel);
        assert_eq!(cfg.filter.mode, Some(DataSetting::TrainFilAugFil));
        assert_eq!(cfg.filter.stats_mode, StatsMode::Shared);
    }

    #[test]
    fn errors_name_fields() {
        let err = RunConfig::from_toml("[extract]\nshots = \"five\"\n").unwrap_err().to_string();
        assert!(err.contains("shots"), "{err}");
        let err = RunConfig::from_toml("[data]\nfoldz = 3\n").unwrap_err().to_string();
        assert!(err.contains("foldz"), "{err}");
        let mut cfg = RunConfig::default();
        cfg.data.ratios = [0.5, 0.5, 0.5];
        assert!(cfg.validate().unwrap_err().to_string().starts_with("data.ratios"));
        let mut cfg = RunConfig::default();
        cfg.extract.strategy = PromptStrategy::Pipeline;
        cfg.extract.shots = 2;
        assert!(cfg.validate().unwrap_err().to_string().starts_with("extract.shots"));
    }

    #[test]
    fn environment_overrides_and_key_is_not_serialized() {
        let mut cfg = RunConfig::default();
        cfg.apply_env(|k| match k {
            ENV_ENDPOINT => Some("http://localhost:9".into()),
            ENV_API_KEY => Some("sk-test".into()),
            _ => None,
        });
        assert_eq!(cfg.llm.endpoint.as_deref(), Some("http://localhost:9"));
        assert_eq!(cfg.llm.api_key.as_deref(), Some("sk-test"));
        assert!(!serde_json::to_string(&cfg).unwrap().contains("sk-test"));
    }
}
