//! Experiment configuration: one JSON file, then command-line overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use skipstack_core::conditioning::VectorLaw;
use skipstack_core::latent::LatentModel;
use skipstack_core::skipstack::SkipSchedule;

use crate::dataset::DatasetConfig;
use crate::error::{CliError, Result};
use crate::formats::{self, TableFormat};
use crate::recognition::{ClassifierSettings, EncoderSettings, RecognitionSettings};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub k: usize,
    pub d: usize,
    pub gammas: Vec<f64>,
    pub c: f64,
    pub sigma: f64,
    /// Load this model file instead of generating one.
    pub path: Option<PathBuf>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig { k: 4, d: 4, gammas: vec![1.0, 1.0, 8.0, 8.0], c: 0.1, sigma: 0.0, path: None }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleConfig {
    /// Level-0 skip. Falls back to `1 / frames`, then to the fixed-skip `tau`.
    pub base_tau: Option<f64>,
    pub frames: Option<usize>,
    pub levels: usize,
    /// Levels left out of the stack.
    pub mask: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConditionConfig {
    /// Skip of the single-skip design.
    pub tau: f64,
    /// Column count of the single-skip design; `null` uses `⌊1/τ⌋`.
    pub columns: Option<usize>,
    pub bootstrap_resamples: usize,
}

impl Default for ConditionConfig {
    fn default() -> Self {
        ConditionConfig { tau: 0.01, columns: None, bootstrap_resamples: 2000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorollaryConfig {
    pub gamma1: f64,
    pub tau: f64,
    pub c: f64,
    pub ms: Vec<u32>,
    pub batches: usize,
    pub batch_trials: usize,
    pub columns: usize,
}

impl Default for CorollaryConfig {
    fn default() -> Self {
        CorollaryConfig { gamma1: 0.01, tau: 0.01, c: 0.1, ms: vec![1, 2, 3], batches: 20, batch_trials: 50, columns: 5000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LawConfig {
    Rademacher,
    Fixed,
}

impl From<LawConfig> for VectorLaw {
    fn from(l: LawConfig) -> Self {
        match l {
            LawConfig::Rademacher => VectorLaw::Rademacher,
            LawConfig::Fixed => VectorLaw::Fixed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BernsteinConfig {
    pub p_dim: usize,
    pub n: usize,
    pub b: f64,
    pub deltas: Vec<f64>,
    pub trials: usize,
    pub law: LawConfig,
}

impl Default for BernsteinConfig {
    fn default() -> Self {
        BernsteinConfig { p_dim: 4, n: 500, b: 4.0, deltas: vec![0.05, 0.1, 0.2], trials: 1000, law: LawConfig::Rademacher }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumConfig {
    pub max_level: usize,
    pub base_tau: f64,
    /// Use the noisy observed matrix `F` instead of `P`.
    pub observe: bool,
    /// The spectrum needs at least ten signals, so it has its own model.
    pub model: ModelConfig,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        let base_tau = 1e-3;
        SpectrumConfig {
            max_level: 5,
            base_tau,
            observe: true,
            model: ModelConfig {
                k: 10,
                d: 20,
                gammas: (0..10).map(|i| (0.5 + 0.4 * i as f64) * base_tau).collect(),
                c: 0.0,
                sigma: 0.05,
                path: None,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Mandatory, from the file or `--seed`.
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub format: Option<TableFormat>,
    pub trials: usize,
    pub delta: f64,
    pub model: ModelConfig,
    pub schedule: ScheduleConfig,
    pub condition: ConditionConfig,
    pub corollary: CorollaryConfig,
    pub bernstein: BernsteinConfig,
    pub spectrum: SpectrumConfig,
    pub dataset: DatasetConfig,
    pub recognition: RecognitionSettings,
    pub encoder: EncoderSettings,
    pub classifier: ClassifierSettings,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: None,
            out: None,
            threads: None,
            format: None,
            trials: 200,
            delta: 0.1,
            model: ModelConfig::default(),
            schedule: ScheduleConfig { levels: 3, ..ScheduleConfig::default() },
            condition: ConditionConfig::default(),
            corollary: CorollaryConfig::default(),
            bernstein: BernsteinConfig::default(),
            spectrum: SpectrumConfig::default(),
            dataset: DatasetConfig::default(),
            recognition: RecognitionSettings::default(),
            encoder: EncoderSettings::default(),
            classifier: ClassifierSettings::default(),
        }
    }
}

/// Global flag values; `Some` wins over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub format: Option<TableFormat>,
}

impl ExperimentConfig {
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<Self> {
        let mut cfg = match path {
            Some(p) => {
                let bytes = formats::read_bytes(p)?;
                serde_json::from_slice(&bytes).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
            }
            None => ExperimentConfig::default(),
        };
        if overrides.seed.is_some() {
            cfg.seed = overrides.seed;
        }
        if overrides.out.is_some() {
            cfg.out.clone_from(&overrides.out);
        }
        if overrides.threads.is_some() {
            cfg.threads = overrides.threads;
        }
        if overrides.format.is_some() {
            cfg.format = overrides.format;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.seed.is_none() {
            return Err(CliError::Config("seed is mandatory (set \"seed\" in the config or pass --seed)".into()));
        }
        if self.threads == Some(0) {
            return Err(CliError::Config("threads must be positive".into()));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(CliError::Config(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        Ok(())
    }

    pub fn seed(&self) -> u64 {
        self.seed.expect("validated")
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    pub fn format(&self) -> TableFormat {
        self.format.unwrap_or(TableFormat::Csv)
    }

    /// The configured model file, or a fresh model seeded by the experiment seed.
    pub fn latent_model(&self) -> Result<LatentModel> {
        self.build_model(&self.model)
    }

    pub fn build_model(&self, m: &ModelConfig) -> Result<LatentModel> {
        match &m.path {
            Some(p) => formats::load_model(p),
            None => Ok(LatentModel::new(m.k, m.d, m.gammas.clone(), m.c, m.sigma, self.seed())?),
        }
    }

    pub fn base_tau(&self) -> f64 {
        self.schedule
            .base_tau
            .or(self.schedule.frames.map(|f| 1.0 / f as f64))
            .unwrap_or(self.condition.tau)
    }

    /// Stacked schedule `0..=levels` minus the mask.
    pub fn stacked_schedule(&self) -> Result<SkipSchedule> {
        self.schedule_with_base(self.base_tau())
    }

    pub fn schedule_with_base(&self, base: f64) -> Result<SkipSchedule> {
        let s = SkipSchedule::new(base, self.schedule.levels)?;
        Ok(if self.schedule.mask.is_empty() { s } else { s.excluding(&self.schedule.mask)? })
    }

    /// SHA-256 of the resolved configuration, independent of where the output goes.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.out = None;
        canonical.threads = None;
        formats::sha256_hex(&serde_json::to_vec(&canonical).expect("config serializes"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_is_mandatory_and_flags_win() {
        assert!(matches!(ExperimentConfig::load(None, &Overrides::default()), Err(CliError::Config(_))));
        let cfg = ExperimentConfig::load(None, &Overrides { seed: Some(7), ..Overrides::default() }).unwrap();
        assert_eq!(cfg.seed(), 7);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = serde_json::from_str::<ExperimentConfig>(r#"{"seed": 1, "sedd": 2}"#).unwrap_err();
        assert!(err.to_string().contains("sedd"));
    }

    #[test]
    fn hash_ignores_output_location() {
        let a = ExperimentConfig { seed: Some(1), ..ExperimentConfig::default() };
        let b = ExperimentConfig { out: Some("elsewhere".into()), threads: Some(3), ..a.clone() };
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), ExperimentConfig { seed: Some(2), ..a }.hash());
    }
}
