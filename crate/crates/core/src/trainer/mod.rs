//! GAN training loop: discriminator steps with optional self-correction,
//! generator steps with optional consistency preservation, evaluation and
//! the ablation grid.

mod ablate;
mod dataset;
mod eval;
mod run;
mod step;

pub use ablate::{ablate, AblationRow, AblationSummary, RunRow, RUNS_CSV, SUMMARY_CSV};
pub use dataset::{compressed_magnitude, load_examples, Example};
pub use eval::{evaluate, write_eval_csv, Enhancer, EvalRow, EvalTable, GeneratorEnhancer, MaskEnhancer};
pub use run::{init_nets, load_checkpoint, train, train_on, train_on_hooked, EpochEval, TrainReport, BEST_CKPT, EVAL_CSV, FINAL_CKPT, FINAL_EVAL_CSV, STEPS_CSV, SURGERY_CSV};
pub use step::{
    disc_loss_graph, disc_step, gen_forward, gen_loss_graph, gen_step, DiscLosses, DiscRecord, GenOutputs, GenRecord, Nets,
    PartHook, StepRecord,
};

use crate::autonn::{AdamConfig, NnError};
use crate::data::DataError;
use crate::dsp::{DspError, StftParams};
use crate::losses::{DiscMode, GenLossConfig, LossError};
use crate::metrics::{MetricsError, SsnrParams};
use crate::autonn::NetConfig;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
#[error("config field `{path}`: {msg}")]
pub struct ConfigError {
    pub path: String,
    pub msg: String,
}

impl ConfigError {
    fn new(path: &str, msg: impl Into<String>) -> Self {
        Self {
            path: path.to_string(),
            msg: msg.into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("non-finite {what} at step {step}; training aborted")]
    NonFinite { step: u64, what: String },
    #[error("checkpoint is missing section {0}")]
    MissingSection(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Dsp(#[from] DspError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScMode {
    Off,
    Sc2,
    Sc3,
}

/// The eight ablation rows, in table order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Baseline,
    Nd,
    Sc2,
    Cp,
    NdSc3,
    NdCp,
    Sc2Cp,
    NdSc3Cp,
}

impl Mode {
    pub const ALL: [Mode; 8] = [
        Mode::Baseline,
        Mode::Nd,
        Mode::Sc2,
        Mode::Cp,
        Mode::NdSc3,
        Mode::NdCp,
        Mode::Sc2Cp,
        Mode::NdSc3Cp,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Baseline => "baseline",
            Mode::Nd => "nd",
            Mode::Sc2 => "sc2",
            Mode::Cp => "cp",
            Mode::NdSc3 => "nd-sc3",
            Mode::NdCp => "nd-cp",
            Mode::Sc2Cp => "sc2-cp",
            Mode::NdSc3Cp => "nd-sc3-cp",
        }
    }

    /// `(nd, sc, cp)`.
    pub fn flags(self) -> (bool, ScMode, bool) {
        match self {
            Mode::Baseline => (false, ScMode::Off, false),
            Mode::Nd => (true, ScMode::Off, false),
            Mode::Sc2 => (false, ScMode::Sc2, false),
            Mode::Cp => (false, ScMode::Off, true),
            Mode::NdSc3 => (true, ScMode::Sc3, false),
            Mode::NdCp => (true, ScMode::Off, true),
            Mode::Sc2Cp => (false, ScMode::Sc2, true),
            Mode::NdSc3Cp => (true, ScMode::Sc3, true),
        }
    }

    pub fn from_flags(nd: bool, sc: ScMode, cp: bool) -> Option<Mode> {
        Self::ALL.into_iter().find(|m| m.flags() == (nd, sc, cp))
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL.into_iter().find(|m| m.as_str() == s).ok_or_else(|| {
            let names: Vec<_> = Self::ALL.iter().map(|m| m.as_str()).collect();
            format!("unknown mode {s:?}; expected one of {}", names.join(", "))
        })
    }
}

/// Full experiment description. Relative paths are resolved against the
/// directory of the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub manifest: PathBuf,
    pub checkpoint_dir: PathBuf,
    #[serde(default)]
    pub nd: bool,
    #[serde(default = "default_sc")]
    pub sc: ScMode,
    #[serde(default)]
    pub cp: bool,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_one")]
    pub disc_steps_per_batch: usize,
    #[serde(default = "default_one")]
    pub eval_every: usize,
    #[serde(default)]
    pub stft: StftParams,
    #[serde(default)]
    pub gen_loss: GenLossConfig,
    #[serde(default)]
    pub optimizer: AdamConfig,
    #[serde(default)]
    pub net: NetConfig,
    #[serde(default)]
    pub ssnr: SsnrParams,
}

fn default_sc() -> ScMode {
    ScMode::Off
}
fn default_epochs() -> usize {
    30
}
fn default_batch() -> usize {
    4
}
fn default_one() -> usize {
    1
}

impl TrainConfig {
    pub fn new(manifest: impl Into<PathBuf>, checkpoint_dir: impl Into<PathBuf>) -> Self {
        Self {
            manifest: manifest.into(),
            checkpoint_dir: checkpoint_dir.into(),
            nd: false,
            sc: ScMode::Off,
            cp: false,
            epochs: default_epochs(),
            batch_size: default_batch(),
            seed: 0,
            disc_steps_per_batch: 1,
            eval_every: 1,
            stft: StftParams::default(),
            gen_loss: GenLossConfig::default(),
            optimizer: AdamConfig::default(),
            net: NetConfig::default(),
            ssnr: SsnrParams::default(),
        }
    }

    /// Parses JSON, reporting the field path of any type error.
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            ConfigError::new(&path, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, TrainError> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.manifest, &mut cfg.checkpoint_dir] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn mode(&self) -> Option<Mode> {
        Mode::from_flags(self.nd, self.sc, self.cp)
    }

    /// Overrides the toggles with an ablation row.
    pub fn apply_mode(&mut self, mode: Mode) {
        let (nd, sc, cp) = mode.flags();
        self.nd = nd;
        self.sc = sc;
        self.cp = cp;
        self.gen_loss.cp_enabled = cp;
    }

    pub fn disc_mode(&self) -> DiscMode {
        match self.sc {
            ScMode::Off => DiscMode::Baseline,
            ScMode::Sc2 => DiscMode::Sc2,
            ScMode::Sc3 => DiscMode::Sc3,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.sc == ScMode::Sc3 && !self.nd {
            return Err(ConfigError::new("sc", "sc3 requires nd = true"));
        }
        if self.sc == ScMode::Sc2 && self.nd {
            return Err(ConfigError::new("sc", "sc2 with nd is not an ablation row; use sc3"));
        }
        if self.gen_loss.cp_enabled != self.cp {
            return Err(ConfigError::new("gen_loss.cp_enabled", "must agree with `cp`"));
        }
        for (name, v) in [
            ("epochs", self.epochs),
            ("batch_size", self.batch_size),
            ("disc_steps_per_batch", self.disc_steps_per_batch),
            ("eval_every", self.eval_every),
        ] {
            if v == 0 {
                return Err(ConfigError::new(name, "must be at least 1"));
            }
        }
        self.stft.validate().map_err(|e| ConfigError::new("stft", e.to_string()))?;
        self.gen_loss
            .validate()
            .map_err(|(field, msg)| ConfigError::new(&format!("gen_loss.{field}"), msg))?;
        self.optimizer.validate().map_err(|m| ConfigError::new("optimizer", m))?;
        self.net.validate().map_err(|m| ConfigError::new("net", m))?;
        self.ssnr.validate().map_err(|e| ConfigError::new("ssnr", e.to_string()))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mode_strings_round_trip() {
        for m in Mode::ALL {
            assert_eq!(m.as_str().parse::<Mode>().unwrap(), m);
            let (nd, sc, cp) = m.flags();
            assert_eq!(Mode::from_flags(nd, sc, cp), Some(m));
        }
        assert!("nd-sc2".parse::<Mode>().is_err());
        assert_eq!(Mode::from_flags(true, ScMode::Sc2, false), None);
    }

    #[test]
    fn scp_row_flags() {
        assert_eq!(Mode::NdSc3Cp.flags(), (true, ScMode::Sc3, true));
        assert_eq!(Mode::Sc2Cp.flags(), (false, ScMode::Sc2, true));
    }

    #[test]
    fn json_minimal_and_errors() {
        let cfg = TrainConfig::from_json(r#"{"manifest":"m.jsonl","checkpoint_dir":"out"}"#).unwrap();
        assert_eq!(cfg.epochs, 30);
        assert_eq!(cfg.mode(), Some(Mode::Baseline));
        let err = TrainConfig::from_json(r#"{"manifest":"m","checkpoint_dir":"o","sc":"sc3"}"#).unwrap_err();
        assert_eq!(err.path, "sc");
        let err = TrainConfig::from_json(r#"{"manifest":"m","checkpoint_dir":"o","optimizer":{"lr":"x"}}"#)
            .unwrap_err();
        assert_eq!(err.path, "optimizer.lr");
        let err = TrainConfig::from_json(r#"{"manifest":"m","checkpoint_dir":"o","bogus":1}"#).unwrap_err();
        assert!(err.msg.contains("bogus"));
        let err = TrainConfig::from_json(r#"{"manifest":"m","checkpoint_dir":"o","cp":true}"#).unwrap_err();
        assert_eq!(err.path, "gen_loss.cp_enabled");
    }

    #[test]
    fn json_round_trip() {
        let mut cfg = TrainConfig::new("a", "b");
        cfg.apply_mode(Mode::NdSc3Cp);
        assert_eq!(TrainConfig::from_json(&cfg.to_json()).unwrap(), cfg);
    }
}
