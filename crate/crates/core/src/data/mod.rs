//! Synthetic corpus, SNR mixing, manifests and WAV I/O.

pub mod cache;
pub mod manifest;
pub mod mix;
pub mod synth;
pub mod wav;

pub use cache::CleanStarCache;
pub use manifest::{build_manifest, Manifest, ManifestEntry, MANIFEST_FILE, TEST_SNRS, TRAIN_SNRS};
pub use mix::{mix_at_snr, Mixture, MIX_PEAK};
pub use synth::{synth_corpus, synth_noise, synth_speech, ClipInfo, CorpusConfig, CorpusInfo, NoiseKind, CLIP_PEAK};
pub use wav::{encode_wav, read_wav, read_wav_from, write_wav, WriteReport};

use crate::dsp::DspError;
use crate::losses::LossError;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

impl std::str::FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split {other:?} (expected train or test)")),
        }
    }
}

#[derive(Debug, Error)]
pub enum DataError {
    #[error("bad WAV header: {0}")]
    BadHeader(String),
    #[error("unsupported WAV format: {0}")]
    UnsupportedFormat(String),
    #[error("WAV data is truncated")]
    Truncated,
    #[error("clean signal has zero power")]
    SilentClean,
    #[error("noise signal has zero power")]
    SilentNoise,
    #[error("SNR must be finite, got {0}")]
    InvalidSnr(f64),
    #[error("sample rate mismatch: {0} vs {1}")]
    SampleRateMismatch(u32, u32),
    #[error("corpus is empty or missing")]
    EmptyCorpus,
    #[error("noise types shared between train and test: {0}")]
    NoiseOverlap(String),
    #[error("path escapes the corpus root: {0}")]
    PathEscape(String),
    #[error("duplicate manifest entry {0}")]
    DuplicateEntry(String),
    #[error("manifest line {line}: {msg}")]
    BadManifest { line: usize, msg: String },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Dsp(#[from] DspError),
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
