//! On-disk cache of Clean* references, keyed by STFT parameters.

use super::manifest::ManifestEntry;
use super::DataError;
use crate::dsp::{self, StftPlan};
use crate::losses::CleanStar;
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone)]
pub struct CleanStarCache {
    dir: PathBuf,
}

impl CleanStarCache {
    /// Entries live under `base/<stft-param digest>/`, so a change of STFT
    /// parameters never reads stale data.
    pub fn new(base: &Path, plan: &StftPlan) -> Self {
        Self {
            dir: base.join(plan.params().digest()),
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn file_for(&self, entry: &ManifestEntry) -> PathBuf {
        let mut h = Sha256::new();
        for part in [&entry.clean_path, &entry.noise_path, &entry.mix_path] {
            h.update(part.as_bytes());
            h.update([0]);
        }
        h.update(entry.snr_db.to_le_bytes());
        self.dir.join(format!("{}.f64", hex::encode(&h.finalize()[..12])))
    }

    /// Cached Clean* for `entry`, computed from `clean` on a miss.
    pub fn get_or_compute(
        &self,
        plan: &StftPlan,
        entry: &ManifestEntry,
        clean: &[f64],
    ) -> Result<CleanStar, DataError> {
        let path = self.file_for(entry);
        if let Ok(bytes) = std::fs::read(&path) {
            if bytes.len() == clean.len() * 8 {
                let wave: Vec<f64> = bytes
                    .chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                    .collect();
                let spec = dsp::stft_with(plan, &wave)?;
                return Ok(CleanStar { wave, spec });
            }
            log::debug!("cache entry {} has the wrong length; recomputing", path.display());
        }
        let star = CleanStar::compute(plan, clean)?;
        std::fs::create_dir_all(&self.dir)?;
        let bytes: Vec<u8> = star.wave.iter().flat_map(|v| v.to_le_bytes()).collect();
        std::fs::write(&path, bytes)?;
        Ok(star)
    }
}
