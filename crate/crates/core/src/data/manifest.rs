//! JSON-lines mixture manifest.

use super::mix::mix_at_snr;
use super::synth::CorpusInfo;
use super::wav::{read_wav, write_wav};
use super::{DataError, Split};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::path::{Component, Path, PathBuf};

pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const TRAIN_SNRS: [f64; 4] = [0.0, 5.0, 10.0, 15.0];
pub const TEST_SNRS: [f64; 4] = [2.5, 7.5, 12.5, 17.5];

/// One mixture. Paths are relative to the corpus root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub clean_path: String,
    pub noise_path: String,
    pub mix_path: String,
    pub snr_db: f64,
    pub split: Split,
    pub seed: u64,
}

fn stem(p: &str) -> String {
    Path::new(p).file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

impl ManifestEntry {
    pub fn clean_id(&self) -> String {
        stem(&self.clean_path)
    }

    pub fn noise_id(&self) -> String {
        stem(&self.noise_path)
    }

    /// Mixture id, unique within a manifest.
    pub fn id(&self) -> String {
        stem(&self.mix_path)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub root: PathBuf,
    pub entries: Vec<ManifestEntry>,
    pub sample_rate: u32,
    pub seed: u64,
}

fn check_relative(p: &str) -> Result<(), DataError> {
    let path = Path::new(p);
    let ok = !p.is_empty() && path.components().all(|c| matches!(c, Component::Normal(_) | Component::CurDir));
    if ok {
        Ok(())
    } else {
        Err(DataError::PathEscape(p.to_string()))
    }
}

impl Manifest {
    pub fn validate(&self) -> Result<(), DataError> {
        let mut seen = HashSet::new();
        for e in &self.entries {
            for p in [&e.clean_path, &e.noise_path, &e.mix_path] {
                check_relative(p)?;
            }
            if !e.snr_db.is_finite() {
                return Err(DataError::InvalidSnr(e.snr_db));
            }
            if !seen.insert((e.clean_id(), e.noise_id(), e.snr_db.to_bits())) {
                return Err(DataError::DuplicateEntry(e.id()));
            }
        }
        Ok(())
    }

    pub fn resolve(&self, rel: &str) -> Result<PathBuf, DataError> {
        check_relative(rel)?;
        Ok(self.root.join(rel))
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(move |e| e.split == split)
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&serde_json::to_string(e).expect("entry serializes"));
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<(), DataError> {
        std::fs::write(path, self.to_jsonl())?;
        Ok(())
    }

    /// Reads a manifest; its directory is taken as the corpus root.
    pub fn load(path: &Path) -> Result<Self, DataError> {
        let text = std::fs::read_to_string(path)?;
        let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let e: ManifestEntry = serde_json::from_str(line).map_err(|err| DataError::BadManifest {
                line: i + 1,
                msg: err.to_string(),
            })?;
            entries.push(e);
        }
        let first = entries.first().ok_or(DataError::EmptyCorpus)?;
        let seed = first.seed;
        let sample_rate = match CorpusInfo::load(&root) {
            Ok(info) => info.sample_rate,
            Err(_) => read_wav(&root.join(&first.clean_path))?.sample_rate(),
        };
        let m = Self {
            root,
            entries,
            sample_rate,
            seed,
        };
        m.validate()?;
        Ok(m)
    }
}

/// Pairs every clean clip with a noise clip of its own split, assigns SNRs
/// in balanced rotation, writes the mixtures under `mix/` and the manifest
/// as `manifest.jsonl`.
pub fn build_manifest(
    corpus_root: &Path,
    snrs_train: &[f64],
    snrs_test: &[f64],
    seed: u64,
) -> Result<Manifest, DataError> {
    let info = CorpusInfo::load(corpus_root).map_err(|e| match e {
        DataError::Io(io) if io.kind() == std::io::ErrorKind::NotFound => DataError::EmptyCorpus,
        other => other,
    })?;
    if info.clips.is_empty() {
        return Err(DataError::EmptyCorpus);
    }
    let kinds = |split: Split| -> HashSet<_> {
        info.clips.iter().filter(|c| c.split == split).map(|c| c.noise_kind).collect()
    };
    let overlap: Vec<_> = kinds(Split::Train).intersection(&kinds(Split::Test)).map(|k| k.as_str()).collect();
    if !overlap.is_empty() {
        return Err(DataError::NoiseOverlap(overlap.join(",")));
    }
    std::fs::create_dir_all(corpus_root.join("mix"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut entries = Vec::new();
    for (split, snrs) in [(Split::Train, snrs_train), (Split::Test, snrs_test)] {
        let clips: Vec<_> = info.clips.iter().filter(|c| c.split == split).collect();
        if clips.is_empty() {
            continue;
        }
        if snrs.is_empty() {
            return Err(DataError::InvalidConfig(format!("no SNRs given for the {} split", split.as_str())));
        }
        if let Some(bad) = snrs.iter().find(|s| !s.is_finite()) {
            return Err(DataError::InvalidSnr(*bad));
        }
        let mut noise_order: Vec<usize> = (0..clips.len()).collect();
        noise_order.shuffle(&mut rng);
        let mut snr_order: Vec<f64> = (0..clips.len()).map(|i| snrs[i % snrs.len()]).collect();
        snr_order.shuffle(&mut rng);
        for (i, clip) in clips.iter().enumerate() {
            let noise_clip = clips[noise_order[i]];
            let snr = snr_order[i];
            let clean = read_wav(&corpus_root.join(&clip.clean_path))?;
            let noise = read_wav(&corpus_root.join(&noise_clip.noise_path))?;
            let m = mix_at_snr(&clean, &noise, snr)?;
            let mix_path = format!("mix/{}_{}db.wav", clip.id, format_snr(snr));
            write_wav(&corpus_root.join(&mix_path), &m.mix)?;
            entries.push(ManifestEntry {
                clean_path: clip.clean_path.clone(),
                noise_path: noise_clip.noise_path.clone(),
                mix_path,
                snr_db: snr,
                split,
                seed,
            });
        }
    }
    let manifest = Manifest {
        root: corpus_root.to_path_buf(),
        entries,
        sample_rate: info.sample_rate,
        seed,
    };
    manifest.validate()?;
    manifest.write(&corpus_root.join(MANIFEST_FILE))?;
    Ok(manifest)
}

fn format_snr(snr: f64) -> String {
    let s = format!("{snr}");
    s.replace('-', "m").replace('.', "p")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(clean: &str, noise: &str, snr: f64) -> ManifestEntry {
        ManifestEntry {
            clean_path: clean.into(),
            noise_path: noise.into(),
            mix_path: format!("mix/{}.wav", stem(clean)),
            snr_db: snr,
            split: Split::Train,
            seed: 0,
        }
    }

    fn manifest(entries: Vec<ManifestEntry>) -> Manifest {
        Manifest {
            root: PathBuf::from("/tmp"),
            entries,
            sample_rate: 16000,
            seed: 0,
        }
    }

    #[test]
    fn rejects_escaping_paths() {
        assert!(manifest(vec![entry("clean/a.wav", "noise/b.wav", 0.0)]).validate().is_ok());
        for bad in ["../a.wav", "/etc/a.wav", "clean/../../a.wav"] {
            let err = manifest(vec![entry(bad, "noise/b.wav", 0.0)]).validate().unwrap_err();
            assert!(matches!(err, DataError::PathEscape(_)), "{bad}");
        }
    }

    #[test]
    fn rejects_duplicates() {
        let mut e2 = entry("clean/a.wav", "noise/b.wav", 5.0);
        e2.mix_path = "mix/other.wav".into();
        let m = manifest(vec![entry("clean/a.wav", "noise/b.wav", 5.0), e2]);
        assert!(matches!(m.validate(), Err(DataError::DuplicateEntry(_))));
    }

    #[test]
    fn jsonl_fields() {
        let line = manifest(vec![entry("clean/a.wav", "noise/b.wav", 2.5)]).to_jsonl();
        let v: serde_json::Value = serde_json::from_str(line.trim()).unwrap();
        let mut keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        keys.sort();
        assert_eq!(keys, ["clean_path", "mix_path", "noise_path", "seed", "snr_db", "split"]);
        assert_eq!(v["split"], "train");
    }

    #[test]
    fn snr_names() {
        assert_eq!(format_snr(2.5), "2p5");
        assert_eq!(format_snr(-5.0), "m5");
        assert_eq!(format_snr(10.0), "10");
    }
}
