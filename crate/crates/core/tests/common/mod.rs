#![allow(dead_code)]

use scpgan::autonn::NetConfig;
use scpgan::data::{build_manifest, synth_corpus, CorpusConfig, Manifest, Split, TEST_SNRS, TRAIN_SNRS};
use scpgan::dsp::StftPlan;
use scpgan::trainer::{load_examples, Example, Mode, TrainConfig};
use std::path::Path;
use std::sync::Arc;

/// Writes a small corpus and its manifest under `root`.
pub fn tiny_corpus(root: &Path, clips: usize, seconds: f64, seed: u64) -> Manifest {
    let cfg = CorpusConfig {
        n_clips: clips,
        duration_s: seconds,
        sample_rate: 16000,
        seed,
    };
    synth_corpus(root, &cfg).expect("corpus");
    build_manifest(root, &TRAIN_SNRS, &TEST_SNRS, seed).expect("manifest")
}

pub fn small_net() -> NetConfig {
    NetConfig {
        gen_channels: 4,
        disc_channels: 4,
        kernel: 3,
        ..NetConfig::default()
    }
}

pub fn tiny_config(manifest: &Path, out: &Path, mode: Mode, epochs: usize) -> TrainConfig {
    let mut cfg = TrainConfig::new(manifest, out);
    cfg.apply_mode(mode);
    cfg.epochs = epochs;
    cfg.net = small_net();
    cfg
}

pub fn splits(manifest: &Manifest, cfg: &TrainConfig) -> (Arc<StftPlan>, Vec<Example>, Vec<Example>) {
    let plan = Arc::new(StftPlan::new(cfg.stft).unwrap());
    let c = cfg.gen_loss.mag_compression;
    let train = load_examples(manifest, Split::Train, &plan, c, &cfg.ssnr).unwrap();
    let test = load_examples(manifest, Split::Test, &plan, c, &cfg.ssnr).unwrap();
    (plan, train, test)
}

pub fn sha256_file(path: &Path) -> String {
    use sha2::{Digest, Sha256};
    hex::encode(Sha256::digest(std::fs::read(path).unwrap()))
}

/// Hash of every file below `root`, keyed by relative path, in sorted order.
pub fn tree_digest(root: &Path) -> Vec<(String, String)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in std::fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.push((rel, sha256_file(&p)));
            }
        }
    }
    out.sort();
    out
}
