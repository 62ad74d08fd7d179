//! Synthetic speech-like clips and noise clips.

use super::wav::write_wav;
use super::{DataError, Split};
use crate::dsp::Waveform;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::path::Path;

/// Peak level of every generated clip.
pub const CLIP_PEAK: f64 = 0.89;

pub const CORPUS_FILE: &str = "corpus.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    White,
    Pink,
    Brown,
    BurstLow,
    BurstMid,
    BurstHigh,
}

impl NoiseKind {
    pub const TRAIN: [NoiseKind; 4] = [NoiseKind::White, NoiseKind::Brown, NoiseKind::BurstLow, NoiseKind::BurstHigh];
    pub const TEST: [NoiseKind; 2] = [NoiseKind::Pink, NoiseKind::BurstMid];

    pub fn for_split(split: Split) -> &'static [NoiseKind] {
        match split {
            Split::Train => &Self::TRAIN,
            Split::Test => &Self::TEST,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            NoiseKind::White => "white",
            NoiseKind::Pink => "pink",
            NoiseKind::Brown => "brown",
            NoiseKind::BurstLow => "burst_low",
            NoiseKind::BurstMid => "burst_mid",
            NoiseKind::BurstHigh => "burst_high",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorpusConfig {
    pub n_clips: usize,
    pub duration_s: f64,
    pub sample_rate: u32,
    pub seed: u64,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            n_clips: 200,
            duration_s: 1.0,
            sample_rate: 16000,
            seed: 0,
        }
    }
}

impl CorpusConfig {
    pub fn n_test(&self) -> usize {
        (self.n_clips / 5).max(1)
    }

    fn n_samples(&self) -> usize {
        (self.duration_s * self.sample_rate as f64).round() as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipInfo {
    pub id: String,
    pub split: Split,
    pub clean_path: String,
    pub noise_path: String,
    pub noise_kind: NoiseKind,
}

/// Contents of `corpus.json` at the corpus root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusInfo {
    pub sample_rate: u32,
    pub seed: u64,
    pub duration_s: f64,
    pub clips: Vec<ClipInfo>,
}

impl CorpusInfo {
    pub fn load(root: &Path) -> Result<Self, DataError> {
        let text = std::fs::read_to_string(root.join(CORPUS_FILE))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Independent stream per (split, clip, purpose).
fn clip_rng(seed: u64, split: Split, idx: usize, purpose: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let split_bit = matches!(split, Split::Test) as u64;
    rng.set_stream((split_bit << 62) | ((idx as u64) << 2) | purpose);
    rng
}

fn normalize_peak(x: &mut [f64], peak: f64) {
    let m = x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if m > 0.0 {
        let k = peak / m;
        x.iter_mut().for_each(|v| *v *= k);
    }
}

/// sin² taper of `ramp` samples at each end of a segment.
fn taper(i: usize, len: usize, ramp: usize) -> f64 {
    let ramp = ramp.min(len / 2).max(1);
    let edge = i.min(len - 1 - i);
    if edge >= ramp {
        1.0
    } else {
        (0.5 * PI * edge as f64 / ramp as f64).sin().powi(2)
    }
}

/// Voiced syllables separated by short pauses: each syllable is a sum of
/// 3–6 harmonics of a drifting pitch under a smooth envelope.
pub fn synth_speech(rng: &mut ChaCha8Rng, n: usize, sample_rate: u32) -> Vec<f64> {
    let sr = sample_rate as f64;
    let mut out = vec![0.0; n];
    let mut pos = (rng.gen_range(0.03..0.12) * sr) as usize;
    let speaker_f0 = rng.gen_range(95.0..230.0);
    while pos < n {
        let len = ((rng.gen_range(0.12..0.32) * sr) as usize).min(n - pos);
        let f_start = speaker_f0 * rng.gen_range(0.85..1.15);
        let f_end = f_start * rng.gen_range(0.8..1.25);
        let vibrato_rate = rng.gen_range(3.0..7.0);
        let vibrato_depth = rng.gen_range(0.0..0.03);
        let harmonics = rng.gen_range(3..=6);
        let amps: Vec<f64> = (1..=harmonics).map(|h| rng.gen_range(0.5..1.0) / h as f64).collect();
        let phases: Vec<f64> = (0..harmonics).map(|_| rng.gen_range(0.0..2.0 * PI)).collect();
        let level = rng.gen_range(0.4..1.0);
        let ramp = (0.02 * sr) as usize;
        let mut phase = 0.0;
        for i in 0..len {
            let t = i as f64 / sr;
            let frac = i as f64 / len.max(1) as f64;
            let f0 = (f_start + (f_end - f_start) * frac) * (1.0 + vibrato_depth * (2.0 * PI * vibrato_rate * t).sin());
            phase += 2.0 * PI * f0 / sr;
            let mut s = 0.0;
            for (h, (a, p)) in amps.iter().zip(&phases).enumerate() {
                if f0 * (h + 1) as f64 >= 0.45 * sr {
                    break;
                }
                s += a * ((h + 1) as f64 * phase + p).sin();
            }
            out[pos + i] += level * taper(i, len, ramp) * s;
        }
        pos += len + (rng.gen_range(0.04..0.15) * sr) as usize;
    }
    normalize_peak(&mut out, CLIP_PEAK);
    out
}

fn white(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

/// Multiplies the spectrum of `x` by `gain(f_hz)`, keeping the signal real.
fn shape_spectrum(x: &[f64], sample_rate: u32, gain: impl Fn(f64) -> f64) -> Vec<f64> {
    let n = x.len();
    let mut planner = FftPlanner::new();
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    planner.plan_fft_forward(n).process(&mut buf);
    for (k, b) in buf.iter_mut().enumerate() {
        let kk = k.min(n - k);
        *b *= gain(kk as f64 * sample_rate as f64 / n as f64);
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    buf.iter().map(|c| c.re / n as f64).collect()
}

fn burst_envelope(rng: &mut ChaCha8Rng, n: usize, sample_rate: u32) -> Vec<f64> {
    let sr = sample_rate as f64;
    let mut env = vec![0.0; n];
    let mut pos = (rng.gen_range(0.0..0.1) * sr) as usize;
    while pos < n {
        let len = ((rng.gen_range(0.05..0.25) * sr) as usize).min(n - pos);
        let level = rng.gen_range(0.5..1.0);
        for i in 0..len {
            env[pos + i] = level * taper(i, len, (0.01 * sr) as usize);
        }
        pos += len + (rng.gen_range(0.03..0.2) * sr) as usize;
    }
    env
}

pub fn synth_noise(kind: NoiseKind, rng: &mut ChaCha8Rng, n: usize, sample_rate: u32) -> Vec<f64> {
    let nyq = 0.5 * sample_rate as f64;
    let base = white(rng, n);
    let mut out = match kind {
        NoiseKind::White => base,
        NoiseKind::Pink => shape_spectrum(&base, sample_rate, |f| if f < 1.0 { 0.0 } else { f.powf(-0.5) }),
        NoiseKind::Brown => shape_spectrum(&base, sample_rate, |f| if f < 20.0 { 0.0 } else { 1.0 / f }),
        NoiseKind::BurstLow | NoiseKind::BurstMid | NoiseKind::BurstHigh => {
            let (lo, hi): (f64, f64) = match kind {
                NoiseKind::BurstLow => (80.0, 800.0),
                NoiseKind::BurstMid => (800.0, 2500.0),
                _ => (2500.0, 7000.0),
            };
            let (lo, hi) = (lo.min(0.9 * nyq), hi.min(0.95 * nyq));
            let band = shape_spectrum(&base, sample_rate, |f| if f >= lo && f <= hi { 1.0 } else { 0.0 });
            let env = burst_envelope(rng, n, sample_rate);
            band.iter().zip(&env).map(|(b, e)| b * e).collect()
        }
    };
    normalize_peak(&mut out, CLIP_PEAK);
    out
}

/// Writes `clean/` and `noise/` WAV sets plus `corpus.json` under `root`.
pub fn synth_corpus(root: &Path, cfg: &CorpusConfig) -> Result<CorpusInfo, DataError> {
    if cfg.n_clips == 0 {
        return Err(DataError::EmptyCorpus);
    }
    if !(cfg.duration_s > 0.0 && cfg.duration_s.is_finite()) {
        return Err(DataError::InvalidConfig(format!("duration_s must be positive, got {}", cfg.duration_s)));
    }
    let n = cfg.n_samples();
    std::fs::create_dir_all(root.join("clean"))?;
    std::fs::create_dir_all(root.join("noise"))?;
    let mut clips = Vec::new();
    for (split, count) in [(Split::Train, cfg.n_clips), (Split::Test, cfg.n_test())] {
        let kinds = NoiseKind::for_split(split);
        for idx in 0..count {
            let id = format!("{}_{idx:04}", split.as_str());
            let kind = kinds[idx % kinds.len()];
            let clean = synth_speech(&mut clip_rng(cfg.seed, split, idx, 0), n, cfg.sample_rate);
            let noise = synth_noise(kind, &mut clip_rng(cfg.seed, split, idx, 1), n, cfg.sample_rate);
            let clean_path = format!("clean/{id}.wav");
            let noise_path = format!("noise/{id}_{}.wav", kind.as_str());
            write_wav(&root.join(&clean_path), &Waveform::new(clean, cfg.sample_rate)?)?;
            write_wav(&root.join(&noise_path), &Waveform::new(noise, cfg.sample_rate)?)?;
            clips.push(ClipInfo {
                id,
                split,
                clean_path,
                noise_path,
                noise_kind: kind,
            });
        }
    }
    let info = CorpusInfo {
        sample_rate: cfg.sample_rate,
        seed: cfg.seed,
        duration_s: cfg.duration_s,
        clips,
    };
    std::fs::write(root.join(CORPUS_FILE), serde_json::to_string_pretty(&info)? + "\n")?;
    Ok(info)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn speech_peak_and_silences() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = synth_speech(&mut rng, 16000, 16000);
        let peak = x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        assert!((peak - CLIP_PEAK).abs() < 1e-12);
        assert_eq!(x[0], 0.0);
    }

    #[test]
    fn noise_kinds_are_finite_and_normalised() {
        for kind in NoiseKind::TRAIN.iter().chain(&NoiseKind::TEST) {
            let mut rng = ChaCha8Rng::seed_from_u64(2);
            let x = synth_noise(*kind, &mut rng, 8000, 16000);
            assert!(x.iter().all(|v| v.is_finite()));
            let peak = x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            assert!((peak - CLIP_PEAK).abs() < 1e-12, "{kind:?}");
        }
    }

    #[test]
    fn split_kinds_are_disjoint() {
        for k in NoiseKind::TRAIN {
            assert!(!NoiseKind::TEST.contains(&k));
        }
    }

    #[test]
    fn streams_differ_by_clip() {
        let a = synth_speech(&mut clip_rng(0, Split::Train, 0, 0), 4000, 16000);
        let b = synth_speech(&mut clip_rng(0, Split::Train, 1, 0), 4000, 16000);
        let c = synth_speech(&mut clip_rng(0, Split::Test, 0, 0), 4000, 16000);
        assert_ne!(a, b);
        assert_ne!(a, c);
    }
}
