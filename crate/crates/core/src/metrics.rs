//! Segmental SNR and the normalised quality score `q_ssnr` that the
//! discriminator learns to predict.

use crate::dsp::Waveform;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("length mismatch: enhanced {enhanced} vs clean {clean} samples")]
    LengthMismatch { enhanced: usize, clean: usize },
    #[error("sample rate mismatch: {0} Hz vs {1} Hz")]
    SampleRateMismatch(u32, u32),
    #[error("no frame of the reference passes the silence gate")]
    AllSilent,
    #[error("invalid SSNR parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SsnrParams {
    pub frame_len: usize,
    pub clamp_lo: f64,
    pub clamp_hi: f64,
    /// Frames whose reference energy is more than this many dB below the
    /// loudest reference frame are skipped.
    pub silence_floor: f64,
}

impl Default for SsnrParams {
    fn default() -> Self {
        Self {
            frame_len: 512,
            clamp_lo: -10.0,
            clamp_hi: 35.0,
            silence_floor: 40.0,
        }
    }
}

impl SsnrParams {
    pub fn validate(&self) -> Result<(), MetricsError> {
        if !(self.clamp_lo < self.clamp_hi) {
            return Err(MetricsError::InvalidParams(format!(
                "clamp_lo {} must be below clamp_hi {}",
                self.clamp_lo, self.clamp_hi
            )));
        }
        if self.frame_len < 64 {
            return Err(MetricsError::InvalidParams(format!(
                "frame_len {} < 64",
                self.frame_len
            )));
        }
        Ok(())
    }
}

fn check_pair(a: &Waveform, b: &Waveform) -> Result<(), MetricsError> {
    if a.len() != b.len() {
        return Err(MetricsError::LengthMismatch {
            enhanced: a.len(),
            clean: b.len(),
        });
    }
    if a.sample_rate() != b.sample_rate() {
        return Err(MetricsError::SampleRateMismatch(a.sample_rate(), b.sample_rate()));
    }
    Ok(())
}

/// Segmental SNR in dB over non-overlapping frames.
///
/// Only complete frames are scored; a signal shorter than one frame is
/// scored as a single frame.
pub fn ssnr(enhanced: &Waveform, clean: &Waveform, p: &SsnrParams) -> Result<f64, MetricsError> {
    check_pair(enhanced, clean)?;
    p.validate()?;
    ssnr_slices(enhanced.samples(), clean.samples(), p)
}

pub(crate) fn ssnr_slices(enh: &[f64], clean: &[f64], p: &SsnrParams) -> Result<f64, MetricsError> {
    let frame = p.frame_len.min(clean.len());
    let frames: Vec<(f64, f64)> = clean
        .chunks_exact(frame)
        .zip(enh.chunks_exact(frame))
        .map(|(c, e)| {
            let signal: f64 = c.iter().map(|x| x * x).sum();
            let error: f64 = c.iter().zip(e).map(|(x, y)| (x - y) * (x - y)).sum();
            (signal, error)
        })
        .collect();
    let peak = frames.iter().fold(0.0f64, |m, f| m.max(f.0));
    if peak <= 0.0 {
        return Err(MetricsError::AllSilent);
    }
    let gate = peak * 10f64.powf(-p.silence_floor / 10.0);
    let scores: Vec<f64> = frames
        .iter()
        .filter(|(signal, _)| *signal > 0.0 && *signal >= gate)
        .map(|&(signal, error)| {
            let db = if error == 0.0 {
                p.clamp_hi
            } else {
                10.0 * (signal / error).log10()
            };
            db.clamp(p.clamp_lo, p.clamp_hi)
        })
        .collect();
    if scores.is_empty() {
        return Err(MetricsError::AllSilent);
    }
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

/// The only surrogate metric shipped; reported as `q_ssnr`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QMetric {
    #[default]
    NormalizedSsnr,
}

impl QMetric {
    pub const fn range(self) -> (f64, f64) {
        (0.0, 1.0)
    }

    pub fn score(self, a: &Waveform, reference: &Waveform, p: &SsnrParams) -> Result<f64, MetricsError> {
        match self {
            QMetric::NormalizedSsnr => q_score(a, reference, p),
        }
    }
}

/// SSNR mapped linearly from `[clamp_lo, clamp_hi]` onto `[0, 1]`.
pub fn q_score(a: &Waveform, reference: &Waveform, p: &SsnrParams) -> Result<f64, MetricsError> {
    let db = ssnr(a, reference, p)?;
    Ok(ssnr_to_q(db, p))
}

pub fn ssnr_to_q(db: f64, p: &SsnrParams) -> f64 {
    ((db - p.clamp_lo) / (p.clamp_hi - p.clamp_lo)).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn wave(x: Vec<f64>) -> Waveform {
        Waveform::new(x, 16000).unwrap()
    }

    fn tone(len: usize) -> Vec<f64> {
        (0..len).map(|n| 0.5 * (n as f64 * 0.05).sin()).collect()
    }

    #[test]
    fn identical_signals_clamp_high() {
        let y = wave(tone(4096));
        let p = SsnrParams::default();
        assert_eq!(ssnr(&y, &y, &p).unwrap(), 35.0);
        assert_eq!(q_score(&y, &y, &p).unwrap(), 1.0);
    }

    #[test]
    fn equal_energy_noise_per_frame_is_zero_db() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let clean = tone(512 * 8);
        let mut enh = clean.clone();
        for (c, e) in clean.chunks(512).zip(enh.chunks_mut(512)) {
            let noise: Vec<f64> = (0..512).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let ce: f64 = c.iter().map(|x| x * x).sum();
            let ne: f64 = noise.iter().map(|x| x * x).sum();
            let g = (ce / ne).sqrt();
            for (ei, ni) in e.iter_mut().zip(&noise) {
                *ei += g * ni;
            }
        }
        let db = ssnr(&wave(enh), &wave(clean), &SsnrParams::default()).unwrap();
        assert!(db.abs() < 0.1, "{db}");
    }

    #[test]
    fn negated_signal_gives_minus_six_db() {
        let clean = tone(4096);
        let neg: Vec<f64> = clean.iter().map(|x| -x).collect();
        let db = ssnr(&wave(neg), &wave(clean), &SsnrParams::default()).unwrap();
        let oracle = 10.0 * (1.0f64 / 4.0).log10();
        assert!((db - oracle).abs() < 0.1);
        assert!((db + 6.02).abs() < 0.1);
    }

    #[test]
    fn silent_output_scores_zero_db() {
        let clean = tone(4096);
        let db = ssnr(&wave(vec![0.0; 4096]), &wave(clean), &SsnrParams::default()).unwrap();
        assert!(db.abs() < 1e-12);
    }

    #[test]
    fn q_is_linear_in_ssnr() {
        let p = SsnrParams::default();
        assert!((ssnr_to_q(12.5, &p) - 0.5).abs() < 1e-15);
        assert_eq!(ssnr_to_q(-30.0, &p), 0.0);
    }

    #[test]
    fn errors() {
        let p = SsnrParams::default();
        assert!(matches!(
            ssnr(&wave(vec![0.0; 10]), &wave(vec![0.0; 11]), &p),
            Err(MetricsError::LengthMismatch { .. })
        ));
        assert_eq!(
            ssnr(&wave(vec![0.1; 1024]), &wave(vec![0.0; 1024]), &p),
            Err(MetricsError::AllSilent)
        );
        let bad = SsnrParams {
            clamp_lo: 5.0,
            clamp_hi: 5.0,
            ..p
        };
        assert!(ssnr(&wave(tone(1024)), &wave(tone(1024)), &bad).is_err());
    }

    #[test]
    fn silence_gate_skips_quiet_frames() {
        let mut clean = tone(2048);
        for x in &mut clean[1024..] {
            *x *= 1e-4;
        }
        let mut enh = clean.clone();
        for x in &mut enh[1024..] {
            *x += 0.3;
        }
        // Quiet frames are 80 dB down and ignored, leaving perfect frames.
        assert_eq!(ssnr(&wave(enh), &wave(clean), &SsnrParams::default()).unwrap(), 35.0);
    }

    #[test]
    fn not_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a: Vec<f64> = (0..2048).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let b: Vec<f64> = a.iter().map(|x| 0.3 * x + rng.gen_range(-0.1..0.1)).collect();
        let p = SsnrParams::default();
        let ab = ssnr(&wave(a.clone()), &wave(b.clone()), &p).unwrap();
        let ba = ssnr(&wave(b), &wave(a), &p).unwrap();
        assert!((ab - ba).abs() > 1e-3);
    }
}
