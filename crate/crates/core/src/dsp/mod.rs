//! Windowed STFT / iSTFT and the consistency projection.
//!
//! All transforms are one-sided (`fft_size / 2 + 1` bins) and run in double
//! precision. [`StftPlan`] exposes the real-valued forward maps together with
//! their adjoints so that the autodiff engine can differentiate through
//! `istft -> stft` without a second implementation.

mod window;

pub use rustfft::num_complex::Complex64;
pub use window::{periodic_hann, Window};

use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

/// Sample rates accepted by [`Waveform::new`].
pub const SUPPORTED_SAMPLE_RATES: [u32; 3] = [8000, 16000, 48000];
pub const DEFAULT_SAMPLE_RATE: u32 = 16000;

/// Maximum COLA deviation tolerated by [`StftParams::new`].
pub const COLA_TOLERANCE: f64 = 1e-10;

// Envelope values below this are treated as uncovered samples.
const ENVELOPE_FLOOR: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DspError {
    #[error("waveform has {len} samples but at least {need} are required")]
    TooShort { len: usize, need: usize },
    #[error("spectrogram was computed with different STFT parameters")]
    ParamMismatch,
    #[error("invalid STFT parameters: {0}")]
    InvalidParams(String),
    #[error("window pair is not COLA for this hop (deviation {deviation:.3e})")]
    NotCola { deviation: f64 },
    #[error("invalid waveform: {0}")]
    InvalidWaveform(String),
    #[error("shape mismatch: expected {expected} values, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
}

/// Mono audio signal.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self, DspError> {
        if samples.is_empty() {
            return Err(DspError::InvalidWaveform("empty waveform".into()));
        }
        if !SUPPORTED_SAMPLE_RATES.contains(&sample_rate) {
            return Err(DspError::InvalidWaveform(format!(
                "unsupported sample rate {sample_rate}"
            )));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(DspError::InvalidWaveform(format!("non-finite sample at {i}")));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|s| s * s).sum()
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, s| m.max(s.abs()))
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StftParams {
    pub fft_size: usize,
    pub hop: usize,
    pub window: Window,
    pub center_pad: bool,
}

impl Default for StftParams {
    fn default() -> Self {
        Self {
            fft_size: 512,
            hop: 256,
            window: Window::SqrtHann,
            center_pad: true,
        }
    }
}

impl StftParams {
    pub fn new(
        fft_size: usize,
        hop: usize,
        window: Window,
        center_pad: bool,
    ) -> Result<Self, DspError> {
        let params = Self {
            fft_size,
            hop,
            window,
            center_pad,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), DspError> {
        if self.fft_size < 4 || self.fft_size % 2 != 0 {
            return Err(DspError::InvalidParams(format!(
                "fft_size must be even and >= 4, got {}",
                self.fft_size
            )));
        }
        if self.hop == 0 || self.fft_size % self.hop != 0 {
            return Err(DspError::InvalidParams(format!(
                "hop {} must divide fft_size {}",
                self.hop, self.fft_size
            )));
        }
        if self.hop > self.fft_size / 2 {
            return Err(DspError::InvalidParams(format!(
                "hop {} exceeds fft_size / 2",
                self.hop
            )));
        }
        let deviation = check_cola(self);
        if deviation >= COLA_TOLERANCE {
            return Err(DspError::NotCola { deviation });
        }
        Ok(())
    }

    pub fn n_bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    fn pad(&self) -> usize {
        if self.center_pad {
            self.fft_size / 2
        } else {
            0
        }
    }

    /// Number of frames produced for a signal of `len` samples, or `None`
    /// when the signal is too short for an uncentred transform.
    pub fn n_frames(&self, len: usize) -> Option<usize> {
        let padded = len + 2 * self.pad();
        if padded < self.fft_size {
            return None;
        }
        Some(1 + (padded - self.fft_size) / self.hop)
    }

    /// Stable hex digest used as a cache key for derived artefacts.
    pub fn digest(&self) -> String {
        use sha2::{Digest, Sha256};
        let canonical = format!(
            "fft={};hop={};window={:?};center={}",
            self.fft_size, self.hop, self.window, self.center_pad
        );
        hex::encode(&Sha256::digest(canonical.as_bytes())[..8])
    }
}

/// Configurations the property suites hold to the COLA bound.
pub fn shipped_configs() -> Vec<StftParams> {
    [
        (512, 256, Window::SqrtHann),
        (1024, 512, Window::SqrtHann),
        (512, 128, Window::SqrtHann),
        (512, 256, Window::Hann),
        (16, 8, Window::SqrtHann),
    ]
    .into_iter()
    .map(|(fft_size, hop, window)| StftParams {
        fft_size,
        hop,
        window,
        center_pad: true,
    })
    .collect()
}

/// Max deviation of the normalised overlap-add of `analysis × synthesis`
/// from 1 over the steady-state region.
///
/// The synthesis window is gain-normalised for the hop, so the COLA
/// constant itself does not count as a deviation; only its ripple does.
pub fn check_cola(params: &StftParams) -> f64 {
    let n = params.fft_size;
    if params.hop == 0 || n == 0 {
        return f64::INFINITY;
    }
    let product: Vec<f64> = params
        .window
        .analysis(n)
        .iter()
        .zip(params.window.synthesis(n))
        .map(|(a, s)| a * s)
        .collect();
    let profile = window::overlap_add_profile(&product, params.hop);
    let gain = profile.iter().sum::<f64>() / profile.len() as f64;
    if gain <= 0.0 {
        return f64::INFINITY;
    }
    profile
        .iter()
        .map(|e| (e / gain - 1.0).abs())
        .fold(0.0, f64::max)
}

/// One-sided complex spectrogram, stored frame-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    bins: Vec<Complex64>,
    frames: usize,
    params: StftParams,
    origin_length: usize,
}

impl Spectrogram {
    pub fn from_bins(
        bins: Vec<Complex64>,
        params: StftParams,
        origin_length: usize,
    ) -> Result<Self, DspError> {
        let frames = params
            .n_frames(origin_length)
            .ok_or(DspError::TooShort {
                len: origin_length,
                need: params.fft_size,
            })?;
        let expected = frames * params.n_bins();
        if bins.len() != expected {
            return Err(DspError::ShapeMismatch {
                expected,
                got: bins.len(),
            });
        }
        Ok(Self {
            bins,
            frames,
            params,
            origin_length,
        })
    }

    pub fn zeros(params: StftParams, origin_length: usize) -> Result<Self, DspError> {
        let frames = params.n_frames(origin_length).ok_or(DspError::TooShort {
            len: origin_length,
            need: params.fft_size,
        })?;
        Self::from_bins(
            vec![Complex64::new(0.0, 0.0); frames * params.n_bins()],
            params,
            origin_length,
        )
    }

    pub fn bins(&self) -> &[Complex64] {
        &self.bins
    }

    pub fn bins_mut(&mut self) -> &mut [Complex64] {
        &mut self.bins
    }

    pub fn n_frames(&self) -> usize {
        self.frames
    }

    pub fn n_bins(&self) -> usize {
        self.params.n_bins()
    }

    pub fn params(&self) -> &StftParams {
        &self.params
    }

    pub fn origin_length(&self) -> usize {
        self.origin_length
    }

    pub fn get(&self, frame: usize, bin: usize) -> Complex64 {
        self.bins[frame * self.n_bins() + bin]
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        self.bins.iter().map(|c| c.norm()).collect()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.bins.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Frobenius norm of `self - other`; shapes must agree.
    pub fn distance(&self, other: &Spectrogram) -> Result<f64, DspError> {
        if self.bins.len() != other.bins.len() {
            return Err(DspError::ShapeMismatch {
                expected: self.bins.len(),
                got: other.bins.len(),
            });
        }
        Ok(self
            .bins
            .iter()
            .zip(&other.bins)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt())
    }

    /// `a * self + b * other`, keeping `self`'s metadata.
    pub fn linear_combination(&self, a: f64, other: &Spectrogram, b: f64) -> Result<Self, DspError> {
        if self.bins.len() != other.bins.len() || self.params != other.params {
            return Err(DspError::ParamMismatch);
        }
        let bins = self
            .bins
            .iter()
            .zip(&other.bins)
            .map(|(x, y)| x * a + y * b)
            .collect();
        Ok(Self { bins, ..*self })
    }

    /// Splits into separate real and imaginary planes.
    pub fn to_planes(&self) -> (Vec<f64>, Vec<f64>) {
        (
            self.bins.iter().map(|c| c.re).collect(),
            self.bins.iter().map(|c| c.im).collect(),
        )
    }
}

/// Precomputed windows and FFT plans for one [`StftParams`].
///
/// The four real-valued maps (`analyze`, `synthesize` and their adjoints)
/// operate on interleaved-free planes: spectra are `frames × n_bins`
/// complex values, signals are plain sample slices.
pub struct StftPlan {
    params: StftParams,
    analysis: Vec<f64>,
    synthesis: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for StftPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StftPlan").field("params", &self.params).finish()
    }
}

impl StftPlan {
    pub fn new(params: StftParams) -> Result<Self, DspError> {
        params.validate()?;
        let n = params.fft_size;
        let analysis = params.window.analysis(n);
        let raw_synthesis = params.window.synthesis(n);
        let overlap: f64 = analysis.iter().zip(&raw_synthesis).map(|(a, s)| a * s).sum();
        let gain = params.hop as f64 / overlap;
        let synthesis = raw_synthesis.iter().map(|s| s * gain).collect();
        let mut planner = FftPlanner::new();
        Ok(Self {
            params,
            analysis,
            synthesis,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        })
    }

    pub fn params(&self) -> &StftParams {
        &self.params
    }

    pub fn n_frames(&self, len: usize) -> Result<usize, DspError> {
        self.params.n_frames(len).ok_or(DspError::TooShort {
            len,
            need: self.params.fft_size,
        })
    }

    /// Source sample for every position of the padded signal.
    fn pad_map(&self, len: usize) -> Vec<usize> {
        let pad = self.params.pad() as isize;
        let n = len as isize;
        (0..len as isize + 2 * pad)
            .map(|j| reflect_index(j - pad, n))
            .collect()
    }

    /// Overlap-add envelope of `analysis × synthesis` over the padded signal.
    fn envelope(&self, frames: usize) -> Vec<f64> {
        let n = self.params.fft_size;
        let hop = self.params.hop;
        let mut env = vec![0.0; (frames - 1) * hop + n];
        for t in 0..frames {
            for i in 0..n {
                env[t * hop + i] += self.analysis[i] * self.synthesis[i];
            }
        }
        env
    }

    /// Forward STFT of a real signal.
    pub fn analyze(&self, signal: &[f64]) -> Result<Vec<Complex64>, DspError> {
        let frames = self.n_frames(signal.len())?;
        let n = self.params.fft_size;
        let bins = self.params.n_bins();
        let hop = self.params.hop;
        let map = self.pad_map(signal.len());
        let mut out = Vec::with_capacity(frames * bins);
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for t in 0..frames {
            for (i, b) in buf.iter_mut().enumerate() {
                *b = Complex64::new(signal[map[t * hop + i]] * self.analysis[i], 0.0);
            }
            self.forward.process(&mut buf);
            out.extend_from_slice(&buf[..bins]);
        }
        Ok(out)
    }

    /// Adjoint of [`analyze`](Self::analyze) with respect to the real inner
    /// product on (re, im) pairs.
    pub fn analyze_adjoint(&self, grad: &[Complex64], len: usize) -> Result<Vec<f64>, DspError> {
        let frames = self.n_frames(len)?;
        let n = self.params.fft_size;
        let bins = self.params.n_bins();
        let hop = self.params.hop;
        check_len(grad.len(), frames * bins)?;
        let map = self.pad_map(len);
        let mut out = vec![0.0; len];
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for t in 0..frames {
            buf.fill(Complex64::new(0.0, 0.0));
            buf[..bins].copy_from_slice(&grad[t * bins..(t + 1) * bins]);
            self.inverse.process(&mut buf);
            for i in 0..n {
                out[map[t * hop + i]] += self.analysis[i] * buf[i].re;
            }
        }
        Ok(out)
    }

    /// Inverse STFT by windowed overlap-add, normalised by the actual window
    /// envelope and trimmed to `out_length` samples. DC and Nyquist imaginary
    /// parts are ignored.
    pub fn synthesize(
        &self,
        spec: &[Complex64],
        frames: usize,
        out_length: usize,
    ) -> Result<Vec<f64>, DspError> {
        let n = self.params.fft_size;
        let bins = self.params.n_bins();
        let hop = self.params.hop;
        check_len(spec.len(), frames * bins)?;
        if frames == 0 {
            return Err(DspError::InvalidParams("spectrogram has no frames".into()));
        }
        let env = self.envelope(frames);
        let mut acc = vec![0.0; env.len()];
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        let scale = 1.0 / n as f64;
        for t in 0..frames {
            let frame = &spec[t * bins..(t + 1) * bins];
            fill_hermitian(frame, &mut buf);
            self.inverse.process(&mut buf);
            for i in 0..n {
                acc[t * hop + i] += self.synthesis[i] * buf[i].re * scale;
            }
        }
        let pad = self.params.pad();
        Ok((0..out_length)
            .map(|i| match (acc.get(i + pad), env.get(i + pad)) {
                (Some(a), Some(&e)) if e > ENVELOPE_FLOOR => a / e,
                _ => 0.0,
            })
            .collect())
    }

    /// Adjoint of [`synthesize`](Self::synthesize).
    pub fn synthesize_adjoint(
        &self,
        grad: &[f64],
        frames: usize,
    ) -> Result<Vec<Complex64>, DspError> {
        let n = self.params.fft_size;
        let bins = self.params.n_bins();
        let hop = self.params.hop;
        let env = self.envelope(frames);
        let pad = self.params.pad();
        let mut padded = vec![0.0; env.len()];
        for (i, g) in grad.iter().enumerate() {
            if let Some(&e) = env.get(i + pad) {
                if e > ENVELOPE_FLOOR {
                    padded[i + pad] = g / e;
                }
            }
        }
        let mut out = Vec::with_capacity(frames * bins);
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        let scale = 1.0 / n as f64;
        for t in 0..frames {
            for (i, b) in buf.iter_mut().enumerate() {
                *b = Complex64::new(self.synthesis[i] * padded[t * hop + i], 0.0);
            }
            self.forward.process(&mut buf);
            out.push(Complex64::new(buf[0].re * scale, 0.0));
            for b in &buf[1..bins - 1] {
                out.push(b * (2.0 * scale));
            }
            out.push(Complex64::new(buf[bins - 1].re * scale, 0.0));
        }
        Ok(out)
    }
}

fn check_len(got: usize, expected: usize) -> Result<(), DspError> {
    if got != expected {
        return Err(DspError::ShapeMismatch { expected, got });
    }
    Ok(())
}

/// Mirror index `j` into `0..n` without repeating the edge sample; repeated
/// reflection covers pads longer than the signal.
fn reflect_index(j: isize, n: isize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n - 1);
    let m = j.rem_euclid(period);
    (if m >= n { period - m } else { m }) as usize
}

/// Expands a one-sided frame into a full Hermitian spectrum in `buf`, with
/// real DC and Nyquist bins.
fn fill_hermitian(frame: &[Complex64], buf: &mut [Complex64]) {
    let n = buf.len();
    let half = n / 2;
    buf[0] = Complex64::new(frame[0].re, 0.0);
    buf[half] = Complex64::new(frame[half].re, 0.0);
    for k in 1..half {
        buf[k] = frame[k];
        buf[n - k] = frame[k].conj();
    }
}

pub fn stft(w: &Waveform, params: &StftParams) -> Result<Spectrogram, DspError> {
    let plan = StftPlan::new(*params)?;
    stft_with(&plan, w.samples())
}

pub fn stft_with(plan: &StftPlan, samples: &[f64]) -> Result<Spectrogram, DspError> {
    let bins = plan.analyze(samples)?;
    Spectrogram::from_bins(bins, plan.params, samples.len())
}

pub fn istft(
    s: &Spectrogram,
    params: &StftParams,
    out_length: usize,
    sample_rate: u32,
) -> Result<Waveform, DspError> {
    if s.params() != params {
        return Err(DspError::ParamMismatch);
    }
    let plan = StftPlan::new(*params)?;
    Waveform::new(istft_with(&plan, s, out_length)?, sample_rate)
}

pub fn istft_with(plan: &StftPlan, s: &Spectrogram, out_length: usize) -> Result<Vec<f64>, DspError> {
    if s.params() != plan.params() {
        return Err(DspError::ParamMismatch);
    }
    plan.synthesize(s.bins(), s.n_frames(), out_length)
}

/// `stft(istft(s))` at the spectrogram's own origin length.
pub fn consistency_project(s: &Spectrogram) -> Result<Spectrogram, DspError> {
    let plan = StftPlan::new(*s.params())?;
    consistency_project_with(&plan, s)
}

pub fn consistency_project_with(plan: &StftPlan, s: &Spectrogram) -> Result<Spectrogram, DspError> {
    let wave = istft_with(plan, s, s.origin_length())?;
    stft_with(plan, &wave)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random_signal(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
        (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    fn rel_err(a: &[f64], b: &[f64]) -> f64 {
        let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
        let den: f64 = b.iter().map(|y| y * y).sum();
        (num / den).sqrt()
    }

    fn brute_overlap_sum(params: &StftParams) -> f64 {
        // Sum shifted copies on a long line and normalise by the mean.
        let n = params.fft_size;
        let wa = params.window.analysis(n);
        let ws = params.window.synthesis(n);
        let shifts = 4 * n / params.hop;
        let len = shifts * params.hop + n;
        let mut line = vec![0.0; len];
        for k in 0..shifts {
            for i in 0..n {
                line[k * params.hop + i] += wa[i] * ws[i];
            }
        }
        let steady = &line[n..len - n];
        let mean = steady.iter().sum::<f64>() / steady.len() as f64;
        steady.iter().map(|v| (v / mean - 1.0).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn cola_sqrt_hann_half_overlap() {
        let p = StftParams::default();
        assert!(check_cola(&p) < 1e-10);
        assert!(brute_overlap_sum(&p) < 1e-10);
    }

    #[test]
    fn cola_sqrt_hann_quarter_hop() {
        let p = StftParams {
            hop: 128,
            ..StftParams::default()
        };
        assert!(brute_overlap_sum(&p) < 1e-10);
        assert!(check_cola(&p) < 1e-10);
    }

    #[test]
    fn cola_hann_rect_without_overlap_fails() {
        let p = StftParams {
            fft_size: 512,
            hop: 512,
            window: Window::Hann,
            center_pad: true,
        };
        let oracle = brute_overlap_sum(&p);
        assert!(oracle > 0.1);
        assert!((check_cola(&p) - oracle).abs() < 1e-9);
        assert!(StftParams::new(512, 512, Window::Hann, true).is_err());
    }

    #[test]
    fn params_validation() {
        assert!(StftParams::new(512, 200, Window::SqrtHann, true).is_err());
        assert!(StftParams::new(512, 128, Window::Hann, false).is_ok());
        assert!(StftParams::new(7, 1, Window::Hann, false).is_err());
    }

    #[test]
    fn zero_waveform_zero_spectrum() {
        let w = Waveform::new(vec![0.0; 2000], 16000).unwrap();
        let s = stft(&w, &StftParams::default()).unwrap();
        assert!(s.bins().iter().all(|c| c.norm() == 0.0));
        let back = istft(&s, &StftParams::default(), 2000, 16000).unwrap();
        assert!(back.samples().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn impulse_frame_matches_direct_dft_of_window() {
        let p = StftParams {
            fft_size: 64,
            hop: 32,
            window: Window::Hann,
            center_pad: false,
        };
        let mut x = vec![0.0; 64];
        let center = 32;
        x[center] = 1.0;
        let w = Waveform::new(x, 16000).unwrap();
        let s = stft(&w, &p).unwrap();
        assert_eq!(s.n_frames(), 1);
        let win = p.window.analysis(64);
        for k in 0..p.n_bins() {
            // Direct DFT of the windowed impulse: win[c] * e^{-2πi k c / N}.
            let theta = -2.0 * PI * (k * center) as f64 / 64.0;
            let expect = Complex64::new(theta.cos(), theta.sin()) * win[center];
            assert!((s.get(0, k) - expect).norm() < 1e-12);
            assert!((s.get(0, k).norm() - win[center]).abs() < 1e-12);
        }
    }

    #[test]
    fn bin_centred_sinusoid_peaks_in_its_bin() {
        let p = StftParams::default();
        let bin = 20;
        let x: Vec<f64> = (0..8000)
            .map(|n| (2.0 * PI * bin as f64 * n as f64 / 512.0).sin() * 0.5)
            .collect();
        let s = stft(&Waveform::new(x, 16000).unwrap(), &p).unwrap();
        for t in 2..s.n_frames() - 2 {
            let peak = (0..s.n_bins())
                .max_by(|&a, &b| s.get(t, a).norm().total_cmp(&s.get(t, b).norm()))
                .unwrap();
            assert_eq!(peak, bin, "frame {t}");
        }
    }

    #[test]
    fn round_trip_one_second() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random_signal(&mut rng, 16000);
        let w = Waveform::new(x.clone(), 16000).unwrap();
        let p = StftParams::default();
        let s = stft(&w, &p).unwrap();
        let back = istft(&s, &p, x.len(), 16000).unwrap();
        assert!(rel_err(back.samples(), &x) < 1e-6);
    }

    #[test]
    fn round_trip_without_center_pad_interior() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = StftParams::new(256, 64, Window::Hann, false).unwrap();
        let x = random_signal(&mut rng, 4096);
        let plan = StftPlan::new(p).unwrap();
        let s = stft_with(&plan, &x).unwrap();
        let back = istft_with(&plan, &s, x.len()).unwrap();
        // The first sample sits under a zero of the analysis window.
        assert!(rel_err(&back[1..3840], &x[1..3840]) < 1e-6);
    }

    #[test]
    fn short_signal_uncentred_is_rejected() {
        let p = StftParams::new(512, 256, Window::SqrtHann, false).unwrap();
        let w = Waveform::new(vec![0.1; 100], 16000).unwrap();
        assert_eq!(stft(&w, &p), Err(DspError::TooShort { len: 100, need: 512 }));
    }

    #[test]
    fn short_signal_centred_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for len in [1usize, 2, 3, 100, 256, 257] {
            let x = random_signal(&mut rng, len);
            let plan = StftPlan::new(StftParams::default()).unwrap();
            let s = stft_with(&plan, &x).unwrap();
            let back = istft_with(&plan, &s, len).unwrap();
            assert!(rel_err(&back, &x) < 1e-9, "len {len}");
        }
    }

    #[test]
    fn istft_rejects_foreign_params() {
        let w = Waveform::new(vec![0.1; 1000], 16000).unwrap();
        let s = stft(&w, &StftParams::default()).unwrap();
        let other = StftParams::new(256, 128, Window::SqrtHann, true).unwrap();
        assert_eq!(istft(&s, &other, 1000, 16000), Err(DspError::ParamMismatch));
    }

    #[test]
    fn random_phase_spectrogram_is_inconsistent() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = StftParams::default();
        let frames = p.n_frames(4000).unwrap();
        let bins = (0..frames * p.n_bins())
            .map(|_| Complex64::from_polar(rng.gen_range(0.0..1.0), rng.gen_range(0.0..2.0 * PI)))
            .collect();
        let s = Spectrogram::from_bins(bins, p, 4000).unwrap();
        let projected = consistency_project(&s).unwrap();
        assert!(s.distance(&projected).unwrap() > 1e-3 * s.frobenius_norm());
    }

    #[test]
    fn true_stft_is_fixed_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = random_signal(&mut rng, 5000);
        let s = stft(&Waveform::new(x, 16000).unwrap(), &StftParams::default()).unwrap();
        let p = consistency_project(&s).unwrap();
        assert!(s.distance(&p).unwrap() < 1e-6 * s.frobenius_norm());
    }

    #[test]
    fn projection_forces_real_dc() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x = random_signal(&mut rng, 3000);
        let mut s = stft(&Waveform::new(x, 16000).unwrap(), &StftParams::default()).unwrap();
        let nb = s.n_bins();
        for t in 0..s.n_frames() {
            s.bins_mut()[t * nb].im = 0.7;
            s.bins_mut()[t * nb + nb - 1].im = -0.3;
        }
        let p = consistency_project(&s).unwrap();
        for t in 0..p.n_frames() {
            assert!(p.get(t, 0).im.abs() < 1e-12);
            assert!(p.get(t, nb - 1).im.abs() < 1e-12);
        }
    }

    #[test]
    fn adjoints_satisfy_inner_product_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for params in [
            StftParams::default(),
            StftParams::new(64, 16, Window::Hann, true).unwrap(),
            StftParams::new(64, 32, Window::SqrtHann, false).unwrap(),
        ] {
            let plan = StftPlan::new(params).unwrap();
            let len = 300;
            let frames = plan.n_frames(len).unwrap();
            let nb = params.n_bins();
            let x = random_signal(&mut rng, len);
            let y: Vec<Complex64> = (0..frames * nb)
                .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            let inner = |a: &[Complex64], b: &[Complex64]| -> f64 {
                a.iter().zip(b).map(|(p, q)| p.re * q.re + p.im * q.im).sum()
            };
            // <A x, y> = <x, A* y>
            let ax = plan.analyze(&x).unwrap();
            let aty = plan.analyze_adjoint(&y, len).unwrap();
            let lhs = inner(&ax, &y);
            let rhs: f64 = x.iter().zip(&aty).map(|(a, b)| a * b).sum();
            assert!((lhs - rhs).abs() < 1e-9 * lhs.abs().max(1.0));
            // <B y, x> = <y, B* x>
            let by = plan.synthesize(&y, frames, len).unwrap();
            let btx = plan.synthesize_adjoint(&x, frames).unwrap();
            let lhs: f64 = by.iter().zip(&x).map(|(a, b)| a * b).sum();
            let rhs = inner(&y, &btx);
            assert!((lhs - rhs).abs() < 1e-9 * lhs.abs().max(1.0));
        }
    }

    #[test]
    fn waveform_validation() {
        assert!(Waveform::new(vec![], 16000).is_err());
        assert!(Waveform::new(vec![0.0], 22050).is_err());
        assert!(Waveform::new(vec![f64::NAN], 16000).is_err());
        assert!(Waveform::new(vec![0.0], 8000).is_ok());
    }

    #[test]
    fn reflect_index_mirrors_without_edge_repeat() {
        assert_eq!(reflect_index(-1, 5), 1);
        assert_eq!(reflect_index(-4, 5), 4);
        assert_eq!(reflect_index(5, 5), 3);
        assert_eq!(reflect_index(-6, 5), 2);
        assert_eq!(reflect_index(3, 1), 0);
    }
}
