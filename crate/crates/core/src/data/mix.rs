use super::DataError;
use crate::dsp::Waveform;

/// Mixture peak ceiling after normalisation.
pub const MIX_PEAK: f64 = 0.999;

#[derive(Debug, Clone, PartialEq)]
pub struct Mixture {
    pub mix: Waveform,
    /// Clean signal after the same peak scaling as the mixture; the
    /// reference for every loss and metric on this pair.
    pub clean: Waveform,
    pub noise_gain: f64,
    pub peak_scale: f64,
}

fn power(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64
}

/// Tiles or crops `noise` to `len` samples.
pub fn fit_length(noise: &[f64], len: usize) -> Vec<f64> {
    noise.iter().copied().cycle().take(len).collect()
}

/// Scales `noise` so the full-clip SNR against `clean` equals `snr_db`,
/// adds, and peak-normalises the sum to at most [`MIX_PEAK`].
pub fn mix_at_snr(clean: &Waveform, noise: &Waveform, snr_db: f64) -> Result<Mixture, DataError> {
    if !snr_db.is_finite() {
        return Err(DataError::InvalidSnr(snr_db));
    }
    if clean.sample_rate() != noise.sample_rate() {
        return Err(DataError::SampleRateMismatch(clean.sample_rate(), noise.sample_rate()));
    }
    let p_clean = power(clean.samples());
    if p_clean == 0.0 {
        return Err(DataError::SilentClean);
    }
    let n = fit_length(noise.samples(), clean.len());
    let p_noise = power(&n);
    if p_noise == 0.0 {
        return Err(DataError::SilentNoise);
    }
    let noise_gain = (p_clean / (p_noise * 10f64.powf(snr_db / 10.0))).sqrt();
    let raw: Vec<f64> = clean.samples().iter().zip(&n).map(|(c, v)| c + noise_gain * v).collect();
    let peak = raw.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let peak_scale = if peak > MIX_PEAK { MIX_PEAK / peak } else { 1.0 };
    let sr = clean.sample_rate();
    Ok(Mixture {
        mix: Waveform::new(raw.iter().map(|v| v * peak_scale).collect(), sr)?,
        clean: Waveform::new(clean.samples().iter().map(|v| v * peak_scale).collect(), sr)?,
        noise_gain,
        peak_scale,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(v: Vec<f64>) -> Waveform {
        Waveform::new(v, 16000).unwrap()
    }

    #[test]
    fn zero_db_equal_powers() {
        let c = w((0..1000).map(|i| (i as f64 * 0.05).sin() * 0.3).collect());
        let n = w((0..1000).map(|i| if i % 2 == 0 { 0.01 } else { -0.01 }).collect());
        let m = mix_at_snr(&c, &n, 0.0).unwrap();
        let resid: Vec<f64> = m.mix.samples().iter().zip(m.clean.samples()).map(|(a, b)| a - b).collect();
        assert!((power(&resid) / power(m.clean.samples()) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejections() {
        let c = w(vec![0.1; 10]);
        assert!(matches!(mix_at_snr(&c, &c, f64::INFINITY), Err(DataError::InvalidSnr(_))));
        assert!(matches!(mix_at_snr(&w(vec![0.0; 10]), &c, 0.0), Err(DataError::SilentClean)));
        let other = Waveform::new(vec![0.1; 10], 8000).unwrap();
        assert!(matches!(mix_at_snr(&c, &other, 0.0), Err(DataError::SampleRateMismatch(..))));
    }

    #[test]
    fn short_noise_is_tiled_and_peak_limited() {
        let c = w(vec![0.9; 100]);
        let n = w(vec![0.5, -0.5, 0.25]);
        let m = mix_at_snr(&c, &n, -5.0).unwrap();
        assert_eq!(m.mix.len(), 100);
        assert!(m.mix.peak() <= MIX_PEAK + 1e-15);
        assert!(m.peak_scale < 1.0);
        assert_eq!(fit_length(&[1.0, 2.0], 5), vec![1.0, 2.0, 1.0, 2.0, 1.0]);
    }
}
