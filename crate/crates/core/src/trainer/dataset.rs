use super::TrainError;
use crate::autonn::generator_features;
use crate::autonn::tape::{complex_to_planes, MAGNITUDE_EPS};
use crate::data::{mix_at_snr, read_wav, CleanStarCache, Manifest, Split};
use crate::dsp::{self, Complex64, StftPlan};
use crate::losses::{q_target, CleanStar};
use crate::metrics::SsnrParams;
use std::sync::Arc;

/// `(|S|² + eps)^(c/2)`, matching the differentiable op on the tape.
pub fn compressed_magnitude(bins: &[Complex64], c: f64) -> Vec<f64> {
    bins.iter().map(|b| (b.norm_sqr() + MAGNITUDE_EPS).powf(c / 2.0)).collect()
}

/// One preprocessed mixture with every constant the steps need.
#[derive(Debug, Clone)]
pub struct Example {
    pub id: String,
    pub snr_db: f64,
    /// Mixture and clean reference after the same peak scaling.
    pub noisy: Vec<f64>,
    pub clean: Vec<f64>,
    pub clean_star: CleanStar,
    pub frames: usize,
    pub bins: usize,
    pub noisy_re: Arc<Vec<f64>>,
    pub noisy_im: Arc<Vec<f64>>,
    /// Generator input `[2, T, F]`.
    pub features: Vec<f64>,
    pub clean_cmag: Vec<f64>,
    pub clean_star_cmag: Vec<f64>,
    pub noisy_cmag: Vec<f64>,
    /// Noisy input after the iSTFT/STFT round trip, for ND under CP.
    pub noisy_star_cmag: Vec<f64>,
    pub q_noisy: f64,
    pub q_noisy_star: f64,
}

impl Example {
    pub fn build(
        id: String,
        snr_db: f64,
        noisy: Vec<f64>,
        clean: Vec<f64>,
        clean_star: CleanStar,
        plan: &StftPlan,
        compression: f64,
        ssnr: &SsnrParams,
    ) -> Result<Self, TrainError> {
        let spec = dsp::stft_with(plan, &noisy)?;
        let (frames, bins) = (spec.n_frames(), spec.n_bins());
        let planes = complex_to_planes(spec.bins());
        let n = frames * bins;
        let noisy_re = Arc::new(planes[..n].to_vec());
        let noisy_im = Arc::new(planes[n..].to_vec());
        let noisy_cmag = compressed_magnitude(spec.bins(), compression);
        let features = generator_features(&noisy_cmag, frames, bins);
        let clean_cmag = compressed_magnitude(dsp::stft_with(plan, &clean)?.bins(), compression);
        let clean_star_cmag = compressed_magnitude(clean_star.spec.bins(), compression);
        let noisy_star = dsp::istft_with(plan, &spec, noisy.len())?;
        let noisy_star_cmag = compressed_magnitude(dsp::stft_with(plan, &noisy_star)?.bins(), compression);
        let q_noisy = q_target(&noisy, &clean, ssnr)?;
        let q_noisy_star = q_target(&noisy_star, &clean_star.wave, ssnr)?;
        Ok(Self {
            id,
            snr_db,
            noisy,
            clean,
            clean_star,
            frames,
            bins,
            noisy_re,
            noisy_im,
            features,
            clean_cmag,
            clean_star_cmag,
            noisy_cmag,
            noisy_star_cmag,
            q_noisy,
            q_noisy_star,
        })
    }

    pub fn len(&self) -> usize {
        self.noisy.len()
    }

    pub fn is_empty(&self) -> bool {
        self.noisy.is_empty()
    }

    pub fn reference_cmag(&self, cp: bool) -> &[f64] {
        if cp {
            &self.clean_star_cmag
        } else {
            &self.clean_cmag
        }
    }

    pub fn reference_wave(&self, cp: bool) -> &[f64] {
        if cp {
            &self.clean_star.wave
        } else {
            &self.clean
        }
    }

    /// Noisy discriminator input and its metric target.
    pub fn noisy_part(&self, cp: bool) -> (&[f64], f64) {
        if cp {
            (&self.noisy_star_cmag, self.q_noisy_star)
        } else {
            (&self.noisy_cmag, self.q_noisy)
        }
    }
}

/// Loads one split. Mixtures are recomputed from the clean and noise files
/// so the clean reference carries the exact peak scaling of its mixture.
pub fn load_examples(
    manifest: &Manifest,
    split: Split,
    plan: &StftPlan,
    compression: f64,
    ssnr: &SsnrParams,
) -> Result<Vec<Example>, TrainError> {
    let cache = CleanStarCache::new(&manifest.root.join("cache").join("clean_star"), plan);
    let mut out = Vec::new();
    for entry in manifest.split(split) {
        let clean = read_wav(&manifest.resolve(&entry.clean_path)?)?;
        let noise = read_wav(&manifest.resolve(&entry.noise_path)?)?;
        let m = mix_at_snr(&clean, &noise, entry.snr_db)?;
        let clean = m.clean.into_samples();
        let star = cache.get_or_compute(plan, entry, &clean)?;
        out.push(Example::build(
            entry.id(),
            entry.snr_db,
            m.mix.into_samples(),
            clean,
            star,
            plan,
            compression,
            ssnr,
        )?);
    }
    Ok(out)
}
