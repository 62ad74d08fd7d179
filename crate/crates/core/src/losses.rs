//! Discriminator and generator losses, the self-correcting direction, and
//! the consistency-preserving (CP) wrapper.
//!
//! Graph-level losses record onto a [`Tape`] so their parameter gradients
//! can be taken; value-level twins operate on plain signals and
//! spectrograms.

use crate::autonn::tape::MAGNITUDE_EPS;
use crate::autonn::{DiscriminatorNet, NnError, Tape, Var};
use crate::dsp::{self, DspError, Spectrogram, StftPlan};
use crate::metrics::{self, MetricsError, SsnrParams};
use crate::surgery::{self, GradVector, ScWeights, SurgeryError};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LossError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("sc3 requires a noisy-part gradient")]
    ModeMismatch,
    #[error("empty batch")]
    EmptyBatch,
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Dsp(#[from] DspError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Surgery(#[from] SurgeryError),
}

/// Discriminator loss parts for one step.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct LossParts {
    pub l_c: f64,
    pub l_e: f64,
    pub l_n: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenLossConfig {
    pub lambda_adv: f64,
    pub lambda_time: f64,
    pub lambda_mag: f64,
    pub cp_enabled: bool,
    pub mag_compression: f64,
}

impl Default for GenLossConfig {
    fn default() -> Self {
        Self {
            lambda_adv: 1.0,
            lambda_time: 10.0,
            lambda_mag: 1.0,
            cp_enabled: false,
            mag_compression: 0.3,
        }
    }
}

impl GenLossConfig {
    /// Returns the offending field name and reason.
    pub fn validate(&self) -> Result<(), (&'static str, String)> {
        for (name, v) in [
            ("lambda_adv", self.lambda_adv),
            ("lambda_time", self.lambda_time),
            ("lambda_mag", self.lambda_mag),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err((name, format!("must be a nonnegative number, got {v}")));
            }
        }
        if self.lambda_adv + self.lambda_time + self.lambda_mag <= 0.0 {
            return Err(("lambda_adv", "at least one loss weight must be positive".into()));
        }
        if !(self.mag_compression > 0.0 && self.mag_compression <= 1.0) {
            return Err(("mag_compression", format!("must lie in (0, 1], got {}", self.mag_compression)));
        }
        Ok(())
    }
}

/// Anything that scores a (candidate, reference) magnitude pair.
pub trait Critic {
    fn bind(&self, tape: &mut Tape, trainable: bool) -> Result<Vec<Var>, NnError>;
    fn score(&self, tape: &mut Tape, vars: &[Var], candidate: Var, reference: Var) -> Result<Var, NnError>;
}

impl Critic for DiscriminatorNet {
    fn bind(&self, tape: &mut Tape, trainable: bool) -> Result<Vec<Var>, NnError> {
        self.params.bind(tape, trainable)
    }

    fn score(&self, tape: &mut Tape, vars: &[Var], candidate: Var, reference: Var) -> Result<Var, NnError> {
        self.forward(tape, vars, candidate, reference)
    }
}

/// Batch mean of `(D(candidate, reference) - target)²`.
pub fn metric_regression<C: Critic + ?Sized>(
    tape: &mut Tape,
    critic: &C,
    vars: &[Var],
    items: &[(Var, Var, f64)],
) -> Result<Var, LossError> {
    if items.is_empty() {
        return Err(LossError::EmptyBatch);
    }
    let mut total: Option<Var> = None;
    for &(cand, reference, target) in items {
        let d = critic.score(tape, vars, cand, reference)?;
        let diff = tape.add_scalar(d, -target)?;
        let sq = tape.square(diff)?;
        total = Some(match total {
            None => sq,
            Some(t) => tape.add(t, sq)?,
        });
    }
    let total = total.expect("non-empty");
    let mean = tape.scale(total, 1.0 / items.len() as f64)?;
    Ok(tape.reshape(mean, &[1])?)
}

/// `E_y (D(y, y) - 1)²`; the metric of a clean signal against itself is 1.
pub fn loss_clean<C: Critic + ?Sized>(
    tape: &mut Tape,
    critic: &C,
    vars: &[Var],
    clean_mags: &[Var],
) -> Result<Var, LossError> {
    let items: Vec<_> = clean_mags.iter().map(|&y| (y, y, 1.0)).collect();
    metric_regression(tape, critic, vars, &items)
}

/// `E (D(G(x), y) - Q(G(x), y))²` with `Q` supplied as a constant target.
pub fn loss_enhanced<C: Critic + ?Sized>(
    tape: &mut Tape,
    critic: &C,
    vars: &[Var],
    items: &[(Var, Var, f64)],
) -> Result<Var, LossError> {
    metric_regression(tape, critic, vars, items)
}

/// `E (D(x, y) - Q(x, y))²` for the noisy input itself.
pub fn loss_noisy<C: Critic + ?Sized>(
    tape: &mut Tape,
    critic: &C,
    vars: &[Var],
    items: &[(Var, Var, f64)],
) -> Result<Var, LossError> {
    metric_regression(tape, critic, vars, items)
}

/// Adversarial metric loss for the generator: drive `D(enh, y)` to 1.
pub fn gen_adv_loss<C: Critic + ?Sized>(
    tape: &mut Tape,
    critic: &C,
    vars: &[Var],
    pairs: &[(Var, Var)],
) -> Result<Var, LossError> {
    let items: Vec<_> = pairs.iter().map(|&(e, y)| (e, y, 1.0)).collect();
    metric_regression(tape, critic, vars, &items)
}

/// Metric target for the enhanced and noisy parts.
pub fn q_target(candidate: &[f64], clean: &[f64], p: &SsnrParams) -> Result<f64, LossError> {
    if candidate.len() != clean.len() {
        return Err(LossError::LengthMismatch(candidate.len(), clean.len()));
    }
    p.validate()?;
    Ok(metrics::ssnr_to_q(metrics::ssnr_slices(candidate, clean, p)?, p))
}

/// Mean absolute sample difference.
pub fn time_loss(enh: &[f64], reference: &[f64]) -> Result<f64, LossError> {
    if enh.len() != reference.len() {
        return Err(LossError::LengthMismatch(enh.len(), reference.len()));
    }
    if enh.is_empty() {
        return Err(LossError::EmptyBatch);
    }
    Ok(enh.iter().zip(reference).map(|(a, b)| (a - b).abs()).sum::<f64>() / enh.len() as f64)
}

/// Mean squared difference of compressed magnitudes `|S|^c`.
/// Same regularised compression as the training graph.
fn cmag(norm_sqr: f64, c: f64) -> f64 {
    (norm_sqr + MAGNITUDE_EPS).powf(c / 2.0)
}

pub fn tf_mag_loss(enh: &Spectrogram, reference: &Spectrogram, compression: f64) -> Result<f64, LossError> {
    if enh.n_frames() != reference.n_frames() || enh.n_bins() != reference.n_bins() {
        return Err(LossError::ShapeMismatch(format!(
            "{}x{} vs {}x{}",
            enh.n_frames(),
            enh.n_bins(),
            reference.n_frames(),
            reference.n_bins()
        )));
    }
    let n = enh.bins().len() as f64;
    Ok(enh
        .bins()
        .iter()
        .zip(reference.bins())
        .map(|(a, b)| (cmag(a.norm_sqr(), compression) - cmag(b.norm_sqr(), compression)).powi(2))
        .sum::<f64>()
        / n)
}

pub fn time_loss_var(tape: &mut Tape, enh: Var, reference: Var) -> Result<Var, LossError> {
    let d = tape.sub(enh, reference)?;
    let a = tape.abs(d)?;
    Ok(tape.mean(a)?)
}

/// Both inputs are already-compressed magnitudes.
pub fn tf_mag_loss_var(tape: &mut Tape, enh_cmag: Var, ref_cmag: Var) -> Result<Var, LossError> {
    let d = tape.sub(enh_cmag, ref_cmag)?;
    let s = tape.square(d)?;
    Ok(tape.mean(s)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscMode {
    Baseline,
    Sc2,
    Sc3,
}

/// Per-part discriminator gradients evaluated at the same parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct PartGradients {
    pub gc: GradVector,
    pub ge: GradVector,
    pub gn: Option<GradVector>,
}

/// Update direction for the discriminator: plain sum for the baseline,
/// self-correcting combination otherwise.
pub fn discriminator_direction(parts: &PartGradients, mode: DiscMode) -> Result<(GradVector, ScWeights), LossError> {
    let PartGradients { gc, ge, gn } = parts;
    let weights = match mode {
        DiscMode::Baseline => ScWeights::unit(gn.is_some()),
        DiscMode::Sc2 => {
            if gn.is_some() {
                return Err(LossError::ModeMismatch);
            }
            surgery::sc2_weights(gc, ge)?
        }
        DiscMode::Sc3 => surgery::sc3_weights(gc, ge, gn.as_ref().ok_or(LossError::ModeMismatch)?)?,
    };
    let direction = match (mode, gn) {
        (DiscMode::Baseline, None) => gc.sum(ge)?,
        (DiscMode::Baseline, Some(gn)) => gc.sum(ge)?.sum(gn)?,
        _ => surgery::combine(gc, ge, gn.as_ref(), &weights)?,
    };
    Ok((direction, weights))
}

/// Clean reference after the same iSTFT/STFT round trip as the enhanced
/// signal; computable once at preprocessing time.
#[derive(Debug, Clone, PartialEq)]
pub struct CleanStar {
    pub wave: Vec<f64>,
    pub spec: Spectrogram,
}

impl CleanStar {
    pub fn compute(plan: &StftPlan, clean: &[f64]) -> Result<Self, LossError> {
        let spec0 = dsp::stft_with(plan, clean)?;
        let wave = dsp::istft_with(plan, &spec0, clean.len())?;
        let spec = dsp::stft_with(plan, &wave)?;
        Ok(Self { wave, spec })
    }
}

/// Loss inputs after the consistency-preserving round trip.
#[derive(Debug, Clone, PartialEq)]
pub struct CpWrapped {
    pub enh_spec: Spectrogram,
    pub enh_wave: Vec<f64>,
}

/// Enhanced path: spec → iSTFT → wave → STFT.
pub fn cp_wrap(plan: &StftPlan, enh_spec: &Spectrogram) -> Result<CpWrapped, LossError> {
    let enh_wave = dsp::istft_with(plan, enh_spec, enh_spec.origin_length())?;
    let spec = dsp::stft_with(plan, &enh_wave)?;
    Ok(CpWrapped {
        enh_spec: spec,
        enh_wave,
    })
}

/// Time and TF-magnitude losses of an enhanced spectrogram, with or without
/// the CP round trip. Returns `(time, mag)`.
pub fn reconstruction_losses(
    plan: &StftPlan,
    enh_spec: &Spectrogram,
    clean: &[f64],
    clean_star: &CleanStar,
    cfg: &GenLossConfig,
) -> Result<(f64, f64), LossError> {
    if cfg.cp_enabled {
        let w = cp_wrap(plan, enh_spec)?;
        Ok((
            time_loss(&w.enh_wave, &clean_star.wave)?,
            tf_mag_loss(&w.enh_spec, &clean_star.spec, cfg.mag_compression)?,
        ))
    } else {
        let wave = dsp::istft_with(plan, enh_spec, enh_spec.origin_length())?;
        let clean_spec = dsp::stft_with(plan, clean)?;
        Ok((
            time_loss(&wave, clean)?,
            tf_mag_loss(enh_spec, &clean_spec, cfg.mag_compression)?,
        ))
    }
}
