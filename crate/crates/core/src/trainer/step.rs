use super::dataset::Example;
use super::{TrainConfig, TrainError};
use crate::autonn::{adam_step, AdamState, DiscriminatorNet, Gradients, GeneratorNet, ParamSet, Tape, Var};
use crate::dsp::StftPlan;
use crate::losses::{self, discriminator_direction, PartGradients};
use crate::surgery::{sign_tolerance, Branch, GradVector};
use serde::Serialize;
use std::sync::Arc;

/// Generator, discriminator and their optimizer states.
#[derive(Debug, Clone, PartialEq)]
pub struct Nets {
    pub gen: GeneratorNet,
    pub disc: DiscriminatorNet,
    pub gen_opt: AdamState,
    pub disc_opt: AdamState,
}

/// Test hook applied to the part gradients before the direction is formed.
pub type PartHook<'a> = &'a mut dyn FnMut(&mut PartGradients);

/// Nodes produced by one generator forward pass.
#[derive(Debug, Clone, Copy)]
pub struct GenOutputs {
    pub mask: Var,
    /// Masked noisy spectrogram `[2, T, F]`.
    pub spec: Var,
    pub wave: Var,
    /// Compressed magnitude the losses and the discriminator see: of `spec`
    /// directly, or of its re-analysis when `cp` is set.
    pub cmag: Var,
}

pub fn gen_forward(
    tape: &mut Tape,
    gen: &GeneratorNet,
    vars: &[Var],
    ex: &Example,
    plan: &Arc<StftPlan>,
    cp: bool,
    compression: f64,
) -> Result<GenOutputs, TrainError> {
    let feats = tape.constant(ex.features.clone(), &[2, ex.frames, ex.bins])?;
    let mask = gen.forward(tape, vars, feats)?;
    let spec = tape.complex_mask(mask, ex.noisy_re.clone(), ex.noisy_im.clone())?;
    let wave = tape.istft(spec, plan.clone(), ex.len())?;
    let cmag = if cp {
        let again = tape.stft(wave, plan.clone())?;
        tape.compressed_magnitude(again, compression)?
    } else {
        tape.compressed_magnitude(spec, compression)?
    };
    Ok(GenOutputs { mask, spec, wave, cmag })
}

fn flat_grad(g: &Gradients, vars: &[Var], params: &ParamSet) -> Result<GradVector, TrainError> {
    let mut out = Vec::with_capacity(params.numel());
    for (i, v) in vars.iter().enumerate() {
        match g.get(*v) {
            Some(s) => out.extend_from_slice(s),
            None => out.extend(std::iter::repeat(0.0).take(params.tensor_at(i).numel())),
        }
    }
    Ok(GradVector::new(out).map_err(losses::LossError::from)?)
}

fn finite(step: u64, what: &str, v: f64) -> Result<f64, TrainError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(TrainError::NonFinite {
            step,
            what: what.to_string(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscRecord {
    pub l_c: f64,
    pub l_e: f64,
    pub l_n: Option<f64>,
    pub w_c: f64,
    pub w_e: f64,
    pub w_n: Option<f64>,
    pub branch: Branch,
    pub degenerate: bool,
    pub parts: PartGradients,
    pub direction: GradVector,
    /// Inner products of the applied direction with each part gradient.
    pub dot_c: f64,
    pub dot_e: f64,
    pub dot_n: Option<f64>,
    pub tolerance: f64,
}

/// Discriminator loss nodes for one batch.
#[derive(Debug, Clone, Copy)]
pub struct DiscLosses {
    pub l_c: Var,
    pub l_e: Var,
    pub l_n: Option<Var>,
}

pub fn disc_loss_graph(
    tape: &mut Tape,
    batch: &[&Example],
    nets: &Nets,
    gvars: &[Var],
    dvars: &[Var],
    cfg: &TrainConfig,
    plan: &Arc<StftPlan>,
) -> Result<DiscLosses, TrainError> {
    let c = cfg.gen_loss.mag_compression;
    let mut clean_items = Vec::new();
    let mut enh_items = Vec::new();
    let mut noisy_items = Vec::new();
    for ex in batch {
        let out = gen_forward(tape, &nets.gen, gvars, ex, plan, cfg.cp, c)?;
        let reference = tape.constant(ex.reference_cmag(cfg.cp).to_vec(), &[ex.frames, ex.bins])?;
        let q_e = losses::q_target(tape.value(out.wave), ex.reference_wave(cfg.cp), &cfg.ssnr)?;
        clean_items.push(reference);
        enh_items.push((out.cmag, reference, q_e));
        if cfg.nd {
            let (noisy, q_n) = ex.noisy_part(cfg.cp);
            let noisy = tape.constant(noisy.to_vec(), &[ex.frames, ex.bins])?;
            noisy_items.push((noisy, reference, q_n));
        }
    }
    let d = &nets.disc;
    let l_c = losses::loss_clean(tape, d, dvars, &clean_items)?;
    let l_e = losses::loss_enhanced(tape, d, dvars, &enh_items)?;
    let l_n = if cfg.nd {
        Some(losses::loss_noisy(tape, d, dvars, &noisy_items)?)
    } else {
        None
    };
    Ok(DiscLosses { l_c, l_e, l_n })
}

/// One discriminator update with the generator frozen.
pub fn disc_step(
    batch: &[&Example],
    nets: &mut Nets,
    cfg: &TrainConfig,
    plan: &Arc<StftPlan>,
    step: u64,
    hook: Option<PartHook<'_>>,
) -> Result<DiscRecord, TrainError> {
    let mut tape = Tape::new();
    let gvars = nets.gen.params.bind(&mut tape, false)?;
    let dvars = nets.disc.params.bind(&mut tape, true)?;
    let DiscLosses { l_c, l_e, l_n } = disc_loss_graph(&mut tape, batch, nets, &gvars, &dvars, cfg, plan)?;
    let params = &nets.disc.params;
    let mut parts = PartGradients {
        gc: flat_grad(&tape.backward(l_c)?, &dvars, params)?,
        ge: flat_grad(&tape.backward(l_e)?, &dvars, params)?,
        gn: match l_n {
            Some(l) => Some(flat_grad(&tape.backward(l)?, &dvars, params)?),
            None => None,
        },
    };
    if let Some(h) = hook {
        h(&mut parts);
    }
    let (direction, w) = discriminator_direction(&parts, cfg.disc_mode())?;
    let mut refs = vec![&parts.gc, &parts.ge];
    refs.extend(parts.gn.as_ref());
    let tolerance = sign_tolerance(&direction, &refs);
    let record = DiscRecord {
        l_c: finite(step, "l_c", tape.scalar(l_c))?,
        l_e: finite(step, "l_e", tape.scalar(l_e))?,
        l_n: l_n.map(|l| finite(step, "l_n", tape.scalar(l))).transpose()?,
        w_c: w.w_c,
        w_e: w.w_e,
        w_n: w.w_n,
        branch: w.branch,
        degenerate: w.degenerate,
        dot_c: direction.dot(&parts.gc).map_err(losses::LossError::from)?,
        dot_e: direction.dot(&parts.ge).map_err(losses::LossError::from)?,
        dot_n: parts
            .gn
            .as_ref()
            .map(|gn| direction.dot(gn))
            .transpose()
            .map_err(losses::LossError::from)?,
        tolerance,
        parts,
        direction,
    };
    adam_step(&mut nets.disc.params, &record.direction, &mut nets.disc_opt)?;
    Ok(record)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GenRecord {
    pub adv: f64,
    pub time: f64,
    pub mag: f64,
    pub total: f64,
    pub grad_norm: f64,
}

/// Generator loss graph for one batch; returns `(total, adv, time, mag)`.
pub fn gen_loss_graph(
    tape: &mut Tape,
    batch: &[&Example],
    nets: &Nets,
    gvars: &[Var],
    dvars: &[Var],
    cfg: &TrainConfig,
    plan: &Arc<StftPlan>,
) -> Result<(Var, Var, Var, Var), TrainError> {
    let c = cfg.gen_loss.mag_compression;
    let mut pairs = Vec::new();
    let mut time_sum: Option<Var> = None;
    let mut mag_sum: Option<Var> = None;
    for ex in batch {
        let out = gen_forward(tape, &nets.gen, gvars, ex, plan, cfg.cp, c)?;
        let ref_cmag = tape.constant(ex.reference_cmag(cfg.cp).to_vec(), &[ex.frames, ex.bins])?;
        let ref_wave = tape.constant(ex.reference_wave(cfg.cp).to_vec(), &[ex.len()])?;
        pairs.push((out.cmag, ref_cmag));
        let t = losses::time_loss_var(tape, out.wave, ref_wave)?;
        let m = losses::tf_mag_loss_var(tape, out.cmag, ref_cmag)?;
        time_sum = Some(match time_sum {
            None => t,
            Some(s) => tape.add(s, t)?,
        });
        mag_sum = Some(match mag_sum {
            None => m,
            Some(s) => tape.add(s, m)?,
        });
    }
    let inv = 1.0 / batch.len() as f64;
    let adv = losses::gen_adv_loss(tape, &nets.disc, dvars, &pairs)?;
    let time = tape.scale(time_sum.ok_or(losses::LossError::EmptyBatch)?, inv)?;
    let time = tape.reshape(time, &[1])?;
    let mag = tape.scale(mag_sum.ok_or(losses::LossError::EmptyBatch)?, inv)?;
    let mag = tape.reshape(mag, &[1])?;
    let g = &cfg.gen_loss;
    let a = tape.scale(adv, g.lambda_adv)?;
    let t = tape.scale(time, g.lambda_time)?;
    let m = tape.scale(mag, g.lambda_mag)?;
    let total = tape.add(a, t)?;
    let total = tape.add(total, m)?;
    Ok((total, adv, time, mag))
}

/// One generator update with the discriminator frozen.
pub fn gen_step(
    batch: &[&Example],
    nets: &mut Nets,
    cfg: &TrainConfig,
    plan: &Arc<StftPlan>,
    step: u64,
) -> Result<GenRecord, TrainError> {
    let mut tape = Tape::new();
    let gvars = nets.gen.params.bind(&mut tape, true)?;
    let dvars = nets.disc.params.bind(&mut tape, false)?;
    let (total, adv, time, mag) = gen_loss_graph(&mut tape, batch, nets, &gvars, &dvars, cfg, plan)?;
    let grads = tape.backward(total)?;
    let g = flat_grad(&grads, &gvars, &nets.gen.params)?;
    let record = GenRecord {
        adv: finite(step, "gen adv loss", tape.scalar(adv))?,
        time: finite(step, "gen time loss", tape.scalar(time))?,
        mag: finite(step, "gen mag loss", tape.scalar(mag))?,
        total: finite(step, "gen total loss", tape.scalar(total))?,
        grad_norm: g.norm(),
    };
    adam_step(&mut nets.gen.params, &g, &mut nets.gen_opt)?;
    Ok(record)
}

/// One CSV row per training step.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRecord {
    pub step: u64,
    pub epoch: usize,
    pub l_c: f64,
    pub l_e: f64,
    pub l_n: Option<f64>,
    pub w_c: f64,
    pub w_e: f64,
    pub w_n: Option<f64>,
    pub branch: Branch,
    pub degenerate: bool,
    pub norm_c: f64,
    pub norm_e: f64,
    pub norm_n: Option<f64>,
    pub dot_c: f64,
    pub dot_e: f64,
    pub dot_n: Option<f64>,
    pub tolerance: f64,
    pub gen_adv: f64,
    pub gen_time: f64,
    pub gen_mag: f64,
    pub gen_total: f64,
    pub gen_grad_norm: f64,
}

impl StepRecord {
    pub fn new(step: u64, epoch: usize, d: &DiscRecord, g: &GenRecord) -> Self {
        Self {
            step,
            epoch,
            l_c: d.l_c,
            l_e: d.l_e,
            l_n: d.l_n,
            w_c: d.w_c,
            w_e: d.w_e,
            w_n: d.w_n,
            branch: d.branch,
            degenerate: d.degenerate,
            norm_c: d.parts.gc.norm(),
            norm_e: d.parts.ge.norm(),
            norm_n: d.parts.gn.as_ref().map(GradVector::norm),
            dot_c: d.dot_c,
            dot_e: d.dot_e,
            dot_n: d.dot_n,
            tolerance: d.tolerance,
            gen_adv: g.adv,
            gen_time: g.time,
            gen_mag: g.mag,
            gen_total: g.total,
            gen_grad_norm: g.grad_norm,
        }
    }

    pub fn is_finite(&self) -> bool {
        [
            self.l_c,
            self.l_e,
            self.l_n.unwrap_or(0.0),
            self.w_e,
            self.w_n.unwrap_or(0.0),
            self.gen_total,
            self.gen_grad_norm,
        ]
        .iter()
        .all(|v| v.is_finite())
    }
}
