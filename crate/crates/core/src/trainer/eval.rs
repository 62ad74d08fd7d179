use super::dataset::Example;
use super::step::gen_forward;
use super::TrainError;
use crate::autonn::{GeneratorNet, Tape};
use crate::dsp::{self, Complex64, StftPlan};
use crate::metrics::{self, SsnrParams};
use serde::Serialize;
use std::path::Path;
use std::sync::Arc;

/// Anything that maps a preprocessed mixture to an enhanced waveform.
pub trait Enhancer {
    fn enhance(&self, ex: &Example) -> Result<Vec<f64>, TrainError>;
}

/// Trained generator applied through the STFT pipeline.
pub struct GeneratorEnhancer<'a> {
    pub gen: &'a GeneratorNet,
    pub plan: Arc<StftPlan>,
    pub compression: f64,
}

impl Enhancer for GeneratorEnhancer<'_> {
    fn enhance(&self, ex: &Example) -> Result<Vec<f64>, TrainError> {
        let mut tape = Tape::new();
        let vars = self.gen.params.bind(&mut tape, false)?;
        let out = gen_forward(&mut tape, self.gen, &vars, ex, &self.plan, false, self.compression)?;
        Ok(tape.value(out.wave).to_vec())
    }
}

/// Constant real mask on the noisy spectrogram.
pub struct MaskEnhancer {
    pub value: f64,
    pub plan: Arc<StftPlan>,
}

impl Enhancer for MaskEnhancer {
    fn enhance(&self, ex: &Example) -> Result<Vec<f64>, TrainError> {
        let bins: Vec<Complex64> = ex
            .noisy_re
            .iter()
            .zip(ex.noisy_im.iter())
            .map(|(&re, &im)| Complex64::new(re, im) * self.value)
            .collect();
        Ok(self.plan.synthesize(&bins, ex.frames, ex.len()).map_err(dsp::DspError::from)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalRow {
    pub clip_id: String,
    pub snr_db: f64,
    pub ssnr_noisy: f64,
    pub ssnr_enh: f64,
    pub q_noisy: f64,
    pub q_enh: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalTable {
    pub rows: Vec<EvalRow>,
    pub mean: EvalRow,
}

impl EvalTable {
    pub fn improvement_db(&self) -> f64 {
        self.mean.ssnr_enh - self.mean.ssnr_noisy
    }
}

/// Per-clip and mean SSNR and Q of the noisy input and the enhanced output,
/// both against the clean reference.
pub fn evaluate(enhancer: &dyn Enhancer, examples: &[Example], p: &SsnrParams) -> Result<EvalTable, TrainError> {
    let mut rows = Vec::with_capacity(examples.len());
    for ex in examples {
        let enh = enhancer.enhance(ex)?;
        let ssnr_noisy = metrics::ssnr_slices(&ex.noisy, &ex.clean, p)?;
        let ssnr_enh = metrics::ssnr_slices(&enh, &ex.clean, p)?;
        rows.push(EvalRow {
            clip_id: ex.id.clone(),
            snr_db: ex.snr_db,
            ssnr_noisy,
            ssnr_enh,
            q_noisy: metrics::ssnr_to_q(ssnr_noisy, p),
            q_enh: metrics::ssnr_to_q(ssnr_enh, p),
        });
    }
    let n = rows.len().max(1) as f64;
    let avg = |f: fn(&EvalRow) -> f64| rows.iter().map(f).sum::<f64>() / n;
    let mean = EvalRow {
        clip_id: "mean".into(),
        snr_db: avg(|r| r.snr_db),
        ssnr_noisy: avg(|r| r.ssnr_noisy),
        ssnr_enh: avg(|r| r.ssnr_enh),
        q_noisy: avg(|r| r.q_noisy),
        q_enh: avg(|r| r.q_enh),
    };
    Ok(EvalTable { rows, mean })
}

/// Per-clip rows followed by the `mean` summary row.
pub fn write_eval_csv(path: &Path, table: &EvalTable) -> Result<(), TrainError> {
    let mut w = csv::Writer::from_path(path)?;
    for r in table.rows.iter().chain(std::iter::once(&table.mean)) {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
