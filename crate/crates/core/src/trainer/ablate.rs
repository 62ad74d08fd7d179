use super::dataset::load_examples;
use super::run::train_on;
use super::{Mode, TrainConfig, TrainError};
use crate::data::{Manifest, Split};
use crate::dsp::StftPlan;
use serde::Serialize;
use std::path::Path;
use std::sync::Arc;

pub const SUMMARY_CSV: &str = "summary.csv";
pub const RUNS_CSV: &str = "runs.csv";

/// One summary line per mode: mean and sample standard deviation across
/// seeds of each run's best test-split scores.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationRow {
    pub mode: String,
    pub runs_ok: usize,
    pub runs_failed: usize,
    pub ssnr_noisy_mean: f64,
    pub ssnr_enh_mean: f64,
    pub ssnr_enh_std: f64,
    pub q_enh_mean: f64,
    pub q_enh_std: f64,
    pub improvement_mean: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunRow {
    pub mode: String,
    pub seed: u64,
    pub status: String,
    pub best_epoch: Option<usize>,
    pub ssnr_noisy: Option<f64>,
    pub ssnr_enh: Option<f64>,
    pub q_enh: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct AblationSummary {
    pub rows: Vec<AblationRow>,
    pub runs: Vec<RunRow>,
}

impl AblationSummary {
    pub fn row(&self, mode: Mode) -> Option<&AblationRow> {
        self.rows.iter().find(|r| r.mode == mode.as_str())
    }
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let std = if v.len() < 2 {
        0.0
    } else {
        (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    (mean, std)
}

/// Runs every ablation mode for every seed, sequentially, under
/// `out_dir/<mode>_seed<k>/`. A failed run is recorded and the grid
/// continues.
pub fn ablate(base: &TrainConfig, seeds: &[u64], out_dir: &Path) -> Result<AblationSummary, TrainError> {
    std::fs::create_dir_all(out_dir)?;
    let plan = Arc::new(StftPlan::new(base.stft)?);
    let manifest = Manifest::load(&base.manifest)?;
    let c = base.gen_loss.mag_compression;
    let train_set = load_examples(&manifest, Split::Train, &plan, c, &base.ssnr)?;
    let test_set = load_examples(&manifest, Split::Test, &plan, c, &base.ssnr)?;
    let mut rows = Vec::new();
    let mut runs = Vec::new();
    for mode in Mode::ALL {
        let mut enh = Vec::new();
        let mut q = Vec::new();
        let mut noisy = Vec::new();
        let mut failed = 0;
        for &seed in seeds {
            let mut cfg = base.clone();
            cfg.apply_mode(mode);
            cfg.seed = seed;
            cfg.checkpoint_dir = out_dir.join(format!("{}_seed{seed}", mode.as_str()));
            let result = cfg.validate().map_err(TrainError::from).and_then(|_| train_on(&cfg, &plan, &train_set, &test_set));
            match result {
                Ok(report) => {
                    let m = &report.best.mean;
                    enh.push(m.ssnr_enh);
                    q.push(m.q_enh);
                    noisy.push(m.ssnr_noisy);
                    runs.push(RunRow {
                        mode: mode.as_str().into(),
                        seed,
                        status: "ok".into(),
                        best_epoch: Some(report.best_epoch),
                        ssnr_noisy: Some(m.ssnr_noisy),
                        ssnr_enh: Some(m.ssnr_enh),
                        q_enh: Some(m.q_enh),
                    });
                }
                Err(e) => {
                    log::error!("{} seed {seed} failed: {e}", mode.as_str());
                    failed += 1;
                    runs.push(RunRow {
                        mode: mode.as_str().into(),
                        seed,
                        status: format!("failed: {e}"),
                        best_epoch: None,
                        ssnr_noisy: None,
                        ssnr_enh: None,
                        q_enh: None,
                    });
                }
            }
        }
        let (enh_mean, enh_std) = mean_std(&enh);
        let (q_mean, q_std) = mean_std(&q);
        let (noisy_mean, _) = mean_std(&noisy);
        rows.push(AblationRow {
            mode: mode.as_str().into(),
            runs_ok: enh.len(),
            runs_failed: failed,
            ssnr_noisy_mean: noisy_mean,
            ssnr_enh_mean: enh_mean,
            ssnr_enh_std: enh_std,
            q_enh_mean: q_mean,
            q_enh_std: q_std,
            improvement_mean: enh_mean - noisy_mean,
        });
    }
    let mut w = csv::Writer::from_path(out_dir.join(SUMMARY_CSV))?;
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush()?;
    let mut w = csv::Writer::from_path(out_dir.join(RUNS_CSV))?;
    for r in &runs {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(AblationSummary { rows, runs })
}

#[cfg(test)]
mod tests {
    use super::mean_std;

    #[test]
    fn sample_std() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 1.0).abs() < 1e-15);
        assert_eq!(mean_std(&[4.0]), (4.0, 0.0));
    }
}
