use super::dataset::{load_examples, Example};
use super::eval::{evaluate, write_eval_csv, EvalTable, GeneratorEnhancer};
use super::step::{disc_step, gen_step, Nets, PartHook, StepRecord};
use super::{TrainConfig, TrainError};
use crate::autonn::{AdamState, Checkpoint, DiscriminatorNet, GeneratorNet, Section};
use crate::data::{Manifest, Split};
use crate::dsp::StftPlan;
use crate::surgery::ConflictRow;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::sync::Arc;

pub const STEPS_CSV: &str = "steps.csv";
pub const SURGERY_CSV: &str = "surgery.csv";
pub const EVAL_CSV: &str = "eval.csv";
pub const FINAL_EVAL_CSV: &str = "eval_best.csv";
pub const BEST_CKPT: &str = "best.ckpt";
pub const FINAL_CKPT: &str = "final.ckpt";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochEval {
    pub epoch: usize,
    pub ssnr_noisy: f64,
    pub ssnr_enh: f64,
    pub q_noisy: f64,
    pub q_enh: f64,
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub records: Vec<StepRecord>,
    pub evals: Vec<EpochEval>,
    pub best_epoch: usize,
    /// Test-split table of the retained best checkpoint.
    pub best: EvalTable,
    pub out_dir: PathBuf,
}

impl TrainReport {
    pub fn best_improvement_db(&self) -> f64 {
        self.best.improvement_db()
    }

    pub fn final_eval(&self) -> &EpochEval {
        self.evals.last().expect("at least one evaluation")
    }
}

pub fn init_nets(cfg: &TrainConfig) -> Nets {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let gen = GeneratorNet::new(cfg.net, &mut rng);
    rng.set_stream(2);
    let disc = DiscriminatorNet::new(cfg.net, &mut rng);
    Nets {
        gen_opt: AdamState::new(cfg.optimizer, &gen.params),
        disc_opt: AdamState::new(cfg.optimizer, &disc.params),
        gen,
        disc,
    }
}

fn checkpoint(cfg: &TrainConfig, nets: &Nets) -> Checkpoint {
    Checkpoint {
        meta: cfg.to_json(),
        sections: vec![
            Section {
                name: "gen".into(),
                params: nets.gen.params.clone(),
                optimizer: Some(nets.gen_opt.clone()),
            },
            Section {
                name: "disc".into(),
                params: nets.disc.params.clone(),
                optimizer: Some(nets.disc_opt.clone()),
            },
        ],
    }
}

/// Generator and config stored in a checkpoint.
pub fn load_checkpoint(path: &Path) -> Result<(GeneratorNet, TrainConfig), TrainError> {
    let ck = Checkpoint::load(path)?;
    let cfg = TrainConfig::from_json(&ck.meta)?;
    let gen = ck.section("gen").ok_or_else(|| TrainError::MissingSection("gen".into()))?;
    Ok((GeneratorNet::from_params(gen.params.clone(), cfg.net), cfg))
}

fn eval_gen(gen: &GeneratorNet, plan: &Arc<StftPlan>, cfg: &TrainConfig, test: &[Example]) -> Result<EvalTable, TrainError> {
    let enhancer = GeneratorEnhancer {
        gen,
        plan: plan.clone(),
        compression: cfg.gen_loss.mag_compression,
    };
    evaluate(&enhancer, test, &cfg.ssnr)
}

/// Full run from a manifest on disk.
pub fn train(cfg: &TrainConfig) -> Result<TrainReport, TrainError> {
    cfg.validate()?;
    let plan = Arc::new(StftPlan::new(cfg.stft)?);
    let manifest = Manifest::load(&cfg.manifest)?;
    let c = cfg.gen_loss.mag_compression;
    let train_set = load_examples(&manifest, Split::Train, &plan, c, &cfg.ssnr)?;
    let test_set = load_examples(&manifest, Split::Test, &plan, c, &cfg.ssnr)?;
    if train_set.is_empty() || test_set.is_empty() {
        return Err(crate::data::DataError::EmptyCorpus.into());
    }
    train_on(cfg, &plan, &train_set, &test_set)
}

/// Training loop over preloaded examples.
pub fn train_on(
    cfg: &TrainConfig,
    plan: &Arc<StftPlan>,
    train_set: &[Example],
    test_set: &[Example],
) -> Result<TrainReport, TrainError> {
    train_on_hooked(cfg, plan, train_set, test_set, None)
}

/// `train_on` with a hook that may rewrite the part gradients of every
/// discriminator step before the direction is formed.
pub fn train_on_hooked(
    cfg: &TrainConfig,
    plan: &Arc<StftPlan>,
    train_set: &[Example],
    test_set: &[Example],
    mut hook: Option<PartHook<'_>>,
) -> Result<TrainReport, TrainError> {
    let out = &cfg.checkpoint_dir;
    std::fs::create_dir_all(out)?;
    let mut nets = init_nets(cfg);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    shuffle_rng.set_stream(3);
    let mut steps_csv = csv::Writer::from_path(out.join(STEPS_CSV))?;
    let mut surgery_csv = csv::Writer::from_path(out.join(SURGERY_CSV))?;
    let mut eval_csv = csv::Writer::from_path(out.join(EVAL_CSV))?;
    let mut records = Vec::new();
    let mut evals = Vec::new();
    let mut best: Option<(usize, EvalTable)> = None;
    let mut step = 0u64;
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    log::info!(
        "training mode {} for {} epochs on {} clips",
        cfg.mode().map_or("custom", |m| m.as_str()),
        cfg.epochs,
        train_set.len()
    );
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&Example> = chunk.iter().map(|&i| &train_set[i]).collect();
            step += 1;
            let mut d = None;
            for _ in 0..cfg.disc_steps_per_batch {
                let h = hook.as_mut().map(|h| &mut **h as PartHook<'_>);
                d = Some(disc_step(&batch, &mut nets, cfg, plan, step, h)?);
            }
            let d = d.expect("at least one discriminator step");
            let g = gen_step(&batch, &mut nets, cfg, plan, step)?;
            let rec = StepRecord::new(step, epoch, &d, &g);
            steps_csv.serialize(&rec)?;
            surgery_csv.serialize(surgery_row(step, &d))?;
            records.push(rec);
        }
        steps_csv.flush()?;
        if epoch % cfg.eval_every == 0 || epoch == cfg.epochs {
            let table = eval_gen(&nets.gen, plan, cfg, test_set)?;
            let m = &table.mean;
            let e = EpochEval {
                epoch,
                ssnr_noisy: m.ssnr_noisy,
                ssnr_enh: m.ssnr_enh,
                q_noisy: m.q_noisy,
                q_enh: m.q_enh,
            };
            log::info!(
                "epoch {epoch}: test SSNR {:.3} dB (noisy {:.3} dB)",
                e.ssnr_enh,
                e.ssnr_noisy
            );
            eval_csv.serialize(&e)?;
            eval_csv.flush()?;
            evals.push(e);
            if best.as_ref().map_or(true, |(_, b)| table.mean.ssnr_enh > b.mean.ssnr_enh) {
                checkpoint(cfg, &nets).save(&out.join(BEST_CKPT))?;
                best = Some((epoch, table));
            }
        }
    }
    surgery_csv.flush()?;
    checkpoint(cfg, &nets).save(&out.join(FINAL_CKPT))?;
    let (best_epoch, best) = best.expect("final epoch is always evaluated");
    write_eval_csv(&out.join(FINAL_EVAL_CSV), &best)?;
    Ok(TrainReport {
        records,
        evals,
        best_epoch,
        best,
        out_dir: out.clone(),
    })
}

fn angle(dot: f64, a: f64, b: f64) -> f64 {
    if a == 0.0 || b == 0.0 {
        f64::NAN
    } else {
        (dot / (a * b)).clamp(-1.0, 1.0).acos().to_degrees()
    }
}

fn surgery_row(step: u64, d: &super::step::DiscRecord) -> ConflictRow {
    let p = &d.parts;
    let angle_cen_deg = p.gn.as_ref().map(|gn| {
        let pair: Vec<f64> = p
            .gc
            .as_slice()
            .iter()
            .zip(p.ge.as_slice())
            .map(|(c, e)| d.w_c * c + d.w_e * e)
            .collect();
        let dot: f64 = pair.iter().zip(gn.as_slice()).map(|(a, b)| a * b).sum();
        let norm = pair.iter().map(|v| v * v).sum::<f64>().sqrt();
        angle(dot, norm, gn.norm())
    });
    ConflictRow {
        step,
        angle_ce_deg: angle(p.gc.dot(&p.ge).unwrap_or(f64::NAN), p.gc.norm(), p.ge.norm()),
        angle_cen_deg,
        w_c: d.w_c,
        w_e: d.w_e,
        w_n: d.w_n,
        branch: d.branch,
        degenerate: d.degenerate,
    }
}
