mod common;

use scpgan::losses::PartGradients;
use scpgan::surgery::{Branch, GradVector};
use scpgan::trainer::{
    disc_step, evaluate, init_nets, train_on, train_on_hooked, MaskEnhancer, Mode, ScMode, TrainError, BEST_CKPT, FINAL_CKPT,
};

fn setup(dir: &std::path::Path, mode: Mode, epochs: usize) -> (scpgan::trainer::TrainConfig, scpgan::data::Manifest) {
    let corpus = dir.join("corpus");
    let manifest = common::tiny_corpus(&corpus, 6, 0.25, 2);
    let cfg = common::tiny_config(&corpus.join(scpgan::data::MANIFEST_FILE), &dir.join("run"), mode, epochs);
    (cfg, manifest)
}

#[test]
fn smoke_run_produces_finite_records_and_checkpoints() {
    let dir = tempfile::tempdir().unwrap();
    let (cfg, manifest) = setup(dir.path(), Mode::NdSc3Cp, 2);
    let (plan, train, test) = common::splits(&manifest, &cfg);
    let report = train_on(&cfg, &plan, &train, &test).unwrap();
    assert_eq!(report.evals.len(), 2);
    assert!(!report.records.is_empty());
    for r in &report.records {
        for v in [r.l_c, r.l_e, r.w_c, r.w_e, r.dot_c, r.dot_e, r.gen_total, r.gen_grad_norm] {
            assert!(v.is_finite());
        }
        assert!(r.l_n.is_some() && r.w_n.is_some());
        if !r.degenerate {
            assert!(r.dot_n.unwrap() >= -r.tolerance, "step {}", r.step);
        }
    }
    assert!(report.out_dir.join(BEST_CKPT).exists());
    assert!(report.out_dir.join(FINAL_CKPT).exists());
}

#[test]
fn sc_off_direction_is_the_plain_sum() {
    let dir = tempfile::tempdir().unwrap();
    for mode in [Mode::Baseline, Mode::Nd] {
        let (cfg, manifest) = setup(dir.path(), mode, 1);
        assert_eq!(cfg.sc, ScMode::Off);
        let (plan, train, _) = common::splits(&manifest, &cfg);
        let mut nets = init_nets(&cfg);
        let batch: Vec<_> = train.iter().take(cfg.batch_size).collect();
        let rec = disc_step(&batch, &mut nets, &cfg, &plan, 0, None).unwrap();
        let mut sum = rec.parts.gc.sum(&rec.parts.ge).unwrap();
        if let Some(gn) = &rec.parts.gn {
            sum = sum.sum(gn).unwrap();
        }
        let err = rec
            .direction
            .as_slice()
            .iter()
            .zip(sum.as_slice())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err <= 1e-10 * sum.norm().max(1.0), "{mode:?}: {err}");
        assert_eq!((rec.w_c, rec.w_e), (1.0, 1.0));
        assert!(matches!(rec.branch, Branch::AcuteAcute | Branch::TwoPartAcute));
    }
}

/// Replaces the enhanced-part gradient with one that opposes the clean part,
/// so every step must take the obtuse branch.
#[test]
fn injected_conflict_is_corrected() {
    let dir = tempfile::tempdir().unwrap();
    let (cfg, manifest) = setup(dir.path(), Mode::Sc2, 1);
    let (plan, train, test) = common::splits(&manifest, &cfg);
    let mut hook = |p: &mut PartGradients| {
        let v: Vec<f64> = p
            .gc
            .as_slice()
            .iter()
            .zip(p.ge.as_slice())
            .map(|(c, e)| -2.0 * c + 0.1 * e)
            .collect();
        p.ge = GradVector::new(v).unwrap();
    };
    let report = train_on_hooked(&cfg, &plan, &train, &test, Some(&mut hook)).unwrap();
    assert!(!report.records.is_empty());
    for r in &report.records {
        assert!(r.w_e < 1.0, "step {}: w_e {}", r.step, r.w_e);
        assert!(r.dot_c >= -r.tolerance && r.dot_e >= -r.tolerance, "step {}", r.step);
    }
}

#[test]
fn sc3_without_nd_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let (mut cfg, _) = setup(dir.path(), Mode::Sc2, 1);
    cfg.sc = ScMode::Sc3;
    assert!(matches!(scpgan::trainer::train(&cfg), Err(TrainError::Config(_))));
    let (mut cfg, _) = setup(dir.path(), Mode::Nd, 1);
    cfg.sc = ScMode::Sc2;
    assert!(matches!(cfg.validate(), Err(_)));
}

/// Two runs into the same directory leave byte-identical outputs.
#[test]
fn training_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (cfg, manifest) = setup(dir.path(), Mode::NdSc3Cp, 1);
    let (plan, train, test) = common::splits(&manifest, &cfg);
    let a = train_on(&cfg, &plan, &train, &test).unwrap();
    let first = common::tree_digest(&a.out_dir);
    let b = train_on(&cfg, &plan, &train, &test).unwrap();
    assert_eq!(a.records, b.records);
    assert!(first.iter().any(|(name, _)| name == FINAL_CKPT));
    assert_eq!(first, common::tree_digest(&b.out_dir));
}

#[test]
fn identity_and_zero_masks() {
    let dir = tempfile::tempdir().unwrap();
    let (cfg, manifest) = setup(dir.path(), Mode::Baseline, 1);
    let (plan, _, test) = common::splits(&manifest, &cfg);
    let id = evaluate(
        &MaskEnhancer {
            value: 1.0,
            plan: plan.clone(),
        },
        &test,
        &cfg.ssnr,
    )
    .unwrap();
    for r in &id.rows {
        assert!((r.ssnr_enh - r.ssnr_noisy).abs() < 1e-9);
        assert!((r.q_enh - r.q_noisy).abs() < 1e-9);
    }
    let zero = evaluate(&MaskEnhancer { value: 0.0, plan }, &test, &cfg.ssnr).unwrap();
    for r in &zero.rows {
        assert!(r.ssnr_enh.abs() < 1e-9, "{}", r.ssnr_enh);
    }
}
