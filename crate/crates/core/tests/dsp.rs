use proptest::prelude::*;
use scpgan::dsp::{
    self, check_cola, consistency_project_with, istft_with, shipped_configs, stft_with, Complex64, Spectrogram,
    StftPlan,
};

fn rel(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den.max(1e-300)).sqrt()
}

fn planes(s: &Spectrogram) -> Vec<f64> {
    s.bins().iter().flat_map(|c| [c.re, c.im]).collect()
}

fn spec_from(values: &[f64], plan: &StftPlan, len: usize) -> Spectrogram {
    let n = plan.n_frames(len).unwrap() * plan.params().n_bins();
    let bins = (0..n)
        .map(|i| Complex64::new(values[(2 * i) % values.len()], values[(2 * i + 1) % values.len()]))
        .collect();
    Spectrogram::from_bins(bins, *plan.params(), len).unwrap()
}

#[test]
fn shipped_configs_are_cola() {
    for p in shipped_configs() {
        assert!(check_cola(&p) < 1e-10, "{p:?}");
        p.validate().unwrap();
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn reconstruction_is_perfect(
        cfg in 0usize..4,
        x in prop::collection::vec(-1.0f64..1.0, 256..4000),
    ) {
        let plan = StftPlan::new(shipped_configs()[cfg]).unwrap();
        let y = istft_with(&plan, &stft_with(&plan, &x).unwrap(), x.len()).unwrap();
        prop_assert_eq!(y.len(), x.len());
        prop_assert!(rel(&y, &x) < 1e-6);
    }

    #[test]
    fn stft_and_istft_are_linear(
        x in prop::collection::vec(-1.0f64..1.0, 600),
        z in prop::collection::vec(-1.0f64..1.0, 600),
        a in -2.0f64..2.0,
        b in -2.0f64..2.0,
    ) {
        let plan = StftPlan::new(shipped_configs()[0]).unwrap();
        let mix: Vec<f64> = x.iter().zip(&z).map(|(p, q)| a * p + b * q).collect();
        let sx = stft_with(&plan, &x).unwrap();
        let sz = stft_with(&plan, &z).unwrap();
        let lhs = stft_with(&plan, &mix).unwrap();
        let rhs = sx.linear_combination(a, &sz, b).unwrap();
        prop_assert!(rel(&planes(&lhs), &planes(&rhs)) < 1e-12);
        let back = istft_with(&plan, &rhs, mix.len()).unwrap();
        prop_assert!(rel(&back, &mix) < 1e-10);
    }

    #[test]
    fn projection_is_idempotent_linear_and_non_expansive(
        v in prop::collection::vec(-1.0f64..1.0, 64..512),
        w in prop::collection::vec(-1.0f64..1.0, 64..512),
        len in 300usize..3000,
        a in -2.0f64..2.0,
    ) {
        let plan = StftPlan::new(shipped_configs()[0]).unwrap();
        let s1 = spec_from(&v, &plan, len);
        let s2 = spec_from(&w, &plan, len);
        let p1 = consistency_project_with(&plan, &s1).unwrap();
        let pp1 = consistency_project_with(&plan, &p1).unwrap();
        prop_assert!(rel(&planes(&pp1), &planes(&p1)) < 1e-6);

        let mixed = s1.linear_combination(a, &s2, 1.0).unwrap();
        let lhs = consistency_project_with(&plan, &mixed).unwrap();
        let p2 = consistency_project_with(&plan, &s2).unwrap();
        let rhs = p1.linear_combination(a, &p2, 1.0).unwrap();
        prop_assert!(rel(&planes(&lhs), &planes(&rhs)) < 1e-6);

        prop_assert!(p1.frobenius_norm() <= s1.frobenius_norm() * (1.0 + 1e-6));
        prop_assert_eq!(p1.get(0, 0).im, 0.0);
    }
}

#[test]
fn projection_of_true_stft_is_fixed_point() {
    let plan = StftPlan::new(shipped_configs()[0]).unwrap();
    let x: Vec<f64> = (0..5000).map(|i| ((i * i) as f64 * 1e-4).sin()).collect();
    let s = stft_with(&plan, &x).unwrap();
    let p = dsp::consistency_project_with(&plan, &s).unwrap();
    assert!(rel(&planes(&p), &planes(&s)) < 1e-6);
}
