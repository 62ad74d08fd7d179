use proptest::prelude::*;
use scpgan::surgery::{combine, conflict_report, sc2_weights, sc3_weights, sign_tolerance, Branch, GradVector};

fn gv(v: &[f64]) -> GradVector {
    GradVector::new(v.to_vec()).unwrap()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[test]
fn two_part_hand_traces() {
    let w = sc2_weights(&gv(&[1.0, 0.0]), &gv(&[0.5, 0.5])).unwrap();
    assert_eq!((w.w_c, w.w_e, w.branch, w.degenerate), (1.0, 1.0, Branch::TwoPartAcute, false));

    let (gc, ge) = (gv(&[1.0, 0.0]), gv(&[-1.0, 1.0]));
    let w = sc2_weights(&gc, &ge).unwrap();
    assert!((w.w_e - 0.5).abs() < 1e-12);
    let g = combine(&gc, &ge, None, &w).unwrap();
    assert_eq!(g.as_slice(), &[0.5, 0.5]);
    assert!(dot(g.as_slice(), ge.as_slice()).abs() < 1e-12);

    let (gc, ge) = (gv(&[1.0, 0.0]), gv(&[-1.0, 0.0]));
    let w = sc2_weights(&gc, &ge).unwrap();
    assert!((w.w_e - 1.0).abs() < 1e-12);
    assert!(w.degenerate);
    assert_eq!(combine(&gc, &ge, None, &w).unwrap().as_slice(), &[0.0, 0.0]);
}

#[test]
fn three_part_hand_traces() {
    let (gc, ge, gn) = (gv(&[1.0, 0.0, 0.0]), gv(&[1.0, 1.0, 0.0]), gv(&[1.0, 0.0, 1.0]));
    let w = sc3_weights(&gc, &ge, &gn).unwrap();
    assert_eq!((w.w_e, w.w_n, w.branch), (1.0, Some(1.0), Branch::AcuteAcute));

    let gn = gv(&[-1.0, 0.0, 0.0]);
    let w = sc3_weights(&gc, &ge, &gn).unwrap();
    assert_eq!(w.branch, Branch::AcuteObtuse);
    assert!((w.w_n.unwrap() - 2.0).abs() < 1e-12);
    let g = combine(&gc, &ge, Some(&gn), &w).unwrap();
    for (a, b) in g.as_slice().iter().zip([0.0, 1.0, 0.0]) {
        assert!((a - b).abs() < 1e-12);
    }

    let (ge, gn) = (gv(&[-1.0, 1.0, 0.0]), gv(&[0.0, -1.0, 0.0]));
    let w = sc3_weights(&gc, &ge, &gn).unwrap();
    assert_eq!(w.branch, Branch::ObtuseObtuse);
    assert!((w.w_e - 0.5).abs() < 1e-12);
    assert!((w.w_n.unwrap() - 0.5).abs() < 1e-12);
    let g = combine(&gc, &ge, Some(&gn), &w).unwrap();
    for (a, b) in g.as_slice().iter().zip([0.5, 0.0, 0.0]) {
        assert!((a - b).abs() < 1e-12);
    }
    assert!(dot(g.as_slice(), gn.as_slice()).abs() < 1e-12);
}

#[test]
fn report_flags_orthogonal_final_direction_as_non_obtuse() {
    let (gc, ge, gn) = (gv(&[1.0, 0.0, 0.0]), gv(&[1.0, 1.0, 0.0]), gv(&[-1.0, 0.0, 0.0]));
    let r = conflict_report(&gc, &ge, Some(&gn)).unwrap();
    assert_eq!(r.weights.branch, Branch::AcuteObtuse);
    assert!(!r.obtuse_n);
    assert!(r.final_dot_n.unwrap().abs() < 1e-12);
}

fn vec_strategy(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    (prop::collection::vec(-1.0f64..1.0, dim), -6.0f64..6.0)
        .prop_map(|(v, e)| v.into_iter().map(|x| x * 10f64.powf(e)).collect())
}

fn triple() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>)> {
    (2usize..64).prop_flat_map(|d| (vec_strategy(d), vec_strategy(d), vec_strategy(d)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn sc2_direction_is_never_obtuse((c, e, _n) in triple()) {
        let (gc, ge) = (gv(&c), gv(&e));
        let w = sc2_weights(&gc, &ge).unwrap();
        prop_assert!(w.w_c == 1.0 && w.w_e >= 0.0);
        let g = combine(&gc, &ge, None, &w).unwrap();
        let tau = sign_tolerance(&g, &[&gc, &ge]);
        prop_assert!(dot(g.as_slice(), &c) >= -tau);
        prop_assert!(dot(g.as_slice(), &e) >= -tau);
    }

    #[test]
    fn sc3_direction_is_never_obtuse_to_noisy((c, e, n) in triple()) {
        let (gc, ge, gn) = (gv(&c), gv(&e), gv(&n));
        let w = sc3_weights(&gc, &ge, &gn).unwrap();
        let g = combine(&gc, &ge, Some(&gn), &w).unwrap();
        let tau = sign_tolerance(&g, &[&gc, &ge, &gn]);
        prop_assert!(dot(g.as_slice(), &n) >= -tau);
        if w.w_n != Some(1.0) {
            // Corrected: orthogonal to gn, relative to the weighted parts.
            let scale = (gc.norm() + w.w_e * ge.norm() + w.w_n.unwrap().abs() * gn.norm()) * gn.norm();
            prop_assert!(dot(g.as_slice(), &n).abs() <= 1e-9 * scale);
        }
    }

    #[test]
    fn acute_inputs_sum_bit_for_bit(c in prop::collection::vec(0.01f64..10.0, 2..50)) {
        let e: Vec<f64> = c.iter().map(|x| x * 0.7 + 0.1).collect();
        let n: Vec<f64> = c.iter().map(|x| x * 1.3).collect();
        let (gc, ge, gn) = (gv(&c), gv(&e), gv(&n));
        let w = sc3_weights(&gc, &ge, &gn).unwrap();
        prop_assert_eq!(w.branch, Branch::AcuteAcute);
        let g = combine(&gc, &ge, Some(&gn), &w).unwrap();
        let plain: Vec<f64> = c.iter().zip(&e).zip(&n).map(|((a, b), d)| a + b + d).collect();
        prop_assert_eq!(g.as_slice(), plain.as_slice());
    }

    #[test]
    fn obtuse_correction_is_scale_invariant((c, e, _n) in triple(), k in -3i32..4) {
        let alpha = 2f64.powi(k);
        let (gc, ge) = (gv(&c), gv(&e));
        let w = sc2_weights(&gc, &ge).unwrap();
        prop_assume!(w.branch == Branch::TwoPartObtuse && !w.degenerate);
        let scaled = gv(&e.iter().map(|x| x * alpha).collect::<Vec<_>>());
        let ws = sc2_weights(&gc, &scaled).unwrap();
        let g = combine(&gc, &ge, None, &w).unwrap();
        let gs = combine(&gc, &scaled, None, &ws).unwrap();
        for (a, b) in g.as_slice().iter().zip(gs.as_slice()) {
            prop_assert!((a - b).abs() <= 1e-12 * gc.norm());
        }
    }
}
