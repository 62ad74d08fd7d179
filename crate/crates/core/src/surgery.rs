//! Self-correcting weights for two- and three-part discriminator losses.
//!
//! Given the per-part gradients `∇L_C`, `∇L_E` and optionally `∇L_N`, the
//! weights are chosen so the combined update never points obtusely against
//! `∇L_E` (and, for three parts, against `∇L_N`). Corrections are applied
//! in the fixed order C → E → N. An inner product of exactly zero counts as
//! a conflict (the acute test is strict).

use serde::Serialize;
use std::fmt;
use thiserror::Error;

/// Norms below this are treated as vanishing when they appear in a
/// denominator; the affected weight falls back to 1.
pub const DEGENERATE_NORM: f64 = 1e-12;

/// Relative tolerance scale for sign checks on inner products.
pub const SIGN_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SurgeryError {
    #[error("gradient length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("gradient contains a non-finite value at index {0}")]
    NonFinite(usize),
    #[error("noisy-part weight and gradient must be supplied together")]
    PartMismatch,
}

/// Flattened parameter gradient of one loss part.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GradVector(Vec<f64>);

impl GradVector {
    pub fn new(values: Vec<f64>) -> Result<Self, SurgeryError> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(SurgeryError::NonFinite(i));
        }
        Ok(Self(values))
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        accurate_dot(&self.0, &self.0).sqrt()
    }

    pub fn dot(&self, other: &GradVector) -> Result<f64, SurgeryError> {
        check_len(self, other)?;
        Ok(accurate_dot(&self.0, &other.0))
    }

    pub fn scaled(&self, k: f64) -> GradVector {
        GradVector(self.0.iter().map(|v| v * k).collect())
    }

    /// Elementwise `self + other`.
    pub fn sum(&self, other: &GradVector) -> Result<GradVector, SurgeryError> {
        check_len(self, other)?;
        Ok(GradVector(
            self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect(),
        ))
    }
}

impl From<GradVector> for Vec<f64> {
    fn from(g: GradVector) -> Self {
        g.0
    }
}

fn check_len(a: &GradVector, b: &GradVector) -> Result<(), SurgeryError> {
    if a.len() != b.len() {
        return Err(SurgeryError::LengthMismatch(a.len(), b.len()));
    }
    Ok(())
}

// Error-free transformations (Ogita, Rump & Oishi "Dot2"): the result is as
// accurate as if computed in twice the working precision.
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let z = s - a;
    (s, (a - (s - z)) + (b - z))
}

fn split(a: f64) -> (f64, f64) {
    const FACTOR: f64 = 134_217_729.0; // 2^27 + 1
    let c = FACTOR * a;
    let hi = c - (c - a);
    (hi, a - hi)
}

fn two_product(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    let (ah, al) = split(a);
    let (bh, bl) = split(b);
    (p, al * bl - (((p - ah * bh) - al * bh) - ah * bl))
}

fn accurate_dot(x: &[f64], y: &[f64]) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        let (p, pe) = two_product(a, b);
        let (s, se) = two_sum(sum, p);
        sum = s;
        comp += pe + se;
    }
    sum + comp
}

/// Inner product and both L2 norms.
pub fn dot_and_norms(g1: &GradVector, g2: &GradVector) -> Result<(f64, f64, f64), SurgeryError> {
    check_len(g1, g2)?;
    Ok((
        accurate_dot(&g1.0, &g2.0),
        accurate_dot(&g1.0, &g1.0).sqrt(),
        accurate_dot(&g2.0, &g2.0).sqrt(),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    AcuteAcute,
    AcuteObtuse,
    ObtuseAcute,
    ObtuseObtuse,
    TwoPartAcute,
    TwoPartObtuse,
}

impl Branch {
    pub fn as_str(self) -> &'static str {
        match self {
            Branch::AcuteAcute => "acute_acute",
            Branch::AcuteObtuse => "acute_obtuse",
            Branch::ObtuseAcute => "obtuse_acute",
            Branch::ObtuseObtuse => "obtuse_obtuse",
            Branch::TwoPartAcute => "two_part_acute",
            Branch::TwoPartObtuse => "two_part_obtuse",
        }
    }

    /// Whether the C/E pair was corrected.
    pub fn ce_corrected(self) -> bool {
        matches!(
            self,
            Branch::ObtuseAcute | Branch::ObtuseObtuse | Branch::TwoPartObtuse
        )
    }

    /// Whether the N part was corrected.
    pub fn n_corrected(self) -> bool {
        matches!(self, Branch::AcuteObtuse | Branch::ObtuseObtuse)
    }
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScWeights {
    pub w_c: f64,
    pub w_e: f64,
    pub w_n: Option<f64>,
    pub branch: Branch,
    pub degenerate: bool,
}

impl ScWeights {
    /// All-ones weights (the unweighted sum).
    pub fn unit(three_part: bool) -> Self {
        Self {
            w_c: 1.0,
            w_e: 1.0,
            w_n: three_part.then_some(1.0),
            branch: if three_part {
                Branch::AcuteAcute
            } else {
                Branch::TwoPartAcute
            },
            degenerate: false,
        }
    }
}

fn pair_weight(dot_ce: f64, norm_e_sq: f64) -> (f64, bool, bool) {
    // (w_e, corrected, degenerate)
    if dot_ce > 0.0 {
        (1.0, false, false)
    } else if norm_e_sq.sqrt() < DEGENERATE_NORM {
        (1.0, true, true)
    } else {
        (-dot_ce / norm_e_sq, true, false)
    }
}

/// `g` has cancelled to rounding noise relative to the weighted parts.
fn collapsed(g: &GradVector, scale: f64) -> bool {
    g.norm() <= DEGENERATE_NORM * scale.max(DEGENERATE_NORM)
}

pub fn sc2_weights(gc: &GradVector, ge: &GradVector) -> Result<ScWeights, SurgeryError> {
    check_len(gc, ge)?;
    let dot_ce = accurate_dot(&gc.0, &ge.0);
    let norm_e_sq = accurate_dot(&ge.0, &ge.0);
    let (w_e, corrected, mut degenerate) = pair_weight(dot_ce, norm_e_sq);
    let mut w = ScWeights {
        w_c: 1.0,
        w_e,
        w_n: None,
        branch: if corrected {
            Branch::TwoPartObtuse
        } else {
            Branch::TwoPartAcute
        },
        degenerate,
    };
    if corrected && !degenerate {
        let g = combine(gc, ge, None, &w)?;
        degenerate = collapsed(&g, gc.norm().max(w_e.abs() * norm_e_sq.sqrt()));
        w.degenerate = degenerate;
    }
    Ok(w)
}

pub fn sc3_weights(gc: &GradVector, ge: &GradVector, gn: &GradVector) -> Result<ScWeights, SurgeryError> {
    check_len(gc, ge)?;
    check_len(gc, gn)?;
    let dot_ce = accurate_dot(&gc.0, &ge.0);
    let dot_cn = accurate_dot(&gc.0, &gn.0);
    let dot_en = accurate_dot(&ge.0, &gn.0);
    let norm_e_sq = accurate_dot(&ge.0, &ge.0);
    let norm_n_sq = accurate_dot(&gn.0, &gn.0);

    let (w_e, ce_corrected, mut degenerate) = pair_weight(dot_ce, norm_e_sq);
    // <w_c gc + w_e ge, gn>
    let pair_dot_n = dot_cn + w_e * dot_en;
    let (w_n, n_corrected) = if pair_dot_n > 0.0 {
        (1.0, false)
    } else if norm_n_sq.sqrt() < DEGENERATE_NORM {
        degenerate = true;
        (1.0, true)
    } else if !ce_corrected {
        (-dot_cn / norm_n_sq - dot_en / norm_n_sq, true)
    } else if degenerate {
        // w_e fell back to 1, so the closed form below does not apply.
        (-(dot_cn + dot_en) / norm_n_sq, true)
    } else {
        (
            -dot_cn / norm_n_sq + dot_ce * dot_en / (norm_e_sq * norm_n_sq),
            true,
        )
    };
    let branch = match (ce_corrected, n_corrected) {
        (false, false) => Branch::AcuteAcute,
        (false, true) => Branch::AcuteObtuse,
        (true, false) => Branch::ObtuseAcute,
        (true, true) => Branch::ObtuseObtuse,
    };
    let mut w = ScWeights {
        w_c: 1.0,
        w_e,
        w_n: Some(w_n),
        branch,
        degenerate,
    };
    if (ce_corrected || n_corrected) && !degenerate {
        let g = combine(gc, ge, Some(gn), &w)?;
        let scale = gc
            .norm()
            .max(w_e.abs() * norm_e_sq.sqrt())
            .max(w_n.abs() * norm_n_sq.sqrt());
        w.degenerate = collapsed(&g, scale);
    }
    Ok(w)
}

/// `w_c·gc + w_e·ge (+ w_n·gn)`.
pub fn combine(
    gc: &GradVector,
    ge: &GradVector,
    gn: Option<&GradVector>,
    w: &ScWeights,
) -> Result<GradVector, SurgeryError> {
    check_len(gc, ge)?;
    let out = match (gn, w.w_n) {
        (None, None) => gc
            .0
            .iter()
            .zip(&ge.0)
            .map(|(c, e)| w.w_c * c + w.w_e * e)
            .collect(),
        (Some(gn), Some(w_n)) => {
            check_len(gc, gn)?;
            gc.0.iter()
                .zip(&ge.0)
                .zip(&gn.0)
                .map(|((c, e), n)| w.w_c * c + w.w_e * e + w_n * n)
                .collect()
        }
        _ => return Err(SurgeryError::PartMismatch),
    };
    Ok(GradVector(out))
}

/// Sign-check tolerance for the combined direction `g` against a part.
pub fn sign_tolerance(g: &GradVector, parts: &[&GradVector]) -> f64 {
    let scale = parts.iter().map(|p| p.norm()).fold(0.0, f64::max);
    SIGN_TOLERANCE * g.norm() * scale
}

/// Pure measurement of the geometry behind one weighting decision.
#[derive(Debug, Clone, PartialEq)]
pub struct ConflictReport {
    pub angle_ce_deg: f64,
    /// Angle between the corrected C/E direction and `∇L_N`.
    pub angle_cen_deg: Option<f64>,
    pub norm_c: f64,
    pub norm_e: f64,
    pub norm_n: Option<f64>,
    pub weights: ScWeights,
    /// Inner products of the final direction with each part.
    pub final_dot_c: f64,
    pub final_dot_e: f64,
    pub final_dot_n: Option<f64>,
    pub obtuse_c: bool,
    pub obtuse_e: bool,
    pub obtuse_n: bool,
}

fn angle_deg(dot: f64, n1: f64, n2: f64) -> f64 {
    if n1 == 0.0 || n2 == 0.0 {
        return f64::NAN;
    }
    (dot / (n1 * n2)).clamp(-1.0, 1.0).acos().to_degrees()
}

pub fn conflict_report(
    gc: &GradVector,
    ge: &GradVector,
    gn: Option<&GradVector>,
) -> Result<ConflictReport, SurgeryError> {
    let weights = match gn {
        Some(gn) => sc3_weights(gc, ge, gn)?,
        None => sc2_weights(gc, ge)?,
    };
    let (dot_ce, norm_c, norm_e) = dot_and_norms(gc, ge)?;
    let g = combine(gc, ge, gn, &weights)?;
    let final_dot_c = g.dot(gc)?;
    let final_dot_e = g.dot(ge)?;
    let (angle_cen_deg, norm_n, final_dot_n) = match gn {
        Some(gn) => {
            let pair = combine(
                gc,
                ge,
                None,
                &ScWeights {
                    w_n: None,
                    ..weights
                },
            )?;
            let (d, np, nn) = dot_and_norms(&pair, gn)?;
            (Some(angle_deg(d, np, nn)), Some(nn), Some(g.dot(gn)?))
        }
        None => (None, None, None),
    };
    Ok(ConflictReport {
        angle_ce_deg: angle_deg(dot_ce, norm_c, norm_e),
        angle_cen_deg,
        norm_c,
        norm_e,
        norm_n,
        weights,
        final_dot_c,
        final_dot_e,
        final_dot_n,
        obtuse_c: final_dot_c < 0.0,
        obtuse_e: final_dot_e < 0.0,
        obtuse_n: final_dot_n.is_some_and(|d| d < 0.0),
    })
}

/// One row of the per-step surgery CSV.
#[derive(Debug, Clone, Serialize)]
pub struct ConflictRow {
    pub step: u64,
    pub angle_ce_deg: f64,
    pub angle_cen_deg: Option<f64>,
    pub w_c: f64,
    pub w_e: f64,
    pub w_n: Option<f64>,
    pub branch: Branch,
    pub degenerate: bool,
}

impl ConflictReport {
    pub fn row(&self, step: u64) -> ConflictRow {
        ConflictRow {
            step,
            angle_ce_deg: self.angle_ce_deg,
            angle_cen_deg: self.angle_cen_deg,
            w_c: self.weights.w_c,
            w_e: self.weights.w_e,
            w_n: self.weights.w_n,
            branch: self.weights.branch,
            degenerate: self.weights.degenerate,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gv(v: &[f64]) -> GradVector {
        GradVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn dot_and_norm_basics() {
        assert_eq!(dot_and_norms(&gv(&[1.0, 0.0]), &gv(&[0.0, 1.0])).unwrap(), (0.0, 1.0, 1.0));
        assert_eq!(dot_and_norms(&gv(&[1.0, 2.0]), &gv(&[3.0, 4.0])).unwrap().0, 11.0);
        assert_eq!(
            dot_and_norms(&gv(&[1.0]), &gv(&[1.0, 2.0])),
            Err(SurgeryError::LengthMismatch(1, 2))
        );
    }

    #[test]
    fn accurate_dot_survives_cancellation() {
        let x = [1e16, 1.0, -1e16];
        let y = [1.0, 1.0, 1.0];
        assert_eq!(accurate_dot(&x, &y), 1.0);
    }

    #[test]
    fn sc2_acute_pair_keeps_unit_weights() {
        let w = sc2_weights(&gv(&[1.0, 0.0]), &gv(&[0.5, 0.5])).unwrap();
        assert_eq!((w.w_c, w.w_e, w.branch), (1.0, 1.0, Branch::TwoPartAcute));
    }

    #[test]
    fn sc2_obtuse_pair_is_orthogonalised() {
        let (gc, ge) = (gv(&[1.0, 0.0]), gv(&[-1.0, 1.0]));
        let w = sc2_weights(&gc, &ge).unwrap();
        assert_eq!(w.w_e, 0.5);
        let g = combine(&gc, &ge, None, &w).unwrap();
        assert_eq!(g.as_slice(), &[0.5, 0.5]);
        assert_eq!(g.dot(&ge).unwrap(), 0.0);
        assert!(!w.degenerate);
    }

    #[test]
    fn sc2_anti_parallel_collapses() {
        let (gc, ge) = (gv(&[1.0, 0.0]), gv(&[-1.0, 0.0]));
        let w = sc2_weights(&gc, &ge).unwrap();
        assert_eq!(w.w_e, 1.0);
        assert!(w.degenerate);
        assert_eq!(combine(&gc, &ge, None, &w).unwrap().as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn sc2_vanishing_enhanced_gradient() {
        let w = sc2_weights(&gv(&[1.0, 0.0]), &gv(&[0.0, 0.0])).unwrap();
        assert_eq!(w.w_e, 1.0);
        assert!(w.degenerate);
    }

    #[test]
    fn sc3_all_acute() {
        let w = sc3_weights(&gv(&[1.0, 0.0, 0.0]), &gv(&[1.0, 1.0, 0.0]), &gv(&[1.0, 0.0, 1.0])).unwrap();
        assert_eq!((w.w_e, w.w_n, w.branch), (1.0, Some(1.0), Branch::AcuteAcute));
    }

    #[test]
    fn sc3_noisy_conflict_after_acute_pair() {
        let (gc, ge, gn) = (gv(&[1.0, 0.0, 0.0]), gv(&[1.0, 1.0, 0.0]), gv(&[-1.0, 0.0, 0.0]));
        let w = sc3_weights(&gc, &ge, &gn).unwrap();
        assert_eq!(w.w_n, Some(2.0));
        assert_eq!(w.branch, Branch::AcuteObtuse);
        let g = combine(&gc, &ge, Some(&gn), &w).unwrap();
        assert_eq!(g.as_slice(), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn sc3_both_corrected() {
        let (gc, ge, gn) = (gv(&[1.0, 0.0, 0.0]), gv(&[-1.0, 1.0, 0.0]), gv(&[0.0, -1.0, 0.0]));
        let w = sc3_weights(&gc, &ge, &gn).unwrap();
        assert_eq!(w.w_e, 0.5);
        assert_eq!(w.w_n, Some(0.5));
        assert_eq!(w.branch, Branch::ObtuseObtuse);
        let g = combine(&gc, &ge, Some(&gn), &w).unwrap();
        assert_eq!(g.as_slice(), &[0.5, 0.0, 0.0]);
    }

    #[test]
    fn combine_with_zero_noisy_part_matches_two_part() {
        let (gc, ge) = (gv(&[1.0, -2.0]), gv(&[0.3, 0.7]));
        let two = ScWeights { w_e: 0.4, ..ScWeights::unit(false) };
        let three = ScWeights { w_e: 0.4, w_n: Some(17.0), ..ScWeights::unit(true) };
        let a = combine(&gc, &ge, None, &two).unwrap();
        let b = combine(&gc, &ge, Some(&GradVector::zeros(2)), &three).unwrap();
        assert_eq!(a, b);
        assert_eq!(
            combine(&gc, &ge, Some(&GradVector::zeros(2)), &two),
            Err(SurgeryError::PartMismatch)
        );
    }

    #[test]
    fn report_boundary_and_identity() {
        let r = conflict_report(&gv(&[1.0, 0.0]), &gv(&[0.0, 1.0]), None).unwrap();
        assert!((r.angle_ce_deg - 90.0).abs() < 1e-12);
        assert_eq!(r.weights.branch, Branch::TwoPartObtuse);
        let r = conflict_report(&gv(&[0.3, 0.4]), &gv(&[0.3, 0.4]), None).unwrap();
        assert!(r.angle_ce_deg.abs() < 1e-6);
        let r = conflict_report(&gv(&[1.0, 0.0, 0.0]), &gv(&[1.0, 1.0, 0.0]), Some(&gv(&[-1.0, 0.0, 0.0]))).unwrap();
        assert_eq!(r.final_dot_n, Some(0.0));
        assert!(!r.obtuse_n);
    }

    #[test]
    fn rejects_non_finite() {
        assert_eq!(GradVector::new(vec![0.0, f64::NAN]), Err(SurgeryError::NonFinite(1)));
    }
}
