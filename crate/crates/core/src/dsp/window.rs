use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Analysis/synthesis window pair.
///
/// `Hann` analyses with a periodic Hann window and synthesises with a
/// rectangular one; `SqrtHann` uses the square root of the periodic Hann
/// window on both sides.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    Hann,
    SqrtHann,
}

impl Window {
    pub fn analysis(self, len: usize) -> Vec<f64> {
        match self {
            Window::Hann => periodic_hann(len),
            Window::SqrtHann => periodic_hann(len).into_iter().map(f64::sqrt).collect(),
        }
    }

    /// Synthesis window before gain normalisation.
    pub fn synthesis(self, len: usize) -> Vec<f64> {
        match self {
            Window::Hann => vec![1.0; len],
            Window::SqrtHann => periodic_hann(len).into_iter().map(f64::sqrt).collect(),
        }
    }
}

pub fn periodic_hann(len: usize) -> Vec<f64> {
    (0..len)
        .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / len as f64).cos())
        .collect()
}

/// Steady-state overlap-add sum of `product` at hop `hop`, one value per
/// phase `0..hop`.
pub(crate) fn overlap_add_profile(product: &[f64], hop: usize) -> Vec<f64> {
    let mut profile = vec![0.0; hop];
    for (j, &p) in product.iter().enumerate() {
        profile[j % hop] += p;
    }
    profile
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sqrt_hann_squares_to_hann() {
        let w = Window::SqrtHann.analysis(16);
        let h = periodic_hann(16);
        for (a, b) in w.iter().zip(&h) {
            assert!((a * a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn periodic_hann_starts_at_zero_and_peaks_mid() {
        let h = periodic_hann(8);
        assert_eq!(h[0], 0.0);
        assert!((h[4] - 1.0).abs() < 1e-15);
    }
}
