use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Per-element phase-only beamforming vector; every entry has modulus 1.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamWeights(Vec<Complex64>);

/// Network phase output θ; the applied phase is πθ.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseVector(pub Vec<f64>);

/// Euler mapping `w_n = cos(πθ_n) + j sin(πθ_n)`.
pub fn phases_to_weights(theta: &PhaseVector) -> BeamWeights {
    BeamWeights::from_phases(&theta.0)
}

impl BeamWeights {
    pub fn from_phases(theta: &[f64]) -> Self {
        Self(
            theta
                .iter()
                .map(|t| Complex64::new((PI * t).cos(), (PI * t).sin()))
                .collect(),
        )
    }

    /// `w_n = e^{j arg h_n}`, the maximiser of `|wᴴh|` under the modulus constraint.
    pub fn matched_filter(h: &[Complex64]) -> Self {
        Self(h.iter().map(|c| Complex64::from_polar(1.0, c.arg())).collect())
    }

    /// Wraps an existing vector after checking `| |w_n| − 1 | ≤ 1e-12`.
    pub fn from_unit_modulus(w: Vec<Complex64>) -> Result<Self> {
        if let Some((i, c)) = w
            .iter()
            .enumerate()
            .find(|(_, c)| (c.norm() - 1.0).abs() > 1e-12)
        {
            return Err(Error::Domain(format!(
                "entry {i} has modulus {}, expected 1",
                c.norm()
            )));
        }
        Ok(Self(w))
    }

    /// Caller guarantees unit modulus (entries built with `from_polar(1, ·)`).
    pub(crate) fn from_raw(w: Vec<Complex64>) -> Self {
        Self(w)
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<Complex64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn rotated(&self, phi: f64) -> Self {
        let rot = Complex64::from_polar(1.0, phi);
        Self(self.0.iter().map(|c| c * rot).collect())
    }

    pub fn max_modulus_error(&self) -> f64 {
        self.0
            .iter()
            .map(|c| (c.norm() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn euler_examples() {
        let w = phases_to_weights(&PhaseVector(vec![0.0, 0.5, -1.0]));
        assert_eq!(w.as_slice()[0], Complex64::new(1.0, 0.0));
        assert!((w.as_slice()[1] - Complex64::new(0.0, 1.0)).norm() < 1e-15);
        assert!((w.as_slice()[2] - Complex64::new(-1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn unit_modulus_check() {
        assert!(BeamWeights::from_unit_modulus(vec![Complex64::new(0.6, 0.8)]).is_ok());
        assert!(BeamWeights::from_unit_modulus(vec![Complex64::new(1.0, 0.1)]).is_err());
    }

    #[test]
    fn matched_filter_handles_zero() {
        let w = BeamWeights::matched_filter(&[Complex64::new(0.0, 0.0), Complex64::new(0.0, -2.0)]);
        assert!(w.max_modulus_error() < 1e-15);
    }
}
