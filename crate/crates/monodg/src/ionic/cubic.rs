//! Cubic bistable reaction: `f(u) = a (u - V_rest)(u - V_thres)(u - V_depol)`.
//! Carries no internal state; the classic benchmark nonlinearity for
//! traveling-front studies.

use super::IonicModel;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct CubicReaction {
    /// Scale, conductance per voltage squared.
    pub a: f64,
    /// Stable resting potential, mV.
    pub v_rest: f64,
    /// Unstable threshold potential, mV.
    pub v_thres: f64,
    /// Stable depolarized potential, mV.
    pub v_depol: f64,
}

impl Default for CubicReaction {
    fn default() -> Self {
        CubicReaction {
            a: 1.4e-5,
            v_rest: -85.0,
            v_thres: -57.6,
            v_depol: 30.0,
        }
    }
}

impl CubicReaction {
    /// Sum of the three root potentials.
    pub fn root_sum(&self) -> f64 {
        self.v_rest + self.v_thres + self.v_depol
    }

    /// Sum of pairwise products of the roots.
    pub fn root_pair_sum(&self) -> f64 {
        self.v_rest * self.v_thres + self.v_rest * self.v_depol + self.v_thres * self.v_depol
    }

    /// Product of the three roots.
    pub fn root_product(&self) -> f64 {
        self.v_rest * self.v_thres * self.v_depol
    }

    /// Expanded form `a (u³ - φu² + θu - ω)` with φ, θ, ω the elementary
    /// symmetric functions of the roots; equals the factored form.
    pub fn expanded_current(&self, u: f64) -> f64 {
        let phi = self.root_sum();
        let theta = self.root_pair_sum();
        let omega = self.root_product();
        self.a * (u * u * u - phi * u * u + theta * u - omega)
    }
}

impl IonicModel for CubicReaction {
    fn n_state(&self) -> usize {
        0
    }

    fn current(&self, u: f64, _y: &[f64]) -> f64 {
        self.a * (u - self.v_rest) * (u - self.v_thres) * (u - self.v_depol)
    }

    fn state_rate(&self, _u: f64, _y: &[f64], _out: &mut [f64]) {}

    fn initial_state(&self) -> Vec<f64> {
        Vec::new()
    }

    fn clamp_state(&self, _y: &mut [f64]) {}

    fn current_du(&self, u: f64, _y: &[f64]) -> f64 {
        let (r, t, d) = (self.v_rest, self.v_thres, self.v_depol);
        self.a * ((u - t) * (u - d) + (u - r) * (u - d) + (u - r) * (u - t))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn roots_are_exact_zeros() {
        let f = CubicReaction::default();
        assert_eq!(f.current(f.v_rest, &[]), 0.0);
        assert_eq!(f.current(f.v_thres, &[]), 0.0);
        assert_eq!(f.current(f.v_depol, &[]), 0.0);
    }

    #[test]
    fn value_at_zero_matches_direct_arithmetic() {
        let f = CubicReaction::default();
        // 1.4e-5 * 85 * 57.6 * (-30)
        assert_relative_eq!(f.current(0.0, &[]), -2.05632, epsilon = 1e-12);
    }

    #[test]
    fn expanded_form_matches_factored() {
        let f = CubicReaction::default();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let u: f64 = rng.random_range(-120.0..60.0);
            let fac = f.current(u, &[]);
            let exp = f.expanded_current(u);
            assert_relative_eq!(fac, exp, epsilon = 1e-12, max_relative = 1e-12);
        }
    }

    #[test]
    fn derivative_matches_central_difference() {
        let f = CubicReaction::default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let u: f64 = rng.random_range(-100.0..50.0);
            let h = 1e-4;
            let fd = (f.current(u + h, &[]) - f.current(u - h, &[])) / (2.0 * h);
            assert_relative_eq!(f.current_du(u, &[]), fd, max_relative = 1e-6, epsilon = 1e-9);
        }
    }
}
