//! Pointwise ionic models supplying the reaction terms of the monodomain
//! equation: a current density `f(u, y)` entering the potential equation and
//! a rate vector `m(u, y)` driving the internal state via `dy/dt = -m(u, y)`.
//!
//! Models are pure functions of `(u, y)`; the solver evaluates them at
//! quadrature points and tests the result against the basis.

mod barreto_cressman;
mod cubic;

pub use barreto_cressman::{
    BarretoCressman, Currents, GatingRates, gating_rates, state_index,
};
pub use cubic::CubicReaction;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum IonicError {
    /// A Nernst-potential argument left its domain (log of a non-positive
    /// ratio); names the concentration responsible.
    #[error("Nernst argument for {species} is non-positive ({value}); state left the physiological range")]
    NernstDomain { species: &'static str, value: f64 },
}

/// A pointwise ionic model. Implementations must be pure: the same `(u, y)`
/// always produces bitwise identical outputs.
pub trait IonicModel: Send + Sync {
    /// Number of internal state components carried per evaluation point.
    fn n_state(&self) -> usize;

    /// Ionic current density `f(u, y)` (µA/cm² in membrane units). Enters
    /// the potential equation as `χ C ∂u/∂t - ∇·(Σ∇u) + χ f = I_ext`.
    fn current(&self, u: f64, y: &[f64]) -> f64;

    /// Rate vector `m(u, y)`; the state evolves as `dy/dt = -m(u, y)`.
    /// `out` has length `n_state()`.
    fn state_rate(&self, u: f64, y: &[f64], out: &mut [f64]);

    /// Reference initial state (resting values).
    fn initial_state(&self) -> Vec<f64>;

    /// Clamp a state vector to its admissible range (gates to [0, 1],
    /// concentrations floored at 1e-9) after an explicit update.
    fn clamp_state(&self, y: &mut [f64]);

    /// Analytic ∂f/∂u at fixed state, used for diagnostics and checked
    /// against finite differences in tests.
    fn current_du(&self, u: f64, y: &[f64]) -> f64;

    /// Column label for state component `k` in exported traces.
    fn state_name(&self, k: usize) -> String {
        format!("y{k}")
    }
}

/// Recorded trace of a single-point (0D) membrane integration.
#[derive(Clone, Debug)]
pub struct CellTrace {
    pub times: Vec<f64>,
    pub u: Vec<f64>,
    /// State rows sampled at the same times, flattened `[n_state]` per row.
    pub states: Vec<f64>,
    pub n_state: usize,
}

/// Qualitative activity classes of a 0D trace.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CellActivity {
    Quiescent,
    SingleBurst,
    RecurrentBursting,
}

impl std::fmt::Display for CellActivity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            CellActivity::Quiescent => "quiescent",
            CellActivity::SingleBurst => "single-burst",
            CellActivity::RecurrentBursting => "recurrent-bursting",
        };
        f.write_str(s)
    }
}

/// Integrate the space-clamped membrane equation `C du/dt = -f(u, y)`,
/// `dy/dt = -m(u, y)` by forward Euler with per-step state clamping. This is
/// the same explicit state update the PDE solver performs at quadrature
/// points, so 0D results transfer directly.
///
/// Samples every `record_every` steps (and the initial state).
pub fn integrate_cell(
    model: &dyn IonicModel,
    c_m: f64,
    u0: f64,
    dt: f64,
    n_steps: usize,
    record_every: usize,
) -> CellTrace {
    let ns = model.n_state();
    let mut y = model.initial_state();
    model.clamp_state(&mut y);
    let mut u = u0;
    let mut rate = vec![0.0; ns];
    let every = record_every.max(1);
    let mut trace = CellTrace {
        times: vec![0.0],
        u: vec![u],
        states: y.clone(),
        n_state: ns,
    };
    for step in 1..=n_steps {
        let f = model.current(u, &y);
        model.state_rate(u, &y, &mut rate);
        u -= dt * f / c_m;
        for (yi, mi) in y.iter_mut().zip(&rate) {
            *yi -= dt * mi;
        }
        model.clamp_state(&mut y);
        if step % every == 0 || step == n_steps {
            trace.times.push(step as f64 * dt);
            trace.u.push(u);
            trace.states.extend_from_slice(&y);
        }
    }
    trace
}

/// Times of upward crossings of `threshold` in a sampled trace, linearly
/// interpolated between samples.
pub fn upward_crossings(times: &[f64], values: &[f64], threshold: f64) -> Vec<f64> {
    let mut out = Vec::new();
    for i in 1..values.len() {
        let (a, b) = (values[i - 1], values[i]);
        if a < threshold && b >= threshold {
            let t = (threshold - a) / (b - a);
            out.push(times[i - 1] + t * (times[i] - times[i - 1]));
        }
    }
    out
}

/// Classify a trace from its threshold crossings: recurring activity keeps
/// crossing into the last fifth of the window.
pub fn classify_activity(crossings: &[f64], t_end: f64) -> CellActivity {
    if crossings.is_empty() {
        return CellActivity::Quiescent;
    }
    let tail_start = 0.8 * t_end;
    let late = crossings.iter().filter(|&&t| t >= tail_start).count();
    if late > 0 && crossings.len() >= 3 {
        CellActivity::RecurrentBursting
    } else {
        CellActivity::SingleBurst
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn crossing_targets_interpolated() {
        let times = [0.0, 1.0, 2.0, 3.0, 4.0];
        let vals = [-30.0, -10.0, -30.0, -30.0, 10.0];
        let c = upward_crossings(&times, &vals, -20.0);
        assert_eq!(c.len(), 2);
        assert!((c[0] - 0.5).abs() < 1e-12);
        assert!((c[1] - 3.25).abs() < 1e-12);
    }

    #[test]
    fn classification_rules() {
        assert_eq!(classify_activity(&[], 500.0), CellActivity::Quiescent);
        assert_eq!(
            classify_activity(&[10.0, 50.0], 500.0),
            CellActivity::SingleBurst
        );
        assert_eq!(
            classify_activity(&[10.0, 50.0, 450.0], 500.0),
            CellActivity::RecurrentBursting
        );
    }
}
