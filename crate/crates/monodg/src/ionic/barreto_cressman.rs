//! Barreto–Cressman conductance model: a six-variable neuron with sodium,
//! potassium and chloride membrane currents coupled to slow ion-concentration
//! dynamics (intracellular calcium and sodium, extracellular potassium) and
//! three Hodgkin–Huxley-style gates. High bath potassium destabilizes the
//! rest state and produces recurring burst firing.

use super::{IonicError, IonicModel};
use serde::{Deserialize, Serialize};

/// Indices into the state vector `y = [c, k, s, g_s, g_k, g_c]`:
/// intracellular calcium (mM), extracellular potassium (mM), intracellular
/// sodium (mM), then the three gates.
pub mod state_index {
    pub const CA: usize = 0;
    pub const K: usize = 1;
    pub const NA: usize = 2;
    pub const GATE_S: usize = 3;
    pub const GATE_K: usize = 4;
    pub const GATE_C: usize = 5;
}

pub const N_STATE: usize = 6;

/// RT/F at 37 °C, mV; scales all Nernst potentials.
const NERNST_SCALE: f64 = 26.64;

/// Rate pair (opening `a`, closing `b`) of one gate at a fixed potential,
/// units 1/ms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GatingRates {
    pub a: f64,
    pub b: f64,
}

impl GatingRates {
    pub fn tau(self) -> f64 {
        1.0 / (self.a + self.b)
    }

    pub fn g_inf(self) -> f64 {
        self.a / (self.a + self.b)
    }
}

/// `z / (1 - exp(-z))` extended continuously through z = 0 (limit 1).
/// `exp_m1` keeps the denominator accurate for small z.
fn expm1_ratio(z: f64) -> f64 {
    if z == 0.0 {
        1.0
    } else {
        z / -(-z).exp_m1()
    }
}

/// Gate rate pairs at potential `u`, ordered (s, k, c). The `s` and `c`
/// opening rates have removable singularities at u = -30 and u = -34 where
/// the limit value is used.
pub fn gating_rates(u: f64) -> [GatingRates; 3] {
    let s = GatingRates {
        a: expm1_ratio(0.1 * (u + 30.0)),
        b: 4.0 * (-(u + 55.0) / 18.0).exp(),
    };
    let k = GatingRates {
        a: 0.07 * (-0.2 * (u + 44.0)).exp(),
        b: 1.0 / (1.0 + (-0.1 * (u + 14.0)).exp()),
    };
    let c = GatingRates {
        a: 0.1 * expm1_ratio(0.1 * (u + 34.0)),
        b: 0.125 * (-(u + 44.0) / 80.0).exp(),
    };
    [s, k, c]
}

/// All membrane and exchange currents plus the Nernst potentials at one
/// evaluation point. Membrane currents in µA/cm², exchange terms in mM/s.
#[derive(Clone, Copy, Debug)]
pub struct Currents {
    pub i_na: f64,
    pub i_k: f64,
    pub i_cl: f64,
    pub i_pump: f64,
    pub i_glia: f64,
    pub i_diff: f64,
    pub e_na: f64,
    pub e_k: f64,
    pub e_cl: f64,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct BarretoCressman {
    /// Gated sodium conductance, mS/cm².
    pub g_na: f64,
    /// Sodium leak conductance, mS/cm².
    pub g_na_leak: f64,
    /// Gated potassium conductance, mS/cm².
    pub g_k: f64,
    /// Potassium leak conductance, mS/cm².
    pub g_k_leak: f64,
    /// Calcium-gated afterhyperpolarization conductance, mS/cm².
    pub g_ahp: f64,
    /// Chloride leak conductance, mS/cm².
    pub g_cl_leak: f64,
    /// Calcium entry scale in the calcium balance, mS/cm².
    pub g_ca: f64,
    /// Glial potassium uptake strength, mM/s.
    pub g_glia: f64,
    /// Bath (far-field) potassium concentration, mM.
    pub k_bath: f64,
    /// Na/K pump strength ρ, mM/s.
    pub pump_strength: f64,
    /// Potassium diffusion rate to the bath ε, 1/s.
    pub diffusion_rate: f64,
    /// Current-to-flux conversion γ, mM·cm²/µC.
    pub current_to_flux: f64,
    /// Intra/extracellular volume ratio β.
    pub volume_ratio: f64,
    /// Divisor converting concentration rates (per second) to the membrane
    /// time unit (per millisecond).
    pub tau_slow: f64,
    /// Calcium reversal potential, mV.
    pub e_ca: f64,
    /// Intracellular chloride, mM.
    pub chloride_in: f64,
    /// Extracellular chloride, mM.
    pub chloride_out: f64,
    /// Flip the pump/glia/membrane-current signs in the potassium and sodium
    /// balance rows to the convention of the original single-cell
    /// formulation (pump and glia remove extracellular potassium, the
    /// membrane current adds it). The default convention is the one that
    /// reproduces bath-dependent bursting and quiescence; see the 0D tests.
    pub legacy_signs: bool,
    /// Pair the `s` gate row with the `c` gate's relaxation time and vice
    /// versa instead of each gate using its own.
    pub literal_gate_pairing: bool,
}

impl Default for BarretoCressman {
    fn default() -> Self {
        BarretoCressman {
            g_na: 100.0,
            g_na_leak: 0.0175,
            g_k: 40.0,
            g_k_leak: 0.05,
            g_ahp: 0.01,
            g_cl_leak: 0.05,
            g_ca: 0.1,
            g_glia: 66.66,
            k_bath: 8.0,
            pump_strength: 1.25,
            diffusion_rate: 1.2,
            current_to_flux: 0.044,
            volume_ratio: 7.0,
            tau_slow: 1000.0,
            e_ca: 120.0,
            chloride_in: 6.0,
            chloride_out: 130.0,
            legacy_signs: false,
            literal_gate_pairing: false,
        }
    }
}

impl BarretoCressman {
    /// Resting state used for initialization: `[c, k, s, g_s, g_k, g_c]`.
    pub fn rest_state() -> [f64; N_STATE] {
        [0.0, 7.8, 15.5, 0.0936, 0.96859, 0.08553]
    }

    /// Currents and Nernst potentials without domain checks; a concentration
    /// outside the physiological range yields NaN, which downstream guards
    /// catch.
    pub fn currents_unchecked(&self, u: f64, y: &[f64]) -> Currents {
        use state_index::*;
        let (c, k, s) = (y[CA], y[K], y[NA]);
        let e_na = NERNST_SCALE * ((270.0 - s) / s).ln();
        let e_k = NERNST_SCALE * (k / (158.0 - s)).ln();
        let e_cl = NERNST_SCALE * (self.chloride_in / self.chloride_out).ln();
        let i_na = (self.g_na_leak + self.g_na * y[GATE_S].powi(3) * y[GATE_K]) * (u - e_na);
        let i_k =
            (self.g_k * y[GATE_C].powi(4) + self.g_ahp * c / (1.0 + c) + self.g_k_leak)
                * (u - e_k);
        let i_cl = self.g_cl_leak * (u - e_cl);
        let i_pump = self.pump_strength / (1.0 + ((25.0 - s) / 3.0).exp())
            / (1.0 + (5.5 - k).exp());
        let i_glia = self.g_glia / (1.0 + ((18.0 - k) / 2.5).exp());
        let i_diff = self.diffusion_rate * (k - self.k_bath);
        Currents {
            i_na,
            i_k,
            i_cl,
            i_pump,
            i_glia,
            i_diff,
            e_na,
            e_k,
            e_cl,
        }
    }

    /// Checked current evaluation; reports which concentration broke a
    /// Nernst argument.
    pub fn currents(&self, u: f64, y: &[f64]) -> Result<Currents, IonicError> {
        use state_index::*;
        let s = y[NA];
        let k = y[K];
        if s <= 0.0 || 270.0 - s <= 0.0 {
            return Err(IonicError::NernstDomain {
                species: "intracellular sodium",
                value: s,
            });
        }
        if 158.0 - s <= 0.0 || k <= 0.0 {
            return Err(IonicError::NernstDomain {
                species: "extracellular potassium",
                value: k,
            });
        }
        if self.chloride_in <= 0.0 || self.chloride_out <= 0.0 {
            return Err(IonicError::NernstDomain {
                species: "chloride",
                value: self.chloride_in / self.chloride_out,
            });
        }
        Ok(self.currents_unchecked(u, y))
    }
}

impl IonicModel for BarretoCressman {
    fn n_state(&self) -> usize {
        N_STATE
    }

    fn state_name(&self, k: usize) -> String {
        ["c", "k", "s", "gs", "gk", "gc"][k].to_string()
    }

    fn current(&self, u: f64, y: &[f64]) -> f64 {
        let cur = self.currents_unchecked(u, y);
        cur.i_na + cur.i_k + cur.i_cl
    }

    fn state_rate(&self, u: f64, y: &[f64], out: &mut [f64]) {
        use state_index::*;
        let cur = self.currents_unchecked(u, y);
        let (beta, gamma, tau) = (self.volume_ratio, self.current_to_flux, self.tau_slow);
        out[CA] = y[CA] / 80.0
            + self.g_ca * 0.002 * (u - self.e_ca) / (1.0 + (-(25.0 + u) / 2.5).exp());
        if self.legacy_signs {
            out[K] =
                (cur.i_diff + 2.0 * beta * cur.i_pump + cur.i_glia - beta * gamma * cur.i_k)
                    / tau;
            out[NA] = (gamma * cur.i_na + 3.0 * cur.i_pump) / tau;
        } else {
            out[K] =
                (cur.i_diff - 2.0 * beta * cur.i_pump - cur.i_glia + beta * gamma * cur.i_k)
                    / tau;
            out[NA] = (gamma * cur.i_na - 3.0 * cur.i_pump) / tau;
        }
        let rates = gating_rates(u);
        let (tau_s, tau_k, tau_c) = (rates[0].tau(), rates[1].tau(), rates[2].tau());
        let (ts, tc) = if self.literal_gate_pairing {
            (tau_c, tau_s)
        } else {
            (tau_s, tau_c)
        };
        out[GATE_S] = 3.0 * (y[GATE_S] - rates[0].g_inf()) / ts;
        out[GATE_K] = 3.0 * (y[GATE_K] - rates[1].g_inf()) / tau_k;
        out[GATE_C] = 3.0 * (y[GATE_C] - rates[2].g_inf()) / tc;
    }

    fn initial_state(&self) -> Vec<f64> {
        Self::rest_state().to_vec()
    }

    fn clamp_state(&self, y: &mut [f64]) {
        use state_index::*;
        for idx in [CA, K, NA] {
            y[idx] = y[idx].max(1e-9);
        }
        for idx in [GATE_S, GATE_K, GATE_C] {
            y[idx] = y[idx].clamp(0.0, 1.0);
        }
    }

    fn current_du(&self, _u: f64, y: &[f64]) -> f64 {
        use state_index::*;
        // Conductances and reversals are independent of u, so df/du is the
        // total conductance.
        (self.g_na_leak + self.g_na * y[GATE_S].powi(3) * y[GATE_K])
            + (self.g_k * y[GATE_C].powi(4) + self.g_ahp * y[CA] / (1.0 + y[CA])
                + self.g_k_leak)
            + self.g_cl_leak
    }
}

#[cfg(test)]
mod tests {
    use super::super::{classify_activity, integrate_cell, upward_crossings, CellActivity};
    use super::*;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    const REST_U: f64 = -67.0;

    #[test]
    fn gate_rates_at_removable_singularities() {
        let at = gating_rates(-30.0);
        assert_eq!(at[0].a, 1.0);
        let ac = gating_rates(-34.0);
        assert_relative_eq!(ac[2].a, 0.1, epsilon = 1e-15);
        // Continuity across the singular points. Tight window: the value at
        // +-1e-9 matches the limit to 1e-8, which a cancellation-prone
        // evaluation of z/(1 - exp(-z)) would miss. Wider window: the local
        // slope in u is 0.05 (for a_s) so +-1e-6 offsets sit within 1e-7.
        for (u, idx, center, slope) in
            [(-30.0, 0usize, 1.0, 0.05), (-34.0, 2usize, 0.1, 0.005)]
        {
            for delta in [-1e-9, 1e-9] {
                let v = gating_rates(u + delta)[idx].a;
                assert!((v - center).abs() < 1e-8, "at {u}{delta:+e}: {v}");
            }
            let lo = gating_rates(u - 1e-6)[idx].a;
            let hi = gating_rates(u + 1e-6)[idx].a;
            assert!((lo - center).abs() < 2.0 * slope * 1e-6);
            assert!((hi - center).abs() < 2.0 * slope * 1e-6);
            assert!((lo - hi).abs() < 4.0 * slope * 1e-6);
        }
    }

    #[test]
    fn gate_rate_fixed_values() {
        assert_relative_eq!(gating_rates(-55.0)[0].b, 4.0, epsilon = 1e-15);
        // b_k at u = -14 sits at the logistic midpoint.
        assert_relative_eq!(gating_rates(-14.0)[1].b, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn gate_rates_positive_finite_over_sweep() {
        let mut u = -120.0;
        while u <= 60.0 {
            for r in gating_rates(u) {
                assert!(r.a > 0.0 && r.a.is_finite(), "a at u={u}");
                assert!(r.b > 0.0 && r.b.is_finite(), "b at u={u}");
                assert!(r.tau() > 0.0);
                let gi = r.g_inf();
                assert!(gi > 0.0 && gi < 1.0, "g_inf at u={u}");
            }
            u += 0.1;
        }
    }

    #[test]
    fn nernst_potentials_at_rest() {
        let model = BarretoCressman::default();
        let y = BarretoCressman::rest_state();
        let cur = model.currents(REST_U, &y).unwrap();
        assert_relative_eq!(cur.e_na, 74.55099603342163, max_relative = 1e-12);
        assert_relative_eq!(cur.e_k, -77.39501460659056, max_relative = 1e-12);
        assert_relative_eq!(cur.e_cl, -81.93864549990133, max_relative = 1e-12);
    }

    #[test]
    fn pump_and_exchange_values() {
        let model = BarretoCressman::default();
        let y = BarretoCressman::rest_state();
        let cur = model.currents(REST_U, &y).unwrap();
        assert_relative_eq!(cur.i_pump, 0.04594323991204323, max_relative = 1e-12);
        // Diffusion current vanishes exactly at the bath concentration.
        let mut yb = y;
        yb[state_index::K] = model.k_bath;
        let cb = model.currents(REST_U, &yb).unwrap();
        assert_eq!(cb.i_diff, 0.0);
    }

    #[test]
    fn each_current_vanishes_at_its_reversal() {
        let model = BarretoCressman::default();
        let y = BarretoCressman::rest_state();
        let cur = model.currents(REST_U, &y).unwrap();
        let at_na = model.currents(cur.e_na, &y).unwrap();
        assert_relative_eq!(at_na.i_na, 0.0, epsilon = 1e-12);
        let at_k = model.currents(cur.e_k, &y).unwrap();
        assert_relative_eq!(at_k.i_k, 0.0, epsilon = 1e-12);
        let at_cl = model.currents(cur.e_cl, &y).unwrap();
        assert_relative_eq!(at_cl.i_cl, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn total_current_at_rest_state() {
        let model = BarretoCressman::default();
        let y = BarretoCressman::rest_state();
        let f = model.current(REST_U, &y);
        // Frozen from an independent evaluation of the current formulas; the
        // gated sodium conductance dominates at the tabulated rest gates.
        assert_relative_eq!(f, -12.4311625378176, max_relative = 1e-10);
        assert!(f.abs() < 20.0);
    }

    #[test]
    fn current_monotone_in_potential() {
        let model = BarretoCressman::default();
        let y = BarretoCressman::rest_state();
        let mut prev = model.current(-20.0, &y);
        let mut u = -19.9;
        while u <= 20.0 {
            let f = model.current(u, &y);
            assert!(f > prev, "f not increasing at u={u}");
            prev = f;
            u += 0.1;
        }
    }

    #[test]
    fn nernst_domain_errors_name_species() {
        let model = BarretoCressman::default();
        let mut y = BarretoCressman::rest_state();
        y[state_index::NA] = 280.0;
        let err = model.currents(REST_U, &y).unwrap_err();
        assert!(err.to_string().contains("sodium"));
        let mut y2 = BarretoCressman::rest_state();
        y2[state_index::K] = -1.0;
        let err2 = model.currents(REST_U, &y2).unwrap_err();
        assert!(err2.to_string().contains("potassium"));
    }

    #[test]
    fn gate_rows_vanish_at_equilibrium() {
        let model = BarretoCressman::default();
        let u = -42.0;
        let rates = gating_rates(u);
        let mut y = BarretoCressman::rest_state();
        y[state_index::GATE_S] = rates[0].g_inf();
        y[state_index::GATE_K] = rates[1].g_inf();
        y[state_index::GATE_C] = rates[2].g_inf();
        let mut m = [0.0; N_STATE];
        model.state_rate(u, &y, &mut m);
        assert_eq!(m[state_index::GATE_S], 0.0);
        assert_eq!(m[state_index::GATE_K], 0.0);
        assert_eq!(m[state_index::GATE_C], 0.0);
    }

    #[test]
    fn calcium_row_saturates_at_hyperpolarization() {
        let model = BarretoCressman::default();
        let mut y = BarretoCressman::rest_state();
        y[state_index::CA] = 0.0;
        let mut m = [0.0; N_STATE];
        model.state_rate(-100.0, &y, &mut m);
        assert!(m[state_index::CA].abs() < 1e-12);
    }

    #[test]
    fn gate_flow_preserves_unit_interval() {
        // The exact gate flow maps [0, 1] into itself; explicit Euler does
        // too when 3 (a + b) dt <= 1, so each gate is integrated at its own
        // stable step. The k-gate opening rate grows like exp(-0.2 u), so a
        // fixed step would oscillate at hyperpolarized potentials; the
        // solver relies on clamping there (checked below).
        for u in [-80.0, -30.0, 0.0, 40.0] {
            let rates = gating_rates(u);
            for (idx, r) in rates.iter().enumerate() {
                let dt = 0.3 / (3.0 * (r.a + r.b));
                for g0 in [0.0, 1.0] {
                    let mut g = g0;
                    for _ in 0..2000 {
                        g -= dt * 3.0 * (g - r.g_inf()) / r.tau();
                        assert!(
                            (-1e-12..=1.0 + 1e-12).contains(&g),
                            "gate {idx} left [0,1] at u={u}: {g}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn clamped_gate_update_stays_in_unit_interval_at_coarse_step() {
        // At dt = 0.01 the k-gate Euler update is unstable near u = -80; the
        // post-update clamp keeps the state admissible, matching the PDE
        // solver's state update.
        let model = BarretoCressman::default();
        let dt = 0.01;
        let mut y = BarretoCressman::rest_state();
        let mut m = [0.0; N_STATE];
        for _ in 0..2000 {
            model.state_rate(-80.0, &y, &mut m);
            for v in y.iter_mut().zip(&m) {
                *v.0 -= dt * v.1;
            }
            model.clamp_state(&mut y);
            for idx in [state_index::GATE_S, state_index::GATE_K, state_index::GATE_C] {
                assert!((0.0..=1.0).contains(&y[idx]));
            }
        }
    }

    #[test]
    fn evaluation_is_pure() {
        let model = BarretoCressman::default();
        let y = BarretoCressman::rest_state();
        let f1 = model.current(-51.3, &y);
        let f2 = model.current(-51.3, &y);
        assert_eq!(f1.to_bits(), f2.to_bits());
        let mut m1 = [0.0; N_STATE];
        let mut m2 = [0.0; N_STATE];
        model.state_rate(-51.3, &y, &mut m1);
        model.state_rate(-51.3, &y, &mut m2);
        for (a, b) in m1.iter().zip(&m2) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn current_derivative_matches_finite_differences() {
        let model = BarretoCressman::default();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..100 {
            let u: f64 = rng.random_range(-90.0..40.0);
            let y = [
                rng.random_range(0.0..1.0),
                rng.random_range(3.0..12.0),
                rng.random_range(10.0..30.0),
                rng.random_range(0.0..1.0),
                rng.random_range(0.0..1.0),
                rng.random_range(0.0..1.0),
            ];
            let h = 1e-4;
            let fd = (model.current(u + h, &y) - model.current(u - h, &y)) / (2.0 * h);
            assert_relative_eq!(model.current_du(u, &y), fd, max_relative = 1e-6);
        }
    }

    fn run_0d(k_bath: f64, legacy: bool, t_end: f64) -> (Vec<f64>, CellActivity) {
        let model = BarretoCressman {
            k_bath,
            legacy_signs: legacy,
            ..Default::default()
        };
        let dt = 0.01;
        let steps = (t_end / dt).round() as usize;
        let trace = integrate_cell(&model, 1.0, -50.0, dt, steps, 1);
        let crossings = upward_crossings(&trace.times, &trace.u, -20.0);
        let class = classify_activity(&crossings, t_end);
        (crossings, class)
    }

    #[test]
    fn high_bath_potassium_keeps_firing() {
        let (crossings, class) = run_0d(8.0, false, 500.0);
        assert!(crossings.len() >= 3, "only {} crossings", crossings.len());
        assert!((8..=20).contains(&crossings.len()), "{}", crossings.len());
        assert_eq!(class, CellActivity::RecurrentBursting);
    }

    #[test]
    fn low_bath_potassium_settles() {
        let (crossings, class) = run_0d(4.0, false, 500.0);
        let late = crossings.iter().filter(|&&t| t > 400.0).count();
        assert_eq!(late, 0, "activity persists: {crossings:?}");
        assert_eq!(class, CellActivity::SingleBurst);
    }

    #[test]
    fn flipped_signs_lose_bath_sensitivity() {
        // With the inverted pump/glia/current signs the low-bath run keeps
        // firing, which is why the default convention is the direct one.
        let (crossings, _) = run_0d(4.0, true, 500.0);
        let late = crossings.iter().filter(|&&t| t > 400.0).count();
        assert!(late > 0);
    }

    #[test]
    fn clamp_floors_and_caps() {
        let model = BarretoCressman::default();
        let mut y = [-1.0, 0.0, -5.0, -0.2, 1.5, 0.5];
        model.clamp_state(&mut y);
        assert_eq!(y[0], 1e-9);
        assert_eq!(y[1], 1e-9);
        assert_eq!(y[2], 1e-9);
        assert_eq!(y[3], 0.0);
        assert_eq!(y[4], 1.0);
        assert_eq!(y[5], 0.5);
    }
}
