//! Time integration of the semidiscrete monodomain system: Crank-Nicolson
//! for the diffusion part, a two-step extrapolation of the ionic current,
//! and forward Euler for the internal state. Nonlinear terms are evaluated
//! at quadrature points and re-projected onto the modal basis each step.

use crate::analysis::{ExactWave, ProbeTrace};
use crate::assembly::{assemble_load_from_quad, PhysicalParams, SystemMatrices};
use crate::dgspace::DgSpace;
use crate::geometry::Vec2;
use crate::ionic::{CubicReaction, IonicModel};
use crate::linalg::LinalgError;
use rayon::prelude::*;
use std::io::{Read, Write};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("time grid must have positive dt and an integer step count: dt = {dt}, t_end = {t_end}")]
    InvalidTimeGrid { dt: f64, t_end: f64 },
    #[error("system matrices were factored for dt = {system} but the grid uses dt = {grid}")]
    TimeStepMismatch { system: f64, grid: f64 },
    #[error("blow-up at step {step} (t = {time} ms): max |u| = {max_abs:.6e} mV")]
    BlowUp { step: usize, time: f64, max_abs: f64 },
    #[error("linear solve failed: {0}")]
    Linear(#[from] LinalgError),
    #[error("probe '{name}' at ({x}, {y}) is outside the mesh")]
    ProbeOutsideMesh { name: String, x: f64, y: f64 },
    #[error("model map does not cover the mesh: {models} models for {elements} elements")]
    ModelMapMismatch { models: usize, elements: usize },
    #[error("ionic models disagree on state size ({0} vs {1})")]
    MixedStateSizes(usize, usize),
    #[error("state does not match the discretization: {what} has length {found}, expected {expected}")]
    StateMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("checkpoint i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("checkpoint is corrupt: {0}")]
    CorruptCheckpoint(String),
}

/// Uniform partition of [0, T] into N steps of length dt.
#[derive(Debug, Clone, Copy)]
pub struct TimeGrid {
    pub dt: f64,
    pub t_end: f64,
    pub n_steps: usize,
}

impl TimeGrid {
    pub fn new(dt: f64, t_end: f64) -> Result<Self, SolverError> {
        if !(dt > 0.0) || !(t_end >= 0.0) || !dt.is_finite() || !t_end.is_finite() {
            return Err(SolverError::InvalidTimeGrid { dt, t_end });
        }
        let n = (t_end / dt).round();
        // The horizon must be an integer number of steps; the relative slack
        // only absorbs decimal-literal roundoff, a missing fraction of a
        // step is many orders of magnitude larger.
        if (n * dt - t_end).abs() > 1e-9 * t_end.max(dt) {
            return Err(SolverError::InvalidTimeGrid { dt, t_end });
        }
        Ok(TimeGrid {
            dt,
            t_end,
            n_steps: n as usize,
        })
    }

    pub fn time(&self, step: usize) -> f64 {
        step as f64 * self.dt
    }
}

/// Full discrete state at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    /// Modal coefficients of the potential.
    pub u: Vec<f64>,
    /// Modal coefficients of the internal state, laid out
    /// `[element][component][local mode]`.
    pub y: Vec<f64>,
    /// Ionic current at the volume quadrature points of the previous step;
    /// seeded with the initial current so the first step is well defined
    /// (first-order kick-off, second order from step two on).
    pub ion_prev: Vec<f64>,
    pub step: usize,
}

/// Two-step extrapolation of the ionic current to the upcoming time level.
#[inline]
pub fn extrapolate_ionic(now: f64, prev: f64) -> f64 {
    1.5 * now - 0.5 * prev
}

/// Source term that makes the planar tanh front an exact solution of the
/// monodomain equation with the cubic reaction: the residual
/// χ_m C_m ∂_t u_ex − ∇·(Σ∇u_ex) + χ_m f(u_ex) in closed form.
#[derive(Debug, Clone, Copy)]
pub struct ManufacturedForcing {
    pub wave: ExactWave,
    pub reaction: CubicReaction,
}

impl ManufacturedForcing {
    pub fn new(wave: ExactWave, reaction: CubicReaction) -> Self {
        // The closed form of f(u_ex) below assumes the wave endpoints are
        // the stable roots of the cubic.
        assert!(
            (wave.v_rest - reaction.v_rest).abs() < 1e-12
                && (wave.v_depol - reaction.v_depol).abs() < 1e-12,
            "wave endpoints must coincide with the cubic's stable roots"
        );
        ManufacturedForcing { wave, reaction }
    }

    /// I_ext(x, t) on an element whose conductivity gives the quadratic
    /// form `d_sigma_d` = dᵀΣd along the wave direction. With
    /// T = tanh(s), S² = 1 − T², A the half-amplitude:
    /// I_ext = A S² [χC c/ε − (2/ε²)(dᵀΣd) T − χ a A (u_ex − V_thres)].
    pub fn eval(&self, physical: &PhysicalParams, d_sigma_d: f64, x: Vec2, t: f64) -> f64 {
        let w = &self.wave;
        let amp = w.amplitude();
        let th = ((w.direction.dot(x) - w.speed * t) / w.epsilon).tanh();
        let sech_sq = 1.0 - th * th;
        let u_ex = w.v_rest + amp * (1.0 - th);
        amp * sech_sq
            * (physical.chi_c() * w.speed / w.epsilon
                - 2.0 / (w.epsilon * w.epsilon) * d_sigma_d * th
                - physical.chi_m * self.reaction.a * amp * (u_ex - self.reaction.v_thres))
    }
}

/// External current applied during a run.
#[derive(Debug, Clone, Copy)]
pub enum Forcing {
    /// Unforced propagation (I_ext = 0).
    None,
    /// Manufactured source balancing the exact traveling front.
    Manufactured(ManufacturedForcing),
}

/// Coefficients of the time-integrated part of the energy norm
/// ‖v‖²_ε = ‖v(T)‖²_L2 + ∫ (2μ/(C_m χ_m)) ‖v‖²_DG dt + ∫ (a/C_m) ‖v‖⁴_L4 dt.
#[derive(Debug, Clone, Copy)]
pub struct EnergySpec {
    /// Diffusion weight μ in the energy estimate.
    pub mu: f64,
    /// Cubic reaction scale entering the quartic term.
    pub reaction_a: f64,
    /// Accumulate the energy of the error against this wave instead of the
    /// energy of the field itself.
    pub error_against: Option<ExactWave>,
    /// Sample cadence in steps (0 behaves as 1); the current and final
    /// states are always sampled.
    pub every: usize,
}

impl EnergySpec {
    pub fn field(mu: f64, reaction_a: f64, every: usize) -> Self {
        EnergySpec {
            mu,
            reaction_a,
            error_against: None,
            every,
        }
    }

    pub fn error(mu: f64, reaction_a: f64, wave: ExactWave, every: usize) -> Self {
        EnergySpec {
            mu,
            reaction_a,
            error_against: Some(wave),
            every,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Trapezoid {
    integral: f64,
    prev: Option<(f64, f64)>,
}

impl Trapezoid {
    fn push(&mut self, t: f64, value: f64) {
        if let Some((pt, pv)) = self.prev {
            self.integral += 0.5 * (t - pt) * (pv + value);
        }
        self.prev = Some((t, value));
    }
}

/// Instantaneous norms and the cumulative energy square at one sample time.
#[derive(Debug, Clone, Copy)]
pub struct EnergySample {
    pub t: f64,
    pub l2: f64,
    pub dg: f64,
    pub l4: f64,
    /// ‖·‖²_L2 at t plus the weighted time integrals accumulated up to t.
    pub energy_sq: f64,
}

/// Running energy-norm accumulators over a simulation. In error mode the
/// primary accumulator integrates the error's DG and L⁴ terms and a second
/// one integrates the exact solution's (for relative errors); in field mode
/// only the primary runs, on the field itself.
#[derive(Debug, Clone)]
pub struct EnergyHistory {
    spec: EnergySpec,
    weight_dg: f64,
    weight_l4: f64,
    acc: Trapezoid,
    exact_acc: Trapezoid,
    pub samples: Vec<EnergySample>,
}

impl EnergyHistory {
    fn new(spec: EnergySpec, physical: &PhysicalParams) -> Self {
        EnergyHistory {
            spec,
            weight_dg: 2.0 * spec.mu / (physical.c_m * physical.chi_m),
            weight_l4: spec.reaction_a / physical.c_m,
            acc: Trapezoid::default(),
            exact_acc: Trapezoid::default(),
            samples: Vec::new(),
        }
    }

    fn record(&mut self, space: &DgSpace, face_eta: &[f64], u: &[f64], t: f64) {
        let (l2_sq, h1_sq, l4_p4) = match self.spec.error_against {
            Some(wave) => {
                let tuple =
                    space.error_integrals(u, |x| wave.value(x, t), |x| wave.gradient(x, t));
                let (_, h1x, l4x) =
                    space.function_integrals(|x| wave.value(x, t), |x| wave.gradient(x, t));
                // The exact solution is continuous, so its DG norm has no
                // jump part.
                self.exact_acc
                    .push(t, self.weight_dg * h1x + self.weight_l4 * l4x);
                tuple
            }
            None => space.field_integrals(u),
        };
        let dg_sq = h1_sq + space.jump_norm_sq(u, face_eta);
        self.acc
            .push(t, self.weight_dg * dg_sq + self.weight_l4 * l4_p4);
        self.samples.push(EnergySample {
            t,
            l2: l2_sq.sqrt(),
            dg: dg_sq.sqrt(),
            l4: l4_p4.powf(0.25),
            energy_sq: l2_sq + self.acc.integral,
        });
    }

    /// Accumulated ∫ w_dg ‖·‖²_DG + w_l4 ‖·‖⁴_L4 dt of the tracked field
    /// (the error in error mode).
    pub fn error_integral(&self) -> f64 {
        self.acc.integral
    }

    /// The same integral for the exact solution; zero unless error mode.
    pub fn exact_integral(&self) -> f64 {
        self.exact_acc.integral
    }
}

/// A named probe location.
#[derive(Debug, Clone)]
pub struct ProbePoint {
    pub name: String,
    pub position: Vec2,
}

impl ProbePoint {
    pub fn new(name: impl Into<String>, position: Vec2) -> Self {
        ProbePoint {
            name: name.into(),
            position,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub probes: Vec<ProbePoint>,
    /// Record probe samples every this many steps (0 behaves as 1); the
    /// current and final states are always recorded.
    pub probe_every: usize,
    /// Times at which to store the full coefficient field; each maps to the
    /// nearest step.
    pub snapshot_times: Vec<f64>,
    pub energy: Option<EnergySpec>,
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub step: usize,
    pub t: f64,
    pub u: Vec<f64>,
}

#[derive(Debug)]
pub struct RunArtifacts {
    pub traces: Vec<ProbeTrace>,
    pub snapshots: Vec<Snapshot>,
    pub energy: Option<EnergyHistory>,
    /// Extremes of the potential over the volume and face quadrature points
    /// of every visited time level.
    pub field_min: f64,
    pub field_max: f64,
    /// Sum of iteration counts of the linear solves (0 when direct).
    pub total_pcg_iters: usize,
    /// Steps executed by this call (restarts resume mid-grid).
    pub steps: usize,
}

/// Outcome of a single accepted step.
#[derive(Debug, Clone, Copy)]
pub struct StepReport {
    pub pcg_iters: usize,
    pub u_min: f64,
    pub u_max: f64,
}

/// Potential magnitude at which the run aborts; explicit ionic treatment
/// diverges fast once the state leaves the physiological range, so any
/// threshold well above it works.
pub const BLOWUP_LIMIT: f64 = 500.0;

struct LocatedProbe {
    name: String,
    position: Vec2,
    element: usize,
}

/// Split a flat buffer into per-element slices of uneven length given n+1
/// prefix offsets. The slices are disjoint, enabling deterministic parallel
/// writes without atomics.
fn split_by_offsets<'a>(mut data: &'a mut [f64], offsets: &[usize]) -> Vec<&'a mut [f64]> {
    debug_assert_eq!(offsets.first(), Some(&0));
    debug_assert_eq!(offsets.last(), Some(&data.len()));
    let mut out = Vec::with_capacity(offsets.len() - 1);
    for w in offsets.windows(2) {
        let (head, tail) = data.split_at_mut(w[1] - w[0]);
        out.push(head);
        data = tail;
    }
    out
}

/// One configured simulation: the space and factored matrices it borrows,
/// the ionic model of each element, and the external forcing.
pub struct Simulation<'a> {
    space: &'a DgSpace,
    system: &'a SystemMatrices,
    models: Vec<Box<dyn IonicModel>>,
    element_model: Vec<usize>,
    forcing: Forcing,
    /// Prefix sums of volume quadrature point counts per element.
    quad_offsets: Vec<usize>,
    n_state: usize,
    /// dᵀΣd per element for the manufactured forcing; empty otherwise.
    d_sigma_d: Vec<f64>,
}

impl<'a> Simulation<'a> {
    pub fn new(
        space: &'a DgSpace,
        system: &'a SystemMatrices,
        models: Vec<Box<dyn IonicModel>>,
        element_model: Vec<usize>,
        forcing: Forcing,
    ) -> Result<Self, SolverError> {
        let ne = space.mesh.n_elements();
        if models.is_empty()
            || element_model.len() != ne
            || element_model.iter().any(|&m| m >= models.len())
        {
            return Err(SolverError::ModelMapMismatch {
                models: models.len(),
                elements: ne,
            });
        }
        let n_state = models[0].n_state();
        for m in &models[1..] {
            if m.n_state() != n_state {
                return Err(SolverError::MixedStateSizes(n_state, m.n_state()));
            }
        }
        let mut quad_offsets = Vec::with_capacity(ne + 1);
        quad_offsets.push(0);
        for e in 0..ne {
            let (pts, _) = space.element_quad(e);
            quad_offsets.push(quad_offsets[e] + pts.len());
        }
        let d_sigma_d = match &forcing {
            Forcing::Manufactured(mf) => (0..ne)
                .map(|e| {
                    let sigma = space.mesh.conductivity_of(e);
                    mf.wave.direction.dot(sigma.apply(mf.wave.direction))
                })
                .collect(),
            Forcing::None => Vec::new(),
        };
        Ok(Simulation {
            space,
            system,
            models,
            element_model,
            forcing,
            quad_offsets,
            n_state,
            d_sigma_d,
        })
    }

    /// One model for the whole mesh.
    pub fn uniform(
        space: &'a DgSpace,
        system: &'a SystemMatrices,
        model: Box<dyn IonicModel>,
        forcing: Forcing,
    ) -> Result<Self, SolverError> {
        let ne = space.mesh.n_elements();
        Simulation::new(space, system, vec![model], vec![0; ne], forcing)
    }

    pub fn space(&self) -> &DgSpace {
        self.space
    }

    pub fn system(&self) -> &SystemMatrices {
        self.system
    }

    pub fn n_state(&self) -> usize {
        self.n_state
    }

    /// Project an initial potential; internal states start from each
    /// element model's resting values, and the ionic history is seeded with
    /// the initial current.
    pub fn initial_state(&self, u0: impl Fn(Vec2) -> f64 + Sync) -> SimState {
        let u = self.space.project(&u0);
        let n_loc = self.space.n_local();
        let ne = self.space.mesh.n_elements();
        let mut y = vec![0.0; ne * self.n_state * n_loc];
        let y_offsets: Vec<usize> = (0..=ne).map(|e| e * self.n_state * n_loc).collect();
        split_by_offsets(&mut y, &y_offsets)
            .into_par_iter()
            .enumerate()
            .for_each(|(e, y_e)| {
                let y0 = self.models[self.element_model[e]].initial_state();
                let nq = self.space.element_quad(e).0.len();
                let mut vals = vec![0.0; nq];
                for (k, &c) in y0.iter().enumerate() {
                    vals.fill(c);
                    self.space.project_quad_values_local(
                        e,
                        &vals,
                        &mut y_e[k * n_loc..(k + 1) * n_loc],
                    );
                }
            });
        let mut ion_prev = vec![0.0; *self.quad_offsets.last().unwrap()];
        self.ionic_currents(&u, &y, &mut ion_prev);
        SimState {
            u,
            y,
            ion_prev,
            step: 0,
        }
    }

    /// Evaluate the ionic current at all volume quadrature points without
    /// touching the state (used to seed the extrapolation history).
    fn ionic_currents(&self, u: &[f64], y: &[f64], out: &mut [f64]) {
        let n_loc = self.space.n_local();
        let ns = self.n_state;
        split_by_offsets(out, &self.quad_offsets)
            .into_par_iter()
            .enumerate()
            .for_each(|(e, ion_e)| {
                let model = &*self.models[self.element_model[e]];
                let nq = ion_e.len();
                let mut u_vals = vec![0.0; nq];
                self.space
                    .values_on_quad_local(&u[e * n_loc..(e + 1) * n_loc], e, &mut u_vals);
                let mut y_vals = vec![0.0; ns * nq];
                for k in 0..ns {
                    let base = (e * ns + k) * n_loc;
                    self.space.values_on_quad_local(
                        &y[base..base + n_loc],
                        e,
                        &mut y_vals[k * nq..(k + 1) * nq],
                    );
                }
                let mut point_state = vec![0.0; ns];
                for q in 0..nq {
                    for k in 0..ns {
                        point_state[k] = y_vals[k * nq + q];
                    }
                    ion_e[q] = model.current(u_vals[q], &point_state);
                }
            });
    }

    /// Advance one step. On success the state holds time level n+1 and the
    /// ionic history is rolled; on error the state is mid-update and must
    /// be discarded.
    pub fn step(&self, state: &mut SimState, grid: &TimeGrid) -> Result<StepReport, SolverError> {
        self.check_dt(grid)?;
        let n_loc = self.space.n_local();
        let ns = self.n_state;
        let dt = grid.dt;
        let nq_total = *self.quad_offsets.last().unwrap();

        // Pass over elements: I^n from (u^n, y^n), then the forward-Euler
        // state update with clamping and per-element re-projection.
        let mut ion_now = vec![0.0; nq_total];
        let ion_parts = split_by_offsets(&mut ion_now, &self.quad_offsets);
        let y_offsets: Vec<usize> = (0..=self.space.mesh.n_elements())
            .map(|e| e * ns * n_loc)
            .collect();
        let u_ref: &[f64] = &state.u;
        let y_parts = split_by_offsets(&mut state.y, &y_offsets);
        ion_parts
            .into_par_iter()
            .zip(y_parts.into_par_iter())
            .enumerate()
            .for_each(|(e, (ion_e, y_e))| {
                let model = &*self.models[self.element_model[e]];
                let nq = ion_e.len();
                let mut u_vals = vec![0.0; nq];
                self.space
                    .values_on_quad_local(&u_ref[e * n_loc..(e + 1) * n_loc], e, &mut u_vals);
                let mut y_vals = vec![0.0; ns * nq];
                for k in 0..ns {
                    self.space.values_on_quad_local(
                        &y_e[k * n_loc..(k + 1) * n_loc],
                        e,
                        &mut y_vals[k * nq..(k + 1) * nq],
                    );
                }
                let mut point_state = vec![0.0; ns];
                let mut rate = vec![0.0; ns];
                for q in 0..nq {
                    for k in 0..ns {
                        point_state[k] = y_vals[k * nq + q];
                    }
                    ion_e[q] = model.current(u_vals[q], &point_state);
                    if ns > 0 {
                        model.state_rate(u_vals[q], &point_state, &mut rate);
                        for k in 0..ns {
                            point_state[k] -= dt * rate[k];
                        }
                        model.clamp_state(&mut point_state);
                        for k in 0..ns {
                            y_vals[k * nq + q] = point_state[k];
                        }
                    }
                }
                for k in 0..ns {
                    self.space.project_quad_values_local(
                        e,
                        &y_vals[k * nq..(k + 1) * nq],
                        &mut y_e[k * n_loc..(k + 1) * n_loc],
                    );
                }
            });

        // Right-hand side: (χC M − Δt/2 A) u^n + Δt F^{n+1} − χ Δt b_ion
        // with b_ion the load of the extrapolated current.
        let t_next = grid.time(state.step + 1);
        let mut rhs = self.system.rhs_matrix.matvec_alloc(&state.u);
        if let Some(f_load) = self.forcing_load(t_next) {
            for (r, f) in rhs.iter_mut().zip(&f_load) {
                *r += dt * f;
            }
        }
        let istim: Vec<f64> = ion_now
            .iter()
            .zip(&state.ion_prev)
            .map(|(&now, &prev)| extrapolate_ionic(now, prev))
            .collect();
        let b_ion = assemble_load_from_quad(self.space, &istim, &self.quad_offsets);
        let chi_dt = self.system.physical.chi_m * dt;
        for (r, b) in rhs.iter_mut().zip(&b_ion) {
            *r -= chi_dt * b;
        }

        let pcg_iters = self.system.lhs.solve(&rhs, &mut state.u)?;
        state.ion_prev = ion_now;
        state.step += 1;

        let (u_min, u_max) = self.space.field_min_max(&state.u);
        let finite = state.u.iter().chain(state.y.iter()).all(|v| v.is_finite());
        let max_abs = u_min.abs().max(u_max.abs());
        if !finite || max_abs > BLOWUP_LIMIT {
            return Err(SolverError::BlowUp {
                step: state.step,
                time: grid.time(state.step),
                max_abs: if finite { max_abs } else { f64::NAN },
            });
        }
        Ok(StepReport {
            pcg_iters,
            u_min,
            u_max,
        })
    }

    /// Load vector of the external current at time t, or None when unforced.
    fn forcing_load(&self, t: f64) -> Option<Vec<f64>> {
        let Forcing::Manufactured(mf) = &self.forcing else {
            return None;
        };
        let nq_total = *self.quad_offsets.last().unwrap();
        let mut vals = vec![0.0; nq_total];
        split_by_offsets(&mut vals, &self.quad_offsets)
            .into_par_iter()
            .enumerate()
            .for_each(|(e, out)| {
                let (pts, _) = self.space.element_quad(e);
                let dsd = self.d_sigma_d[e];
                for (o, &p) in out.iter_mut().zip(pts) {
                    *o = mf.eval(&self.system.physical, dsd, p, t);
                }
            });
        Some(assemble_load_from_quad(self.space, &vals, &self.quad_offsets))
    }

    fn check_dt(&self, grid: &TimeGrid) -> Result<(), SolverError> {
        // The lhs factorization bakes in dt, so the grid must match it.
        if grid.dt != self.system.dt {
            return Err(SolverError::TimeStepMismatch {
                system: self.system.dt,
                grid: grid.dt,
            });
        }
        Ok(())
    }

    fn check_state(&self, state: &SimState) -> Result<(), SolverError> {
        let checks = [
            ("u", self.space.n_dofs(), state.u.len()),
            (
                "y",
                self.space.mesh.n_elements() * self.n_state * self.space.n_local(),
                state.y.len(),
            ),
            (
                "ion_prev",
                *self.quad_offsets.last().unwrap(),
                state.ion_prev.len(),
            ),
        ];
        for (what, expected, found) in checks {
            if expected != found {
                return Err(SolverError::StateMismatch {
                    what,
                    expected,
                    found,
                });
            }
        }
        Ok(())
    }

    /// Run from the state's current step to the end of the grid, recording
    /// the requested observations. The state is advanced in place.
    pub fn run(
        &self,
        state: &mut SimState,
        grid: &TimeGrid,
        options: &RunOptions,
    ) -> Result<RunArtifacts, SolverError> {
        self.check_dt(grid)?;
        self.check_state(state)?;
        let start_step = state.step;
        let probes = self.locate_probes(&options.probes)?;
        let mut traces: Vec<ProbeTrace> = probes
            .iter()
            .map(|p| ProbeTrace {
                name: p.name.clone(),
                position: p.position,
                times: Vec::new(),
                u: Vec::new(),
                states: vec![Vec::new(); self.n_state],
            })
            .collect();
        let probe_every = options.probe_every.max(1);
        let mut snap_steps: Vec<usize> = options
            .snapshot_times
            .iter()
            .map(|&t| ((t / grid.dt).round() as usize).min(grid.n_steps))
            .collect();
        snap_steps.sort_unstable();
        snap_steps.dedup();
        let mut snapshots = Vec::new();
        let mut energy = options
            .energy
            .map(|spec| EnergyHistory::new(spec, &self.system.physical));
        let energy_every = options.energy.map_or(1, |s| s.every.max(1));

        // Observations of the starting level.
        let t0 = grid.time(state.step);
        let (mut field_min, mut field_max) = self.space.field_min_max(&state.u);
        self.record_probes(state, t0, &probes, &mut traces);
        if snap_steps.binary_search(&state.step).is_ok() {
            snapshots.push(Snapshot {
                step: state.step,
                t: t0,
                u: state.u.clone(),
            });
        }
        if let Some(h) = &mut energy {
            h.record(self.space, &self.system.face_eta, &state.u, t0);
        }

        let mut total_pcg_iters = 0;
        while state.step < grid.n_steps {
            let report = self.step(state, grid)?;
            total_pcg_iters += report.pcg_iters;
            field_min = field_min.min(report.u_min);
            field_max = field_max.max(report.u_max);
            let t = grid.time(state.step);
            let last = state.step == grid.n_steps;
            if state.step % probe_every == 0 || last {
                self.record_probes(state, t, &probes, &mut traces);
            }
            if snap_steps.binary_search(&state.step).is_ok() {
                snapshots.push(Snapshot {
                    step: state.step,
                    t,
                    u: state.u.clone(),
                });
            }
            if let Some(h) = &mut energy {
                if state.step % energy_every == 0 || last {
                    h.record(self.space, &self.system.face_eta, &state.u, t);
                }
            }
        }
        Ok(RunArtifacts {
            traces,
            snapshots,
            energy,
            field_min,
            field_max,
            total_pcg_iters,
            steps: state.step - start_step,
        })
    }

    fn locate_probes(&self, probes: &[ProbePoint]) -> Result<Vec<LocatedProbe>, SolverError> {
        probes
            .iter()
            .map(|p| {
                let element = self.space.mesh.locate(p.position).ok_or_else(|| {
                    SolverError::ProbeOutsideMesh {
                        name: p.name.clone(),
                        x: p.position.x,
                        y: p.position.y,
                    }
                })?;
                Ok(LocatedProbe {
                    name: p.name.clone(),
                    position: p.position,
                    element,
                })
            })
            .collect()
    }

    fn record_probes(
        &self,
        state: &SimState,
        t: f64,
        probes: &[LocatedProbe],
        traces: &mut [ProbeTrace],
    ) {
        let n_loc = self.space.n_local();
        for (probe, trace) in probes.iter().zip(traces) {
            trace.times.push(t);
            let local = &state.u[probe.element * n_loc..(probe.element + 1) * n_loc];
            trace
                .u
                .push(self.space.evaluate_local(local, probe.element, probe.position));
            for k in 0..self.n_state {
                let base = (probe.element * self.n_state + k) * n_loc;
                let v = self.space.evaluate_local(
                    &state.y[base..base + n_loc],
                    probe.element,
                    probe.position,
                );
                trace.states[k].push(v);
            }
        }
    }
}

const CHECKPOINT_MAGIC: &[u8; 8] = b"MDGCKPT1";
// Caps a corrupt header before it turns into a giant allocation.
const CHECKPOINT_MAX_LEN: u64 = 1 << 33;

/// Write a restartable snapshot: the magic tag, four little-endian u64
/// lengths (step, |u|, |y|, |ion_prev|), then the three f64 arrays. Energy
/// accumulators are run-scoped and not checkpointed; a restart resumes the
/// trajectory, not the norm history.
pub fn save_checkpoint(state: &SimState, path: &Path) -> Result<(), SolverError> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    w.write_all(CHECKPOINT_MAGIC)?;
    for v in [
        state.step as u64,
        state.u.len() as u64,
        state.y.len() as u64,
        state.ion_prev.len() as u64,
    ] {
        w.write_all(&v.to_le_bytes())?;
    }
    for arr in [&state.u, &state.y, &state.ion_prev] {
        for &x in arr.iter() {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<SimState, SolverError> {
    let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(SolverError::CorruptCheckpoint(
            "unrecognized magic tag".into(),
        ));
    }
    let mut header = [0u64; 4];
    for h in &mut header {
        let mut buf = [0u8; 8];
        r.read_exact(&mut buf)?;
        *h = u64::from_le_bytes(buf);
    }
    let [step, n_u, n_y, n_ion] = header;
    if n_u.max(n_y).max(n_ion) > CHECKPOINT_MAX_LEN {
        return Err(SolverError::CorruptCheckpoint(format!(
            "unreasonable array lengths {n_u}/{n_y}/{n_ion}"
        )));
    }
    let mut read_array = |len: u64| -> Result<Vec<f64>, SolverError> {
        let mut out = Vec::with_capacity(len as usize);
        let mut buf = [0u8; 8];
        for _ in 0..len {
            r.read_exact(&mut buf)?;
            out.push(f64::from_le_bytes(buf));
        }
        Ok(out)
    };
    let u = read_array(n_u)?;
    let y = read_array(n_y)?;
    let ion_prev = read_array(n_ion)?;
    let mut probe = [0u8; 1];
    if r.read(&mut probe)? != 0 {
        return Err(SolverError::CorruptCheckpoint("trailing data".into()));
    }
    Ok(SimState {
        u,
        y,
        ion_prev,
        step: step as usize,
    })
}
