//! Post-processing: exact traveling-wave solutions, error norms against
//! them, conduction-velocity estimation from probe traces, over/undershoot
//! metrics, and convergence tables. Everything here is pure over its
//! inputs; study orchestration lives in the `study` submodule.

pub mod study;

use crate::dgspace::DgSpace;
use crate::geometry::Vec2;
use crate::ionic::upward_crossings;
use crate::solver::EnergyHistory;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("front did not arrive at probe '{probe}' (no upward crossing of {threshold} mV)")]
    FrontDidNotArrive { probe: String, threshold: f64 },
    #[error("re-entrant trace at probe '{probe}': crossings at {times:?}")]
    ReentrantTrace { probe: String, times: Vec<f64> },
    #[error("probes are not colinear: '{probe}' sits {offset:.3e} off the line")]
    NonColinearProbes { probe: String, offset: f64 },
    #[error("crossing times are not strictly ordered along the wave path: {times:?}")]
    UnorderedCrossings { times: Vec<f64> },
    #[error("conduction velocity needs at least two probes (got {0})")]
    TooFewProbes(usize),
    #[error("energy norm requested without accumulated time-integral history")]
    MissingEnergyHistory,
    #[error("wavefront thickness must be positive (got {0})")]
    InvalidThickness(f64),
    #[error("wave direction must be nonzero")]
    ZeroDirection,
    #[error("convergence ladder is empty")]
    EmptyLadder,
}

/// Planar traveling front: V_rest + (V_depol − V_rest)/2 · (1 − tanh(s/ε))
/// with phase s = direction·x − speed·t. Depolarized behind the front,
/// resting ahead, moving along `direction`.
#[derive(Debug, Clone, Copy)]
pub struct ExactWave {
    pub v_rest: f64,
    pub v_depol: f64,
    pub epsilon: f64,
    pub speed: f64,
    pub direction: Vec2,
}

impl ExactWave {
    pub fn new(
        v_rest: f64,
        v_depol: f64,
        epsilon: f64,
        speed: f64,
        direction: Vec2,
    ) -> Result<Self, AnalysisError> {
        if !(epsilon > 0.0) {
            return Err(AnalysisError::InvalidThickness(epsilon));
        }
        let norm = direction.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(AnalysisError::ZeroDirection);
        }
        Ok(ExactWave {
            v_rest,
            v_depol,
            epsilon,
            speed,
            direction: direction / norm,
        })
    }

    /// Benchmark front: rest −85 mV, plateau 30 mV, thickness 0.2 mm,
    /// speed 0.5 mm/ms, along the main diagonal.
    pub fn benchmark() -> Self {
        ExactWave::new(-85.0, 30.0, 0.2, 0.5, Vec2::new(1.0, 1.0)).unwrap()
    }

    pub fn amplitude(&self) -> f64 {
        0.5 * (self.v_depol - self.v_rest)
    }

    fn phase(&self, x: Vec2, t: f64) -> f64 {
        (self.direction.dot(x) - self.speed * t) / self.epsilon
    }

    pub fn value(&self, x: Vec2, t: f64) -> f64 {
        self.v_rest + self.amplitude() * (1.0 - self.phase(x, t).tanh())
    }

    pub fn gradient(&self, x: Vec2, t: f64) -> Vec2 {
        let th = self.phase(x, t).tanh();
        let sech_sq = 1.0 - th * th;
        self.direction * (-self.amplitude() * sech_sq / self.epsilon)
    }

    pub fn time_derivative(&self, x: Vec2, t: f64) -> f64 {
        let th = self.phase(x, t).tanh();
        let sech_sq = 1.0 - th * th;
        self.amplitude() * self.speed * sech_sq / self.epsilon
    }

    /// Midpoint between the rest and plateau values, the natural front
    /// threshold for arrival detection.
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.v_rest + self.v_depol)
    }
}

/// Time series of a field (and optional state components) at one point.
#[derive(Debug, Clone, Default)]
pub struct ProbeTrace {
    pub name: String,
    pub position: Vec2,
    pub times: Vec<f64>,
    pub u: Vec<f64>,
    /// One vector per ionic state component, parallel to `times`.
    pub states: Vec<Vec<f64>>,
}

/// Absolute and relative errors of a field against an exact solution.
#[derive(Debug, Clone, Copy)]
pub struct NormErrors {
    pub l2_abs: f64,
    pub l2_rel: f64,
    pub dg_abs: f64,
    pub dg_rel: f64,
    pub energy_abs: f64,
    pub energy_rel: f64,
}

/// L² and DG errors at one time, no history needed.
pub fn spatial_error_norms(
    space: &DgSpace,
    face_eta: &[f64],
    u: &[f64],
    wave: &ExactWave,
    t: f64,
) -> (f64, f64, f64, f64) {
    let (l2_err, h1_err, _) =
        space.error_integrals(u, |x| wave.value(x, t), |x| wave.gradient(x, t));
    // The exact solution is continuous, so the error jumps are the field's.
    let jumps = space.jump_norm_sq(u, face_eta);
    let (l2_ex, h1_ex, _) =
        space.function_integrals(|x| wave.value(x, t), |x| wave.gradient(x, t));
    let dg_err = (h1_err + jumps).sqrt();
    let dg_ex = h1_ex.sqrt();
    (l2_err.sqrt(), l2_err.sqrt() / l2_ex.sqrt(), dg_err, dg_err / dg_ex)
}

/// Full error report including the time-accumulated energy norm; errors if
/// the history was not tracked during the run.
pub fn error_norms(
    space: &DgSpace,
    face_eta: &[f64],
    u: &[f64],
    wave: &ExactWave,
    t: f64,
    history: Option<&EnergyHistory>,
) -> Result<NormErrors, AnalysisError> {
    let history = history.ok_or(AnalysisError::MissingEnergyHistory)?;
    let (l2_abs, l2_rel, dg_abs, dg_rel) = spatial_error_norms(space, face_eta, u, wave, t);
    let (l2_ex, _, _) =
        space.function_integrals(|x| wave.value(x, t), |x| wave.gradient(x, t));
    let energy_abs = (l2_abs * l2_abs + history.error_integral()).sqrt();
    let energy_ex = (l2_ex + history.exact_integral()).sqrt();
    Ok(NormErrors {
        l2_abs,
        l2_rel,
        dg_abs,
        dg_rel,
        energy_abs,
        energy_rel: energy_abs / energy_ex,
    })
}

/// Wavefront speed from first-crossing times at colinear probes.
#[derive(Debug, Clone)]
pub struct VelocityEstimate {
    pub first: Vec2,
    pub last: Vec2,
    pub threshold: f64,
    pub first_time: f64,
    pub last_time: f64,
    pub cv: f64,
}

/// Estimate the conduction velocity from two or more colinear probes. Each
/// trace must cross the threshold (upward) exactly once; crossing times are
/// linearly interpolated between samples.
pub fn estimate_cv(
    traces: &[ProbeTrace],
    threshold: f64,
) -> Result<VelocityEstimate, AnalysisError> {
    if traces.len() < 2 {
        return Err(AnalysisError::TooFewProbes(traces.len()));
    }
    // Sort along the line before anything else so relabeling cannot matter.
    let first_pos = traces[0].position;
    let span = traces
        .iter()
        .map(|t| t.position.dist(first_pos))
        .fold(0.0f64, f64::max);
    let far = traces
        .iter()
        .max_by(|a, b| {
            a.position
                .dist(first_pos)
                .total_cmp(&b.position.dist(first_pos))
        })
        .unwrap();
    let dir = (far.position - first_pos) / span;
    for trace in traces {
        let rel = trace.position - first_pos;
        let offset = rel.cross(dir).abs();
        if offset > 1e-9 * span.max(1.0) {
            return Err(AnalysisError::NonColinearProbes {
                probe: trace.name.clone(),
                offset,
            });
        }
    }
    let mut crossings: Vec<(f64, f64, &ProbeTrace)> = Vec::with_capacity(traces.len());
    for trace in traces {
        let times = upward_crossings(&trace.times, &trace.u, threshold);
        match times.len() {
            0 => {
                return Err(AnalysisError::FrontDidNotArrive {
                    probe: trace.name.clone(),
                    threshold,
                })
            }
            1 => crossings.push(((trace.position - first_pos).dot(dir), times[0], trace)),
            _ => {
                return Err(AnalysisError::ReentrantTrace {
                    probe: trace.name.clone(),
                    times,
                })
            }
        }
    }
    crossings.sort_by(|a, b| a.0.total_cmp(&b.0));
    // The line direction came from an arbitrary probe, so the front may be
    // traveling against it; orient by arrival instead of probe order.
    if crossings.first().unwrap().1 > crossings.last().unwrap().1 {
        crossings.reverse();
        for c in &mut crossings {
            c.0 = -c.0;
        }
    }
    let times: Vec<f64> = crossings.iter().map(|c| c.1).collect();
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(AnalysisError::UnorderedCrossings { times });
    }
    let (s0, t0, tr0) = &crossings[0];
    let (s1, t1, tr1) = crossings.last().unwrap();
    Ok(VelocityEstimate {
        first: tr0.position,
        last: tr1.position,
        threshold,
        first_time: *t0,
        last_time: *t1,
        cv: (s1 - s0) / (t1 - t0),
    })
}

/// Over/undershoot of the field extremes against the expected plateau and
/// rest values, as percentages of the full range, time-max over the run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShootMetrics {
    pub overshoot_pct: f64,
    pub undershoot_pct: f64,
}

pub fn shoot_metrics(field_min: f64, field_max: f64, v_rest: f64, v_depol: f64) -> ShootMetrics {
    let range = v_depol - v_rest;
    ShootMetrics {
        overshoot_pct: (field_max - v_depol).max(0.0) / range * 100.0,
        undershoot_pct: (v_rest - field_min).max(0.0) / range * 100.0,
    }
}

/// One refinement level of a convergence study.
#[derive(Debug, Clone)]
pub struct ConvergenceRow {
    /// Mesh size h for h-studies, the degree p for p-studies.
    pub label: f64,
    pub dofs: usize,
    pub errors: Vec<f64>,
    /// Pairwise observed rate against the previous row, per norm.
    pub rates: Vec<Option<f64>>,
}

#[derive(Debug, Clone)]
pub struct ConvergenceTable {
    pub norms: Vec<String>,
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    pub fn new(norms: Vec<String>) -> Self {
        ConvergenceTable {
            norms,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, label: f64, dofs: usize, errors: Vec<f64>) {
        assert_eq!(errors.len(), self.norms.len());
        let rates = match self.rows.last() {
            None => vec![None; errors.len()],
            Some(prev) => errors
                .iter()
                .zip(&prev.errors)
                .map(|(&e, &e_prev)| {
                    // rate = log(e_prev/e) / log(h_prev/h)
                    Some((e_prev / e).ln() / (prev.label / label).ln())
                })
                .collect(),
        };
        self.rows.push(ConvergenceRow {
            label,
            dofs,
            errors,
            rates,
        });
    }

    /// Least-squares slope of ln(error) vs ln(label) over all rows.
    pub fn lsq_rate(&self, norm: usize) -> Option<f64> {
        if self.rows.len() < 2 {
            return None;
        }
        let x: Vec<f64> = self.rows.iter().map(|r| r.label.ln()).collect();
        let y: Vec<f64> = self.rows.iter().map(|r| r.errors[norm].ln()).collect();
        Some(linear_fit(&x, &y).0)
    }

    /// Fit of ln(error) vs label (p-refinement): (slope, R²).
    pub fn loglinear_fit(&self, norm: usize) -> Option<(f64, f64)> {
        if self.rows.len() < 2 {
            return None;
        }
        let x: Vec<f64> = self.rows.iter().map(|r| r.label).collect();
        let y: Vec<f64> = self.rows.iter().map(|r| r.errors[norm].ln()).collect();
        let (slope, _, r2) = linear_fit(&x, &y);
        Some((slope, r2))
    }

    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        write!(w, "label,dofs")?;
        for name in &self.norms {
            write!(w, ",{name},rate_{name}")?;
        }
        writeln!(w)?;
        for row in &self.rows {
            write!(w, "{},{}", row.label, row.dofs)?;
            for (e, r) in row.errors.iter().zip(&row.rates) {
                match r {
                    Some(r) => write!(w, ",{e},{r}")?,
                    None => write!(w, ",{e},")?,
                }
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Ordinary least squares y ≈ a·x + b: returns (a, b, R²).
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|&v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(&a, &b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = y.iter().map(|&v| (v - my) * (v - my)).sum();
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .map(|(&a, &b)| {
            let fit = slope * a + intercept;
            (b - fit) * (b - fit)
        })
        .sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    (slope, intercept, r2)
}
