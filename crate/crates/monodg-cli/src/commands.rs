//! Subcommand implementations and the error-to-exit-code mapping.

use crate::artifacts::ArtifactWriter;
use crate::config::{
    rect_from, vec2_from, MeshSource, ModelKind, SimulationConfig, Units,
};
use monodg::analysis::study::{
    h_convergence, p_convergence, propagation_cell, stability_run, StudyError,
};
use monodg::analysis::ExactWave;
use monodg::assembly::{PenaltyParams, PhysicalParams, SystemMatrices};
use monodg::dgspace::DgSpace;
use monodg::geometry::Vec2;
use monodg::ionic::{
    classify_activity, integrate_cell, upward_crossings, BarretoCressman, CellActivity,
    CubicReaction, IonicModel,
};
use monodg::mesh::{
    export_mesh, generate_voronoi_mesh, import_mesh, PolyMesh, RegionRule, RegionTag,
};
use monodg::solver::{
    EnergySpec, Forcing, ManufacturedForcing, ProbePoint, RunOptions, Simulation, SolverError,
    TimeGrid,
};
use serde::Deserialize;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use thiserror::Error;

/// Exit taxonomy: 2 configuration, 3 blow-up, 4 i/o, 1 anything else.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration invalid:\n{}", list(.0))]
    Validation(Vec<String>),
    #[error("simulation aborted: {0}")]
    BlowUp(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("run failed: {0}")]
    Runtime(String),
}

fn list(errors: &[String]) -> String {
    errors
        .iter()
        .map(|e| format!("  - {e}"))
        .collect::<Vec<_>>()
        .join("\n")
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::BlowUp(_) => 3,
            CliError::Io(_) => 4,
            CliError::Runtime(_) => 1,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

/// Output root: --out wins, then $MONODG_OUT, then ./out; runs land in a
/// subdirectory named after the config file.
fn out_dir(explicit: Option<PathBuf>, config_path: &Path) -> PathBuf {
    if let Some(dir) = explicit {
        return dir;
    }
    let root = std::env::var_os("MONODG_OUT")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("out"));
    let stem = config_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run".into());
    root.join(stem)
}

fn load_config(path: &Path, seed: Option<u64>) -> Result<SimulationConfig, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let mut parsed =
        SimulationConfig::from_toml(&text).map_err(|e| CliError::Validation(vec![e]))?;
    if let Some(s) = seed {
        parsed.seed = s;
    }
    let errors = parsed.validate();
    if !errors.is_empty() {
        return Err(CliError::Validation(errors));
    }
    Ok(parsed.resolve())
}

pub fn run(
    config_path: &Path,
    out: Option<PathBuf>,
    seed: Option<u64>,
    dry_run: bool,
    dump_config: bool,
) -> Result<(), CliError> {
    let config = load_config(config_path, seed)?;
    if dump_config {
        print!("{}", config.dump());
        return Ok(());
    }
    if dry_run {
        println!("configuration valid; resolved form:\n");
        print!("{}", config.dump());
        println!("\ndry run: nothing executed");
        return Ok(());
    }
    execute_run(&config, &out_dir(out, config_path))
}

fn execute_run(config: &SimulationConfig, dir: &Path) -> Result<(), CliError> {
    let started = std::time::Instant::now();
    let mut mesh = build_mesh(config)?;
    apply_regions(&mut mesh, config)?;
    let space = DgSpace::build(mesh, config.space.degree).map_err(runtime)?;
    let physical = physical_params(config);
    let system = SystemMatrices::build(
        &space,
        physical,
        PenaltyParams {
            eta0: config.penalty.eta0,
        },
        config.time.dt,
        false,
    )
    .map_err(runtime)?;
    let (models, element_model, name_model) = build_models(config, &space);
    let sim = Simulation::new(&space, &system, models, element_model, build_forcing(config))
        .map_err(runtime)?;
    let ic = initial_condition(config);
    let mut state = sim.initial_state(|x| ic(x));
    let grid = TimeGrid::new(config.time.dt, config.time.t_end).map_err(runtime)?;
    let options = RunOptions {
        probes: config
            .output
            .probes
            .iter()
            .map(|p| ProbePoint::new(p.name.clone(), vec2_from(p.position)))
            .collect(),
        probe_every: config.output.probe_every,
        snapshot_times: config.output.snapshot_times.clone(),
        energy: energy_spec(config),
    };
    let arts = match sim.run(&mut state, &grid, &options) {
        Ok(a) => a,
        Err(e @ SolverError::BlowUp { .. }) => return Err(CliError::BlowUp(e.to_string())),
        Err(SolverError::ProbeOutsideMesh { name, x, y }) => {
            return Err(CliError::Validation(vec![format!(
                "output.probes: '{name}' at ({x}, {y}) lies outside the mesh"
            )]))
        }
        Err(e) => return Err(runtime(e)),
    };

    let writer = ArtifactWriter::create(dir)?;
    writer.write_text("config.resolved.toml", &config.dump())?;
    writer.write_probes(&arts.traces, &*name_model)?;
    if let Some(history) = &arts.energy {
        writer.write_norms(&history.samples)?;
    }
    writer.write_snapshots(&space, &arts.snapshots)?;
    let meta = metadata(config, &space, &system, &grid, &arts, started.elapsed());
    writer.write_text("metadata.toml", &meta)?;

    println!(
        "run complete: {} steps, {} elements (h_max {:.4}), {} dofs, u in [{:.2}, {:.2}] mV",
        grid.n_steps,
        space.mesh.n_elements(),
        space.mesh.max_diameter(),
        space.n_dofs(),
        arts.field_min,
        arts.field_max,
    );
    println!("artifacts in {}", writer.root().display());
    Ok(())
}

fn build_mesh(config: &SimulationConfig) -> Result<PolyMesh, CliError> {
    match config.mesh.source {
        MeshSource::Generate => {
            let domain = rect_from(config.mesh.domain.expect("validated"));
            generate_voronoi_mesh(
                domain,
                config.mesh.elements.expect("validated"),
                config.mesh.lloyd_iters,
                config.seed,
            )
            .map_err(runtime)
        }
        MeshSource::File => {
            let path = config.mesh.path.as_deref().expect("validated");
            import_mesh(path).map_err(|e| CliError::Io(format!("{path}: {e}")))
        }
    }
}

fn apply_regions(mesh: &mut PolyMesh, config: &SimulationConfig) -> Result<(), CliError> {
    if config.regions.is_empty() {
        // File meshes may carry their own embedded regions.
        return Ok(());
    }
    let tag_of = |r: &crate::config::RegionConfig| -> Result<RegionTag, CliError> {
        let across = r.sigma_across.unwrap_or(r.sigma_along);
        let tag = match r.direction {
            Some(d) => RegionTag::new(&r.name, r.sigma_along, across, vec2_from(d)),
            None => RegionTag::isotropic(&r.name, r.sigma_along),
        };
        tag.map_err(|e| CliError::Validation(vec![e.to_string()]))
    };
    let mut rules = Vec::new();
    let mut background = None;
    for r in &config.regions {
        let tag = tag_of(r)?;
        match r.rect {
            Some(rect) => rules.push(RegionRule::rectangle(tag, rect_from(rect))),
            None => background = Some(tag),
        }
    }
    let background = background.expect("validated: exactly one background");
    mesh.tag_regions(&rules, background);
    Ok(())
}

fn physical_params(config: &SimulationConfig) -> PhysicalParams {
    let mut p = match config.physical.units {
        Units::Cm => PhysicalParams::centimeter(),
        Units::Mm => PhysicalParams::millimeter(),
    };
    if let Some(chi) = config.physical.chi_m {
        p.chi_m = chi;
    }
    if let Some(cm) = config.physical.c_m {
        p.c_m = cm;
    }
    p
}

fn cubic_from(config: &SimulationConfig) -> CubicReaction {
    let mut r = CubicReaction::default();
    if let Some(a) = config.model.a {
        r.a = a;
    }
    if let Some(v) = config.model.v_rest {
        r.v_rest = v;
    }
    if let Some(v) = config.model.v_thres {
        r.v_thres = v;
    }
    if let Some(v) = config.model.v_depol {
        r.v_depol = v;
    }
    r
}

fn bc_from(config: &SimulationConfig, k_bath: Option<f64>) -> BarretoCressman {
    let mut m = BarretoCressman::default();
    if let Some(k) = k_bath.or(config.model.k_bath) {
        m.k_bath = k;
    }
    if let Some(l) = config.model.legacy_signs {
        m.legacy_signs = l;
    }
    m
}

/// Model instances, the element-to-model map, and a detached copy used only
/// for naming trace columns.
fn build_models(
    config: &SimulationConfig,
    space: &DgSpace,
) -> (Vec<Box<dyn IonicModel>>, Vec<usize>, Box<dyn IonicModel>) {
    let ne = space.mesh.n_elements();
    match config.model.kind {
        ModelKind::Cubic => {
            let r = cubic_from(config);
            (vec![Box::new(r)], vec![0; ne], Box::new(r))
        }
        ModelKind::BarretoCressman => {
            let ic = &config.initial;
            match (ic.k_bath_inside, ic.k_bath_outside) {
                (Some(inside), Some(outside)) => {
                    let rect = rect_from(ic.rect.expect("validated: split rect"));
                    let map = space
                        .mesh
                        .elements
                        .iter()
                        .map(|el| usize::from(rect.contains(el.centroid)))
                        .collect();
                    (
                        vec![
                            Box::new(bc_from(config, Some(outside))),
                            Box::new(bc_from(config, Some(inside))),
                        ],
                        map,
                        Box::new(bc_from(config, None)),
                    )
                }
                _ => {
                    let m = bc_from(config, None);
                    (vec![Box::new(m)], vec![0; ne], Box::new(m))
                }
            }
        }
    }
}

fn build_forcing(config: &SimulationConfig) -> Forcing {
    if config.initial.preset == "exact_wave" && config.initial.forced == Some(true) {
        Forcing::Manufactured(ManufacturedForcing::new(
            ExactWave::benchmark(),
            cubic_from(config),
        ))
    } else {
        Forcing::None
    }
}

fn initial_condition(config: &SimulationConfig) -> Box<dyn Fn(Vec2) -> f64 + Sync> {
    let ic = &config.initial;
    match ic.preset.as_str() {
        "uniform" => {
            let v = ic.value.expect("resolved");
            Box::new(move |_| v)
        }
        "split" => {
            let rect = rect_from(ic.rect.expect("validated"));
            let (inside, outside) = (ic.u_inside.expect("resolved"), ic.u_outside.expect("resolved"));
            Box::new(move |x| if rect.contains(x) { inside } else { outside })
        }
        "gaussian" => {
            let center = vec2_from(ic.center.expect("validated"));
            let (amp, decay, base) = (
                ic.amplitude.expect("resolved"),
                ic.decay.expect("resolved"),
                ic.base.expect("resolved"),
            );
            let mask = ic.mask_region.as_ref().map(|name| {
                let r = config
                    .regions
                    .iter()
                    .find(|r| &r.name == name)
                    .expect("validated");
                rect_from(r.rect.expect("validated"))
            });
            Box::new(move |x| {
                let inside = mask.map_or(true, |rect| rect.contains(x));
                if inside {
                    base + amp * (-decay * x.dist(center).powi(2)).exp()
                } else {
                    base
                }
            })
        }
        "exact_wave" => {
            let wave = ExactWave::benchmark();
            Box::new(move |x| wave.value(x, 0.0))
        }
        other => unreachable!("validated preset {other}"),
    }
}

fn energy_spec(config: &SimulationConfig) -> Option<EnergySpec> {
    if config.output.energy_every == 0 {
        return None;
    }
    let a = cubic_from(config).a;
    let every = config.output.energy_every;
    if config.initial.preset == "exact_wave" && config.initial.forced == Some(true) {
        Some(EnergySpec::error(1.0, a, ExactWave::benchmark(), every))
    } else {
        Some(EnergySpec::field(1.0, a, every))
    }
}

fn metadata(
    config: &SimulationConfig,
    space: &DgSpace,
    system: &SystemMatrices,
    grid: &TimeGrid,
    arts: &monodg::solver::RunArtifacts,
    elapsed: std::time::Duration,
) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "config_hash = \"{:016x}\"", config.hash());
    let _ = writeln!(s, "version = \"{}\"", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(s, "n_elements = {}", space.mesh.n_elements());
    let _ = writeln!(s, "h_max = {}", space.mesh.max_diameter());
    let _ = writeln!(s, "dofs = {}", space.n_dofs());
    let _ = writeln!(s, "degree = {}", config.space.degree);
    let _ = writeln!(s, "n_steps = {}", grid.n_steps);
    let _ = writeln!(
        s,
        "linear_solver = \"{}\"",
        if system.lhs.is_direct() { "cholesky" } else { "pcg" }
    );
    let _ = writeln!(s, "total_pcg_iters = {}", arts.total_pcg_iters);
    let _ = writeln!(s, "field_min = {}", arts.field_min);
    let _ = writeln!(s, "field_max = {}", arts.field_max);
    let _ = writeln!(
        s,
        "energy_mode = \"{}\"",
        match (config.output.energy_every, &config.initial.preset) {
            (0, _) => "off",
            (_, p) if p == "exact_wave" && config.initial.forced == Some(true) => "error",
            _ => "field",
        }
    );
    let _ = writeln!(s, "wall_seconds = {:.3}", elapsed.as_secs_f64());
    let _ = writeln!(s);
    let _ = writeln!(s, "[conventions]");
    let _ = writeln!(s, "# measurement defaults baked into the tooling");
    let _ = writeln!(s, "cv_threshold_cubic_mv = -27.5");
    let _ = writeln!(s, "cv_threshold_conductance_mv = -20.0");
    let _ = writeln!(s, "energy_coercivity_weight = 1.0");
    s
}

// ---------------------------------------------------------------------------
// study

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub kind: StudyKind,
    #[serde(default)]
    pub degrees: Vec<usize>,
    #[serde(default)]
    pub h_ladder: Vec<f64>,
    pub elements: Option<usize>,
    #[serde(default)]
    pub element_ladder: Vec<usize>,
    pub dt: f64,
    pub t_end: f64,
    #[serde(default = "one")]
    pub energy_every: usize,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum StudyKind {
    H,
    P,
    Cv,
    Stability,
}

fn table_csv(table: &monodg::analysis::ConvergenceTable) -> String {
    let mut buf = Vec::new();
    table.write_csv(&mut buf).expect("in-memory write");
    String::from_utf8(buf).expect("csv is utf-8")
}

fn energy_norm(table: &monodg::analysis::ConvergenceTable) -> usize {
    table
        .norms
        .iter()
        .position(|n| n == "energy")
        .expect("study tables carry an energy column")
}

impl StudyConfig {
    fn validate(&self) -> Vec<String> {
        let mut errors = Vec::new();
        if !(self.dt > 0.0) {
            errors.push(format!("dt = {} must be positive", self.dt));
        }
        if !(self.t_end > 0.0) {
            errors.push(format!("t_end = {} must be positive", self.t_end));
        }
        if self.degrees.iter().any(|&p| p == 0 || p > 8) {
            errors.push("degrees must lie in 1..=8".into());
        }
        match self.kind {
            StudyKind::H | StudyKind::Cv => {
                if self.degrees.is_empty() {
                    errors.push("degrees must be nonempty".into());
                }
                if self.h_ladder.is_empty() {
                    errors.push("h_ladder must be nonempty".into());
                }
                if self.h_ladder.iter().any(|&h| h <= 0.0) {
                    errors.push("h_ladder entries must be positive".into());
                }
            }
            StudyKind::P => {
                if self.degrees.is_empty() {
                    errors.push("degrees must be nonempty".into());
                }
                match self.elements {
                    None => errors.push("elements is required for a p study".into()),
                    Some(0) => errors.push("elements must be at least 1".into()),
                    Some(_) => {}
                }
            }
            StudyKind::Stability => {
                if self.degrees.len() != 1 {
                    errors.push("a stability study takes exactly one degree".into());
                }
                if self.element_ladder.is_empty() {
                    errors.push("element_ladder must be nonempty".into());
                }
                if self.energy_every == 0 {
                    errors.push("energy_every must be at least 1".into());
                }
            }
        }
        errors
    }
}

pub fn study(
    config_path: &Path,
    out: Option<PathBuf>,
    dry_run: bool,
) -> Result<(), CliError> {
    let text = fs::read_to_string(config_path)
        .map_err(|e| CliError::Io(format!("{}: {e}", config_path.display())))?;
    let config: StudyConfig =
        toml::from_str(&text).map_err(|e| CliError::Validation(vec![e.to_string()]))?;
    let errors = config.validate();
    if !errors.is_empty() {
        return Err(CliError::Validation(errors));
    }
    if dry_run {
        println!("study config valid: {config:?}");
        return Ok(());
    }
    let writer = ArtifactWriter::create(&out_dir(out, config_path))?;
    let study_err = |e: StudyError| runtime(e);
    match config.kind {
        StudyKind::H => {
            for &p in &config.degrees {
                let table =
                    h_convergence(p, &config.h_ladder, config.dt, config.t_end).map_err(study_err)?;
                let name = format!("h_convergence_p{p}.csv");
                writer.write_text(&name, &table_csv(&table))?;
                println!(
                    "p = {p}: least-squares energy rate {:.3} ({name})",
                    table.lsq_rate(energy_norm(&table)).unwrap_or(f64::NAN)
                );
            }
        }
        StudyKind::P => {
            let table = p_convergence(
                config.elements.expect("validated"),
                &config.degrees,
                config.dt,
                config.t_end,
            )
            .map_err(study_err)?;
            writer.write_text("p_convergence.csv", &table_csv(&table))?;
            let (slope, r2) = table
                .loglinear_fit(energy_norm(&table))
                .unwrap_or((f64::NAN, f64::NAN));
            println!("p sweep: log-error slope {slope:.3} per degree, R^2 = {r2:.4}");
        }
        StudyKind::Cv => {
            let mut csv = String::from("h,p,cv,status,overshoot_pct,undershoot_pct\n");
            for &h in &config.h_ladder {
                for &p in &config.degrees {
                    let cell = propagation_cell(h, p, config.dt, config.t_end).map_err(study_err)?;
                    let (cv, status) = match &cell.velocity {
                        Ok(v) => (format!("{}", v.cv), "ok".to_string()),
                        Err(e) => (String::new(), format!("{e}").replace(',', ";")),
                    };
                    let _ = writeln!(
                        csv,
                        "{},{p},{cv},{status},{},{}",
                        cell.h_max, cell.shoot.overshoot_pct, cell.shoot.undershoot_pct
                    );
                    println!(
                        "h = {:.3}, p = {p}: cv = {} ({status})",
                        cell.h_max,
                        if cv.is_empty() { "-" } else { &cv }
                    );
                }
            }
            writer.write_text("cv_grid.csv", &csv)?;
        }
        StudyKind::Stability => {
            let p = config.degrees[0];
            for &n in &config.element_ladder {
                let samples = stability_run(n, p, config.dt, config.t_end, config.energy_every)
                    .map_err(study_err)?;
                let mut csv = String::from("t,l2,dg,l4,energy_sq\n");
                for e in &samples {
                    let _ = writeln!(csv, "{},{},{},{},{}", e.t, e.l2, e.dg, e.l4, e.energy_sq);
                }
                writer.write_text(&format!("stability_n{n}.csv"), &csv)?;
                let last = samples.last().expect("at least the initial sample");
                println!(
                    "n = {n}: energy^2 from {:.4e} to {:.4e} over {} samples",
                    samples[0].energy_sq,
                    last.energy_sq,
                    samples.len()
                );
            }
        }
    }
    println!("study artifacts in {}", writer.root().display());
    Ok(())
}

// ---------------------------------------------------------------------------
// cell0d

#[allow(clippy::too_many_arguments)]
pub fn cell0d(
    k_bath: f64,
    t_end: f64,
    dt: f64,
    u0: f64,
    record_every: usize,
    out: Option<PathBuf>,
) -> Result<(), CliError> {
    let mut errors = Vec::new();
    if !(dt > 0.0) {
        errors.push(format!("dt = {dt} must be positive"));
    }
    if !(t_end > 0.0) {
        errors.push(format!("t_end = {t_end} must be positive"));
    }
    if t_end < dt {
        errors.push(format!("t_end = {t_end} is shorter than one step of {dt}"));
    }
    if record_every == 0 {
        errors.push("record-every must be at least 1".into());
    }
    if !(k_bath > 0.0) {
        errors.push(format!("k-bath = {k_bath} must be positive"));
    }
    if !errors.is_empty() {
        return Err(CliError::Validation(errors));
    }
    let model = BarretoCressman {
        k_bath,
        ..BarretoCressman::default()
    };
    let n_steps = (t_end / dt).round() as usize;
    // Membrane-only integration in cm units (C_m = 1 uF/cm^2).
    let trace = integrate_cell(&model, 1.0, u0, dt, n_steps, record_every);
    if trace.u.iter().any(|v| !v.is_finite()) {
        return Err(CliError::BlowUp(format!(
            "0D integration produced non-finite potential (k_bath = {k_bath}, dt = {dt})"
        )));
    }
    // Burst threshold for the conductance model.
    let threshold = -20.0;
    let crossings = upward_crossings(&trace.times, &trace.u, threshold);
    let class = match classify_activity(&crossings, t_end) {
        CellActivity::Quiescent => "quiescent",
        CellActivity::SingleBurst => "single-burst",
        CellActivity::RecurrentBursting => "recurrent-bursting",
    };

    let dir = out.unwrap_or_else(|| {
        let root = std::env::var_os("MONODG_OUT")
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("out"));
        root.join(format!("cell0d_k{k_bath}"))
    });
    let writer = ArtifactWriter::create(&dir)?;
    let mut csv = String::from("t,u");
    for k in 0..model.n_state() {
        let _ = write!(csv, ",{}", model.state_name(k));
    }
    let _ = writeln!(csv);
    let ns = trace.n_state;
    for (i, t) in trace.times.iter().enumerate() {
        let _ = write!(csv, "{t},{}", trace.u[i]);
        for k in 0..ns {
            let _ = write!(csv, ",{}", trace.states[i * ns + k]);
        }
        let _ = writeln!(csv);
    }
    writer.write_text("cell.csv", &csv)?;

    println!(
        "classification: {class} ({} upward crossings of {threshold} mV in {t_end} ms)",
        crossings.len()
    );
    println!("trace in {}", writer.root().join("cell.csv").display());
    Ok(())
}

// ---------------------------------------------------------------------------
// mesh utilities

pub fn mesh_gen(
    domain: [f64; 4],
    elements: usize,
    lloyd: usize,
    seed: u64,
    ellipse: bool,
    out: &Path,
) -> Result<(), CliError> {
    let mut errors = Vec::new();
    if !(domain[2] > domain[0] && domain[3] > domain[1]) {
        errors.push(format!("domain {domain:?} is empty; expected x0 < x1 and y0 < y1"));
    }
    if elements == 0 {
        errors.push("elements must be at least 1".into());
    }
    if !errors.is_empty() {
        return Err(CliError::Validation(errors));
    }
    let rect = rect_from(domain);
    let mut mesh = generate_voronoi_mesh(rect, elements, lloyd, seed).map_err(runtime)?;
    if ellipse {
        // Keep cells whose centroid lies inside the inscribed ellipse; the
        // ragged polygonal boundary approximates the smooth outline.
        let center = Vec2::new(0.5 * (rect.x0 + rect.x1), 0.5 * (rect.y0 + rect.y1));
        let (rx, ry) = (0.5 * rect.width(), 0.5 * rect.height());
        let keep: Vec<Vec<Vec2>> = (0..mesh.n_elements())
            .filter(|&e| {
                let c = mesh.elements[e].centroid;
                let (dx, dy) = ((c.x - center.x) / rx, (c.y - center.y) / ry);
                dx * dx + dy * dy <= 1.0
            })
            .map(|e| mesh.element_points(e))
            .collect();
        if keep.is_empty() {
            return Err(CliError::Runtime(
                "ellipse mask removed every element; use more elements".into(),
            ));
        }
        let weld = 1e-9 * rect.width().hypot(rect.height());
        let tag = RegionTag::isotropic("domain", 1.0).expect("valid tag");
        mesh = PolyMesh::from_polygons(&keep, tag, weld).map_err(runtime)?;
    }
    export_mesh(&mesh, out).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))?;
    println!(
        "mesh written to {}: {} elements, h_max {:.4}, area {:.4}",
        out.display(),
        mesh.n_elements(),
        mesh.max_diameter(),
        mesh.total_area()
    );
    Ok(())
}

pub fn mesh_check(path: &Path) -> Result<(), CliError> {
    let mesh = import_mesh(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    // Area/diameter^2 below this marks a sliver cell.
    let report = mesh.check_regularity(0.01);
    println!("elements: {}", mesh.n_elements());
    println!("interior faces: {}", mesh.n_interior_faces());
    println!("regions: {}", mesh.regions.len());
    println!("total area: {:.6}", mesh.total_area());
    println!("h_max: {:.6}", mesh.max_diameter());
    println!(
        "area ratio (min/max): {:.4e} / {:.4e}",
        report.min_area_ratio, report.max_area_ratio
    );
    println!("min face/diameter ratio: {:.4e}", report.min_face_ratio);
    println!("centroid fan valid: {}", report.fan_valid);
    if !report.flagged.is_empty() {
        println!("flagged slivers: {:?}", report.flagged);
    }
    if !report.fan_valid {
        return Err(CliError::Validation(vec![
            "mesh has non-star-shaped elements (centroid fan invalid)".into(),
        ]));
    }
    println!("mesh ok");
    Ok(())
}
