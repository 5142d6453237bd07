//! TOML run configuration: schema, whole-file validation, named-preset
//! resolution, and the annotated dump used by `--dump-config`.
//!
//! Parsing is strict (unknown keys rejected); validation collects every
//! problem instead of stopping at the first. `resolve` expands the named
//! initial-condition presets into their generic forms and fills defaults,
//! after which dumping and re-parsing is a fixed point.

use monodg::geometry::{Rect, Vec2};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    #[serde(default = "defaults::seed")]
    pub seed: u64,
    pub mesh: MeshConfig,
    pub space: SpaceConfig,
    pub model: ModelConfig,
    #[serde(default)]
    pub physical: PhysicalConfig,
    #[serde(default)]
    pub regions: Vec<RegionConfig>,
    pub time: TimeConfig,
    pub initial: InitialConfig,
    #[serde(default)]
    pub penalty: PenaltyConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MeshConfig {
    pub source: MeshSource,
    /// Rectangle x0, y0, x1, y1; `generate` only.
    pub domain: Option<[f64; 4]>,
    pub elements: Option<usize>,
    #[serde(default = "defaults::lloyd_iters")]
    pub lloyd_iters: usize,
    /// Mesh file path; `file` only.
    pub path: Option<String>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum MeshSource {
    Generate,
    File,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SpaceConfig {
    pub degree: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: ModelKind,
    /// Far-field extracellular potassium, mM; conductance model only.
    pub k_bath: Option<f64>,
    /// Keep the source model's pump/diffusion sign convention.
    pub legacy_signs: Option<bool>,
    /// Cubic reaction overrides.
    pub a: Option<f64>,
    pub v_rest: Option<f64>,
    pub v_thres: Option<f64>,
    pub v_depol: Option<f64>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Cubic,
    BarretoCressman,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PhysicalConfig {
    #[serde(default = "defaults::units")]
    pub units: Units,
    pub chi_m: Option<f64>,
    pub c_m: Option<f64>,
}

impl Default for PhysicalConfig {
    fn default() -> Self {
        PhysicalConfig {
            units: Units::Cm,
            chi_m: None,
            c_m: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum Units {
    Cm,
    Mm,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RegionConfig {
    pub name: String,
    pub sigma_along: f64,
    #[serde(default)]
    pub sigma_across: Option<f64>,
    /// Fiber direction; required when sigma_across differs from sigma_along.
    pub direction: Option<[f64; 2]>,
    /// Assignment rectangle. Exactly one region must omit it: the background.
    pub rect: Option<[f64; 4]>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub dt: f64,
    pub t_end: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    pub preset: String,
    /// `uniform`: the constant potential.
    pub value: Option<f64>,
    /// `split`: the destabilized subregion.
    pub rect: Option<[f64; 4]>,
    pub u_inside: Option<f64>,
    pub u_outside: Option<f64>,
    /// K_bath map paired with `split`: separate bath levels per side.
    pub k_bath_inside: Option<f64>,
    pub k_bath_outside: Option<f64>,
    /// `gaussian`: bump center, amplitude, exponential decay rate, baseline.
    pub center: Option<[f64; 2]>,
    pub amplitude: Option<f64>,
    pub decay: Option<f64>,
    pub base: Option<f64>,
    /// `gaussian`: restrict the bump to one named (rect-bounded) region.
    pub mask_region: Option<String>,
    /// `exact_wave`: drive with the manufactured forcing (default true).
    pub forced: Option<bool>,
}

impl Default for InitialConfig {
    fn default() -> Self {
        InitialConfig {
            preset: String::new(),
            value: None,
            rect: None,
            u_inside: None,
            u_outside: None,
            k_bath_inside: None,
            k_bath_outside: None,
            center: None,
            amplitude: None,
            decay: None,
            base: None,
            mask_region: None,
            forced: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PenaltyConfig {
    #[serde(default = "defaults::eta0")]
    pub eta0: f64,
}

impl Default for PenaltyConfig {
    fn default() -> Self {
        PenaltyConfig {
            eta0: defaults::eta0(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
    #[serde(default = "defaults::probe_every")]
    pub probe_every: usize,
    /// Energy-norm sampling cadence in steps; 0 disables. Cubic model only.
    #[serde(default)]
    pub energy_every: usize,
    #[serde(default)]
    pub probes: Vec<ProbeConfig>,
}

// Keep the missing-table default in sync with the per-field serde defaults.
impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            snapshot_times: Vec::new(),
            probe_every: defaults::probe_every(),
            energy_every: 0,
            probes: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ProbeConfig {
    pub name: String,
    pub position: [f64; 2],
}

mod defaults {
    use super::Units;

    pub fn seed() -> u64 {
        4242
    }
    pub fn lloyd_iters() -> usize {
        100
    }
    pub fn units() -> Units {
        Units::Cm
    }
    pub fn eta0() -> f64 {
        10.0
    }
    pub fn probe_every() -> usize {
        1
    }
}

/// Geometry of the heterogeneous square test: unstable band inside grey
/// matter over two white-matter quadrants (cm units).
pub const TEST1_UNSTABLE: [f64; 4] = [0.0, 0.4, 1.0, 0.6];
/// Unstable corner used by the potassium-map variant (cm units).
pub const TEST1_1_UNSTABLE: [f64; 4] = [0.0, 0.0, 0.4, 0.4];

impl SimulationConfig {
    pub fn from_toml(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    /// Expand named initial-condition presets and fill every optional field
    /// that has a defined default, so the dump is self-contained. Idempotent.
    pub fn resolve(&self) -> SimulationConfig {
        let mut c = self.clone();
        let ic = &mut c.initial;
        match ic.preset.as_str() {
            "test1" => {
                ic.preset = "split".into();
                ic.rect.get_or_insert(TEST1_UNSTABLE);
            }
            "test1_1" => {
                ic.preset = "split".into();
                ic.rect.get_or_insert(TEST1_1_UNSTABLE);
                ic.k_bath_inside.get_or_insert(8.0);
                ic.k_bath_outside.get_or_insert(4.0);
            }
            "test2" => {
                ic.preset = "gaussian".into();
                ic.amplitude.get_or_insert(17.0);
                ic.decay.get_or_insert(2.0);
            }
            _ => {}
        }
        match ic.preset.as_str() {
            "uniform" => {
                ic.value.get_or_insert(-67.0);
            }
            "split" => {
                ic.u_inside.get_or_insert(-50.0);
                ic.u_outside.get_or_insert(-67.0);
            }
            "gaussian" => {
                ic.amplitude.get_or_insert(17.0);
                ic.decay.get_or_insert(2.0);
                ic.base.get_or_insert(-67.0);
            }
            "exact_wave" => {
                ic.forced.get_or_insert(true);
            }
            _ => {}
        }
        if c.regions.is_empty() && c.mesh.source == MeshSource::Generate {
            c.regions = vec![default_region(c.physical.units)];
        }
        c
    }

    /// Every problem in the file, phrased for humans. Empty means runnable.
    pub fn validate(&self) -> Vec<String> {
        let resolved = self.resolve();
        let mut errors = Vec::new();
        let c = &resolved;

        match c.mesh.source {
            MeshSource::Generate => {
                match c.mesh.domain {
                    None => errors.push("mesh.domain is required when mesh.source = \"generate\"".into()),
                    Some([x0, y0, x1, y1]) => {
                        if !(x1 > x0 && y1 > y0) {
                            errors.push(format!(
                                "mesh.domain [{x0}, {y0}, {x1}, {y1}] is empty; expected x0 < x1 and y0 < y1"
                            ));
                        }
                    }
                }
                match c.mesh.elements {
                    None => errors.push("mesh.elements is required when mesh.source = \"generate\"".into()),
                    Some(0) => errors.push("mesh.elements must be at least 1".into()),
                    Some(_) => {}
                }
                if c.mesh.path.is_some() {
                    errors.push("mesh.path only applies to mesh.source = \"file\"".into());
                }
            }
            MeshSource::File => {
                if c.mesh.path.is_none() {
                    errors.push("mesh.path is required when mesh.source = \"file\"".into());
                }
                for (key, set) in [
                    ("domain", c.mesh.domain.is_some()),
                    ("elements", c.mesh.elements.is_some()),
                ] {
                    if set {
                        errors.push(format!("mesh.{key} only applies to mesh.source = \"generate\""));
                    }
                }
            }
        }

        if c.space.degree == 0 || c.space.degree > 8 {
            errors.push(format!(
                "space.degree = {} is outside the supported range 1..=8",
                c.space.degree
            ));
        }

        let is_cubic = c.model.kind == ModelKind::Cubic;
        if is_cubic {
            for (key, set) in [
                ("k_bath", c.model.k_bath.is_some()),
                ("legacy_signs", c.model.legacy_signs.is_some()),
            ] {
                if set {
                    errors.push(format!("model.{key} only applies to kind = \"barreto_cressman\""));
                }
            }
            if let Some(a) = c.model.a {
                if a <= 0.0 {
                    errors.push(format!("model.a = {a} must be positive"));
                }
            }
        } else {
            for (key, set) in [
                ("a", c.model.a.is_some()),
                ("v_rest", c.model.v_rest.is_some()),
                ("v_thres", c.model.v_thres.is_some()),
                ("v_depol", c.model.v_depol.is_some()),
            ] {
                if set {
                    errors.push(format!("model.{key} only applies to kind = \"cubic\""));
                }
            }
            if let Some(k) = c.model.k_bath {
                if k <= 0.0 {
                    errors.push(format!("model.k_bath = {k} must be positive"));
                }
            }
        }

        if let Some(chi) = c.physical.chi_m {
            if chi <= 0.0 {
                errors.push(format!("physical.chi_m = {chi} must be positive"));
            }
        }
        if let Some(cm) = c.physical.c_m {
            if cm <= 0.0 {
                errors.push(format!("physical.c_m = {cm} must be positive"));
            }
        }

        let mut backgrounds = 0usize;
        for r in &c.regions {
            let across = r.sigma_across.unwrap_or(r.sigma_along);
            if r.sigma_along <= 0.0 || across <= 0.0 {
                errors.push(format!(
                    "region '{}': conductivities must be positive (along {}, across {across})",
                    r.name, r.sigma_along
                ));
            }
            if (across - r.sigma_along).abs() > 1e-12 && r.direction.is_none() {
                errors.push(format!(
                    "region '{}': direction is required for anisotropic conductivity",
                    r.name
                ));
            }
            if let Some([dx, dy]) = r.direction {
                if dx == 0.0 && dy == 0.0 {
                    errors.push(format!("region '{}': direction must be nonzero", r.name));
                }
            }
            if let Some([x0, y0, x1, y1]) = r.rect {
                if !(x1 > x0 && y1 > y0) {
                    errors.push(format!("region '{}': rect is empty", r.name));
                }
            } else {
                backgrounds += 1;
            }
        }
        if !c.regions.is_empty() && backgrounds != 1 {
            errors.push(format!(
                "regions must contain exactly one background entry without a rect (found {backgrounds})"
            ));
        }
        for (i, r) in c.regions.iter().enumerate() {
            if c.regions[..i].iter().any(|o| o.name == r.name) {
                errors.push(format!("region name '{}' appears more than once", r.name));
            }
        }

        if !(c.time.dt > 0.0) {
            errors.push(format!("time.dt = {} must be positive", c.time.dt));
        }
        if c.time.t_end < 0.0 {
            errors.push(format!("time.t_end = {} must be nonnegative", c.time.t_end));
        }

        errors.extend(validate_initial(c));

        if !(c.penalty.eta0 > 0.0) {
            errors.push(format!("penalty.eta0 = {} must be positive", c.penalty.eta0));
        }

        if c.output.probe_every == 0 {
            errors.push("output.probe_every must be at least 1".into());
        }
        if c.output.energy_every > 0 && !is_cubic {
            errors.push(
                "output.energy_every: the energy norm is defined for the cubic model only".into(),
            );
        }
        for t in &c.output.snapshot_times {
            if *t < 0.0 || *t > c.time.t_end + 1e-12 {
                errors.push(format!(
                    "output.snapshot_times: {t} is outside the run window [0, {}]",
                    c.time.t_end
                ));
            }
        }
        for (i, p) in c.output.probes.iter().enumerate() {
            if p.name.trim().is_empty() {
                errors.push(format!("output.probes[{i}]: name must be nonempty"));
            }
            if c.output.probes[..i].iter().any(|o| o.name == p.name) {
                errors.push(format!("probe name '{}' appears more than once", p.name));
            }
        }

        errors
    }

    /// Annotated TOML of the resolved configuration. Comments record where
    /// each default comes from; re-parsing the dump reproduces the config.
    pub fn dump(&self) -> String {
        let c = self.resolve();
        let mut s = String::new();
        let w = &mut s;
        let _ = writeln!(w, "# resolved monodg run configuration");
        let _ = writeln!(w, "# seed drives mesh generation only; runs are otherwise deterministic");
        let _ = writeln!(w, "seed = {}", c.seed);
        let _ = writeln!(w);
        let _ = writeln!(w, "[mesh]");
        match c.mesh.source {
            MeshSource::Generate => {
                let _ = writeln!(w, "source = \"generate\"");
                if let Some(d) = c.mesh.domain {
                    let _ = writeln!(w, "domain = {}", fmt_f64_array(&d));
                }
                if let Some(n) = c.mesh.elements {
                    let _ = writeln!(w, "elements = {n}");
                }
                let _ = writeln!(w, "# Lloyd sweeps regularize the Voronoi cells (generator default: 100)");
                let _ = writeln!(w, "lloyd_iters = {}", c.mesh.lloyd_iters);
            }
            MeshSource::File => {
                let _ = writeln!(w, "source = \"file\"");
                if let Some(p) = &c.mesh.path {
                    let _ = writeln!(w, "path = {}", toml_string(p));
                }
                let _ = writeln!(w, "lloyd_iters = {}", c.mesh.lloyd_iters);
            }
        }
        let _ = writeln!(w);
        let _ = writeln!(w, "[space]");
        let _ = writeln!(w, "degree = {}", c.space.degree);
        let _ = writeln!(w);
        let _ = writeln!(w, "[model]");
        match c.model.kind {
            ModelKind::Cubic => {
                let _ = writeln!(w, "# bistable cubic reaction with an exact traveling-wave solution");
                let _ = writeln!(w, "kind = \"cubic\"");
                for (key, v) in [
                    ("a", c.model.a),
                    ("v_rest", c.model.v_rest),
                    ("v_thres", c.model.v_thres),
                    ("v_depol", c.model.v_depol),
                ] {
                    if let Some(v) = v {
                        let _ = writeln!(w, "{key} = {}", fmt_f64(v));
                    }
                }
            }
            ModelKind::BarretoCressman => {
                let _ = writeln!(w, "# six-variable conductance model (Cressman et al. 2009, Barreto & Cressman 2011)");
                let _ = writeln!(w, "kind = \"barreto_cressman\"");
                if let Some(k) = c.model.k_bath {
                    let _ = writeln!(w, "# far-field potassium, mM; 4 is stable, 8 produces recurrent bursting");
                    let _ = writeln!(w, "k_bath = {}", fmt_f64(k));
                }
                if let Some(l) = c.model.legacy_signs {
                    let _ = writeln!(w, "legacy_signs = {l}");
                }
            }
        }
        let _ = writeln!(w);
        let _ = writeln!(w, "[physical]");
        let _ = writeln!(w, "# cm: chi_m = 1400 /cm, C_m = 1 uF/cm^2; mm: chi_m = 140 /mm, C_m = 0.01 uF/mm^2");
        let _ = writeln!(w, "# (standard monodomain membrane constants in the two unit systems)");
        let _ = writeln!(
            w,
            "units = \"{}\"",
            match c.physical.units {
                Units::Cm => "cm",
                Units::Mm => "mm",
            }
        );
        if let Some(v) = c.physical.chi_m {
            let _ = writeln!(w, "chi_m = {}", fmt_f64(v));
        }
        if let Some(v) = c.physical.c_m {
            let _ = writeln!(w, "c_m = {}", fmt_f64(v));
        }
        for r in &c.regions {
            let _ = writeln!(w);
            let _ = writeln!(w, "[[regions]]");
            let _ = writeln!(w, "# bulk conductivities, mS per unit length (grey/white values: Schreiner et al. 2022)");
            let _ = writeln!(w, "name = {}", toml_string(&r.name));
            let _ = writeln!(w, "sigma_along = {}", fmt_f64(r.sigma_along));
            if let Some(sx) = r.sigma_across {
                let _ = writeln!(w, "sigma_across = {}", fmt_f64(sx));
            }
            if let Some(d) = r.direction {
                let _ = writeln!(w, "direction = {}", fmt_f64_array(&d));
            }
            if let Some(rect) = r.rect {
                let _ = writeln!(w, "rect = {}", fmt_f64_array(&rect));
            }
        }
        let _ = writeln!(w);
        let _ = writeln!(w, "[time]");
        let _ = writeln!(w, "# milliseconds");
        let _ = writeln!(w, "dt = {}", fmt_f64(c.time.dt));
        let _ = writeln!(w, "t_end = {}", fmt_f64(c.time.t_end));
        let _ = writeln!(w);
        let _ = writeln!(w, "[initial]");
        let _ = writeln!(w, "preset = {}", toml_string(&c.initial.preset));
        let ic = &c.initial;
        if let Some(v) = ic.value {
            let _ = writeln!(w, "value = {}", fmt_f64(v));
        }
        if let Some(rect) = ic.rect {
            let _ = writeln!(w, "# destabilized subregion (Barreto & Cressman 2011 initial data)");
            let _ = writeln!(w, "rect = {}", fmt_f64_array(&rect));
        }
        for (key, v) in [
            ("u_inside", ic.u_inside),
            ("u_outside", ic.u_outside),
            ("k_bath_inside", ic.k_bath_inside),
            ("k_bath_outside", ic.k_bath_outside),
            ("amplitude", ic.amplitude),
            ("decay", ic.decay),
            ("base", ic.base),
        ] {
            if let Some(v) = v {
                let _ = writeln!(w, "{key} = {}", fmt_f64(v));
            }
        }
        if let Some(center) = ic.center {
            let _ = writeln!(w, "center = {}", fmt_f64_array(&center));
        }
        if let Some(m) = &ic.mask_region {
            let _ = writeln!(w, "mask_region = {}", toml_string(m));
        }
        if let Some(f) = ic.forced {
            let _ = writeln!(w, "forced = {f}");
        }
        let _ = writeln!(w);
        let _ = writeln!(w, "[penalty]");
        let _ = writeln!(w, "# interior-penalty scaling eta0; 10 sits safely above the coercivity floor");
        let _ = writeln!(w, "eta0 = {}", fmt_f64(c.penalty.eta0));
        let _ = writeln!(w);
        let _ = writeln!(w, "[output]");
        let _ = writeln!(w, "snapshot_times = {}", fmt_f64_array(&c.output.snapshot_times));
        let _ = writeln!(w, "probe_every = {}", c.output.probe_every);
        let _ = writeln!(w, "energy_every = {}", c.output.energy_every);
        for p in &c.output.probes {
            let _ = writeln!(w);
            let _ = writeln!(w, "[[output.probes]]");
            let _ = writeln!(w, "name = {}", toml_string(&p.name));
            let _ = writeln!(w, "position = {}", fmt_f64_array(&p.position));
        }
        s
    }

    /// Stable identity of the resolved configuration (FNV-1a over the dump).
    pub fn hash(&self) -> u64 {
        let mut h: u64 = 0xcbf29ce484222325;
        for b in self.dump().bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
        h
    }
}

fn validate_initial(c: &SimulationConfig) -> Vec<String> {
    let mut errors = Vec::new();
    let ic = &c.initial;
    let is_cubic = c.model.kind == ModelKind::Cubic;
    let allowed: &[&str] = match ic.preset.as_str() {
        "uniform" => &["value"],
        "split" => &["rect", "u_inside", "u_outside", "k_bath_inside", "k_bath_outside"],
        "gaussian" => &["center", "amplitude", "decay", "base", "mask_region"],
        "exact_wave" => &["forced"],
        other => {
            errors.push(format!(
                "initial.preset '{other}' is unknown; expected uniform, split, gaussian, \
                 exact_wave, or the named setups test1, test1_1, test2"
            ));
            return errors;
        }
    };
    let set: Vec<(&str, bool)> = vec![
        ("value", ic.value.is_some()),
        ("rect", ic.rect.is_some()),
        ("u_inside", ic.u_inside.is_some()),
        ("u_outside", ic.u_outside.is_some()),
        ("k_bath_inside", ic.k_bath_inside.is_some()),
        ("k_bath_outside", ic.k_bath_outside.is_some()),
        ("center", ic.center.is_some()),
        ("amplitude", ic.amplitude.is_some()),
        ("decay", ic.decay.is_some()),
        ("base", ic.base.is_some()),
        ("mask_region", ic.mask_region.is_some()),
        ("forced", ic.forced.is_some()),
    ];
    for (key, is_set) in set {
        if is_set && !allowed.contains(&key) {
            errors.push(format!(
                "initial.{key} does not apply to preset '{}'",
                ic.preset
            ));
        }
    }
    match ic.preset.as_str() {
        "split" => {
            if ic.rect.is_none() {
                errors.push("initial.rect is required for preset 'split'".into());
            } else if let Some([x0, y0, x1, y1]) = ic.rect {
                if !(x1 > x0 && y1 > y0) {
                    errors.push("initial.rect is empty".into());
                }
            }
            let map = (ic.k_bath_inside.is_some(), ic.k_bath_outside.is_some());
            if map == (true, false) || map == (false, true) {
                errors.push(
                    "initial.k_bath_inside and k_bath_outside must be given together".into(),
                );
            }
            if map.0 && is_cubic {
                errors.push("initial K_bath map requires model.kind = \"barreto_cressman\"".into());
            }
            if map.0 && c.model.k_bath.is_some() {
                errors.push(
                    "model.k_bath conflicts with the initial K_bath map; set one or the other".into(),
                );
            }
        }
        "gaussian" => {
            if ic.center.is_none() {
                errors.push("initial.center is required for preset 'gaussian'".into());
            }
            if let Some(d) = ic.decay {
                if d <= 0.0 {
                    errors.push(format!("initial.decay = {d} must be positive"));
                }
            }
            if let Some(name) = &ic.mask_region {
                let resolved = c;
                let found = resolved.regions.iter().find(|r| &r.name == name);
                match found {
                    None => {
                        let names: Vec<&str> =
                            resolved.regions.iter().map(|r| r.name.as_str()).collect();
                        errors.push(format!(
                            "initial.mask_region '{name}' does not name a region; valid regions: [{}]",
                            names.join(", ")
                        ));
                    }
                    Some(r) if r.rect.is_none() => {
                        errors.push(format!(
                            "initial.mask_region '{name}' is the background region; the mask needs a rect-bounded one"
                        ));
                    }
                    Some(_) => {}
                }
            }
        }
        "exact_wave" => {
            if !is_cubic {
                errors.push("initial.preset 'exact_wave' requires model.kind = \"cubic\"".into());
            }
            if c.physical.units != Units::Mm {
                errors.push(
                    "initial.preset 'exact_wave' uses the millimeter benchmark; set physical.units = \"mm\"".into(),
                );
            }
            // The manufactured forcing needs the wave plateaus to be the
            // cubic's stable rest states.
            if c.model.v_rest.is_some_and(|v| v != -85.0) {
                errors.push("initial.preset 'exact_wave' requires v_rest = -85 (the wave's rest plateau)".into());
            }
            if c.model.v_depol.is_some_and(|v| v != 30.0) {
                errors.push("initial.preset 'exact_wave' requires v_depol = 30 (the wave's upper plateau)".into());
            }
        }
        _ => {}
    }
    errors
}

/// Conductivity defaults when no regions are given: isotropic grey matter in
/// cm units, the anisotropic fiber benchmark in mm units.
fn default_region(units: Units) -> RegionConfig {
    match units {
        Units::Cm => RegionConfig {
            name: "grey".into(),
            sigma_along: 0.735,
            sigma_across: None,
            direction: None,
            rect: None,
        },
        Units::Mm => {
            let inv = std::f64::consts::FRAC_1_SQRT_2;
            RegionConfig {
                name: "tissue".into(),
                sigma_along: 0.62,
                sigma_across: Some(0.17),
                direction: Some([inv, inv]),
                rect: None,
            }
        }
    }
}

pub fn rect_from(a: [f64; 4]) -> Rect {
    Rect::new(a[0], a[1], a[2], a[3])
}

pub fn vec2_from(a: [f64; 2]) -> Vec2 {
    Vec2::new(a[0], a[1])
}

/// Shortest decimal that round-trips; TOML floats must keep a decimal point.
pub fn fmt_f64(v: f64) -> String {
    let s = format!("{v}");
    if s.contains('.') || s.contains('e') || s.contains("inf") || s.contains("NaN") {
        s
    } else {
        format!("{s}.0")
    }
}

fn fmt_f64_array(values: &[f64]) -> String {
    let inner: Vec<String> = values.iter().map(|&v| fmt_f64(v)).collect();
    format!("[{}]", inner.join(", "))
}

fn toml_string(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_cubic() -> String {
        r#"
[mesh]
source = "generate"
domain = [-3.0, -3.0, 3.0, 3.0]
elements = 60

[space]
degree = 2

[model]
kind = "cubic"

[physical]
units = "mm"

[time]
dt = 1e-5
t_end = 1e-4

[initial]
preset = "exact_wave"
"#
        .to_string()
    }

    #[test]
    fn minimal_config_parses_and_validates() {
        let c = SimulationConfig::from_toml(&minimal_cubic()).unwrap();
        let errors = c.validate();
        assert!(errors.is_empty(), "unexpected errors: {errors:?}");
        assert_eq!(c.seed, 4242);
        assert_eq!(c.penalty.eta0, 10.0);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = minimal_cubic().replace("degree = 2", "degree = 2\nflux = 3");
        let err = SimulationConfig::from_toml(&text).unwrap_err();
        assert!(err.contains("flux"), "error should name the key: {err}");
    }

    #[test]
    fn validation_collects_every_error() {
        let mut text = minimal_cubic();
        text = text.replace("dt = 1e-5", "dt = 0.0");
        text = text.replace("degree = 2", "degree = 0");
        text = text.replace("kind = \"cubic\"", "kind = \"cubic\"\nk_bath = 8.0");
        let c = SimulationConfig::from_toml(&text).unwrap();
        let errors = c.validate();
        assert!(errors.len() >= 3, "expected 3+ errors, got {errors:?}");
        assert!(errors.iter().any(|e| e.contains("time.dt")));
        assert!(errors.iter().any(|e| e.contains("space.degree")));
        assert!(errors.iter().any(|e| e.contains("model.k_bath")));
    }

    #[test]
    fn named_presets_expand_and_dump_round_trips() {
        let text = r#"
[mesh]
source = "generate"
domain = [0.0, 0.0, 1.0, 1.0]
elements = 100

[space]
degree = 3

[model]
kind = "barreto_cressman"

[time]
dt = 2.5e-3
t_end = 1.0

[initial]
preset = "test1_1"
"#;
        let c = SimulationConfig::from_toml(text).unwrap();
        assert!(c.validate().is_empty(), "{:?}", c.validate());
        let resolved = c.resolve();
        assert_eq!(resolved.initial.preset, "split");
        assert_eq!(resolved.initial.rect, Some(TEST1_1_UNSTABLE));
        assert_eq!(resolved.initial.k_bath_inside, Some(8.0));
        assert_eq!(resolved.initial.k_bath_outside, Some(4.0));
        // Default background region filled in.
        assert_eq!(resolved.regions.len(), 1);
        assert_eq!(resolved.regions[0].name, "grey");

        let dump1 = c.dump();
        let reparsed = SimulationConfig::from_toml(&dump1).unwrap();
        assert!(reparsed.validate().is_empty());
        let dump2 = reparsed.dump();
        assert_eq!(dump1, dump2, "dump must be a fixed point");
        assert_eq!(c.hash(), reparsed.hash());
    }

    #[test]
    fn mask_region_errors_name_the_valid_regions() {
        let text = r#"
[mesh]
source = "generate"
domain = [0.0, 0.0, 1.0, 1.0]
elements = 100

[space]
degree = 2

[model]
kind = "barreto_cressman"

[[regions]]
name = "grey"
sigma_along = 0.735

[[regions]]
name = "unstable"
sigma_along = 0.735
rect = [0.4, 0.4, 0.6, 0.6]

[time]
dt = 2.5e-3
t_end = 1.0

[initial]
preset = "gaussian"
center = [0.5, 0.5]
mask_region = "unstble"
"#;
        let c = SimulationConfig::from_toml(text).unwrap();
        let errors = c.validate();
        let msg = errors.join("\n");
        assert!(msg.contains("'unstble'"), "{msg}");
        assert!(msg.contains("grey") && msg.contains("unstable"), "{msg}");
    }

    #[test]
    fn preset_specific_fields_are_fenced() {
        let mut text = minimal_cubic();
        text = text.replace("preset = \"exact_wave\"", "preset = \"uniform\"\ncenter = [0.0, 0.0]");
        let c = SimulationConfig::from_toml(&text).unwrap();
        let errors = c.validate();
        assert!(
            errors.iter().any(|e| e.contains("initial.center")),
            "{errors:?}"
        );
    }

    #[test]
    fn float_formatting_round_trips() {
        for v in [0.0, -67.0, 2.5e-3, 1e-6, 0.1003, 1.0 / 3.0, 57.5] {
            let s = fmt_f64(v);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back.to_bits(), v.to_bits(), "{v} -> {s}");
        }
        assert_eq!(fmt_f64(-67.0), "-67.0");
    }
}
