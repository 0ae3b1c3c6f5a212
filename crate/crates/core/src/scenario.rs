//! Scenario files: flat `key = value` lines, `#` comments, optional
//! `[section]` headers that prefix the keys below them with `section.`.
//!
//! ```text
//! species = Yb
//! geometry = cubic:100
//! convention = paper-figure
//!
//! [sweep]
//! geometry = slab
//! sizes = log:1:1000:40
//! ```
//!
//! Lists are comma separated. Size grids accept either an explicit list or
//! `log:LO:HI:COUNT`. Every key that is absent takes the default listed in
//! [`Scenario::default`]; unknown keys are rejected.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use thiserror::Error;

use crate::dephasing::Convention;
use crate::physics::{ClockSpecies, LatticeGeometry, LatticeKind, PhysicalConstants};
use crate::sweep::{
    log_spaced_sizes, GeometryFamily, SweepSpec, DEFAULT_PHI_L_GRID, DEFAULT_SLAB_ATOMS_PER_LAYER,
};
use crate::systematics::{
    BbrGeometry, BudgetInputs, DiskWall, GaussianBeam, SystematicsCoefficients,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: duplicate key `{key}`")]
    DuplicateKey { line: usize, key: String },
    #[error("invalid value for `{key}`: {message}")]
    Invalid { key: String, message: String },
}

fn invalid(key: &str, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid {
        key: key.to_string(),
        message: message.into(),
    }
}

/// Size axis of a sweep, kept in the form it was written.
#[derive(Debug, Clone, PartialEq)]
pub enum SizeGrid {
    Log { lo: u64, hi: u64, count: usize },
    List(Vec<u64>),
}

impl SizeGrid {
    pub fn sizes(&self) -> Vec<u64> {
        match self {
            SizeGrid::Log { lo, hi, count } => log_spaced_sizes(*lo, *hi, *count),
            SizeGrid::List(v) => v.clone(),
        }
    }

    fn render(&self) -> String {
        match self {
            SizeGrid::Log { lo, hi, count } => format!("log:{lo}:{hi}:{count}"),
            SizeGrid::List(v) => join(v.iter().map(u64::to_string)),
        }
    }
}

impl FromStr for SizeGrid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some(rest) = s.strip_prefix("log:") {
            let parts: Vec<&str> = rest.split(':').collect();
            if parts.len() != 3 {
                return Err("expected log:LO:HI:COUNT".into());
            }
            let lo = parse_u64(parts[0])?;
            let hi = parse_u64(parts[1])?;
            let count = parse_u64(parts[2])? as usize;
            if lo == 0 || hi < lo || count == 0 {
                return Err("need 1 <= LO <= HI and COUNT >= 1".into());
            }
            Ok(SizeGrid::Log { lo, hi, count })
        } else {
            let v = parse_list(s, parse_u64)?;
            if v.is_empty() {
                return Err("size list must not be empty".into());
            }
            Ok(SizeGrid::List(v))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub species: ClockSpecies,
    pub constants: PhysicalConstants,
    pub geometry: LatticeKind,
    pub convention: Convention,
    /// Single-interrogation time for the threshold solve, s.
    pub tau: f64,

    pub dephase_phi_l: f64,
    pub dephase_n_sites: Vec<u64>,
    pub dephase_t_start: f64,
    pub dephase_t_stop: f64,
    pub dephase_t_points: usize,

    pub sweep_family: GeometryFamily,
    pub sweep_sizes: SizeGrid,
    pub sweep_phi_l: Vec<f64>,

    pub systematics: SystematicsScenario,

    pub output_dir: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystematicsScenario {
    pub n_site: u64,
    pub coeffs: SystematicsCoefficients,
    pub bias_field: f64,
    pub calibration_resolution: f64,
    pub e_gradient: f64,
    pub e_baseline: f64,
    pub beam_waist: f64,
    /// Separation along the lattice beam in lattice wavelengths.
    pub beam_separation_wavelengths: f64,
    pub wall_distance: f64,
    pub wall_radius: f64,
    pub t1: f64,
    pub t2: f64,
    pub signal_override: Option<f64>,
}

impl Default for Scenario {
    fn default() -> Self {
        let species = ClockSpecies::ytterbium();
        let budget = BudgetInputs::ytterbium_default(&species);
        Scenario {
            species,
            constants: PhysicalConstants::default(),
            geometry: LatticeKind::Cubic { n_site: 100 },
            convention: Convention::Physical,
            tau: 30.0,
            dephase_phi_l: 1e-5,
            dephase_n_sites: vec![100, 200, 300, 400, 500],
            dephase_t_start: 1.0,
            dephase_t_stop: 200.0,
            dephase_t_points: 200,
            sweep_family: GeometryFamily::Cubic,
            sweep_sizes: SizeGrid::Log {
                lo: 2,
                hi: 1000,
                count: 40,
            },
            sweep_phi_l: DEFAULT_PHI_L_GRID.to_vec(),
            systematics: SystematicsScenario {
                n_site: budget.n_site,
                coeffs: budget.coeffs,
                bias_field: budget.bias_field,
                calibration_resolution: budget.calibration_resolution,
                e_gradient: budget.e_gradient,
                e_baseline: budget.e_baseline,
                beam_waist: budget.beam.waist,
                beam_separation_wavelengths: 100.0,
                wall_distance: budget.bbr.wall_distance,
                wall_radius: budget.bbr.wall.radius,
                t1: budget.bbr.t1,
                t2: budget.bbr.t2,
                signal_override: None,
            },
            output_dir: "out".to_string(),
        }
    }
}

fn parse_f64(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("`{s}` is not finite"))
    }
}

fn parse_u64(s: &str) -> Result<u64, String> {
    s.parse()
        .map_err(|_| format!("`{s}` is not a non-negative integer"))
}

fn parse_list<T>(s: &str, f: impl Fn(&str) -> Result<T, String>) -> Result<Vec<T>, String> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(',').map(|p| f(p.trim())).collect()
}

fn join(items: impl Iterator<Item = String>) -> String {
    items.collect::<Vec<_>>().join(",")
}

fn fmt_f64(x: f64) -> String {
    format!("{x:e}")
}

fn parse_geometry(s: &str) -> Result<LatticeKind, String> {
    let (kind, arg) = s
        .split_once(':')
        .ok_or("expected cubic:N or slab:ATOMSxLAYERS")?;
    match kind {
        "cubic" => Ok(LatticeKind::Cubic {
            n_site: parse_u64(arg)?,
        }),
        "slab" => {
            let (a, l) = arg
                .split_once('x')
                .ok_or("expected slab:ATOMS_PER_LAYERxN_LAYER")?;
            Ok(LatticeKind::Slab {
                atoms_per_layer: parse_u64(a)?,
                n_layer: parse_u64(l)?,
            })
        }
        other => Err(format!("unknown geometry `{other}`")),
    }
}

fn render_geometry(kind: &LatticeKind) -> String {
    match kind {
        LatticeKind::Cubic { n_site } => format!("cubic:{n_site}"),
        LatticeKind::Slab {
            atoms_per_layer,
            n_layer,
        } => format!("slab:{atoms_per_layer}x{n_layer}"),
    }
}

/// Every accepted key, in the order [`Scenario::serialize`] writes them.
pub const KEYS: &[&str] = &[
    "species",
    "species.omega0",
    "species.magic_wavelength",
    "constants.g",
    "constants.c",
    "geometry",
    "convention",
    "threshold.tau",
    "dephase.phi_l",
    "dephase.n_sites",
    "dephase.t_start",
    "dephase.t_stop",
    "dephase.t_points",
    "sweep.geometry",
    "sweep.atoms_per_layer",
    "sweep.sizes",
    "sweep.phi_l",
    "systematics.n_site",
    "systematics.zeeman1",
    "systematics.zeeman2",
    "systematics.dc_stark",
    "systematics.p2_zeeman",
    "systematics.p2_lifetime",
    "systematics.bbr_fractional",
    "systematics.bias_field",
    "systematics.calibration_resolution",
    "systematics.e_gradient",
    "systematics.e_baseline",
    "systematics.beam_waist",
    "systematics.beam_separation_wavelengths",
    "systematics.wall_distance",
    "systematics.wall_radius",
    "systematics.t1",
    "systematics.t2",
    "systematics.signal_hz",
    "output.dir",
];

/// Splits the text into (line number, key, value) triples.
fn tokenize(text: &str) -> Result<BTreeMap<String, (usize, String)>, ScenarioError> {
    let mut entries = BTreeMap::new();
    let mut section = String::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(name) = content.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| ScenarioError::Syntax {
                    line,
                    message: "unterminated section header".into(),
                })?;
            section = name.trim().to_string();
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| ScenarioError::Syntax {
                line,
                message: format!("expected `key = value`, got `{content}`"),
            })?;
        let key = key.trim();
        if key.is_empty() {
            return Err(ScenarioError::Syntax {
                line,
                message: "empty key".into(),
            });
        }
        let key = if section.is_empty() {
            key.to_string()
        } else {
            format!("{section}.{key}")
        };
        if !KEYS.contains(&key.as_str()) {
            return Err(ScenarioError::UnknownKey { line, key });
        }
        if entries.contains_key(&key) {
            return Err(ScenarioError::DuplicateKey { line, key });
        }
        entries.insert(key, (line, value.trim().to_string()));
    }
    Ok(entries)
}

impl Scenario {
    /// Parses and validates a scenario, filling defaults for absent keys.
    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        let entries = tokenize(text)?;
        let mut s = Scenario::default();
        let get = |k: &str| entries.get(k).map(|(_, v)| v.as_str());
        let field = |k: &str, r: Result<(), String>| r.map_err(|m| invalid(k, m));

        if let Some(name) = get("species") {
            match ClockSpecies::preset(name) {
                Some(p) => s.species = p,
                None => {
                    if get("species.omega0").is_none() || get("species.magic_wavelength").is_none()
                    {
                        return Err(invalid(
                            "species",
                            format!("`{name}` is not a preset; give species.omega0 and species.magic_wavelength"),
                        ));
                    }
                    s.species.name = name.to_string();
                }
            }
        }

        for (key, value) in entries.iter().map(|(k, (_, v))| (k.as_str(), v.as_str())) {
            let f = |target: &mut f64| -> Result<(), String> {
                *target = parse_f64(value)?;
                Ok(())
            };
            let u = |target: &mut u64| -> Result<(), String> {
                *target = parse_u64(value)?;
                Ok(())
            };
            let sys = &mut s.systematics;
            let result = match key {
                "species" => Ok(()),
                "species.omega0" => f(&mut s.species.omega0),
                "species.magic_wavelength" => f(&mut s.species.magic_wavelength),
                "constants.g" => f(&mut s.constants.g),
                "constants.c" => f(&mut s.constants.c),
                "geometry" => parse_geometry(value).map(|g| s.geometry = g),
                "convention" => value.parse().map(|c| s.convention = c),
                "threshold.tau" => f(&mut s.tau),
                "dephase.phi_l" => f(&mut s.dephase_phi_l),
                "dephase.n_sites" => parse_list(value, parse_u64).map(|v| s.dephase_n_sites = v),
                "dephase.t_start" => f(&mut s.dephase_t_start),
                "dephase.t_stop" => f(&mut s.dephase_t_stop),
                "dephase.t_points" => parse_u64(value).map(|v| s.dephase_t_points = v as usize),
                "sweep.geometry" => match value {
                    "cubic" => {
                        s.sweep_family = GeometryFamily::Cubic;
                        Ok(())
                    }
                    "slab" => {
                        if s.sweep_family == GeometryFamily::Cubic {
                            s.sweep_family = GeometryFamily::Slab {
                                atoms_per_layer: DEFAULT_SLAB_ATOMS_PER_LAYER,
                            };
                        }
                        Ok(())
                    }
                    other => Err(format!("unknown sweep geometry `{other}`")),
                },
                "sweep.atoms_per_layer" => Ok(()),
                "sweep.sizes" => value.parse().map(|g| s.sweep_sizes = g),
                "sweep.phi_l" => parse_list(value, parse_f64).map(|v| s.sweep_phi_l = v),
                "systematics.n_site" => u(&mut sys.n_site),
                "systematics.zeeman1" => f(&mut sys.coeffs.zeeman1),
                "systematics.zeeman2" => f(&mut sys.coeffs.zeeman2),
                "systematics.dc_stark" => f(&mut sys.coeffs.dc_stark),
                "systematics.p2_zeeman" => f(&mut sys.coeffs.p2_zeeman),
                "systematics.p2_lifetime" => f(&mut sys.coeffs.p2_lifetime),
                "systematics.bbr_fractional" => f(&mut sys.coeffs.bbr_fractional),
                "systematics.bias_field" => f(&mut sys.bias_field),
                "systematics.calibration_resolution" => f(&mut sys.calibration_resolution),
                "systematics.e_gradient" => f(&mut sys.e_gradient),
                "systematics.e_baseline" => f(&mut sys.e_baseline),
                "systematics.beam_waist" => f(&mut sys.beam_waist),
                "systematics.beam_separation_wavelengths" => {
                    f(&mut sys.beam_separation_wavelengths)
                }
                "systematics.wall_distance" => f(&mut sys.wall_distance),
                "systematics.wall_radius" => f(&mut sys.wall_radius),
                "systematics.t1" => f(&mut sys.t1),
                "systematics.t2" => f(&mut sys.t2),
                "systematics.signal_hz" => parse_f64(value).map(|v| sys.signal_override = Some(v)),
                "output.dir" => {
                    s.output_dir = value.to_string();
                    Ok(())
                }
                _ => unreachable!("tokenize only admits known keys"),
            };
            field(key, result)?;
        }
        // Order independent: the slab atom count needs the family first.
        if let Some(v) = get("sweep.atoms_per_layer") {
            let n = parse_u64(v).map_err(|m| invalid("sweep.atoms_per_layer", m))?;
            match &mut s.sweep_family {
                GeometryFamily::Slab { atoms_per_layer } => *atoms_per_layer = n,
                GeometryFamily::Cubic => {
                    return Err(invalid(
                        "sweep.atoms_per_layer",
                        "only valid with sweep.geometry = slab",
                    ))
                }
            }
        }
        s.validate()?;
        Ok(s)
    }

    /// Normalised text form; `parse(serialize(s)) == s`.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        let sys = &self.systematics;
        put("species", self.species.name.clone());
        put("species.omega0", fmt_f64(self.species.omega0));
        put(
            "species.magic_wavelength",
            fmt_f64(self.species.magic_wavelength),
        );
        put("constants.g", fmt_f64(self.constants.g));
        put("constants.c", fmt_f64(self.constants.c));
        put("geometry", render_geometry(&self.geometry));
        put("convention", self.convention.to_string());
        put("threshold.tau", fmt_f64(self.tau));
        put("dephase.phi_l", fmt_f64(self.dephase_phi_l));
        put(
            "dephase.n_sites",
            join(self.dephase_n_sites.iter().map(u64::to_string)),
        );
        put("dephase.t_start", fmt_f64(self.dephase_t_start));
        put("dephase.t_stop", fmt_f64(self.dephase_t_stop));
        put("dephase.t_points", self.dephase_t_points.to_string());
        put("sweep.geometry", self.sweep_family.name().to_string());
        if let GeometryFamily::Slab { atoms_per_layer } = self.sweep_family {
            put("sweep.atoms_per_layer", atoms_per_layer.to_string());
        }
        put("sweep.sizes", self.sweep_sizes.render());
        put(
            "sweep.phi_l",
            join(self.sweep_phi_l.iter().map(|&x| fmt_f64(x))),
        );
        put("systematics.n_site", sys.n_site.to_string());
        put("systematics.zeeman1", fmt_f64(sys.coeffs.zeeman1));
        put("systematics.zeeman2", fmt_f64(sys.coeffs.zeeman2));
        put("systematics.dc_stark", fmt_f64(sys.coeffs.dc_stark));
        put("systematics.p2_zeeman", fmt_f64(sys.coeffs.p2_zeeman));
        put("systematics.p2_lifetime", fmt_f64(sys.coeffs.p2_lifetime));
        put(
            "systematics.bbr_fractional",
            fmt_f64(sys.coeffs.bbr_fractional),
        );
        put("systematics.bias_field", fmt_f64(sys.bias_field));
        put(
            "systematics.calibration_resolution",
            fmt_f64(sys.calibration_resolution),
        );
        put("systematics.e_gradient", fmt_f64(sys.e_gradient));
        put("systematics.e_baseline", fmt_f64(sys.e_baseline));
        put("systematics.beam_waist", fmt_f64(sys.beam_waist));
        put(
            "systematics.beam_separation_wavelengths",
            fmt_f64(sys.beam_separation_wavelengths),
        );
        put("systematics.wall_distance", fmt_f64(sys.wall_distance));
        put("systematics.wall_radius", fmt_f64(sys.wall_radius));
        put("systematics.t1", fmt_f64(sys.t1));
        put("systematics.t2", fmt_f64(sys.t2));
        if let Some(v) = sys.signal_override {
            put("systematics.signal_hz", fmt_f64(v));
        }
        put("output.dir", self.output_dir.clone());
        out
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        ClockSpecies::new(
            self.species.name.clone(),
            self.species.omega0,
            self.species.magic_wavelength,
        )
        .map_err(|e| invalid("species", e.to_string()))?;
        PhysicalConstants::new(self.constants.g, self.constants.c)
            .map_err(|e| invalid("constants", e.to_string()))?;
        self.geometry()
            .map_err(|e| invalid("geometry", e.to_string()))?;
        let positive = |k: &str, v: f64| {
            if v > 0.0 {
                Ok(())
            } else {
                Err(invalid(k, format!("must be > 0, got {v}")))
            }
        };
        let non_negative = |k: &str, v: f64| {
            if v >= 0.0 {
                Ok(())
            } else {
                Err(invalid(k, format!("must be >= 0, got {v}")))
            }
        };
        positive("threshold.tau", self.tau)?;
        non_negative("dephase.phi_l", self.dephase_phi_l)?;
        if self.dephase_n_sites.is_empty() || self.dephase_n_sites.contains(&0) {
            return Err(invalid(
                "dephase.n_sites",
                "need at least one size, all >= 1",
            ));
        }
        non_negative("dephase.t_start", self.dephase_t_start)?;
        if self.dephase_t_points == 0 {
            return Err(invalid("dephase.t_points", "must be >= 1"));
        }
        if self.dephase_t_points > 1 && self.dephase_t_stop <= self.dephase_t_start {
            return Err(invalid("dephase.t_stop", "must exceed dephase.t_start"));
        }
        self.sweep_spec()
            .validate()
            .map_err(|e| invalid("sweep", e.to_string()))?;

        let sys = &self.systematics;
        if sys.n_site == 0 {
            return Err(invalid("systematics.n_site", "must be >= 1"));
        }
        for (k, v) in [
            ("systematics.zeeman1", sys.coeffs.zeeman1),
            ("systematics.dc_stark", sys.coeffs.dc_stark),
            ("systematics.p2_zeeman", sys.coeffs.p2_zeeman),
            ("systematics.p2_lifetime", sys.coeffs.p2_lifetime),
            ("systematics.beam_waist", sys.beam_waist),
            (
                "systematics.beam_separation_wavelengths",
                sys.beam_separation_wavelengths,
            ),
            ("systematics.wall_distance", sys.wall_distance),
            ("systematics.wall_radius", sys.wall_radius),
            ("systematics.t1", sys.t1),
            ("systematics.t2", sys.t2),
        ] {
            positive(k, v)?;
        }
        for (k, v) in [
            ("systematics.bbr_fractional", sys.coeffs.bbr_fractional),
            ("systematics.bias_field", sys.bias_field),
            (
                "systematics.calibration_resolution",
                sys.calibration_resolution,
            ),
            ("systematics.e_gradient", sys.e_gradient),
            ("systematics.e_baseline", sys.e_baseline),
        ] {
            non_negative(k, v)?;
        }
        if let Some(v) = sys.signal_override {
            non_negative("systematics.signal_hz", v)?;
        }
        let inputs = self.budget_inputs();
        inputs
            .bbr
            .validate()
            .map_err(|e| invalid("systematics", e.to_string()))?;
        if self.output_dir.is_empty() {
            return Err(invalid("output.dir", "must not be empty"));
        }
        Ok(())
    }

    /// Layer spacing λ/2 of the species, m.
    pub fn layer_spacing(&self) -> f64 {
        self.species.lattice_spacing()
    }

    pub fn geometry(&self) -> crate::Result<LatticeGeometry> {
        LatticeGeometry::new(self.geometry, self.layer_spacing())
    }

    /// Linear dephasing time grid.
    pub fn dephase_t_grid(&self) -> Vec<f64> {
        let n = self.dephase_t_points;
        if n == 1 {
            return vec![self.dephase_t_start];
        }
        let step = (self.dephase_t_stop - self.dephase_t_start) / (n - 1) as f64;
        (0..n)
            .map(|i| {
                if i == n - 1 {
                    self.dephase_t_stop
                } else {
                    self.dephase_t_start + step * i as f64
                }
            })
            .collect()
    }

    pub fn sweep_spec(&self) -> SweepSpec {
        SweepSpec {
            family: self.sweep_family,
            sizes: self.sweep_sizes.sizes(),
            phi_l: self.sweep_phi_l.clone(),
            convention: self.convention,
        }
    }

    pub fn budget_inputs(&self) -> BudgetInputs {
        let sys = &self.systematics;
        let spacing = self.layer_spacing();
        BudgetInputs {
            n_site: sys.n_site,
            layer_spacing: spacing,
            coeffs: sys.coeffs,
            bias_field: sys.bias_field,
            calibration_resolution: sys.calibration_resolution,
            e_gradient: sys.e_gradient,
            e_baseline: sys.e_baseline,
            beam: GaussianBeam {
                waist: sys.beam_waist,
                wavelength: self.species.magic_wavelength,
            },
            beam_separation: sys.beam_separation_wavelengths * self.species.magic_wavelength,
            bbr: BbrGeometry {
                wall_distance: sys.wall_distance,
                wall: DiskWall {
                    radius: sys.wall_radius,
                },
                t1: sys.t1,
                t2: sys.t2,
                extent: sys.n_site as f64 * spacing,
            },
            signal_override: sys.signal_override,
        }
    }
}
