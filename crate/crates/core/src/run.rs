//! Runs one subcommand against a scenario and writes its artifacts plus a
//! manifest (`run_<command>.json`) listing every file with its SHA-256.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde_json::Value;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::dephasing::{dephase_curve, Convention, DephasingInput};
use crate::output::{fmt_num, json_opt, short, to_json, Csv, Obj, Table};
use crate::physics::InterrogationParams;
use crate::scenario::{Scenario, ScenarioError};
use crate::sweep::{curve, regime_slice, scaling_exponent, sweep, PointFlag, Regime};
use crate::systematics::{assemble_budget, Budget};
use crate::threshold::{
    solve_decoherence_size, solve_tau_max, Partition, TauMaxProblem, ThresholdProblem,
};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Threshold,
    DephaseCurve,
    StabilitySweep,
    Budget,
}

impl Command {
    pub fn as_str(&self) -> &'static str {
        match self {
            Command::Threshold => "threshold",
            Command::DephaseCurve => "dephase-curve",
            Command::StabilitySweep => "stability-sweep",
            Command::Budget => "budget",
        }
    }

    fn manifest_name(&self) -> String {
        format!("run_{}.json", self.as_str().replace('-', "_"))
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("scenario: {0}")]
    Scenario(#[from] ScenarioError),
    #[error("{0}")]
    Model(#[from] crate::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

impl RunError {
    /// 2 for invalid input, 1 for I/O failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Scenario(_) | RunError::Model(_) => 2,
            RunError::Io { .. } => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FileRecord {
    pub name: String,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub command: Command,
    pub convention: Convention,
    pub scenario_sha256: String,
    pub files: Vec<FileRecord>,
    /// Points that hit a solver limit and carry a non-ok flag.
    pub flagged: usize,
    /// Human readable summary for stdout.
    pub summary: String,
}

impl RunRecord {
    /// 0 on success, 3 when points were flagged and flags are not allowed.
    pub fn exit_code(&self, allow_flags: bool) -> i32 {
        if self.flagged > 0 && !allow_flags {
            3
        } else {
            0
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

struct Artifacts {
    files: Vec<(String, String)>,
    flagged: usize,
    summary: String,
}

/// Executes `command`, writing artifacts into `out_dir`.
pub fn run(command: Command, scenario: &Scenario, out_dir: &Path) -> Result<RunRecord, RunError> {
    scenario.validate()?;
    let artifacts = match command {
        Command::Threshold => threshold(scenario)?,
        Command::DephaseCurve => dephase(scenario)?,
        Command::StabilitySweep => stability(scenario)?,
        Command::Budget => budget(scenario)?,
    };
    let io_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| RunError::Io { path, source }
    };
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;

    let normalized = scenario.serialize();
    let scenario_sha256 = sha256_hex(normalized.as_bytes());
    let mut files = Vec::new();
    for (name, contents) in &artifacts.files {
        let path = out_dir.join(name);
        fs::write(&path, contents).map_err(io_err(&path))?;
        files.push(FileRecord {
            name: name.clone(),
            bytes: contents.len(),
            sha256: sha256_hex(contents.as_bytes()),
        });
    }
    let manifest = Obj::new()
        .put("tool", "gravclock")
        .put("version", VERSION)
        .put("command", command.as_str())
        .put("convention", scenario.convention.as_str())
        .put("scenario_sha256", scenario_sha256.clone())
        .put("scenario", normalized)
        .put("flagged_points", artifacts.flagged)
        .put(
            "files",
            Value::Array(
                files
                    .iter()
                    .map(|f| {
                        Obj::new()
                            .put("name", f.name.clone())
                            .put("bytes", f.bytes)
                            .put("sha256", f.sha256.clone())
                            .build()
                    })
                    .collect(),
            ),
        )
        .build();
    let path = out_dir.join(command.manifest_name());
    fs::write(&path, to_json(&manifest)).map_err(io_err(&path))?;

    Ok(RunRecord {
        command,
        convention: scenario.convention,
        scenario_sha256,
        files,
        flagged: artifacts.flagged,
        summary: artifacts.summary,
    })
}

fn threshold(s: &Scenario) -> Result<Artifacts, RunError> {
    let spacing = s.layer_spacing();
    let mut results = Vec::new();
    let mut table = Table::new(&[
        "partition",
        "n*",
        "n_site",
        "atoms",
        "sql_per_layer",
        "redshift_span",
    ]);
    for partition in [Partition::PerLayer, Partition::Halves] {
        let d = solve_decoherence_size(&ThresholdProblem {
            species: s.species.clone(),
            consts: s.constants,
            tau: s.tau,
            partition,
            convention: s.convention,
        })?;
        let n = d.n_site as f64;
        let sql = s.species.per_layer_sql(s.tau, n)?;
        let redshift = s.constants.relative_redshift(n * spacing);
        let qpn = s
            .species
            .qpn_stability(&InterrogationParams::single_sequence(s.tau, 1.0)?, d.atoms)?;
        table.push(vec![
            partition.as_str().into(),
            format!("{:.3}", d.n_real),
            d.n_site.to_string(),
            d.atoms.to_string(),
            short(sql),
            short(redshift),
        ]);
        results.push(
            Obj::new()
                .put("partition", partition.as_str())
                .num("n_real", d.n_real)
                .put("n_site", d.n_site)
                .put("atoms", d.atoms)
                .num("sql_per_layer", sql)
                .num("redshift_span", redshift)
                .num("qpn_whole_ensemble", qpn)
                .put("derivation", derivation(partition))
                .build(),
        );
    }

    let geometry = s.geometry()?;
    let problem = TauMaxProblem::new(
        geometry,
        s.dephase_phi_l,
        &s.species,
        &s.constants,
        s.convention,
    )?;
    let (tau_max, flagged) = match solve_tau_max(&problem) {
        Ok(t) => (
            Obj::new()
                .put("flag", PointFlag::Ok.as_str())
                .num("tau_s", t.tau)
                .num("error", t.error)
                .num("threshold", t.threshold)
                .put("criterion", t.criterion.as_str())
                .build(),
            0,
        ),
        Err(crate::Error::NonBracketable { threshold, tau_cap }) => (
            Obj::new()
                .put("flag", PointFlag::NonBracketable.as_str())
                .put("tau_s", Value::Null)
                .num("threshold", threshold)
                .num("tau_cap_s", tau_cap)
                .put("criterion", problem.criterion().as_str())
                .build(),
            1,
        ),
        Err(e) => return Err(e.into()),
    };

    let json = Obj::new()
        .put("species", s.species.name.clone())
        .put("convention", s.convention.as_str())
        .num("tau_s", s.tau)
        .put("decoherence_size", Value::Array(results))
        .put(
            "tau_max",
            Obj::new()
                .put("geometry", geometry_label(s))
                .num("phi_l", s.dephase_phi_l)
                .put("result", tau_max.clone())
                .build(),
        )
        .build();
    let mut summary = format!("decoherence size at tau = {} s ({})\n", s.tau, s.convention);
    summary.push_str(&table.render());
    summary.push_str(&format!("halves: {}\n", derivation(Partition::Halves)));
    match tau_max.get("tau_s").and_then(Value::as_f64) {
        Some(t) => summary.push_str(&format!(
            "tau_max for {} at phi_l = {:e}: {} s\n",
            geometry_label(s),
            s.dephase_phi_l,
            short(t)
        )),
        None => summary.push_str(&format!(
            "tau_max for {} at phi_l = {:e}: non-bracketable\n",
            geometry_label(s),
            s.dephase_phi_l
        )),
    }
    Ok(Artifacts {
        files: vec![
            ("threshold.json".into(), to_json(&json)),
            ("threshold.txt".into(), summary.clone()),
        ],
        flagged,
        summary,
    })
}

fn derivation(partition: Partition) -> &'static str {
    match partition {
        Partition::PerLayer => "per-layer SQL equated to the top-to-bottom redshift",
        Partition::Halves => {
            "reconstruction: full-span redshift equated to the SQL of half the ensemble (n^3/2 atoms)"
        }
    }
}

fn geometry_label(s: &Scenario) -> String {
    match s.geometry {
        crate::physics::LatticeKind::Cubic { n_site } => format!("cubic:{n_site}"),
        crate::physics::LatticeKind::Slab {
            atoms_per_layer,
            n_layer,
        } => format!("slab:{atoms_per_layer}x{n_layer}"),
    }
}

fn dephase(s: &Scenario) -> Result<Artifacts, RunError> {
    let phi_g = s
        .species
        .per_layer_phase_rate(&s.constants, s.layer_spacing());
    let grid = s.dephase_t_grid();
    let mut csv = Csv::new(&["t_s", "n_site", "phi_l", "convention", "ratio", "contrast"]);
    let mut summary = format!(
        "dephasing ratio at t = {} s, phi_l = {:e} ({})\n",
        grid[grid.len() - 1],
        s.dephase_phi_l,
        s.convention
    );
    for &n in &s.dephase_n_sites {
        let template = DephasingInput::new(s.dephase_phi_l, phi_g, n, grid[0], s.convention)?;
        let points = dephase_curve(&template, &grid)?;
        for p in &points {
            csv.push(vec![
                fmt_num(p.t),
                n.to_string(),
                fmt_num(s.dephase_phi_l),
                s.convention.as_str().into(),
                p.ratio.map(fmt_num).unwrap_or_default(),
                fmt_num(p.contrast),
            ]);
        }
        let last = points.last().expect("grid is non-empty");
        summary.push_str(&format!(
            "  n_site {n:>6}: ratio {}  contrast {}\n",
            last.ratio.map(short).unwrap_or_else(|| "-".into()),
            short(last.contrast)
        ));
    }
    Ok(Artifacts {
        files: vec![("dephase_curve.csv".into(), csv.render())],
        flagged: 0,
        summary,
    })
}

fn stability(s: &Scenario) -> Result<Artifacts, RunError> {
    let spec = s.sweep_spec();
    let points = sweep(&s.species, &s.constants, &spec)?;
    let mut csv = Csv::new(&[
        "geometry",
        "size",
        "phi_l",
        "convention",
        "tau_max_s",
        "sigma_at_tau",
        "sigma_at_1s",
        "flag",
    ]);
    for p in &points {
        csv.push(vec![
            p.family.name().into(),
            p.size.to_string(),
            fmt_num(p.phi_l),
            p.convention.as_str().into(),
            fmt_num(p.tau_max),
            fmt_num(p.sigma_at_tau),
            fmt_num(p.sigma_at_1s),
            p.flag.as_str().into(),
        ]);
    }
    let flagged = points.iter().filter(|p| p.flag != PointFlag::Ok).count();

    let mut fits = Csv::new(&[
        "geometry",
        "phi_l",
        "convention",
        "regime",
        "points",
        "exponent",
        "status",
    ]);
    let mut table = Table::new(&["phi_l", "min_size", "min_sigma_1s", "small", "large"]);
    for &phi_l in &spec.phi_l {
        let c = curve(&points, phi_l);
        let mut cells = Vec::new();
        for (regime, label) in [(Regime::Small, "small"), (Regime::Large, "large")] {
            let slice = regime_slice(&c, regime);
            let (exp, status) = match scaling_exponent(slice) {
                Ok(e) => (fmt_num(e), "ok".to_string()),
                Err(e) => (String::new(), e.to_string().replace(',', ";")),
            };
            cells.push(if exp.is_empty() {
                "-".to_string()
            } else {
                format!("{:+.3}", exp.parse::<f64>().unwrap_or(f64::NAN))
            });
            fits.push(vec![
                spec.family.name().into(),
                fmt_num(phi_l),
                spec.convention.as_str().into(),
                label.into(),
                slice.len().to_string(),
                exp,
                status,
            ]);
        }
        let best = c
            .iter()
            .min_by(|a, b| a.sigma_at_1s.total_cmp(&b.sigma_at_1s));
        table.push(vec![
            format!("{phi_l:e}"),
            best.map_or("-".into(), |b| b.size.to_string()),
            best.map_or("-".into(), |b| short(b.sigma_at_1s)),
            cells[0].clone(),
            cells[1].clone(),
        ]);
    }
    let mut summary = format!(
        "{} sweep, {} sizes x {} drifts ({}), {} flagged\n",
        spec.family.name(),
        spec.sizes.len(),
        spec.phi_l.len(),
        spec.convention,
        flagged
    );
    summary.push_str(&table.render());
    Ok(Artifacts {
        files: vec![
            ("stability_sweep.csv".into(), csv.render()),
            ("scaling_exponents.csv".into(), fits.render()),
        ],
        flagged,
        summary,
    })
}

fn budget_json(b: &Budget, s: &Scenario) -> Value {
    let entries = b
        .entries
        .iter()
        .map(|e| {
            Obj::new()
                .put("name", e.name.clone())
                .num("shift_hz", e.differential_shift)
                .num("fractional", e.fractional)
                .put("passes", e.passes)
                .put("note", e.note.clone())
                .build()
        })
        .collect();
    Obj::new()
        .put("species", s.species.name.clone())
        .put("convention", s.convention.as_str())
        .put(
            "signal",
            Obj::new()
                .put("n_site", b.signal.n_site)
                .num("delta_z_m", b.signal.delta_z)
                .num("delta_nu_hz", b.signal.delta_nu)
                .num("fractional", b.signal.fractional())
                .build(),
        )
        .put("all_pass", b.all_pass())
        .put("entries", Value::Array(entries))
        .num("allowed_b_gradient_g_per_m", b.allowed_b_gradient)
        .num("calibration_shift_hz", b.calibration_shift)
        .num("allowed_e_gradient_v_per_m2", b.allowed_e_gradient)
        .put(
            "lattice_intensity",
            Obj::new()
                .num("rayleigh_range_m", b.intensity.rayleigh_range)
                .num("z_numeric_m", b.intensity.z_numeric)
                .num("z_closed_form_m", b.intensity.z_closed_form)
                .num("z_stationary_m", b.intensity.z_stationary)
                .num("max_change", b.intensity.max_change)
                .num("published_change", b.intensity.published_change)
                .build(),
        )
        .put(
            "bbr",
            Obj::new()
                .num("ratio_minus_one", b.bbr.ratio_minus_one)
                .num("fractional_shift", b.bbr.fractional_shift)
                .num("temperature_limit_k", b.temperature_limit)
                .build(),
        )
        .put(
            "signal_override_hz",
            json_opt(s.systematics.signal_override),
        )
        .build()
}

fn budget(s: &Scenario) -> Result<Artifacts, RunError> {
    let b = assemble_budget(&s.species, &s.constants, &s.budget_inputs())?;
    let mut table = Table::new(&["effect", "shift_hz", "fractional", "verdict", "note"]);
    for e in &b.entries {
        table.push(vec![
            e.name.clone(),
            short(e.differential_shift),
            short(e.fractional),
            if e.passes { "pass" } else { "FAIL" }.into(),
            e.note.clone(),
        ]);
    }
    let mut summary = format!(
        "signal: n_site {} over {} m, {} Hz (fractional {})\n",
        b.signal.n_site,
        short(b.signal.delta_z),
        short(b.signal.delta_nu),
        short(b.signal.fractional())
    );
    summary.push_str(&table.render());
    summary.push_str(&format!(
        "allowed B gradient {} G/m, calibration line shift {} Hz\n\
         allowed E gradient {} (V/m)/m\n\
         lattice intensity change {} (published {})\n\
         BBR temperature uniformity limit {} K\n\
         overall: {}\n",
        short(b.allowed_b_gradient),
        short(b.calibration_shift),
        short(b.allowed_e_gradient),
        short(b.intensity.max_change),
        short(b.intensity.published_change),
        short(b.temperature_limit),
        if b.all_pass() {
            "all effects below signal"
        } else {
            "some effects exceed signal"
        }
    ));
    let json = budget_json(&b, s);
    Ok(Artifacts {
        files: vec![
            ("budget.json".into(), to_json(&json)),
            ("budget.txt".into(), summary.clone()),
        ],
        flagged: 0,
        summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp() -> tempfile::TempDir {
        tempfile::tempdir().unwrap()
    }

    #[test]
    fn threshold_run_writes_manifest() {
        let dir = tmp();
        let rec = run(Command::Threshold, &Scenario::default(), dir.path()).unwrap();
        assert_eq!(rec.flagged, 0);
        assert!(rec.summary.contains("497"));
        let manifest = fs::read_to_string(dir.path().join("run_threshold.json")).unwrap();
        let v: Value = serde_json::from_str(&manifest).unwrap();
        assert_eq!(v["scenario_sha256"], rec.scenario_sha256);
        assert_eq!(v["files"].as_array().unwrap().len(), 2);
    }

    #[test]
    fn digest_tracks_convention() {
        let mut s = Scenario::default();
        let a = sha256_hex(s.serialize().as_bytes());
        s.convention = Convention::PaperFigure;
        assert_ne!(a, sha256_hex(s.serialize().as_bytes()));
    }

    #[test]
    fn flagged_sweep_sets_exit_code() {
        let s = Scenario::parse("sweep.geometry = slab\nsweep.sizes = 1\nsweep.phi_l = 0").unwrap();
        let dir = tmp();
        let rec = run(Command::StabilitySweep, &s, dir.path()).unwrap();
        assert_eq!(rec.flagged, 1);
        assert_eq!(rec.exit_code(false), 3);
        assert_eq!(rec.exit_code(true), 0);
    }

    #[test]
    fn dephase_rows_carry_convention() {
        let s =
            Scenario::parse("dephase.n_sites = 2\ndephase.t_points = 3\nconvention = paper-figure")
                .unwrap();
        let dir = tmp();
        run(Command::DephaseCurve, &s, dir.path()).unwrap();
        let csv = fs::read_to_string(dir.path().join("dephase_curve.csv")).unwrap();
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.lines().skip(1).all(|l| l.contains(",paper-figure,")));
    }
}
