//! Decoherence thresholds.
//!
//! Two questions are answered here. How large can a cubic ensemble get before
//! the redshift between its top and bottom layer exceeds the standard quantum
//! limit of a single interrogation? And for a given ensemble and laser, how
//! long can one Ramsey interrogation last before the dephasing error of the
//! read-out phase reaches the SQL of one layer?

use std::fmt;
use std::str::FromStr;

use crate::dephasing::{bloch_sum, Convention, DephasingInput};
use crate::error::{ensure_finite, ensure_positive, Error, Result};
use crate::physics::{cubic_atom_count, ClockSpecies, LatticeGeometry, PhysicalConstants};
use crate::roots::{bisect, first_crossing, BisectOptions};

/// Upper limit of the interrogation times searched by [`solve_tau_max`], s.
pub const TAU_CAP: f64 = 1e9;
const TAU_SCAN_START: f64 = 1e-6;
const TAU_SCAN_FACTOR: f64 = 1.25;

/// Which sub-ensembles have to stay coherent with each other.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Partition {
    /// Top layer against bottom layer; SQL of one layer of n² atoms.
    PerLayer,
    /// Upper half against lower half; SQL of half the ensemble (≈ n³/2 atoms)
    /// against the full top-to-bottom redshift. This form is a
    /// reconstruction chosen because it yields n ≈ 165 for Yb at 30 s.
    Halves,
}

impl Partition {
    pub fn as_str(&self) -> &'static str {
        match self {
            Partition::PerLayer => "per-layer",
            Partition::Halves => "halves",
        }
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Partition {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "per-layer" => Ok(Partition::PerLayer),
            "halves" => Ok(Partition::Halves),
            other => Err(format!(
                "unknown partition `{other}` (expected per-layer or halves)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdProblem {
    pub species: ClockSpecies,
    pub consts: PhysicalConstants,
    /// Single-interrogation time, s.
    pub tau: f64,
    pub partition: Partition,
    pub convention: Convention,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecoherenceSize {
    /// Real-valued root n*.
    pub n_real: f64,
    /// n* rounded to the nearest lattice size.
    pub n_site: u64,
    /// n²(n+1) at the rounded size.
    pub atoms: u64,
    pub partition: Partition,
    pub convention: Convention,
}

/// Solves SQL(n) = (top-to-bottom redshift)(n) for the lattice size n.
///
/// With `k = 1/(ω₀·τ·g·(λ/2)/c²)` the per-layer balance 1/(ω₀τn) = n·g(λ/2)/c²
/// becomes n² = k, and the halves balance 1/(ω₀τ√(n³/2)) = n·g(λ/2)/c²
/// becomes n^(5/2) = √2·k. Under `PaperFigure` the redshift side carries an
/// extra factor n, raising each exponent by one.
pub fn solve_decoherence_size(problem: &ThresholdProblem) -> Result<DecoherenceSize> {
    ensure_positive("tau", problem.tau)?;
    let spacing_shift = problem
        .consts
        .relative_redshift(problem.species.lattice_spacing());
    let k = 1.0 / (problem.species.omega0 * problem.tau * spacing_shift);
    let extra = match problem.convention {
        Convention::Physical => 0.0,
        Convention::PaperFigure => 1.0,
    };
    let n_real = match problem.partition {
        Partition::PerLayer => k.powf(1.0 / (2.0 + extra)),
        Partition::Halves => (2f64.sqrt() * k).powf(1.0 / (2.5 + extra)),
    };
    ensure_finite("n*", n_real)?;
    let n_site = (n_real.round() as u64).max(1);
    Ok(DecoherenceSize {
        n_real,
        n_site,
        atoms: decoherence_atom_count(n_site),
        partition: problem.partition,
        convention: problem.convention,
    })
}

/// Total atom number n²(n+1) of a cubic ensemble. Note that for n = 165 this
/// is 4 519 350, slightly above 165³ = 4 492 125.
pub fn decoherence_atom_count(n_site: u64) -> u64 {
    cubic_atom_count(n_site)
}

/// How the dephasing error is measured while searching for τ_max.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Criterion {
    /// |1 − φ_eff/(φ_l·τ)|, the relative error of the read-out phase.
    PhaseRatio,
    /// 1 − |S|/m; used when the laser does not drift and φ_eff ≡ 0.
    ContrastLoss,
}

impl Criterion {
    pub fn as_str(&self) -> &'static str {
        match self {
            Criterion::PhaseRatio => "phase-ratio",
            Criterion::ContrastLoss => "contrast-loss",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TauMaxProblem {
    pub geometry: LatticeGeometry,
    /// Laser phase drift rate, rad/s.
    pub phi_l: f64,
    /// Gravitational phase rate between neighbouring layers, rad/s.
    pub phi_g: f64,
    pub convention: Convention,
}

impl TauMaxProblem {
    pub fn new(
        geometry: LatticeGeometry,
        phi_l: f64,
        species: &ClockSpecies,
        consts: &PhysicalConstants,
        convention: Convention,
    ) -> Result<Self> {
        let problem = TauMaxProblem {
            geometry,
            phi_l,
            phi_g: species.per_layer_phase_rate(consts, geometry.layer_spacing()),
            convention,
        };
        problem.validate()?;
        Ok(problem)
    }

    pub fn validate(&self) -> Result<()> {
        ensure_finite("phi_l", self.phi_l)?;
        ensure_finite("phi_g", self.phi_g)?;
        if self.phi_l < 0.0 {
            return Err(Error::invalid("phi_l", "must be >= 0"));
        }
        Ok(())
    }

    /// SQL of one layer with the Bloch vector normalised to 1: 1/√(atoms per layer).
    pub fn threshold(&self) -> f64 {
        1.0 / self.geometry.layer_side()
    }

    pub fn criterion(&self) -> Criterion {
        if self.phi_l > 0.0 {
            Criterion::PhaseRatio
        } else {
            Criterion::ContrastLoss
        }
    }

    fn input_at(&self, tau: f64) -> DephasingInput {
        DephasingInput {
            phi_l: self.phi_l,
            phi_g: self.phi_g,
            layer_count: self.geometry.layer_count(),
            t: tau,
            convention: self.convention,
        }
    }

    /// Dephasing error after one interrogation of length `tau`.
    pub fn error_at(&self, tau: f64) -> Result<f64> {
        let s = bloch_sum(&self.input_at(tau))?;
        Ok(match (self.criterion(), s.ratio) {
            (Criterion::PhaseRatio, Some(ratio)) => (1.0 - ratio).abs(),
            (Criterion::PhaseRatio, None) => 0.0,
            (Criterion::ContrastLoss, _) => 1.0 - s.contrast(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TauMax {
    /// Longest interrogation time before the error reaches the threshold, s.
    pub tau: f64,
    /// Error at `tau`; equals `threshold` up to the bisection tolerance.
    pub error: f64,
    pub threshold: f64,
    pub criterion: Criterion,
}

/// Longest single interrogation time whose dephasing error stays within the
/// per-layer SQL.
///
/// The error is scanned on a geometric grid in τ up to [`TAU_CAP`] and the
/// first crossing is refined by bisection. If the error never reaches the
/// threshold, `Error::NonBracketable` is returned.
pub fn solve_tau_max(problem: &TauMaxProblem) -> Result<TauMax> {
    problem.validate()?;
    let threshold = problem.threshold();
    // bloch_sum only fails on invalid input, which validate() has excluded.
    let excess = |tau: f64| problem.error_at(tau).map_or(f64::NAN, |e| e - threshold);

    let (lo, hi) = first_crossing(excess, TAU_SCAN_START, TAU_CAP, TAU_SCAN_FACTOR).ok_or(
        Error::NonBracketable {
            threshold,
            tau_cap: TAU_CAP,
        },
    )?;
    let tau = bisect(excess, lo, hi, BisectOptions::default())?;
    Ok(TauMax {
        tau,
        error: problem.error_at(tau)?,
        threshold,
        criterion: problem.criterion(),
    })
}
