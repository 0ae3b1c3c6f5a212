//! Systematic shifts that vary across the ensemble, compared with the
//! gravitational frequency difference between its top and bottom layers.
//!
//! Each calculator returns the differential shift between the two ends of the
//! ensemble. [`assemble_budget`] folds them into a pass/fail table: an effect
//! passes when its differential shift is strictly below the gravitational
//! signal Δν.

use std::f64::consts::{PI, TAU};

use crate::error::{ensure_finite, ensure_positive, Error, Result};
use crate::physics::{ClockSpecies, PhysicalConstants};
use crate::roots::{bisect, golden_max, BisectOptions};

/// Lattice AC Stark anchor: a 10 % intensity change shifts the clock by 1e-19.
pub const AC_STARK_REFERENCE_CHANGE: f64 = 0.10;
pub const AC_STARK_REFERENCE_SHIFT: f64 = 1e-19;
/// Published maximum lattice intensity change between top and bottom layers
/// for a 170 μm waist and 100λ separation. Reported next to the computed value.
pub const PUBLISHED_INTENSITY_CHANGE: f64 = 8.46e-4;
/// Disk radius that reproduces a 1.04e-5 BBR field ratio difference for walls
/// 5 cm away at 293 K / 294 K and a 100-site ensemble. See [`fit_wall_radius`].
pub const DEFAULT_WALL_RADIUS: f64 = 0.063_234;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystematicsCoefficients {
    /// First-order Zeeman coefficient, Hz/G.
    pub zeeman1: f64,
    /// Second-order Zeeman coefficient, Hz/G².
    pub zeeman2: f64,
    /// DC Stark coefficient, Hz/(V/m)².
    pub dc_stark: f64,
    /// Zeeman splitting of the ¹S₀–³P₂ calibration line, Hz/G.
    pub p2_zeeman: f64,
    /// Lifetime of the ³P₂ state, s.
    pub p2_lifetime: f64,
    /// Total fractional BBR shift at room temperature. Inferred from the
    /// ratio 2.46e-20 / 1.04e-5.
    pub bbr_fractional: f64,
}

impl SystematicsCoefficients {
    pub fn ytterbium() -> Self {
        SystematicsCoefficients {
            zeeman1: 199.516,
            zeeman2: -0.06095,
            dc_stark: 3.626e-6,
            p2_zeeman: 2.1e6,
            p2_lifetime: 14.0,
            bbr_fractional: 2.39e-15,
        }
    }

    /// Natural linewidth of the calibration line, 1/(2π·lifetime), Hz.
    pub fn p2_linewidth(&self) -> f64 {
        1.0 / (TAU * self.p2_lifetime)
    }
}

/// Redshift between the bottom and top layer of a cubic ensemble.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GravitationalSignal {
    pub n_site: u64,
    /// Height of the ensemble, m.
    pub delta_z: f64,
    /// Frequency difference between top and bottom layers, Hz.
    pub delta_nu: f64,
    /// Clock frequency ν, Hz.
    pub nu: f64,
}

impl GravitationalSignal {
    pub fn fractional(&self) -> f64 {
        self.delta_nu / self.nu
    }

    /// Same geometry with the frequency difference replaced.
    pub fn with_delta_nu(self, delta_nu: f64) -> Self {
        GravitationalSignal { delta_nu, ..self }
    }
}

/// Δz = n_site·spacing and Δν = ν·g·Δz/c².
pub fn gravitational_signal(
    species: &ClockSpecies,
    consts: &PhysicalConstants,
    n_site: u64,
    layer_spacing: f64,
) -> GravitationalSignal {
    let delta_z = n_site as f64 * layer_spacing;
    let nu = species.frequency();
    GravitationalSignal {
        n_site,
        delta_z,
        delta_nu: nu * consts.relative_redshift(delta_z),
        nu,
    }
}

/// Magnetic field gradient whose first-order Zeeman shift across the
/// ensemble equals Δν, G/m.
pub fn allowed_b_gradient(coeffs: &SystematicsCoefficients, signal: &GravitationalSignal) -> f64 {
    signal.delta_nu / (coeffs.zeeman1.abs() * signal.delta_z)
}

/// Top-to-bottom shift of the ³P₂ calibration line in a gradient, Hz.
pub fn calibration_line_shift(
    coeffs: &SystematicsCoefficients,
    b_gradient: f64,
    delta_z: f64,
) -> f64 {
    coeffs.p2_zeeman * b_gradient * delta_z
}

/// A field growing linearly from `baseline` at the bottom layer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearField {
    pub baseline: f64,
    pub gradient: f64,
}

impl LinearField {
    fn ends(&self, delta_z: f64) -> (f64, f64) {
        (self.baseline, self.baseline + self.gradient * delta_z)
    }

    /// |F(top)² − F(bottom)²|.
    fn square_difference(&self, delta_z: f64) -> f64 {
        let (bottom, top) = self.ends(delta_z);
        (top * top - bottom * bottom).abs()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BudgetEntry {
    pub name: String,
    /// Differential shift between top and bottom layers, Hz.
    pub differential_shift: f64,
    /// `differential_shift / ν`.
    pub fractional: f64,
    /// Gravitational Δν the shift is compared with, Hz.
    pub reference_signal: f64,
    pub passes: bool,
    pub note: String,
}

impl BudgetEntry {
    pub fn new(
        name: impl Into<String>,
        differential_shift: f64,
        signal: &GravitationalSignal,
        note: impl Into<String>,
    ) -> Self {
        let differential_shift = differential_shift.abs();
        BudgetEntry {
            name: name.into(),
            differential_shift,
            fractional: differential_shift / signal.nu,
            reference_signal: signal.delta_nu,
            passes: differential_shift < signal.delta_nu,
            note: note.into(),
        }
    }
}

/// Second-order Zeeman shift across the ensemble in a linear B profile (G, G/m).
pub fn second_order_zeeman_check(
    coeffs: &SystematicsCoefficients,
    field: LinearField,
    signal: &GravitationalSignal,
) -> BudgetEntry {
    let shift = coeffs.zeeman2.abs() * field.square_difference(signal.delta_z);
    BudgetEntry::new(
        "zeeman2",
        shift,
        signal,
        format!(
            "bias {} G, gradient {:e} G/m",
            field.baseline, field.gradient
        ),
    )
}

/// Largest dE/dz for which dc_stark·|E(top)² − E(bottom)²| ≤ Δν, with E
/// growing linearly from `baseline` (V/m). Returns (V/m)/m.
pub fn allowed_e_gradient(
    coeffs: &SystematicsCoefficients,
    signal: &GravitationalSignal,
    baseline: f64,
) -> Result<f64> {
    ensure_finite("e_baseline", baseline)?;
    if baseline < 0.0 {
        return Err(Error::invalid("e_baseline", "must be >= 0"));
    }
    ensure_positive("delta_z", signal.delta_z)?;
    // x = gradient·Δz solves x² + 2·E0·x − Δν/k = 0.
    let q = signal.delta_nu / coeffs.dc_stark.abs();
    let x = q / (baseline + (baseline * baseline + q).sqrt());
    Ok(if x.is_finite() {
        x / signal.delta_z
    } else {
        0.0
    })
}

pub fn dc_stark_entry(
    coeffs: &SystematicsCoefficients,
    field: LinearField,
    signal: &GravitationalSignal,
) -> BudgetEntry {
    let shift = coeffs.dc_stark.abs() * field.square_difference(signal.delta_z);
    BudgetEntry::new(
        "dc_stark",
        shift,
        signal,
        format!(
            "baseline {} V/m, gradient {:e} (V/m)/m",
            field.baseline, field.gradient
        ),
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianBeam {
    /// 1/e² waist radius, m.
    pub waist: f64,
    pub wavelength: f64,
}

impl GaussianBeam {
    pub fn new(waist: f64, wavelength: f64) -> Result<Self> {
        ensure_positive("beam.waist", waist)?;
        ensure_positive("beam.wavelength", wavelength)?;
        Ok(GaussianBeam { waist, wavelength })
    }

    pub fn rayleigh_range(&self) -> f64 {
        PI * self.waist * self.waist / self.wavelength
    }

    pub fn radius_at(&self, z: f64) -> f64 {
        let u = z / self.rayleigh_range();
        self.waist * (1.0 + u * u).sqrt()
    }

    /// w²(z)/w²(z + separation): intensity of the far layer relative to the
    /// near one.
    pub fn area_ratio(&self, z: f64, separation: f64) -> f64 {
        let near = self.radius_at(z);
        let far = self.radius_at(z + separation);
        (near * near) / (far * far)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntensityExtremum {
    pub rayleigh_range: f64,
    /// Position of the extremum found by golden-section search, m.
    pub z_numeric: f64,
    /// Published closed form z/z_R = ±√(δ² + 4)/2, same branch, m.
    pub z_closed_form: f64,
    /// Exact root of u² + uδ − 1 = 0, same branch, m.
    pub z_stationary: f64,
    /// |r(z_numeric) − 1|; the authoritative intensity change.
    pub max_change: f64,
    pub published_change: f64,
}

impl IntensityExtremum {
    /// u² + uδ − 1 at the numeric extremum, with u = z/z_R and δ = s/z_R.
    pub fn stationarity_residual(&self, separation: f64) -> f64 {
        let u = self.z_numeric / self.rayleigh_range;
        let d = separation / self.rayleigh_range;
        u * u + u * d - 1.0
    }
}

/// Locates the extremum of w²(z)/w²(z+s) both numerically and by the closed
/// forms, and reports the largest fractional intensity change.
pub fn lattice_intensity_ratio(beam: &GaussianBeam, separation: f64) -> Result<IntensityExtremum> {
    ensure_positive("separation", separation)?;
    let zr = beam.rayleigh_range();
    let d = separation / zr;
    // (r − 1)/δ with r = (1 + u²)/(1 + (u + δ)²), written without the
    // cancellation in r − 1 so the search stays sharp for δ ≪ 1.
    let excess = |u: f64| -(2.0 * u + d) / (1.0 + (u + d) * (u + d));
    let tol = 1e-12;
    let span = 10.0 + d;
    // r > 1 below u = −δ/2 (maximum), r < 1 above it (minimum).
    let u_hi = golden_max(excess, -span, -0.5 * d, tol);
    let u_lo = golden_max(|u| -excess(u), -0.5 * d, span, tol);
    let (u, sign) = if excess(u_hi).abs() >= excess(u_lo).abs() {
        (u_hi, -1.0)
    } else {
        (u_lo, 1.0)
    };
    let root = (d * d + 4.0).sqrt();
    Ok(IntensityExtremum {
        rayleigh_range: zr,
        z_numeric: u * zr,
        z_closed_form: sign * root / 2.0 * zr,
        z_stationary: (-d + sign * root) / 2.0 * zr,
        max_change: d * excess(u).abs(),
        published_change: PUBLISHED_INTENSITY_CHANGE,
    })
}

/// Fractional lattice AC Stark shift for a relative intensity change,
/// scaled linearly from the 10 % ↔ 1e-19 anchor.
pub fn ac_stark_fractional(intensity_change: f64) -> f64 {
    intensity_change / AC_STARK_REFERENCE_CHANGE * AC_STARK_REFERENCE_SHIFT
}

pub fn ac_stark_entry(intensity_change: f64, signal: &GravitationalSignal) -> Result<BudgetEntry> {
    ensure_finite("intensity_change", intensity_change)?;
    if intensity_change < 0.0 {
        return Err(Error::invalid("intensity_change", "must be >= 0"));
    }
    let shift = ac_stark_fractional(intensity_change) * signal.nu;
    Ok(BudgetEntry::new(
        "lattice_ac_stark",
        shift,
        signal,
        format!("intensity change {intensity_change:e}"),
    ))
}

/// Chamber wall seen by the atoms as a disk on the vertical axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiskWall {
    pub radius: f64,
}

impl DiskWall {
    /// Solid angle of the disk from a point on its axis at `distance`, sr.
    pub fn solid_angle(&self, distance: f64) -> f64 {
        TAU * (1.0 - distance / distance.hypot(self.radius))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BbrGeometry {
    /// Wall distance d, m.
    pub wall_distance: f64,
    pub wall: DiskWall,
    /// Temperature of the lower wall, K.
    pub t1: f64,
    /// Temperature of the upper wall, K.
    pub t2: f64,
    /// Height of the ensemble Δz, m.
    pub extent: f64,
}

impl BbrGeometry {
    pub fn validate(&self) -> Result<()> {
        ensure_positive("wall_distance", self.wall_distance)?;
        ensure_positive("wall_radius", self.wall.radius)?;
        ensure_positive("t1", self.t1)?;
        ensure_positive("t2", self.t2)?;
        ensure_finite("extent", self.extent)?;
        if self.extent < 0.0 || self.extent >= self.wall_distance {
            return Err(Error::invalid(
                "extent",
                "must satisfy 0 <= extent < wall_distance",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BbrDifferential {
    /// Ratio of the BBR field at the two ends of the ensemble, minus one.
    pub ratio_minus_one: f64,
    /// bbr_fractional × (ratio − 1).
    pub fractional_shift: f64,
}

/// (T₂⁴dΩ₊ + T₁⁴dΩ₋)/(T₂⁴dΩ₋ + T₁⁴dΩ₊) with dΩ± the solid angle of a wall
/// from the nearest/farthest layer, at distances d ∓ Δz.
pub fn bbr_ratio(geom: &BbrGeometry) -> f64 {
    let near = geom.wall.solid_angle(geom.wall_distance - geom.extent);
    let far = geom.wall.solid_angle(geom.wall_distance + geom.extent);
    let (a, b) = (geom.t1.powi(4), geom.t2.powi(4));
    (b * near + a * far) / (b * far + a * near)
}

pub fn bbr_differential(
    geom: &BbrGeometry,
    coeffs: &SystematicsCoefficients,
) -> Result<BbrDifferential> {
    geom.validate()?;
    let ratio_minus_one = bbr_ratio(geom) - 1.0;
    Ok(BbrDifferential {
        ratio_minus_one,
        fractional_shift: coeffs.bbr_fractional * ratio_minus_one.abs(),
    })
}

/// Disk radius for which `bbr_ratio(geom) − 1` equals `target`.
pub fn fit_wall_radius(geom: &BbrGeometry, target: f64) -> Result<f64> {
    ensure_positive("target", target)?;
    let excess = |radius: f64| {
        let g = BbrGeometry {
            wall: DiskWall { radius },
            ..*geom
        };
        // ratio − 1 falls as the disk widens; flip the sign for bisect.
        target - (bbr_ratio(&g) - 1.0)
    };
    let (lo, hi) = (1e-6 * geom.wall_distance, 1e3 * geom.wall_distance);
    if excess(lo) >= 0.0 || excess(hi) < 0.0 {
        return Err(Error::invalid(
            "target",
            "not reachable with a disk wall model",
        ));
    }
    bisect(
        excess,
        lo,
        hi,
        BisectOptions {
            rel_tol: 1e-12,
            max_iter: 400,
        },
    )
}

/// Wall temperature difference (T₂ − T₁, K) at which the BBR differential
/// shift equals the gravitational signal.
pub fn temperature_uniformity_limit(
    geom: &BbrGeometry,
    coeffs: &SystematicsCoefficients,
    signal: &GravitationalSignal,
) -> Result<f64> {
    geom.validate()?;
    let target = signal.fractional();
    if target <= 0.0 {
        return Ok(0.0);
    }
    let shift_at = |dt: f64| {
        let g = BbrGeometry {
            t2: geom.t1 + dt,
            ..*geom
        };
        coeffs.bbr_fractional * (bbr_ratio(&g) - 1.0) - target
    };
    let mut hi = geom.t1;
    while shift_at(hi) < 0.0 {
        hi *= 2.0;
        if hi > 1e9 {
            return Err(Error::invalid("bbr", "temperature limit not reachable"));
        }
    }
    bisect(
        shift_at,
        0.0,
        hi,
        BisectOptions {
            rel_tol: 1e-10,
            max_iter: 400,
        },
    )
}

/// Everything the budget needs beyond species and constants.
#[derive(Debug, Clone, PartialEq)]
pub struct BudgetInputs {
    pub n_site: u64,
    pub layer_spacing: f64,
    pub coeffs: SystematicsCoefficients,
    /// Bias magnetic field at the bottom layer, G.
    pub bias_field: f64,
    /// Resolution of the ³P₂ calibration measurement, Hz.
    pub calibration_resolution: f64,
    /// Operating electric-field gradient, (V/m)/m.
    pub e_gradient: f64,
    /// Electric field at the bottom layer, V/m.
    pub e_baseline: f64,
    pub beam: GaussianBeam,
    /// Separation between top and bottom layers along the lattice beam, m.
    pub beam_separation: f64,
    pub bbr: BbrGeometry,
    /// Replaces the computed Δν when set.
    pub signal_override: Option<f64>,
}

impl BudgetInputs {
    /// Yb ensemble with 100 sites per edge. Wall temperatures differ by the
    /// 10 mK uniformity that is targeted; the operating electric-field
    /// gradient is 1e4 (V/m)/m.
    pub fn ytterbium_default(species: &ClockSpecies) -> Self {
        let coeffs = SystematicsCoefficients::ytterbium();
        let spacing = species.lattice_spacing();
        let n_site = 100;
        BudgetInputs {
            n_site,
            layer_spacing: spacing,
            coeffs,
            bias_field: 0.1,
            calibration_resolution: coeffs.p2_linewidth(),
            e_gradient: 1e4,
            e_baseline: 0.0,
            beam: GaussianBeam {
                waist: 170e-6,
                wavelength: species.magic_wavelength,
            },
            beam_separation: 100.0 * species.magic_wavelength,
            bbr: BbrGeometry {
                wall_distance: 0.05,
                wall: DiskWall {
                    radius: DEFAULT_WALL_RADIUS,
                },
                t1: 293.0,
                t2: 293.01,
                extent: n_site as f64 * spacing,
            },
            signal_override: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Budget {
    pub signal: GravitationalSignal,
    pub entries: Vec<BudgetEntry>,
    pub allowed_b_gradient: f64,
    /// ³P₂ line shift across the ensemble at the allowed gradient, Hz.
    pub calibration_shift: f64,
    pub allowed_e_gradient: f64,
    pub intensity: IntensityExtremum,
    pub bbr: BbrDifferential,
    /// T₂ − T₁ at which the BBR differential equals the signal, K.
    pub temperature_limit: f64,
}

impl Budget {
    pub fn all_pass(&self) -> bool {
        self.entries.iter().all(|e| e.passes)
    }
}

/// Effects treated as vanishing across the ensemble, with the reason.
pub const NEGLIGIBLE_EFFECTS: [(&str, &str); 5] = [
    (
        "probe_ac_stark",
        "probe beam much larger than trap beam; subdominant to lattice AC Stark",
    ),
    ("density", "single atom per site gives uniform density"),
    (
        "dipole_dipole",
        "not monotonic along z; cancels as common mode",
    ),
    (
        "background_gas",
        "collisions occur uniformly over the ensemble",
    ),
    (
        "tunneling",
        "suppressed by aligning the probe beam to the z axis",
    ),
];

pub fn assemble_budget(
    species: &ClockSpecies,
    consts: &PhysicalConstants,
    inputs: &BudgetInputs,
) -> Result<Budget> {
    if inputs.n_site == 0 {
        return Err(Error::invalid("n_site", "must be >= 1"));
    }
    ensure_positive("layer_spacing", inputs.layer_spacing)?;
    ensure_finite("bias_field", inputs.bias_field)?;
    ensure_finite("e_gradient", inputs.e_gradient)?;
    ensure_finite("calibration_resolution", inputs.calibration_resolution)?;
    if inputs.calibration_resolution < 0.0 {
        return Err(Error::invalid("calibration_resolution", "must be >= 0"));
    }
    let mut signal = gravitational_signal(species, consts, inputs.n_site, inputs.layer_spacing);
    if let Some(dnu) = inputs.signal_override {
        ensure_finite("signal_override", dnu)?;
        if dnu < 0.0 {
            return Err(Error::invalid("signal_override", "must be >= 0"));
        }
        signal = signal.with_delta_nu(dnu);
    }
    let coeffs = &inputs.coeffs;

    let b_gradient = allowed_b_gradient(coeffs, &signal);
    let calibration_shift = calibration_line_shift(coeffs, b_gradient, signal.delta_z);
    // Residual gradient after calibrating against the ³P₂ line.
    let residual_gradient = inputs.calibration_resolution / (coeffs.p2_zeeman * signal.delta_z);
    let zeeman1 = BudgetEntry::new(
        "zeeman1_calibration",
        coeffs.zeeman1 * residual_gradient * signal.delta_z,
        &signal,
        format!(
            "residual gradient {residual_gradient:e} G/m after calibration to {:e} Hz",
            inputs.calibration_resolution
        ),
    );
    let zeeman2 = second_order_zeeman_check(
        coeffs,
        LinearField {
            baseline: inputs.bias_field,
            gradient: b_gradient,
        },
        &signal,
    );
    let e_allowed = allowed_e_gradient(coeffs, &signal, inputs.e_baseline)?;
    let dc_stark = dc_stark_entry(
        coeffs,
        LinearField {
            baseline: inputs.e_baseline,
            gradient: inputs.e_gradient,
        },
        &signal,
    );
    let intensity = lattice_intensity_ratio(&inputs.beam, inputs.beam_separation)?;
    let ac_stark = ac_stark_entry(intensity.max_change, &signal)?;
    let bbr = bbr_differential(&inputs.bbr, coeffs)?;
    let bbr_entry = BudgetEntry::new(
        "bbr",
        bbr.fractional_shift * signal.nu,
        &signal,
        format!(
            "walls {} K / {} K at {} m, field ratio - 1 = {:e}",
            inputs.bbr.t1, inputs.bbr.t2, inputs.bbr.wall_distance, bbr.ratio_minus_one
        ),
    );
    let temperature_limit = temperature_uniformity_limit(&inputs.bbr, coeffs, &signal)?;

    let mut entries = vec![zeeman1, zeeman2, dc_stark, ac_stark, bbr_entry];
    entries.extend(
        NEGLIGIBLE_EFFECTS
            .iter()
            .map(|(name, note)| BudgetEntry::new(*name, 0.0, &signal, *note)),
    );

    Ok(Budget {
        signal,
        entries,
        allowed_b_gradient: b_gradient,
        calibration_shift,
        allowed_e_gradient: e_allowed,
        intensity,
        bbr,
        temperature_limit,
    })
}
