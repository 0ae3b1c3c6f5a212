//! Physical constants, the clock species, lattice geometry and the two
//! foundational relations: the gravitational redshift between two heights
//! and the quantum-projection-noise limited stability of a Ramsey clock.
//!
//! Everything is carried in SI units. Fractional frequency shifts and
//! Allan-deviation contributions are dimensionless.

use std::f64::consts::TAU;

use crate::error::{ensure_finite, ensure_positive, Error, Result};

/// Standard gravitational acceleration, m/s².
pub const STANDARD_GRAVITY: f64 = 9.80665;
/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 2.997_924_58e8;
/// Relativistic stability limit of a single trapped atom. Kept for reference
/// in reports only; nothing in the crate derives from it.
pub const SINGLE_ATOM_RELATIVISTIC_LIMIT: f64 = 1.30e-21;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    /// Local gravitational acceleration, m/s². Assumed uniform over the ensemble.
    pub g: f64,
    /// Speed of light, m/s.
    pub c: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        PhysicalConstants {
            g: STANDARD_GRAVITY,
            c: SPEED_OF_LIGHT,
        }
    }
}

impl PhysicalConstants {
    pub fn new(g: f64, c: f64) -> Result<Self> {
        ensure_positive("g", g)?;
        ensure_positive("c", c)?;
        Ok(PhysicalConstants { g, c })
    }

    /// Fractional redshift g·Δh/c² between two points separated by `delta_h`
    /// metres. Negative heights give a negative shift.
    pub fn relative_redshift(&self, delta_h: f64) -> f64 {
        self.g * delta_h / (self.c * self.c)
    }
}

/// Atomic constants of the interrogated clock transition.
#[derive(Debug, Clone, PartialEq)]
pub struct ClockSpecies {
    pub name: String,
    /// Resonant angular frequency ω₀, rad/s.
    pub omega0: f64,
    /// Magic wavelength of the trapping lattice, m.
    pub magic_wavelength: f64,
}

impl ClockSpecies {
    pub fn new(name: impl Into<String>, omega0: f64, magic_wavelength: f64) -> Result<Self> {
        ensure_positive("omega0", omega0)?;
        ensure_positive("magic_wavelength", magic_wavelength)?;
        Ok(ClockSpecies {
            name: name.into(),
            omega0,
            magic_wavelength,
        })
    }

    /// Ytterbium ¹S₀–³P₀ clock: ν = 518 295 GHz, λ_magic = 759.356 nm.
    pub fn ytterbium() -> Self {
        ClockSpecies {
            name: "Yb".to_string(),
            omega0: TAU * 5.182_95e14,
            magic_wavelength: 759.356e-9,
        }
    }

    /// Looks up a built-in preset by (case-insensitive) name.
    pub fn preset(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().as_str() {
            "yb" | "ytterbium" => Some(Self::ytterbium()),
            _ => None,
        }
    }

    /// Transition frequency ν = ω₀/2π, Hz.
    pub fn frequency(&self) -> f64 {
        self.omega0 / TAU
    }

    /// Distance between neighbouring lattice layers for a standing wave, λ/2.
    pub fn lattice_spacing(&self) -> f64 {
        self.magic_wavelength / 2.0
    }

    /// Gravitational phase drift rate between neighbouring layers,
    /// ω₀·g·spacing/c², rad/s.
    pub fn per_layer_phase_rate(&self, consts: &PhysicalConstants, layer_spacing: f64) -> f64 {
        self.omega0 * consts.relative_redshift(layer_spacing)
    }

    /// Quantum projection noise limited stability,
    /// (1/ω₀τ_R)·√(T_C/τ)·√(ξ²_W/N).
    pub fn qpn_stability(&self, params: &InterrogationParams, atoms: u64) -> Result<f64> {
        if atoms == 0 {
            return Err(Error::EmptyEnsemble);
        }
        let p = params;
        Ok(
            (p.cycle_time / p.integration_time).sqrt() * (p.wineland_sq / atoms as f64).sqrt()
                / (self.omega0 * p.interrogation_time),
        )
    }

    /// SQL of one layer of `n_site`² atoms in a single interrogation of length
    /// `tau`: 1/(ω₀·τ·n_site).
    pub fn per_layer_sql(&self, tau: f64, n_site: f64) -> Result<f64> {
        ensure_positive("tau", tau)?;
        if n_site.is_nan() || n_site < 1.0 {
            return Err(Error::invalid(
                "n_site",
                format!("must be >= 1, got {n_site}"),
            ));
        }
        Ok(1.0 / (self.omega0 * tau * n_site))
    }
}

/// Ramsey interrogation timing and the squeezing factor of the input state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterrogationParams {
    /// τ_R, s.
    pub interrogation_time: f64,
    /// T_C, s.
    pub cycle_time: f64,
    /// Overall integration time τ, s.
    pub integration_time: f64,
    /// Wineland parameter ξ²_W; 1 for a coherent spin state.
    pub wineland_sq: f64,
}

impl InterrogationParams {
    pub fn new(
        interrogation_time: f64,
        cycle_time: f64,
        integration_time: f64,
        wineland_sq: f64,
    ) -> Result<Self> {
        ensure_positive("tau_R", interrogation_time)?;
        ensure_positive("T_C", cycle_time)?;
        ensure_positive("tau", integration_time)?;
        ensure_positive("xi_W_sq", wineland_sq)?;
        if wineland_sq > 1.0 {
            return Err(Error::invalid(
                "xi_W_sq",
                format!("must lie in (0, 1], got {wineland_sq}"),
            ));
        }
        Ok(InterrogationParams {
            interrogation_time,
            cycle_time,
            integration_time,
            wineland_sq,
        })
    }

    /// One Ramsey sequence of length `tau` with no dead time: τ = τ_R = T_C.
    pub fn single_sequence(tau: f64, wineland_sq: f64) -> Result<Self> {
        Self::new(tau, tau, tau, wineland_sq)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LatticeKind {
    /// `n_site` × `n_site` atoms per layer, `n_site + 1` layers.
    Cubic { n_site: u64 },
    /// Fixed number of atoms per layer stacked over `n_layer` layers.
    Slab { atoms_per_layer: u64, n_layer: u64 },
}

/// Arrangement of single atoms on the lattice and the vertical layer spacing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeGeometry {
    kind: LatticeKind,
    layer_spacing: f64,
}

impl LatticeGeometry {
    pub fn new(kind: LatticeKind, layer_spacing: f64) -> Result<Self> {
        ensure_positive("layer_spacing", layer_spacing)?;
        match kind {
            LatticeKind::Cubic { n_site: 0 } => {
                return Err(Error::invalid("n_site", "must be >= 1"))
            }
            LatticeKind::Slab {
                atoms_per_layer,
                n_layer,
            } if atoms_per_layer == 0 || n_layer == 0 => {
                return Err(Error::invalid(
                    "slab",
                    "atoms_per_layer and n_layer must be >= 1",
                ))
            }
            _ => {}
        }
        let geometry = LatticeGeometry {
            kind,
            layer_spacing,
        };
        geometry.checked_total_atoms()?;
        Ok(geometry)
    }

    pub fn cubic(n_site: u64, species: &ClockSpecies) -> Result<Self> {
        Self::new(LatticeKind::Cubic { n_site }, species.lattice_spacing())
    }

    pub fn slab(atoms_per_layer: u64, n_layer: u64, species: &ClockSpecies) -> Result<Self> {
        Self::new(
            LatticeKind::Slab {
                atoms_per_layer,
                n_layer,
            },
            species.lattice_spacing(),
        )
    }

    pub fn kind(&self) -> LatticeKind {
        self.kind
    }

    pub fn layer_spacing(&self) -> f64 {
        self.layer_spacing
    }

    pub fn layer_count(&self) -> u64 {
        match self.kind {
            LatticeKind::Cubic { n_site } => n_site + 1,
            LatticeKind::Slab { n_layer, .. } => n_layer,
        }
    }

    pub fn atoms_per_layer(&self) -> u64 {
        match self.kind {
            LatticeKind::Cubic { n_site } => n_site * n_site,
            LatticeKind::Slab {
                atoms_per_layer, ..
            } => atoms_per_layer,
        }
    }

    pub fn total_atoms(&self) -> u64 {
        self.atoms_per_layer() * self.layer_count()
    }

    fn checked_total_atoms(&self) -> Result<u64> {
        let overflow = || Error::invalid("geometry", "atom count overflows u64");
        let per_layer = match self.kind {
            LatticeKind::Cubic { n_site } => n_site.checked_mul(n_site).ok_or_else(overflow)?,
            LatticeKind::Slab {
                atoms_per_layer, ..
            } => atoms_per_layer,
        };
        let layers = match self.kind {
            LatticeKind::Cubic { n_site } => n_site.checked_add(1).ok_or_else(overflow)?,
            LatticeKind::Slab { n_layer, .. } => n_layer,
        };
        per_layer.checked_mul(layers).ok_or_else(overflow)
    }

    /// Number of layer spacings between the bottom and the top layer.
    pub fn span_layers(&self) -> u64 {
        self.layer_count() - 1
    }

    /// Height difference between the bottom and the top layer, m.
    pub fn height_span(&self) -> f64 {
        self.span_layers() as f64 * self.layer_spacing
    }

    /// Linear size of one layer in atoms, √(atoms per layer). Equals `n_site`
    /// for the cubic lattice.
    pub fn layer_side(&self) -> f64 {
        match self.kind {
            LatticeKind::Cubic { n_site } => n_site as f64,
            LatticeKind::Slab {
                atoms_per_layer, ..
            } => (atoms_per_layer as f64).sqrt(),
        }
    }

    /// The size axis used in sweeps: `n_site` for cubic, `n_layer` for slab.
    pub fn size(&self) -> u64 {
        match self.kind {
            LatticeKind::Cubic { n_site } => n_site,
            LatticeKind::Slab { n_layer, .. } => n_layer,
        }
    }
}

/// Total atom count of a cubic lattice, n²(n+1).
pub fn cubic_atom_count(n_site: u64) -> u64 {
    n_site * n_site * (n_site + 1)
}

/// Fails unless `x` is finite; used for user supplied height differences.
pub fn checked_redshift(consts: &PhysicalConstants, delta_h: f64) -> Result<f64> {
    ensure_finite("delta_h", delta_h)?;
    Ok(consts.relative_redshift(delta_h))
}
