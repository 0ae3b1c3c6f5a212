//! Best one-second stability versus ensemble size.
//!
//! For each (size, laser drift) pair the interrogation is stretched to τ_max,
//! the per-layer SQL at τ_max is taken as the single-shot stability, and the
//! result is referred to 1 s of averaging with the usual τ^(-1/2) law.

use std::fmt;

use rayon::prelude::*;

use crate::dephasing::Convention;
use crate::error::{ensure_positive, Error, Result};
use crate::physics::{ClockSpecies, LatticeGeometry, LatticeKind, PhysicalConstants};
use crate::threshold::{solve_tau_max, TauMaxProblem, TAU_CAP};

/// Laser drift rates spanning 0.16 μHz to 1.6 mHz linewidth, rad/s.
pub const DEFAULT_PHI_L_GRID: [f64; 5] = [1e-6, 1e-5, 1e-4, 1e-3, 1e-2];
/// Atoms per layer for the elongated (slab) geometry.
pub const DEFAULT_SLAB_ATOMS_PER_LAYER: u64 = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GeometryFamily {
    /// Size axis is `n_site`.
    Cubic,
    /// Size axis is `n_layer`.
    Slab { atoms_per_layer: u64 },
}

impl GeometryFamily {
    pub fn name(&self) -> &'static str {
        match self {
            GeometryFamily::Cubic => "cubic",
            GeometryFamily::Slab { .. } => "slab",
        }
    }

    pub fn geometry(&self, size: u64, species: &ClockSpecies) -> Result<LatticeGeometry> {
        let kind = match *self {
            GeometryFamily::Cubic => LatticeKind::Cubic { n_site: size },
            GeometryFamily::Slab { atoms_per_layer } => LatticeKind::Slab {
                atoms_per_layer,
                n_layer: size,
            },
        };
        LatticeGeometry::new(kind, species.lattice_spacing())
    }
}

impl fmt::Display for GeometryFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PointFlag {
    Ok,
    /// The dephasing error never reached the SQL; τ_max is capped.
    NonBracketable,
}

impl PointFlag {
    pub fn as_str(&self) -> &'static str {
        match self {
            PointFlag::Ok => "ok",
            PointFlag::NonBracketable => "non-bracketable",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityPoint {
    pub family: GeometryFamily,
    pub size: u64,
    pub phi_l: f64,
    pub convention: Convention,
    pub tau_max: f64,
    /// Per-layer SQL of a single interrogation of length τ_max.
    pub sigma_at_tau: f64,
    /// `sigma_at_tau · √tau_max`.
    pub sigma_at_1s: f64,
    pub flag: PointFlag,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub family: GeometryFamily,
    pub sizes: Vec<u64>,
    pub phi_l: Vec<f64>,
    pub convention: Convention,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.sizes.is_empty() || self.phi_l.is_empty() {
            return Err(Error::invalid(
                "sweep",
                "size and phi_l grids must be non-empty",
            ));
        }
        if self.sizes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("sweep.sizes", "must be strictly increasing"));
        }
        if self.sizes[0] == 0 {
            return Err(Error::invalid("sweep.sizes", "sizes must be >= 1"));
        }
        for &p in &self.phi_l {
            if !(p.is_finite() && p >= 0.0) {
                return Err(Error::invalid(
                    "sweep.phi_l",
                    format!("must be finite and >= 0, got {p}"),
                ));
            }
        }
        if let GeometryFamily::Slab { atoms_per_layer: 0 } = self.family {
            return Err(Error::invalid("sweep.atoms_per_layer", "must be >= 1"));
        }
        Ok(())
    }
}

/// `count` log-spaced integers in `[lo, hi]`, rounded and de-duplicated.
pub fn log_spaced_sizes(lo: u64, hi: u64, count: usize) -> Vec<u64> {
    if count == 0 || lo == 0 || hi < lo {
        return Vec::new();
    }
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = ((lo as f64).ln(), (hi as f64).ln());
    let mut out: Vec<u64> = (0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp().round() as u64)
        .collect();
    out.dedup();
    out
}

pub fn best_stability_at_1s(
    species: &ClockSpecies,
    consts: &PhysicalConstants,
    family: GeometryFamily,
    size: u64,
    phi_l: f64,
    convention: Convention,
) -> Result<StabilityPoint> {
    let geometry = family.geometry(size, species)?;
    let problem = TauMaxProblem::new(geometry, phi_l, species, consts, convention)?;
    let (tau_max, flag) = match solve_tau_max(&problem) {
        Ok(t) => (t.tau, PointFlag::Ok),
        Err(Error::NonBracketable { .. }) => (TAU_CAP, PointFlag::NonBracketable),
        Err(e) => return Err(e),
    };
    let sigma_at_tau = species.per_layer_sql(tau_max, geometry.layer_side())?;
    Ok(StabilityPoint {
        family,
        size,
        phi_l,
        convention,
        tau_max,
        sigma_at_tau,
        sigma_at_1s: sigma_at_tau * tau_max.sqrt(),
        flag,
    })
}

/// Evaluates every (size, phi_l) pair; rows are size-major in grid order.
pub fn sweep(
    species: &ClockSpecies,
    consts: &PhysicalConstants,
    spec: &SweepSpec,
) -> Result<Vec<StabilityPoint>> {
    spec.validate()?;
    let cells: Vec<(u64, f64)> = spec
        .sizes
        .iter()
        .flat_map(|&s| spec.phi_l.iter().map(move |&p| (s, p)))
        .collect();
    cells
        .par_iter()
        .map(|&(size, phi_l)| {
            best_stability_at_1s(species, consts, spec.family, size, phi_l, spec.convention)
        })
        .collect()
}

/// Rows of `points` with the given laser drift, in their original order.
pub fn curve(points: &[StabilityPoint], phi_l: f64) -> Vec<StabilityPoint> {
    points
        .iter()
        .filter(|p| p.phi_l == phi_l)
        .copied()
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// Sizes below the curve's minimum (laser limited).
    Small,
    /// Sizes above the curve's minimum (gravity limited).
    Large,
}

/// Splits a single curve, ordered by size, at its minimum of `sigma_at_1s`.
/// The minimum itself belongs to neither side.
pub fn regime_slice(curve: &[StabilityPoint], regime: Regime) -> &[StabilityPoint] {
    let Some(argmin) = curve
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.sigma_at_1s.total_cmp(&b.1.sigma_at_1s))
        .map(|(i, _)| i)
    else {
        return curve;
    };
    match regime {
        Regime::Small => &curve[..argmin],
        Regime::Large => &curve[argmin + 1..],
    }
}

/// Least-squares slope of ln(sigma_at_1s) against ln(size).
pub fn scaling_exponent(points: &[StabilityPoint]) -> Result<f64> {
    if points.len() < 3 {
        return Err(Error::TooFewPoints(points.len()));
    }
    if let Some(p) = points.iter().find(|p| p.flag != PointFlag::Ok) {
        return Err(Error::FlaggedPoint(p.size));
    }
    for p in points {
        ensure_positive("sigma_at_1s", p.sigma_at_1s)?;
    }
    let xs: Vec<f64> = points.iter().map(|p| (p.size as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.sigma_at_1s.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (x, y) in xs.iter().zip(&ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    if sxx == 0.0 {
        return Err(Error::invalid("points", "sizes must not all be equal"));
    }
    Ok(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn yb() -> (ClockSpecies, PhysicalConstants) {
        (ClockSpecies::ytterbium(), PhysicalConstants::default())
    }

    #[test]
    fn fig2_anchor_point() {
        let (s, c) = yb();
        let p = best_stability_at_1s(
            &s,
            &c,
            GeometryFamily::Cubic,
            200,
            1e-2,
            Convention::PaperFigure,
        )
        .unwrap();
        assert_relative_eq!(p.sigma_at_tau, 2.58e-20, max_relative = 0.3);
        assert_relative_eq!(p.sigma_at_1s, 2e-19, max_relative = 0.3);
        assert_relative_eq!(
            p.sigma_at_1s / p.sigma_at_tau,
            p.tau_max.sqrt(),
            max_relative = 1e-14
        );
    }

    #[test]
    fn laser_regime_anchor() {
        let (s, c) = yb();
        let p = best_stability_at_1s(
            &s,
            &c,
            GeometryFamily::Cubic,
            2,
            1e-6,
            Convention::PaperFigure,
        )
        .unwrap();
        assert_relative_eq!(p.tau_max, 1.97e6, max_relative = 0.1);
    }

    #[test]
    fn single_cell_sweep() {
        let (s, c) = yb();
        let spec = SweepSpec {
            family: GeometryFamily::Cubic,
            sizes: vec![10],
            phi_l: vec![1e-3],
            convention: Convention::Physical,
        };
        assert_eq!(sweep(&s, &c, &spec).unwrap().len(), 1);
    }

    #[test]
    fn sweep_order_is_size_major() {
        let (s, c) = yb();
        let spec = SweepSpec {
            family: GeometryFamily::Cubic,
            sizes: vec![5, 10, 20],
            phi_l: vec![1e-4, 1e-2],
            convention: Convention::PaperFigure,
        };
        let rows = sweep(&s, &c, &spec).unwrap();
        let keys: Vec<(u64, f64)> = rows.iter().map(|r| (r.size, r.phi_l)).collect();
        assert_eq!(
            keys,
            vec![
                (5, 1e-4),
                (5, 1e-2),
                (10, 1e-4),
                (10, 1e-2),
                (20, 1e-4),
                (20, 1e-2)
            ]
        );
    }

    #[test]
    fn sweep_spec_validation() {
        let (s, c) = yb();
        let mut spec = SweepSpec {
            family: GeometryFamily::Cubic,
            sizes: vec![5, 5],
            phi_l: vec![1e-4],
            convention: Convention::Physical,
        };
        assert!(sweep(&s, &c, &spec).is_err());
        spec.sizes = vec![];
        assert!(sweep(&s, &c, &spec).is_err());
        spec.sizes = vec![3];
        spec.phi_l = vec![-1e-3];
        assert!(sweep(&s, &c, &spec).is_err());
    }

    #[test]
    fn flagged_point_is_capped_not_fatal() {
        // One slab layer and a perfectly stable laser never dephase.
        let (s, c) = yb();
        let spec = SweepSpec {
            family: GeometryFamily::Slab {
                atoms_per_layer: 100,
            },
            sizes: vec![1, 2],
            phi_l: vec![0.0],
            convention: Convention::Physical,
        };
        let rows = sweep(&s, &c, &spec).unwrap();
        assert_eq!(rows[0].flag, PointFlag::NonBracketable);
        assert_eq!(rows[0].tau_max, TAU_CAP);
        assert_eq!(rows[1].flag, PointFlag::Ok);
    }

    #[test]
    fn log_spacing() {
        let g = log_spaced_sizes(2, 1000, 40);
        assert_eq!(g[0], 2);
        assert_eq!(*g.last().unwrap(), 1000);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(log_spaced_sizes(5, 5, 1), vec![5]);
        assert!(log_spaced_sizes(0, 5, 3).is_empty());
    }

    fn point(size: u64, sigma: f64) -> StabilityPoint {
        StabilityPoint {
            family: GeometryFamily::Cubic,
            size,
            phi_l: 1e-3,
            convention: Convention::Physical,
            tau_max: 1.0,
            sigma_at_tau: sigma,
            sigma_at_1s: sigma,
            flag: PointFlag::Ok,
        }
    }

    #[test]
    fn exponent_of_exact_power_law() {
        let pts: Vec<_> = [2u64, 4, 8, 16, 32]
            .iter()
            .map(|&n| point(n, 3.0 * (n as f64).powf(-0.75)))
            .collect();
        assert_relative_eq!(scaling_exponent(&pts).unwrap(), -0.75, max_relative = 1e-12);
    }

    #[test]
    fn exponent_rejects_short_or_flagged_slices() {
        let mut pts: Vec<_> = [2u64, 4, 8]
            .iter()
            .map(|&n| point(n, 1.0 / n as f64))
            .collect();
        assert!(scaling_exponent(&pts[..2]).is_err());
        pts[1].flag = PointFlag::NonBracketable;
        assert_eq!(scaling_exponent(&pts), Err(Error::FlaggedPoint(4)));
    }

    #[test]
    fn regime_split_at_minimum() {
        let pts: Vec<_> = [(1u64, 5.0), (2, 3.0), (3, 1.0), (4, 2.0), (5, 4.0)]
            .iter()
            .map(|&(n, s)| point(n, s))
            .collect();
        let small: Vec<u64> = regime_slice(&pts, Regime::Small)
            .iter()
            .map(|p| p.size)
            .collect();
        let large: Vec<u64> = regime_slice(&pts, Regime::Large)
            .iter()
            .map(|p| p.size)
            .collect();
        assert_eq!(small, vec![1, 2]);
        assert_eq!(large, vec![4, 5]);
    }
}
