//! Bloch-vector summation over the layers of the ensemble.
//!
//! Each layer is one coherent spin state of unit length. After a Ramsey dark
//! time `t` the layer at symmetric offset `k` has precessed by
//! `(phi_l + k·phi_g)·t`, where `phi_l` is the laser phase drift rate and
//! `phi_g` the gravitational drift rate between neighbouring layers. The sum
//! of the layer vectors shrinks as the layers fan out, and the phase read out
//! from its `y` component underestimates the laser drift.

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{ensure_finite, Error, Result};

/// Above this many layers the component sums use Neumaier summation.
pub const COMPENSATED_SUM_THRESHOLD: u64 = 10_000;

/// How the per-layer gravitational rate enters the phase of layer `k`.
///
/// `Physical` uses the rate between neighbouring layers as given.
/// `PaperFigure` multiplies it by the number of layer spacings spanned by the
/// ensemble (`n_site` for a cubic lattice), which is the scaling under which
/// the published dephasing curves and stability figures are reproduced. The
/// threshold algebra is reproduced by `Physical`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Convention {
    #[default]
    Physical,
    PaperFigure,
}

impl Convention {
    pub fn as_str(&self) -> &'static str {
        match self {
            Convention::Physical => "physical",
            Convention::PaperFigure => "paper-figure",
        }
    }

    /// Effective per-layer rate for an ensemble spanning `span_layers` layer
    /// spacings.
    pub fn effective_rate(&self, phi_g: f64, span_layers: u64) -> f64 {
        match self {
            Convention::Physical => phi_g,
            Convention::PaperFigure => phi_g * span_layers as f64,
        }
    }
}

impl fmt::Display for Convention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Convention {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "physical" => Ok(Convention::Physical),
            "paper-figure" => Ok(Convention::PaperFigure),
            other => Err(format!(
                "unknown convention `{other}` (expected physical or paper-figure)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DephasingInput {
    /// Laser phase drift rate, rad/s.
    pub phi_l: f64,
    /// Gravitational phase drift rate between neighbouring layers, rad/s.
    pub phi_g: f64,
    pub layer_count: u64,
    /// Dark time, s.
    pub t: f64,
    pub convention: Convention,
}

impl DephasingInput {
    pub fn new(
        phi_l: f64,
        phi_g: f64,
        layer_count: u64,
        t: f64,
        convention: Convention,
    ) -> Result<Self> {
        let input = DephasingInput {
            phi_l,
            phi_g,
            layer_count,
            t,
            convention,
        };
        input.validate()?;
        Ok(input)
    }

    pub fn validate(&self) -> Result<()> {
        ensure_finite("phi_l", self.phi_l)?;
        ensure_finite("phi_g", self.phi_g)?;
        ensure_finite("t", self.t)?;
        if self.layer_count == 0 {
            return Err(Error::invalid("layer_count", "must be >= 1"));
        }
        if self.t < 0.0 {
            return Err(Error::invalid("t", format!("must be >= 0, got {}", self.t)));
        }
        Ok(())
    }

    /// Per-layer rate after applying the convention.
    pub fn effective_phi_g(&self) -> f64 {
        self.convention
            .effective_rate(self.phi_g, self.layer_count.saturating_sub(1))
    }

    pub fn at_time(&self, t: f64) -> Self {
        DephasingInput { t, ..*self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochSummary {
    pub s_x: f64,
    pub s_y: f64,
    /// |S|, between 0 and the number of layers.
    pub length: f64,
    /// Phase read out as arcsin(S_y / layers), rad.
    pub phi_eff: f64,
    /// φ_eff/(φ_l·t); `None` when the nominal phase is zero.
    pub ratio: Option<f64>,
    pub layer_count: u64,
    pub convention: Convention,
}

impl BlochSummary {
    /// |S| normalised by the number of layers.
    pub fn contrast(&self) -> f64 {
        self.length / self.layer_count as f64
    }
}

#[derive(Default)]
struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Sums the layer Bloch vectors in ascending `k`.
///
/// Offsets are `k = i - (m-1)/2` for `i in 0..m`, i.e. integers for an odd
/// number of layers and half-integers for an even number.
pub fn bloch_sum(input: &DephasingInput) -> Result<BlochSummary> {
    input.validate()?;
    let m = input.layer_count;
    let half = (m - 1) as f64 / 2.0;
    let rate = input.effective_phi_g();
    let phase = |i: u64| (input.phi_l + (i as f64 - half) * rate) * input.t;

    let (s_x, s_y) = if m > COMPENSATED_SUM_THRESHOLD {
        let (mut sx, mut sy) = (Neumaier::default(), Neumaier::default());
        for i in 0..m {
            let (sin, cos) = phase(i).sin_cos();
            sx.add(cos);
            sy.add(sin);
        }
        (sx.total(), sy.total())
    } else {
        let (mut sx, mut sy) = (0.0, 0.0);
        for i in 0..m {
            let (sin, cos) = phase(i).sin_cos();
            sx += cos;
            sy += sin;
        }
        (sx, sy)
    };

    let layers = m as f64;
    let phi_eff = (s_y / layers).clamp(-1.0, 1.0).asin();
    let nominal = input.phi_l * input.t;
    let ratio = (nominal != 0.0).then(|| phi_eff / nominal);
    debug_assert!(phi_eff.abs() <= FRAC_PI_2);

    Ok(BlochSummary {
        s_x,
        s_y,
        length: s_x.hypot(s_y),
        phi_eff,
        ratio,
        layer_count: m,
        convention: input.convention,
    })
}

/// Dirichlet-kernel contrast |sin(mθ/2) / (m·sin(θ/2))| with θ = rate·t.
///
/// Closed form of `bloch_sum(..).length / m`; 1 wherever sin(θ/2) vanishes.
pub fn contrast_closed_form(phi_g_eff: f64, layer_count: u64, t: f64) -> f64 {
    if layer_count == 0 {
        return 0.0;
    }
    let m = layer_count as f64;
    let half = 0.5 * phi_g_eff * t;
    let den = m * half.sin();
    if den == 0.0 {
        return 1.0;
    }
    ((m * half).sin() / den).abs()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub t: f64,
    pub ratio: Option<f64>,
    pub length: f64,
    pub contrast: f64,
}

/// Evaluates `bloch_sum` for each time in `t_grid`, keeping the grid order.
pub fn dephase_curve(template: &DephasingInput, t_grid: &[f64]) -> Result<Vec<CurvePoint>> {
    for (i, &t) in t_grid.iter().enumerate() {
        ensure_finite("t_grid", t)?;
        if t < 0.0 {
            return Err(Error::invalid("t_grid", "times must be >= 0"));
        }
        if i > 0 && t <= t_grid[i - 1] {
            return Err(Error::invalid(
                "t_grid",
                "times must be strictly increasing",
            ));
        }
    }
    t_grid
        .par_iter()
        .map(|&t| {
            let s = bloch_sum(&template.at_time(t))?;
            Ok(CurvePoint {
                t,
                ratio: s.ratio,
                length: s.length,
                contrast: s.contrast(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::{ClockSpecies, PhysicalConstants};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn yb_phi_g() -> f64 {
        let yb = ClockSpecies::ytterbium();
        yb.per_layer_phase_rate(&PhysicalConstants::default(), yb.lattice_spacing())
    }

    #[test]
    fn no_laser_drift_gives_zero_phase() {
        for m in [1, 2, 3, 10, 501, 20_001] {
            let s =
                bloch_sum(&DephasingInput::new(0.0, 0.37, m, 12.5, Convention::Physical).unwrap())
                    .unwrap();
            assert!(s.s_y.abs() < 1e-12 * m as f64, "m={m} s_y={}", s.s_y);
            assert!(s.phi_eff.abs() < 1e-12);
            assert_eq!(s.ratio, None);
        }
    }

    #[test]
    fn identical_layers_keep_full_length() {
        let s = bloch_sum(&DephasingInput::new(1e-3, 0.0, 501, 1.0, Convention::Physical).unwrap())
            .unwrap();
        assert_relative_eq!(s.length, 501.0, max_relative = 1e-14);
        assert_relative_eq!(s.ratio.unwrap(), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn fig1_point_paper_figure_convention() {
        let input =
            DephasingInput::new(1e-5, yb_phi_g(), 501, 100.0, Convention::PaperFigure).unwrap();
        let ratio = bloch_sum(&input).unwrap().ratio.unwrap();
        // Dirichlet kernel with θ = 500·φ_g·t over 501 layers.
        let oracle = contrast_closed_form(500.0 * yb_phi_g(), 501, 100.0);
        assert!((0.5..=0.7).contains(&ratio), "ratio {ratio}");
        assert!((ratio - oracle).abs() < 1e-3);
    }

    #[test]
    fn fig1_point_physical_convention_is_negligible() {
        let input =
            DephasingInput::new(1e-5, yb_phi_g(), 501, 100.0, Convention::Physical).unwrap();
        let ratio = bloch_sum(&input).unwrap().ratio.unwrap();
        assert!((ratio - 1.0).abs() < 1e-4);
    }

    #[test]
    fn closed_form_examples() {
        assert_eq!(contrast_closed_form(0.0, 17, 3.0), 1.0);
        assert!(contrast_closed_form(PI, 2, 1.0) < 1e-15);
        let m = 501u64;
        let theta = 2.0 * PI / m as f64;
        assert!(contrast_closed_form(theta, m, 1.0) < 1e-9);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(DephasingInput::new(f64::NAN, 0.0, 3, 1.0, Convention::Physical).is_err());
        assert!(DephasingInput::new(0.0, 0.0, 0, 1.0, Convention::Physical).is_err());
        assert!(DephasingInput::new(0.0, 0.0, 3, -1.0, Convention::Physical).is_err());
        let bad = DephasingInput {
            phi_l: 0.0,
            phi_g: f64::INFINITY,
            layer_count: 3,
            t: 1.0,
            convention: Convention::Physical,
        };
        assert!(bloch_sum(&bad).is_err());
    }

    #[test]
    fn brute_force_small_layer_counts() {
        // Term-by-term sum written out independently of bloch_sum's indexing.
        let (phi_l, phi_g, t) = (0.25, 0.125, 2.0);
        for m in 1..=7u64 {
            let offsets: Vec<f64> = match m {
                1 => vec![0.0],
                2 => vec![-0.5, 0.5],
                3 => vec![-1.0, 0.0, 1.0],
                4 => vec![-1.5, -0.5, 0.5, 1.5],
                5 => vec![-2.0, -1.0, 0.0, 1.0, 2.0],
                6 => vec![-2.5, -1.5, -0.5, 0.5, 1.5, 2.5],
                _ => vec![-3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0],
            };
            let mut sx = 0.0;
            let mut sy = 0.0;
            for k in offsets {
                let a: f64 = (phi_l + k * phi_g) * t;
                sx += a.cos();
                sy += a.sin();
            }
            let s =
                bloch_sum(&DephasingInput::new(phi_l, phi_g, m, t, Convention::Physical).unwrap())
                    .unwrap();
            assert_eq!(s.s_x, sx, "m={m}");
            assert_eq!(s.s_y, sy, "m={m}");
        }
    }

    #[test]
    fn paper_figure_scales_by_span() {
        let i = DephasingInput::new(0.0, 2.0, 11, 1.0, Convention::PaperFigure).unwrap();
        assert_eq!(i.effective_phi_g(), 20.0);
        let i = DephasingInput::new(0.0, 2.0, 1, 1.0, Convention::PaperFigure).unwrap();
        assert_eq!(i.effective_phi_g(), 0.0);
    }

    #[test]
    fn curve_keeps_order_and_handles_empty_grid() {
        let tpl = DephasingInput::new(1e-5, yb_phi_g(), 101, 0.0, Convention::PaperFigure).unwrap();
        assert!(dephase_curve(&tpl, &[]).unwrap().is_empty());
        let grid: Vec<f64> = (1..=200).map(f64::from).collect();
        let rows = dephase_curve(&tpl, &grid).unwrap();
        assert_eq!(rows.len(), 200);
        for (row, t) in rows.iter().zip(&grid) {
            assert_eq!(row.t, *t);
            assert!((row.ratio.unwrap() - 1.0).abs() < 2e-2);
        }
        assert!(dephase_curve(&tpl, &[1.0, 1.0]).is_err());
        assert!(dephase_curve(&tpl, &[-1.0, 1.0]).is_err());
    }

    #[test]
    fn curve_row_matches_single_evaluation() {
        let tpl = DephasingInput::new(1e-5, yb_phi_g(), 501, 0.0, Convention::PaperFigure).unwrap();
        let rows = dephase_curve(&tpl, &[50.0, 100.0]).unwrap();
        let single = bloch_sum(&tpl.at_time(100.0)).unwrap();
        assert_eq!(rows[1].ratio, single.ratio);
        assert_eq!(rows[1].length, single.length);
    }

    #[test]
    fn small_spread_matches_quadratic_expansion() {
        // 1 - contrast ≈ (m² - 1)·θ²/24 for m·θ ≪ 1.
        for m in [3u64, 11, 101, 501] {
            let theta = 1e-2 / m as f64;
            let s =
                bloch_sum(&DephasingInput::new(1e-6, theta, m, 1.0, Convention::Physical).unwrap())
                    .unwrap();
            let expected = ((m * m - 1) as f64) * theta * theta / 24.0;
            let loss = 1.0 - s.ratio.unwrap();
            assert!(
                (loss - expected).abs() < 0.1 * expected,
                "m={m} loss={loss:e} expected={expected:e}"
            );
        }
    }

    proptest! {
        #[test]
        fn length_matches_dirichlet(theta in 0.0f64..PI, m in 1u64..2000, phi_l in -1.0f64..1.0) {
            let s = bloch_sum(&DephasingInput::new(phi_l, theta, m, 1.0, Convention::Physical).unwrap()).unwrap();
            let closed = contrast_closed_form(theta, m, 1.0) * m as f64;
            // Relative to m: near a Dirichlet null the length itself is ~0.
            prop_assert!((s.length - closed).abs() <= 1e-9 * m as f64);
        }

        #[test]
        fn length_bounded_by_layer_count(theta in 0.0f64..20.0, m in 1u64..500, phi_l in -2.0f64..2.0, t in 0.0f64..5.0) {
            let s = bloch_sum(&DephasingInput::new(phi_l, theta, m, t, Convention::Physical).unwrap()).unwrap();
            let mf = m as f64;
            prop_assert!(s.s_x * s.s_x + s.s_y * s.s_y <= mf * mf * (1.0 + 1e-12));
            prop_assert!(s.phi_eff.abs() <= FRAC_PI_2);
        }

        #[test]
        fn ratio_even_in_phi_g(phi_g in 1e-6f64..1e-2, m in 2u64..800, t in 1.0f64..300.0) {
            let up = bloch_sum(&DephasingInput::new(1e-4, phi_g, m, t, Convention::Physical).unwrap()).unwrap();
            let down = bloch_sum(&DephasingInput::new(1e-4, -phi_g, m, t, Convention::Physical).unwrap()).unwrap();
            prop_assert!((up.ratio.unwrap() - down.ratio.unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn full_length_only_at_multiples_of_two_pi() {
        let m = 9;
        let full =
            bloch_sum(&DephasingInput::new(0.3, 2.0 * PI, m, 1.0, Convention::Physical).unwrap())
                .unwrap();
        assert_relative_eq!(full.length, m as f64, max_relative = 1e-12);
        let partial =
            bloch_sum(&DephasingInput::new(0.3, 0.5, m, 1.0, Convention::Physical).unwrap())
                .unwrap();
        assert!(partial.length < m as f64 - 1e-3);
    }
}
