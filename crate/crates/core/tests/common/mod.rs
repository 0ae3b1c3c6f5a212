#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use gravclock::dephasing::Convention;
use gravclock::physics::LatticeKind;
use gravclock::scenario::{Scenario, SizeGrid};
use gravclock::sweep::GeometryFamily;
use proptest::prelude::*;

pub fn bin() -> PathBuf {
    PathBuf::from(env!("CARGO_BIN_EXE_gravclock"))
}

pub fn scenario_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("scenarios")
        .join(name)
}

/// Runs the CLI and returns (exit code, stdout, stderr).
pub fn gravclock(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(bin())
        .args(args)
        .output()
        .expect("spawn gravclock");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

/// File name to contents for every file in `dir`.
pub fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect()
}

fn positive() -> impl Strategy<Value = f64> {
    (-6.0f64..6.0).prop_map(|e| 10f64.powf(e))
}

fn non_negative() -> impl Strategy<Value = f64> {
    prop_oneof![Just(0.0), positive()]
}

pub fn scenario_strategy() -> impl Strategy<Value = Scenario> {
    let geometry = prop_oneof![
        (1u64..5000).prop_map(|n| LatticeKind::Cubic { n_site: n }),
        (1u64..1_000_000, 1u64..1000).prop_map(|(a, l)| LatticeKind::Slab {
            atoms_per_layer: a,
            n_layer: l
        }),
    ];
    let convention = prop_oneof![Just(Convention::Physical), Just(Convention::PaperFigure)];
    let family = prop_oneof![
        Just(GeometryFamily::Cubic),
        (1u64..100_000).prop_map(|a| GeometryFamily::Slab { atoms_per_layer: a }),
    ];
    let sizes = prop_oneof![
        (1u64..100, 0u64..900, 1usize..60).prop_map(|(lo, span, count)| SizeGrid::Log {
            lo,
            hi: lo + span,
            count
        }),
        proptest::collection::btree_set(1u64..10_000, 1..8)
            .prop_map(|s| SizeGrid::List(s.into_iter().collect())),
    ];
    let dephase = (
        non_negative(),
        proptest::collection::vec(1u64..2000, 1..6),
        0.0f64..10.0,
        1.0f64..1000.0,
        2usize..500,
    );
    let systematics = (
        1u64..1000,
        (positive(), positive(), non_negative(), non_negative()),
        (positive(), positive(), 0.01f64..1.0, positive()),
        (1.0f64..400.0, 1.0f64..400.0),
        proptest::option::of(non_negative()),
    );
    (
        geometry,
        convention,
        positive(),
        dephase,
        family,
        sizes,
        proptest::collection::vec(non_negative(), 1..6),
        systematics,
        "[a-z][a-z0-9_/]{0,12}",
    )
        .prop_map(
            |(geometry, convention, tau, dephase, family, sizes, phi_l, sys, dir)| {
                let mut s = Scenario {
                    geometry,
                    convention,
                    tau,
                    ..Scenario::default()
                };
                let (phi, n_sites, t0, span, points) = dephase;
                s.dephase_phi_l = phi;
                s.dephase_n_sites = n_sites;
                s.dephase_t_start = t0;
                s.dephase_t_stop = t0 + span;
                s.dephase_t_points = points;
                s.sweep_family = family;
                s.sweep_sizes = sizes;
                s.sweep_phi_l = phi_l;
                let (n_site, (bias, res, eg, eb), (waist, sep, wall_d, wall_r), (t1, t2), sig) =
                    sys;
                let y = &mut s.systematics;
                y.n_site = n_site;
                y.bias_field = bias;
                y.calibration_resolution = res;
                y.e_gradient = eg;
                y.e_baseline = eb;
                y.beam_waist = waist;
                y.beam_separation_wavelengths = sep;
                y.wall_distance = wall_d;
                y.wall_radius = wall_r;
                y.t1 = t1;
                y.t2 = t2;
                y.signal_override = sig;
                s.output_dir = dir;
                s
            },
        )
}
