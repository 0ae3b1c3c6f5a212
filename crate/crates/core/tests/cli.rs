mod common;

use std::fs;

use common::{gravclock, scenario_path, snapshot};
use serde_json::Value;

fn run_in(
    dir: &std::path::Path,
    cmd: &str,
    scenario: &str,
    extra: &[&str],
) -> (i32, String, String) {
    let scn = scenario_path(scenario);
    let mut args = vec![
        cmd,
        "--scenario",
        scn.to_str().unwrap(),
        "--out",
        dir.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    gravclock(&args)
}

#[test]
fn reruns_are_byte_identical() {
    for (cmd, scn) in [
        ("threshold", "threshold.scn"),
        ("dephase-curve", "dephase.scn"),
        ("stability-sweep", "cubic_sweep.scn"),
        ("budget", "budget.scn"),
    ] {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        assert_eq!(run_in(a.path(), cmd, scn, &[]).0, 0, "{cmd}");
        assert_eq!(run_in(b.path(), cmd, scn, &[]).0, 0, "{cmd}");
        let (sa, sb) = (snapshot(a.path()), snapshot(b.path()));
        assert!(sa.len() >= 2, "{cmd}");
        assert_eq!(sa, sb, "{cmd}");
    }
}

#[test]
fn thread_count_does_not_change_output() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let scn = scenario_path("slab_sweep.scn");
    for (dir, threads) in [(&a, "1"), (&b, "4")] {
        let status = std::process::Command::new(common::bin())
            .env("GRAVCLOCK_THREADS", threads)
            .args([
                "stability-sweep",
                "--scenario",
                scn.to_str().unwrap(),
                "--out",
            ])
            .arg(dir.path())
            .status()
            .unwrap();
        assert!(status.success());
    }
    assert_eq!(snapshot(a.path()), snapshot(b.path()));
}

#[test]
fn threshold_reports_497() {
    let dir = tempfile::tempdir().unwrap();
    let (code, stdout, _) = run_in(dir.path(), "threshold", "threshold.scn", &[]);
    assert_eq!(code, 0);
    assert!(stdout.contains("497"));
    let v: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("threshold.json")).unwrap())
            .unwrap();
    assert_eq!(v["decoherence_size"][0]["n_site"], 497);
    assert_eq!(v["decoherence_size"][1]["n_site"], 165);
    assert!(v["decoherence_size"][1]["derivation"]
        .as_str()
        .unwrap()
        .starts_with("reconstruction"));
}

#[test]
fn convention_flag_overrides_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, _) = run_in(
        dir.path(),
        "dephase-curve",
        "dephase.scn",
        &["--convention", "physical"],
    );
    assert_eq!(code, 0);
    let csv = fs::read_to_string(dir.path().join("dephase_curve.csv")).unwrap();
    assert_eq!(
        csv.lines().next().unwrap(),
        "t_s,n_site,phi_l,convention,ratio,contrast"
    );
    assert!(csv
        .lines()
        .skip(1)
        .all(|l| l.split(',').nth(3) == Some("physical")));
    let manifest: Value = serde_json::from_str(
        &fs::read_to_string(dir.path().join("run_dephase_curve.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(manifest["convention"], "physical");
}

#[test]
fn invalid_scenario_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let scn = dir.path().join("bad.scn");
    fs::write(&scn, "species = Yb\ngeometry = cubic:0\n").unwrap();
    let (code, stdout, stderr) = gravclock(&[
        "threshold",
        "--scenario",
        scn.to_str().unwrap(),
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(code, 2);
    assert!(stdout.is_empty());
    assert!(stderr.contains("geometry"), "{stderr}");

    fs::write(&scn, "bogus = 1\n").unwrap();
    let (code, _, stderr) = gravclock(&["budget", "--scenario", scn.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(stderr.contains("line 1"), "{stderr}");
}

#[test]
fn flagged_points_exit_3_unless_allowed() {
    let dir = tempfile::tempdir().unwrap();
    let scn = dir.path().join("flag.scn");
    fs::write(&scn, "[sweep]\ngeometry = slab\nsizes = 1,2\nphi_l = 0\n").unwrap();
    let out = dir.path().join("o");
    let args = |extra: &'static [&'static str]| {
        let mut a = vec![
            "stability-sweep".to_string(),
            "--scenario".into(),
            scn.to_str().unwrap().into(),
            "--out".into(),
            out.to_str().unwrap().into(),
        ];
        a.extend(extra.iter().map(|s| s.to_string()));
        a
    };
    let a = args(&[]);
    let (code, _, stderr) = gravclock(&a.iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(code, 3);
    assert!(stderr.contains("flagged"));
    let csv = fs::read_to_string(out.join("stability_sweep.csv")).unwrap();
    assert!(csv.contains(",non-bracketable"));
    let a = args(&["--allow-flags"]);
    let (code, _, _) = gravclock(&a.iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(code, 0);
}

#[test]
fn zero_signal_budget_fails_every_entry() {
    let dir = tempfile::tempdir().unwrap();
    let scn = dir.path().join("zero.scn");
    fs::write(&scn, "systematics.signal_hz = 0\n").unwrap();
    let (code, stdout, _) = gravclock(&[
        "budget",
        "--scenario",
        scn.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    assert!(stdout.contains("FAIL"));
    let v: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("budget.json")).unwrap()).unwrap();
    assert_eq!(v["all_pass"], false);
    let entries = v["entries"].as_array().unwrap();
    assert_eq!(entries.len(), 10);
    assert!(entries.iter().all(|e| e["passes"] == false));
}

#[test]
fn manifest_hashes_match_files() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run_in(dir.path(), "budget", "budget.scn", &[]).0, 0);
    let v: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("run_budget.json")).unwrap())
            .unwrap();
    for f in v["files"].as_array().unwrap() {
        let bytes = fs::read(dir.path().join(f["name"].as_str().unwrap())).unwrap();
        assert_eq!(f["sha256"], gravclock::run::sha256_hex(&bytes));
        assert_eq!(f["bytes"], bytes.len());
    }
    let text = v["scenario"].as_str().unwrap();
    assert_eq!(
        v["scenario_sha256"],
        gravclock::run::sha256_hex(text.as_bytes())
    );
}
