use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ergodic_explore::{parse_config_str, SimConfig};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ergodic-explore"))
}

fn bundled() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/three_holes.toml")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<csv::StringRecord>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let headers = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|r| r.unwrap()).collect();
    (headers, rows)
}

#[test]
fn run_writes_all_artifacts() {
    let out = tempfile::tempdir().unwrap();
    let o = bin()
        .args(["run", "--config"])
        .arg(bundled())
        .arg("--out")
        .arg(out.path())
        .args(["--max-steps", "20000"])
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));

    let (h, metrics) = read_csv(&out.path().join("metrics.csv"));
    assert_eq!(h, ["k", "V", "target_hole", "phase", "cycle"]);
    let v = |r: &csv::StringRecord| r[1].parse::<f64>().unwrap();
    assert!(v(metrics.last().unwrap()) < v(&metrics[0]));
    assert_eq!(&metrics.last().unwrap()[0], "20000");
    assert!(metrics
        .iter()
        .all(|r| ["1", "2", "3"].contains(&&r[2]) && ["transit", "dwell"].contains(&&r[3])));

    let (h, traj) = read_csv(&out.path().join("trajectory.csv"));
    assert_eq!(h, ["k", "x", "y"]);
    assert_eq!(traj.len(), 20_001);
    assert_eq!((&traj[0][1], &traj[0][2]), ("180", "175"));

    let (h, events) = read_csv(&out.path().join("events.csv"));
    assert_eq!(
        h,
        [
            "k",
            "event",
            "hole",
            "h",
            "h_bar_prime",
            "h_bar_dprime",
            "frozen_a",
            "residual",
            "cycle"
        ]
    );
    assert_eq!(&events[0][1], "start");
    assert!(events.iter().any(|r| &r[1] == "arrive") && events.iter().any(|r| &r[1] == "depart"));

    for k in [0, 1000, 5000, 10000, 15000, 20000] {
        let pgm = std::fs::read(out.path().join(format!("phi_k{k}.pgm"))).unwrap();
        assert!(pgm.starts_with(b"P5\n400 400\n65535\n"));
        assert_eq!(pgm.len(), b"P5\n400 400\n65535\n".len() + 400 * 400 * 2);
        let text = std::fs::read_to_string(out.path().join(format!("phi_k{k}.csv"))).unwrap();
        assert_eq!(text.lines().count(), 400);
    }

    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["software"]["version"], env!("CARGO_PKG_VERSION"));
    assert!(manifest["wall_clock_seconds"].as_f64().unwrap() >= 0.0);
    assert_eq!(manifest["final_v"].as_f64().unwrap(), v(metrics.last().unwrap()));
    assert!(manifest["cycles"].as_u64().unwrap() >= 5);
    // The echoed config reproduces the run on its own.
    let echoed = parse_config_str(manifest["config"].as_str().unwrap()).unwrap();
    let mut want = SimConfig::three_holes();
    want.max_steps = 20_000;
    assert_eq!(echoed, want);
}

#[test]
fn grid_and_set_overrides() {
    let out = tempfile::tempdir().unwrap();
    let o = bin()
        .args(["run", "--config"])
        .arg(bundled())
        .arg("--out")
        .arg(out.path())
        .args([
            "--max-steps",
            "50",
            "--grid",
            "100",
            "120",
            "--set",
            "robot.start=[100, 100]",
            "--set",
            "snapshots=[50]",
        ])
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let pgm = std::fs::read(out.path().join("phi_k50.pgm")).unwrap();
    assert!(pgm.starts_with(b"P5\n100 120\n65535\n"));
    assert!(!out.path().join("phi_k0.pgm").exists());
    let (_, traj) = read_csv(&out.path().join("trajectory.csv"));
    assert_eq!((&traj[0][1], &traj[0][2]), ("100", "100"));
}

#[test]
fn missing_config_exits_1() {
    let out = tempfile::tempdir().unwrap();
    let o = bin()
        .args(["run", "--config", "/no/such/file.toml", "--out"])
        .arg(out.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("/no/such/file.toml"));
}

#[test]
fn invalid_override_exits_1() {
    let out = tempfile::tempdir().unwrap();
    let o = bin()
        .args(["run", "--config"])
        .arg(bundled())
        .arg("--out")
        .arg(out.path())
        .args(["--set", "v_max=0"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("robot.v_max"));
}

#[test]
fn unwritable_output_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let o = bin()
        .args(["run", "--config"])
        .arg(bundled())
        .arg("--out")
        .arg(blocker.join("sub"))
        .args(["--max-steps", "5", "--grid", "50", "50"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn validate_reports_lines() {
    let o = bin().args(["validate", "--config"]).arg(bundled()).output().unwrap();
    assert!(o.status.success());

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    let text = std::fs::read_to_string(bundled())
        .unwrap()
        .replace("hole.3.weight = 0.5", "hole.3.weight = 0.4");
    std::fs::write(&bad, text + "robot.speed = 3\n").unwrap();
    let o = bin().args(["validate", "--config"]).arg(&bad).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("robot.speed (line "), "{err}");
}

#[test]
fn weights_error_names_the_weights() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    let text = std::fs::read_to_string(bundled())
        .unwrap()
        .replace("hole.3.weight = 0.5", "hole.3.weight = 0.4");
    std::fs::write(&bad, text).unwrap();
    let o = bin().args(["validate", "--config"]).arg(&bad).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("hole.*.weight") && err.contains("0.2, 0.3, 0.4"), "{err}");
}

#[test]
fn version_prints() {
    let o = bin().arg("version").output().unwrap();
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains(env!("CARGO_PKG_VERSION")));
}
