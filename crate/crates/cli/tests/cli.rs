use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn avqds(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_avqds"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, method: &str) -> String {
    let text = format!(
        r#"{{
  "model": {{"kind": "mfim", "n": 4, "h_x": -2.0, "h_z": 0.5}},
  "schedule": {{"kind": "quench", "pre": {{"kind": "mfim", "n": 4, "h_x": 0.0, "h_z": 0.0}}}},
  "t_final": 0.2,
  "method": {method},
  "observables": [{{"kind": "energy"}}, {{"kind": "loschmidt"}}, {{"kind": "infidelity"}}]
}}"#
    );
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn misspelled_key_exits_2_with_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.json", r#"{"kind": "avqds", "dt_exactt": 1e-3}"#);
    let out = avqds(&["run", &cfg, "--out", dir.path().join("r").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("method.dt_exactt"), "{stderr}");
    assert!(!dir.path().join("r").exists());
}

#[test]
fn missing_config_exits_2() {
    let out = avqds(&["run", "/nonexistent/config.json"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn replay_is_byte_identical_and_self_compare_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "run.json", r#"{"kind": "avqds"}"#);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        let out = avqds(&["--seedless", "run", &cfg, "--out", d.to_str().unwrap()]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let csv_a = fs::read(a.join("trajectory.csv")).unwrap();
    assert_eq!(csv_a, fs::read(b.join("trajectory.csv")).unwrap());
    let header = String::from_utf8_lossy(&csv_a).lines().next().unwrap().to_string();
    assert_eq!(header, "t,energy,loschmidt,infidelity,n_theta,n_cx,L2,dt");

    // The resolved config in the metadata replays to the same bytes.
    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(a.join("metadata.json")).unwrap()).unwrap();
    let replay = dir.path().join("replay.json");
    fs::write(&replay, serde_json::to_string(&meta["config"]).unwrap()).unwrap();
    let c = dir.path().join("c");
    let out = avqds(&["run", replay.to_str().unwrap(), "--out", c.to_str().unwrap()]);
    assert!(out.status.success());
    assert_eq!(csv_a, fs::read(c.join("trajectory.csv")).unwrap());

    let out = avqds(&["compare", a.to_str().unwrap(), b.to_str().unwrap()]);
    assert!(out.status.success());
    let report = String::from_utf8_lossy(&out.stdout);
    assert!(report.contains("s_energy,0\n"), "{report}");
    assert!(report.contains("s_loschmidt,0\n"));
    assert!(report.contains("final_fidelity,1\n"));
    assert!(report.contains("gate_ratio,1\n"));
}

#[test]
fn compare_against_exact_and_disjoint_columns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_a = write_config(dir.path(), "a.json", r#"{"kind": "avqds"}"#);
    let cfg_e = write_config(dir.path(), "e.json", r#"{"kind": "exact", "dt": 0.001}"#);
    let (a, e) = (dir.path().join("a"), dir.path().join("e"));
    assert!(avqds(&["run", &cfg_a, "--out", a.to_str().unwrap()]).status.success());
    assert!(avqds(&["run", &cfg_e, "--out", e.to_str().unwrap()]).status.success());
    let json_out = dir.path().join("cmp.json");
    let out = avqds(&[
        "compare",
        a.to_str().unwrap(),
        e.to_str().unwrap(),
        "--window",
        "0",
        "0.2",
        "--out",
        json_out.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(&json_out).unwrap()).unwrap();
    assert!(report["s"]["energy"].as_f64().unwrap() < 0.02);
    assert!(report["final_fidelity"].as_f64().unwrap() > 0.999);

    let other = dir.path().join("other");
    fs::create_dir_all(&other).unwrap();
    fs::write(other.join("trajectory.csv"), "t,fidelity,n_theta,n_cx,L2,dt\n0,1,0,0,,0\n").unwrap();
    let out = avqds(&["compare", a.to_str().unwrap(), other.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sweep_writes_table() {
    let dir = tempfile::tempdir().unwrap();
    let template = dir.path().join("t.json");
    fs::write(
        &template,
        r#"{"model": {"kind": "tfim", "n": 3, "h_x": -2.0, "periodic": "auto"},
            "t_final": 0.1, "method": {"kind": "avqds"}}"#,
    )
    .unwrap();
    let out_dir = dir.path().join("sweep");
    let out = avqds(&[
        "--threads",
        "2",
        "sweep",
        template.to_str().unwrap(),
        "--grid",
        "model.n=2:4",
        "--cuts",
        "0.05,0.1",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = fs::read_to_string(out_dir.join("sweep.csv")).unwrap();
    assert_eq!(table.lines().count(), 4);
    assert!(table.lines().skip(1).all(|l| l.contains(",ok,")));
    assert!(out_dir.join("point_2").join("metadata.json").exists());
}
