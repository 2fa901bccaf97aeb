use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use cluster_sing::fixtures;
use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cluster-sing"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_experiment(dir: &Path, file: &str, body: &str) -> String {
    let path = dir.join(file);
    fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

fn summary(root: &Path, name: &str) -> Vec<csv::StringRecord> {
    let mut reader = csv::Reader::from_path(root.join(name).join("summary.csv")).unwrap();
    reader.records().map(|r| r.unwrap()).collect()
}

#[test]
fn double_bubble_batch_is_consistent_and_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let exp = write_experiment(
        dir.path(),
        "db.json",
        r#"{"name": "db", "volumes": [1.5, 1.5], "volume_box": [1, 2],
            "seeds": [1, 2, 3, 4, 5], "noise": 0.005,
            "analysis": {"lambda": 0.125, "delta": 0.001, "radii_per_decade": 20}}"#,
    );
    let out1 = dir.path().join("a");
    let o = run(&["optimize", &exp, "--out", out1.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = summary(&out1, "db");
    assert_eq!(rows.len(), 5);
    let mut classes: Vec<&str> = rows.iter().map(|r| &r[6]).collect();
    classes.dedup();
    assert_eq!(classes.len(), 1);
    assert!(rows.iter().all(|r| &r[1] == "true" && &r[4] == "2"));

    let seed_dir = out1.join("db").join("3");
    for f in [
        "cluster.json",
        "convergence.csv",
        "report.json",
        "profiles/junction_0.csv",
    ] {
        assert!(seed_dir.join(f).exists(), "{f}");
    }

    // Same seeds on one worker give byte-identical rows.
    let out2 = dir.path().join("b");
    let o = bin()
        .args(["optimize", &exp, "--out", out2.to_str().unwrap()])
        .env("CLUSTER_SING_THREADS", "1")
        .output()
        .unwrap();
    assert!(o.status.success());
    assert_eq!(
        fs::read(out1.join("db/summary.csv")).unwrap(),
        fs::read(out2.join("db/summary.csv")).unwrap()
    );

    // The written cluster is accepted unchanged by analyze and classify.
    let cluster = seed_dir.join("cluster.json");
    let o = run(&["classify", cluster.to_str().unwrap()]);
    assert!(o.status.success());
    let report: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let stored: Value = serde_json::from_str(&fs::read_to_string(seed_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report, stored);
    let o = run(&["analyze", cluster.to_str().unwrap()]);
    assert!(o.status.success());
    let analysis: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(analysis["junctions"].as_array().unwrap().len(), 2);
}

#[test]
fn single_chamber_has_no_singular_points() {
    let dir = tempfile::tempdir().unwrap();
    let exp = write_experiment(
        dir.path(),
        "one.json",
        r#"{"name": "one", "volumes": [1.0], "volume_box": [0.5, 2], "seeds": [7]}"#,
    );
    let o = run(&["optimize", &exp, "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = summary(dir.path(), "one");
    assert_eq!(rows.len(), 1);
    assert_eq!(&rows[0][4], "0");
}

#[test]
fn non_convergence_exits_3_and_keeps_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let exp = write_experiment(
        dir.path(),
        "short.json",
        r#"{"name": "short", "volumes": [1, 1], "volume_box": [1, 1],
            "optimizer": {"max_iterations": 10}, "seeds": [1]}"#,
    );
    let o = run(&["optimize", &exp, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    let err: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"], "non_convergence");
    assert!(dir.path().join("short/1/cluster.json").exists());
    let rows = summary(dir.path(), "short");
    assert_eq!(&rows[0][1], "false");
}

#[test]
fn validation_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    for (file, body) in [
        (
            "ratio.json",
            r#"{"name": "x", "volumes": [1], "volume_box": [0, 2], "seeds": [1], "analysis": {"lambda": 0.5}}"#,
        ),
        (
            "seeds.json",
            r#"{"name": "x", "volumes": [1], "volume_box": [0, 2], "seeds": []}"#,
        ),
        (
            "box.json",
            r#"{"name": "x", "volumes": [3], "volume_box": [0, 2], "seeds": [1]}"#,
        ),
        (
            "typo.json",
            r#"{"name": "x", "volumes": [1], "volume_box": [0, 2], "seeds": [1], "sedes": 3}"#,
        ),
    ] {
        let exp = write_experiment(dir.path(), file, body);
        let o = run(&["optimize", &exp, "--out", dir.path().to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(2), "{file}");
        let err: Value = serde_json::from_slice(&o.stderr).unwrap();
        assert_eq!(err["error"], "validation", "{file}");
    }
    assert_eq!(run(&["constants", "--bogus"]).status.code(), Some(2));
    assert_eq!(
        run(&["covering", "verify", "missing.csv", "--lambda", "0.1"])
            .status
            .code(),
        Some(2)
    );
    let exp = write_experiment(
        dir.path(),
        "ok.json",
        r#"{"name": "ok", "volumes": [1], "volume_box": [0, 2], "seeds": [1]}"#,
    );
    let o = bin()
        .args(["optimize", &exp, "--out", dir.path().to_str().unwrap()])
        .env("CLUSTER_SING_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn analyze_exact_triple_junction() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("y.json");
    fs::write(
        &path,
        serde_json::to_string(&fixtures::y_junction_disk(1.0, 64).unwrap()).unwrap(),
    )
    .unwrap();
    let profiles = dir.path().join("profiles");
    let o = run(&[
        "analyze",
        path.to_str().unwrap(),
        "--point",
        "0,0.5",
        "--profiles",
        profiles.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let doc: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let center = doc["junctions"]
        .as_array()
        .unwrap()
        .iter()
        .find(|p| p["x"].as_f64().unwrap().abs() < 1e-12 && p["y"].as_f64().unwrap().abs() < 1e-12)
        .expect("center junction");
    assert!((center["density"].as_f64().unwrap() - 1.5).abs() < 1e-9);
    assert_eq!(center["kind"], "triple_junction");
    assert_eq!(doc["probes"][0]["kind"], "regular_suspect");
    assert!(profiles.join("junction_0.csv").exists());
}

#[test]
fn constants_lists_reference_densities() {
    let o = run(&["constants", "--json"]);
    assert!(o.status.success());
    let doc: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let d: Vec<f64> = doc["densities"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["density"].as_f64().unwrap())
        .collect();
    assert_eq!(&d[..3], &[1.0, 1.5, 1.5]);
    assert!((d[3] - doc["t_cone_numeric"].as_f64().unwrap()).abs() < 1e-9);
}

#[test]
fn covering_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    let pts = dir.path().join("sharp.csv");
    let o = run(&["covering", "sharpness", "--n", "3", "--out", pts.to_str().unwrap()]);
    assert!(o.status.success());
    let check: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(check["size"], 8);
    assert_eq!(check["verdict"]["verdict"], "within_budget");
    assert_eq!(csv::Reader::from_path(&pts).unwrap().records().count(), 8);

    let set = dir.path().join("set.csv");
    fs::write(&set, "x0,x1\n0.1,0.1\n-0.2,0.3\n0.0,-0.4\n").unwrap();
    let o = run(&[
        "covering",
        "verify",
        set.to_str().unwrap(),
        "--lambda",
        "0.125",
        "--budget",
        "2",
    ]);
    assert!(o.status.success());
    let doc: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(doc["verdict"], "within_budget");
    assert_eq!(doc["size"], 3);

    let o = run(&["covering", "vitali", "--dim", "2", "--mu", "0.5", "--samples", "20000"]);
    assert!(o.status.success());
    let doc: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(doc["centers"].as_u64().unwrap() as f64 <= doc["limit"].as_f64().unwrap());

    let o = run(&["covering", "selftest"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
}
