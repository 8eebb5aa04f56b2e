use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn trackhhl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_trackhhl"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json_stdout(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn error_json(out: &Output) -> Value {
    let v: Value = serde_json::from_slice(&out.stderr).expect("stderr is JSON");
    v["error"].clone()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn generate_writes_files_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ev");
    let args = [
        "generate",
        "--layers",
        "3",
        "--particles",
        "5",
        "--events",
        "10",
        "--seed",
        "7",
        "--output",
        path(&out),
    ];
    let manifest = json_stdout(&trackhhl(&args));
    assert_eq!(manifest["n_events"], 10);
    let events = manifest["events"].as_array().unwrap();
    assert_eq!(events.len(), 10);
    assert!(events.iter().all(|e| e["n_hits"] == 15));
    assert_eq!(events[3]["seed"], 10);
    assert!(out.join("manifest.json").exists());

    // same flags again: byte-identical files
    let again = dir.path().join("again");
    let mut args2 = args;
    args2[10] = path(&again);
    assert!(trackhhl(&args2).status.success());
    for e in events {
        let f = e["file"].as_str().unwrap();
        assert_eq!(
            fs::read(out.join(f)).unwrap(),
            fs::read(again.join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn generate_zero_events() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = json_stdout(&trackhhl(&[
        "generate",
        "--events",
        "0",
        "--output",
        path(dir.path()),
    ]));
    assert_eq!(manifest["n_events"], 0);
    assert_eq!(manifest["events"].as_array().unwrap().len(), 0);
}

#[test]
fn generate_needs_output() {
    let out = trackhhl(&["generate", "--events", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_json(&out)["kind"], "config");
}

#[test]
fn reconstruct_classical_is_perfect_on_ideal_toy() {
    let dir = tempfile::tempdir().unwrap();
    let ev = dir.path().join("ev");
    let res = dir.path().join("res");
    assert!(trackhhl(&[
        "generate",
        "--events",
        "4",
        "--seed",
        "3",
        "--output",
        path(&ev)
    ])
    .status
    .success());
    let summary = json_stdout(&trackhhl(&[
        "reconstruct",
        "--input",
        path(&ev),
        "--epsilon",
        "1e-9",
        "--output",
        path(&res),
    ]));
    assert_eq!(summary["n_events"], 4);
    assert_eq!(summary["summary"]["segment_efficiency"], 1.0);
    assert_eq!(summary["summary"]["segment_purity"], 1.0);
    assert_eq!(summary["summary"]["eff_track"], 1.0);

    let csv = fs::read_to_string(res.join("metrics.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 6);
    assert!(lines[5].starts_with("summary,20,20,20,0,0,1,0,1,1,"));
    let tracks = fs::read_to_string(res.join("event_00000.tracks.txt")).unwrap();
    assert_eq!(tracks.lines().count(), 5);
    assert!(tracks.lines().all(|l| l.split(',').count() == 3));
    let solution = fs::read_to_string(res.join("event_00000.solution.txt")).unwrap();
    assert_eq!(solution.lines().count(), 50);
}

#[test]
fn hhl_circuit_matches_classical() {
    let common = [
        "reconstruct",
        "--layers",
        "3",
        "--particles",
        "2",
        "--events",
        "3",
        "--seed",
        "11",
    ];
    let classical = json_stdout(&trackhhl(&common));
    let circuit = json_stdout(&trackhhl(
        &[&common[..], &["--mode", "hhl-circuit"]].concat(),
    ));
    assert_eq!(circuit["mode"], "hhl-circuit");
    for (a, b) in classical["events"]
        .as_array()
        .unwrap()
        .iter()
        .zip(circuit["events"].as_array().unwrap())
    {
        assert_eq!(a["active"], b["active"]);
    }
}

#[test]
fn missing_input_is_a_data_error() {
    let out = trackhhl(&["reconstruct", "--input", "/definitely/not/here"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(error_json(&out)["kind"], "data");
}

#[test]
fn csv_input_with_sparse_ids_keeps_original_ids() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("hits.csv");
    fs::write(
        &file,
        "id,x,y,z,module,truth_id\n10,0,0,30,0,1\n20,0,0,60,1,1\n30,0,0,90,2,1\n",
    )
    .unwrap();
    let res = dir.path().join("res");
    let summary = json_stdout(&trackhhl(&[
        "reconstruct",
        "--input",
        path(&file),
        "--output",
        path(&res),
    ]));
    assert_eq!(summary["events"][0]["n_doublets"], 2);
    assert_eq!(
        fs::read_to_string(res.join("hits.tracks.txt")).unwrap(),
        "10,20,30\n"
    );
}

#[test]
fn calibrate_is_deterministic_and_in_band() {
    let a = json_stdout(&trackhhl(&["calibrate", "--seed", "5"]));
    let b = json_stdout(&trackhhl(&["calibrate", "--seed", "5"]));
    assert_eq!(a, b);
    let t = a["threshold"].as_f64().unwrap();
    assert!((0.38..=0.50).contains(&t), "{t}");
}

#[test]
fn calibrate_degenerate_batch() {
    let out = trackhhl(&[
        "calibrate",
        "--layers",
        "2",
        "--particles",
        "1",
        "--events",
        "5",
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(error_json(&out)["message"]
        .as_str()
        .unwrap()
        .contains("degenerate"));
}

#[test]
fn flag_beats_config_file_beats_default() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    fs::write(&cfg, r#"{"gamma": 3.0, "delta": 2.0, "events": 4}"#).unwrap();
    let v = json_stdout(&trackhhl(&[
        "calibrate",
        "--config",
        path(&cfg),
        "--gamma",
        "5",
    ]));
    assert_eq!(v["hyperparams"]["gamma"], 5.0);
    assert_eq!(v["hyperparams"]["delta"], 2.0);
    assert_eq!(v["hyperparams"]["threshold"], 0.45);
    assert_eq!(v["n_events"], 4);

    fs::write(&cfg, r#"{"gama": 3.0}"#).unwrap();
    let out = trackhhl(&["calibrate", "--config", path(&cfg)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn kappa_study_bounded() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("kappa.csv");
    let out = trackhhl(&[
        "study",
        "kappa",
        "--particles",
        "2:10",
        "--layers",
        "3:8",
        "--epsilon",
        "1e-9",
        "--output",
        path(&csv),
    ]);
    assert!(out.status.success());
    let text = fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "particles,layers,seed,n_doublets,n_pad,nnz,max_row_nnz,density,kappa"
    );
    let kappas: Vec<f64> = lines
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(kappas.len(), 9 * 6);
    assert!(kappas.iter().all(|&k| (1.0..5.0).contains(&k)));
}

#[test]
fn sparsity_study_single_particle_and_empty_range() {
    let out = trackhhl(&["study", "sparsity", "--particles", "1", "--layers", "2:12"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for line in text.lines().skip(1) {
        let max_row: usize = line.split(',').nth(6).unwrap().parse().unwrap();
        assert!(max_row <= 3, "{line}");
    }
    let out = trackhhl(&["study", "sparsity", "--particles", "5:2"]);
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 1);
}

#[test]
fn hhl_report_reference_sizes() {
    let out = trackhhl(&["hhl-report"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let qubits: Vec<(String, String)> = text
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[2].to_string(), f[6].to_string())
        })
        .collect();
    for (n, q) in [
        ("8", "8"),
        ("18", "12"),
        ("32", "12"),
        ("50", "14"),
        ("12", "10"),
        ("27", "12"),
        ("48", "14"),
    ] {
        assert!(qubits.contains(&(n.to_string(), q.to_string())), "N={n}");
    }
}
