//! End-to-end checks of the command-line surface.

use std::fs;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_kelvinwave"))
}

#[test]
fn vstate_emits_wave_json() {
    let out = bin()
        .args(["vstate", "--m", "3", "--beta", "0.01"])
        .output()
        .expect("run");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).expect("json");
    assert_eq!(json["m"], 3);
    assert!((json["omega"].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-4);
    assert!(json["residual"].as_f64().unwrap() < 1e-10);
}

#[test]
fn spectrum_reports_negative_max_eigenvalue() {
    let out = bin()
        .args(["spectrum", "--m", "3", "--beta", "0.02", "--n", "128"])
        .output()
        .expect("run");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).expect("json");
    assert!(json["max_eig"].as_f64().unwrap() < 0.0);
    assert_eq!(json["eigs"].as_array().unwrap().len(), 10);
}

#[test]
fn annulus_reports_constants_and_threshold() {
    let out = bin()
        .args(["annulus", "--r1", "0.5", "--r2", "1.0"])
        .output()
        .expect("run");
    assert!(out.status.success());
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).expect("json");
    assert!((json["C1"].as_f64().unwrap() - (0.25 - 2.0_f64.ln() / 6.0)).abs() < 1e-12);
    assert!(json["threshold_m"].as_u64().unwrap() >= 2);
}

#[test]
fn field_batch_csv_roundtrip() {
    let dir = std::env::temp_dir().join(format!("kw-cli-{}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    // unit circle contour
    let n = 64;
    let pts: Vec<[f64; 2]> = (0..n)
        .map(|j| {
            let t = 2.0 * std::f64::consts::PI * j as f64 / n as f64;
            [t.cos(), t.sin()]
        })
        .collect();
    let contour_path = dir.join("circle.json");
    fs::write(&contour_path, serde_json::to_string(&pts).unwrap()).unwrap();
    let points_path = dir.join("pts.csv");
    fs::write(&points_path, "x,y\n0.5,0\n2,0\n").unwrap();

    let out = bin()
        .args([
            "field",
            "--contour",
            contour_path.to_str().unwrap(),
            "--points",
            points_path.to_str().unwrap(),
        ])
        .output()
        .expect("run");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "x,y,psi,ux,uy");
    // interior point rotates with speed r/2
    let cols: Vec<f64> = lines
        .next()
        .unwrap()
        .split(',')
        .map(|v| v.parse().unwrap())
        .collect();
    assert!((cols[4] - 0.25).abs() < 1e-4, "uy at (0.5, 0): {}", cols[4]);
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn experiment_writes_record_csv_and_frames() {
    let dir = std::env::temp_dir().join(format!("kw-run-{}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    let cfg = serde_json::json!({
        "kind": "stability",
        "m": 3,
        "beta": 0.05,
        "perturbation": {"type": "none"},
        "t_final": 0.2,
        "dt": null,
        "n_nodes": 256,
        "remesh": false,
        "grid": 512,
        "seed": 7,
        "log_interval": 0.1,
        "fine_interval": null,
        "snapshot_times": [0.0, 0.2],
        "support_radius": 1.2
    });
    let cfg_path = dir.join("cfg.json");
    fs::write(&cfg_path, serde_json::to_string(&cfg).unwrap()).unwrap();
    let out = bin()
        .args([
            "experiment",
            "--config",
            cfg_path.to_str().unwrap(),
            "--out",
            dir.join("runs").to_str().unwrap(),
        ])
        .output()
        .expect("run");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    // one timestamped directory with record + series + frames
    let run_dir = fs::read_dir(dir.join("runs"))
        .unwrap()
        .next()
        .unwrap()
        .unwrap()
        .path();
    assert!(run_dir.join("record.json").exists());
    let csv = fs::read_to_string(run_dir.join("series.csv")).unwrap();
    assert!(csv.starts_with("t,area,impulse,energy,perimeter"));
    let frames: Vec<_> = fs::read_dir(&run_dir)
        .unwrap()
        .filter(|e| {
            e.as_ref()
                .unwrap()
                .file_name()
                .to_string_lossy()
                .starts_with("frame-")
        })
        .collect();
    assert_eq!(frames.len(), 2);
    fs::remove_dir_all(&dir).ok();
}
