use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, Output};

use sha2::{Digest, Sha256};

fn carleman(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_carleman"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, family: &str) -> String {
    let path = dir.join(name);
    let text = format!("[family]\n{family}\nN = 48\nR = 3\n\n[schedule]\nrule_target = 0.9\nI_max = 2\n");
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn hashes(dir: &Path) -> BTreeMap<String, String> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let path = e.unwrap().path();
            let digest = Sha256::digest(std::fs::read(&path).unwrap());
            let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
            (path.file_name().unwrap().to_string_lossy().into_owned(), hex)
        })
        .collect()
}

#[test]
fn verify_zero_family_succeeds() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "zero.cfg", "preset = zero");
    let out = tmp.path().join("out");
    let run = carleman(&[
        "verify",
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
        "--grid-extent",
        "6",
        "--grid-step",
        "0.1",
    ]);
    let stdout = String::from_utf8_lossy(&run.stdout);
    assert_eq!(run.status.code(), Some(0), "{stdout}");
    assert!(!stdout.contains("FAIL"));
    assert!(stdout.contains("verdict: pass"));
    assert!(out.join("verification.json").exists());
}

#[test]
fn identity_family_fails_the_condition() {
    let tmp = tempfile::tempdir().unwrap();
    let mut text = String::from("4 1\n");
    for i in 0..4 {
        let row: Vec<&str> = (0..4).map(|j| if i == j { "1 0" } else { "0 0" }).collect();
        text.push_str(&row.join(" "));
        text.push('\n');
    }
    std::fs::write(tmp.path().join("identity.txt"), text).unwrap();
    let cfg = tmp.path().join("identity.cfg");
    std::fs::write(&cfg, "[family]\nmatrix = identity.txt\n").unwrap();
    let run = carleman(&[
        "analyze",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        tmp.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(run.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&run.stderr);
    assert!(stderr.to_lowercase().contains("condition"), "{stderr}");
}

#[test]
fn construct_writes_manifest_listing_kernels() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "diag.cfg", "preset = diagonal-decay");
    let out = tmp.path().join("out");
    let run = carleman(&[
        "construct",
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
        "--grid-extent",
        "12",
        "--grid-step",
        "0.2",
    ]);
    assert_eq!(run.status.code(), Some(0), "{}", String::from_utf8_lossy(&run.stderr));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    let files = manifest["files"].as_array().unwrap();
    let kernel_files: Vec<&serde_json::Value> = files.iter().filter(|f| f["kind"] == "kernel").collect();
    let kernels: Vec<&str> = kernel_files.iter().map(|f| f["path"].as_str().unwrap()).collect();
    assert_eq!(kernels, ["kernel_r1.csv", "kernel_r2.csv", "kernel_r3.csv"]);
    for (r, k) in kernels.iter().enumerate() {
        assert!(out.join(k).exists());
        assert!(out.join(format!("kernel_r{}.json", r + 1)).exists());
        let header = std::fs::read_to_string(out.join(k)).unwrap();
        assert!(header.starts_with("s,t,re_K,im_K,re_K_10,im_K_10"));
    }
    let factors: Vec<f64> = kernel_files
        .iter()
        .map(|f| f["scale_factor"].as_f64().unwrap())
        .collect();
    assert_eq!(factors, [1.0, 2.0, 3.0]);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "shift.cfg", "preset = weighted-shift");
    let mut all = Vec::new();
    for name in ["a", "b"] {
        let out = tmp.path().join(name);
        let run = carleman(&[
            "construct",
            "--config",
            &cfg,
            "--out",
            out.to_str().unwrap(),
            "--grid-extent",
            "8",
            "--grid-step",
            "0.1",
            "--seed",
            "5",
        ]);
        assert_eq!(run.status.code(), Some(0));
        all.push(hashes(&out));
    }
    assert_eq!(all[0], all[1]);
    assert!(all[0].len() >= 10);
}

#[test]
fn wavelet_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "zero.cfg", "preset = zero");
    let out = tmp.path().join("out");
    let run = carleman(&[
        "wavelet",
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
        "--grid-extent",
        "4",
        "--grid-step",
        "0.5",
    ]);
    assert_eq!(run.status.code(), Some(0));
    let table = std::fs::read_to_string(out.join("wavelet.csv")).unwrap();
    assert!(table.starts_with("s,re_u,im_u,abs_u,re_u_d1"));
    assert_eq!(table.lines().count(), 1 + 17);
    assert!(out.join("wavelet.json").exists());
}

#[test]
fn exit_codes_classify_errors() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(carleman(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(carleman(&["analyze"]).status.code(), Some(2));
    let missing = tmp.path().join("missing.cfg");
    assert_eq!(
        carleman(&["analyze", "--config", missing.to_str().unwrap()])
            .status
            .code(),
        Some(3)
    );
    let typo = tmp.path().join("typo.cfg");
    std::fs::write(&typo, "[family]\npreset = zero\nNN = 4\n").unwrap();
    assert_eq!(
        carleman(&["analyze", "--config", typo.to_str().unwrap()]).status.code(),
        Some(3)
    );
    let cfg = write_config(tmp.path(), "zero.cfg", "preset = zero");
    let out = tmp.path().join("out");
    let run = carleman(&[
        "construct",
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
        "--orders",
        "5",
    ]);
    assert_eq!(run.status.code(), Some(3));
    assert!(!out.exists());
}
