use std::path::Path;
use std::process::{Command, Output};

use chargelab::ensembles::{spectral_ensemble, EnsembleKind, EnsembleSpec};

fn chargelab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chargelab"))
        .args(args)
        .env_remove("CHARGELAB_OUTPUT")
        .env_remove("CHARGELAB_THREADS")
        .output()
        .expect("binary runs")
}

fn read_series(path: &Path) -> Vec<(f64, f64)> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
            (f[0], f[1])
        })
        .collect()
}

#[test]
fn invalid_config_exits_2_naming_the_field() {
    let out = chargelab(&["sff", "--t", "0:100:log:16"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("time_grid.t_min"));
    let out = chargelab(&["r2-check", "--n", "5"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("ensemble.n"));
    let out = chargelab(&["validate", "--experiment", "fp"]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn rejected_operator_and_scan_settings() {
    let dir = tempfile::tempdir().unwrap();
    let out = chargelab(&["fp", "--ensemble", "u1_haar", "--n", "3", "--realizations", "1", "--output", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("ensemble.realizations"));
    let out = chargelab(&["otoc", "--n", "4", "--scope", "sector:2", "--set", "ops=XIII,IIIX", "--output", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("ops"));
}

#[test]
fn numerical_failure_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = chargelab(&["kl", "--realizations", "1", "--output", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("numerical failure"));
}

#[test]
fn moment_prints_appendix_expression() {
    let dir = tempfile::tempdir().unwrap();
    let out = chargelab(&["moment", "p=2 wiring {1,2,1,2}", "--output", dir.path().to_str().unwrap()]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for term in [
        "(1/(d^2 - 1)) X1.X2 Tr[Y1] Tr[Y2]",
        "(-1/(d^3 - d)) X1.X2 Tr[Y1.Y2]",
        "(-1/(d^3 - d)) X1 Tr[X2] Tr[Y1] Tr[Y2]",
        "(1/(d^2 - 1)) X1 Tr[X2] Tr[Y1.Y2]",
    ] {
        assert!(text.contains(term), "missing {term} in {text}");
    }
    assert!(dir.path().join("moment.txt").exists());
}

#[test]
fn sff_has_dip_ramp_plateau() {
    let dir = tempfile::tempdir().unwrap();
    let out = chargelab(&["sff", "--ensemble", "csyk", "--n", "8", "--realizations", "200", "--t", "0.1:100:log:64", "--output", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let s = read_series(&dir.path().join("sff.csv"));
    assert_eq!(s.len(), 64);
    let (imin, &(_, vmin)) = s.iter().enumerate().min_by(|a, b| a.1 .1.total_cmp(&b.1 .1)).unwrap();
    let late: Vec<f64> = s[48..].iter().map(|p| p.1).collect();
    let plateau = late.iter().sum::<f64>() / late.len() as f64;
    assert!(imin > 0 && imin < 48, "dip at index {imin}");
    assert!(vmin < s[0].1 && vmin < plateau);

    // late-time limit: sum over sectors of squared level multiplicities
    let se = spectral_ensemble(&EnsembleSpec::new(EnsembleKind::Csyk, 8, 1, 200)).unwrap();
    let mut predicted = 0.0;
    for r in &se.eigenvalues {
        for sector in r {
            let mut i = 0;
            while i < sector.len() {
                let mut j = i;
                while j < sector.len() && sector[j] - sector[i] < 1e-9 {
                    j += 1;
                }
                predicted += ((j - i) * (j - i)) as f64;
                i = j;
            }
        }
    }
    predicted /= se.eigenvalues.len() as f64;
    assert!((plateau / predicted - 1.0).abs() < 0.2, "plateau {plateau} vs {predicted}");
}

#[test]
fn manifest_reruns_byte_identically() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let out = chargelab(&["kinv", "--ensemble", "gue", "--n", "4", "--realizations", "40", "--t", "0.5:5:linear:4", "--threads", "1", "--output", a.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest = a.path().join("manifest.json");
    let out = chargelab(&["kinv", "--config", manifest.to_str().unwrap(), "--threads", "3", "--output", b.path().to_str().unwrap()]);
    assert!(out.status.success());
    for f in ["kinv.csv", "kinv_frame_potential.csv"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap());
    }
    let ma: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&manifest).unwrap()).unwrap();
    let mb: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(b.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(ma["files"], mb["files"]);
}

#[test]
fn environment_overrides_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_chargelab"))
        .args(["ek-scan"])
        .env("CHARGELAB_OUTPUT", dir.path())
        .env("CHARGELAB_THREADS", "2")
        .output()
        .unwrap();
    assert!(out.status.success());
    let csv = std::fs::read_to_string(dir.path().join("ek_scan.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 3 * 7);
    let manifest = std::fs::read_to_string(dir.path().join("manifest.json")).unwrap();
    assert!(manifest.contains("\"threads\": \"2\""));
}

#[test]
fn every_experiment_runs_at_small_size() {
    let runs: &[&[&str]] = &[
        &["dos", "--n", "6", "--realizations", "20", "--plot"],
        &["sff-sectors", "--n", "6", "--realizations", "10", "--t", "0.1:10:log:5"],
        &["r2-check", "--n", "6", "--realizations", "20", "--t", "0.1:10:log:5"],
        &["r4-check", "--n", "6", "--realizations", "20", "--t", "0.1:10:log:5"],
        &["fp", "--ensemble", "u1_haar", "--n", "3", "--realizations", "20", "--k", "2"],
        &["fp-analytic", "--n", "6", "--realizations", "10", "--t", "0.1:10:log:4"],
        &["otoc", "--n", "6", "--realizations", "10", "--t", "0.1:10:log:4", "--plot"],
        &["page", "--realizations", "20", "--set", "page.qubits=4", "--set", "page.charge=2"],
        &["hp", "--set", "hp.realizations=20"],
        &["hp-scan"],
        &["kl", "--realizations", "100", "--set", "kl.setup=u1_haar"],
    ];
    for args in runs {
        let dir = tempfile::tempdir().unwrap();
        let mut v: Vec<&str> = args.to_vec();
        v.extend(["--output", dir.path().to_str().unwrap()]);
        let out = chargelab(&v);
        assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        let manifest: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
        let files = manifest["files"].as_object().unwrap();
        assert!(!files.is_empty(), "{args:?}");
        for name in files.keys() {
            assert!(dir.path().join(name).exists());
        }
    }
}
