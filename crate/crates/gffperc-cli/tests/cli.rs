use serde_json::Value;
use sha2::{Digest, Sha256};
use std::path::Path;
use std::process::{Command, Output};

fn gffperc(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gffperc"))
        .args(args)
        .arg(format!("--output={}", out.display()))
        .env("RUST_LOG", "warn")
        .env_remove("GFFPERC_CACHE_DIR")
        .output()
        .expect("binary runs")
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(dir.join("manifest.json")).unwrap()).unwrap()
}

fn hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Every listed output exists with the recorded hash, and every file in the
/// directory apart from the manifest is listed.
fn assert_manifest_covers(dir: &Path) {
    let m = manifest(dir);
    let outputs = m["outputs"].as_array().unwrap();
    for o in outputs {
        let bytes = std::fs::read(dir.join(o["path"].as_str().unwrap())).unwrap();
        assert_eq!(o["sha256"].as_str().unwrap(), hex(&bytes));
    }
    let listed: Vec<&str> = outputs.iter().map(|o| o["path"].as_str().unwrap()).collect();
    for entry in std::fs::read_dir(dir).unwrap() {
        let name = entry.unwrap().file_name().into_string().unwrap();
        assert!(name == "manifest.json" || listed.contains(&name.as_str()), "{name} is not in the manifest");
    }
}

#[test]
fn bundled_verify_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("verify");
    let o = gffperc(&["verify"], &dir);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_manifest_covers(&dir);
    let csv = std::fs::read_to_string(dir.join("verify.csv")).unwrap();
    assert!(csv.lines().skip(1).all(|l| l.split(',').nth(1) == Some("1")), "{csv}");
}

#[test]
fn decay_reruns_are_byte_identical_across_worker_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let args = ["decay", "--side=11", "--samples=400", "--n_max=6", "--h=[-1.0, -0.5]", "--seed=3"];
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert_eq!(gffperc(&[&args[..], &["--workers=1"]].concat(), &a).status.code(), Some(0));
    assert_eq!(gffperc(&[&args[..], &["--workers=0"]].concat(), &b).status.code(), Some(0));
    for name in ["decay_h-1.csv", "decay_h-0p5.csv"] {
        let x = std::fs::read(a.join(name)).unwrap();
        assert_eq!(x, std::fs::read(b.join(name)).unwrap(), "{name}");
        assert!(String::from_utf8(x).unwrap().starts_with("N,count,freq,wilson_lo,wilson_hi\n"));
    }
    assert_manifest_covers(&a);
    let m = manifest(&a);
    assert_eq!(m["results"]["levels"][0]["h"], -1.0);
    assert_eq!(m["config"]["seed"], 3);
    assert_eq!(m["green_cache"][0]["d"], 3);
}

#[test]
fn every_command_writes_a_covered_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let runs: &[&[&str]] = &[
        &["green", "--green.radius=2"],
        &["capacity", "--capacity.scales=[2, 3, 4]", "--capacity.measure_side=2", "--capacity.mc_walks=200"],
        &["sample", "--side=7", "--sample.count=2"],
        &["theta", "--h=[0.0, 1.0]", "--samples=50", "--theta.sides=[7, 9]", "--h_star_samples=50", "--side=9"],
        &["extend", "--side=9", "--samples=200", "--n_max=4", "--h=[1.0]", "--extend.t=[0.2]"],
        &["coarse", "--side=15", "--coarse.configs=3"],
    ];
    for (i, args) in runs.iter().enumerate() {
        let dir = tmp.path().join(format!("run{i}"));
        let o = gffperc(args, &dir);
        assert_eq!(o.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        assert_manifest_covers(&dir);
        assert_eq!(manifest(&dir)["command"], args[0]);
    }
    let ext = std::fs::read_to_string(tmp.path().join("run4/extension_size.csv")).unwrap();
    assert!(ext.starts_with("Re_z,Im_z,N_max,Re_val,Im_val,stderr,certificate_flag\n"));
}

#[test]
fn config_errors_exit_2_without_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("bad");
    let o = gffperc(&["capacity", "--d=2"], &dir);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("d: potential-theoretic runs need d ≥ 3"));
    assert!(!dir.exists());
    let cfg = tmp.path().join("c.toml");
    std::fs::write(&cfg, "samples = \"many\"\n").unwrap();
    assert_eq!(gffperc(&["decay", "-c", cfg.to_str().unwrap()], &dir).status.code(), Some(2));
    assert_eq!(gffperc(&["decay", "--no-such-key=1"], &dir).status.code(), Some(2));
    assert!(!dir.exists());
}

#[test]
fn failures_exit_nonzero_and_remove_partial_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("coarse");
    // too few draws to collect the requested configurations
    let o = gffperc(&["coarse", "--coarse.configs=5", "--coarse.max_draws=2"], &dir);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!dir.exists());
    // two scales put the capacity slope far outside its window
    let o = gffperc(&["verify", "--capacity.scales=[1, 2]"], &dir);
    assert_eq!(o.status.code(), Some(4), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!dir.exists());
}
