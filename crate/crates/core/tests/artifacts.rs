use std::fs;

use degapprox::experiments::{run_experiment, write_outcome, ExperimentConfig};
use serde_json::Value;
use sha2::{Digest, Sha256};

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[test]
fn manifest_lists_every_artifact_with_its_digest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("vp.toml");
    fs::write(&cfg_path, "experiment = \"vp-consistency\"\ncount = 5\ngrid = 64\n").unwrap();
    let cfg = ExperimentConfig::from_file(&cfg_path).unwrap();
    let outcome = run_experiment(&cfg).unwrap();
    let out = dir.path().join("out");
    let written = write_outcome(&outcome, &cfg, &out).unwrap();
    assert_eq!(written.len(), outcome.files.len() + 1);

    let manifest: Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config_sha256"], cfg.hash());
    assert_eq!(manifest["passed"], outcome.passed);
    let artifacts = manifest["artifacts"].as_array().unwrap();
    assert_eq!(artifacts.len(), outcome.files.len());
    for a in artifacts {
        let body = fs::read(out.join(a["file"].as_str().unwrap())).unwrap();
        assert_eq!(a["sha256"], hex(&Sha256::digest(&body)));
    }
    let report: Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["experiment"], "vp-consistency");
}

#[test]
fn config_hash_ignores_formatting_and_output_dir() {
    let a = ExperimentConfig::from_toml_str("experiment = \"lemma61-sweep\"\ncount = 10\nseed = 3\n").unwrap();
    let b = ExperimentConfig::from_toml_str(
        "# comment\nseed = 3\ncount   = 10\nexperiment = \"lemma61-sweep\"\noutput_dir = \"/tmp/x\"\n",
    )
    .unwrap();
    assert_eq!(a.hash(), b.hash());
    let c = ExperimentConfig::from_toml_str("experiment = \"lemma61-sweep\"\ncount = 11\nseed = 3\n").unwrap();
    assert_ne!(a.hash(), c.hash());
}

#[test]
fn unwritable_output_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let cfg = ExperimentConfig { count: Some(5), ..ExperimentConfig::named("lemma61-sweep") };
    let outcome = run_experiment(&cfg).unwrap();
    let e = write_outcome(&outcome, &cfg, &blocker.join("sub")).unwrap_err();
    assert!(matches!(e, degapprox::error::Error::Io(_)), "{e}");
}
