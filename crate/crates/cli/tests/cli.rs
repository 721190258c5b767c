use std::path::Path;
use std::process::{Command, Output};

use xgen_cli::RunConfig;

fn xgen(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_xgen"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn error_line(o: &Output) -> serde_json::Value {
    let stderr = String::from_utf8_lossy(&o.stderr);
    serde_json::from_str(stderr.lines().last().unwrap()).unwrap()
}

fn tiny_config(dir: &Path) -> std::path::PathBuf {
    let mut cfg = RunConfig::default();
    cfg.generator.n_samples = 2000;
    cfg.train.default.epochs = 1;
    cfg.prior.epochs = 1;
    cfg.generation.n_gen = 40;
    cfg.generation.opt.steps = 5;
    let path = dir.join("config.json");
    std::fs::write(&path, cfg.to_json()).unwrap();
    path
}

#[test]
fn missing_upstream_artifact_names_the_stage() {
    let dir = tempfile::tempdir().unwrap();
    let config = tiny_config(dir.path());
    let o = xgen(&["train"], &config, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(1));
    let line = error_line(&o);
    assert_eq!(line["error"], "missing-artifact");
    assert_eq!(line["stage"], "gen-data");
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let config = tiny_config(dir.path());
    let o = xgen(&["frobnicate"], &config, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_line(&o)["error"], "usage");
}

#[test]
fn bad_config_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.json");
    std::fs::write(&config, "{ not json").unwrap();
    let o = xgen(&["gen-data"], &config, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(error_line(&o)["error"], "config");
}

#[test]
fn training_and_generation_never_read_the_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let config = tiny_config(dir.path());
    let out = dir.path().join("out");
    assert!(xgen(&["gen-data"], &config, &out).status.success());
    std::fs::remove_file(out.join("data/oracle.csv")).unwrap();
    for verb in ["train", "extrapolate"] {
        let o = xgen(&[verb], &config, &out);
        assert!(o.status.success(), "{verb}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let o = xgen(&["eval"], &config, &out);
    assert_eq!(o.status.code(), Some(1));
    let line = error_line(&o);
    assert_eq!(line["error"], "missing-artifact");
    assert_eq!(line["stage"], "gen-data");
}
