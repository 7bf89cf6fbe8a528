use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use selfnorm_cli::{run_config, ExperimentConfig, RunError, Subcommand, EXIT_RUNTIME, EXIT_VALIDATION, OUTPUT_DIR_ENV, SUMMARY_FILE};

const RATE: &str = r#"
subcommand = "rate"
seed = 3
workers = 2
n = 200
x_grid = [1.0, 1.5, 2.0]
reps = 4000

[distribution]
name = "normal"

[[kernel]]
lambda = 1.0
transform = "identity"
"#;

fn selfnorm(args: &[&str], env_dir: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_selfnorm"));
    cmd.args(args).env_remove(OUTPUT_DIR_ENV);
    if let Some(d) = env_dir {
        cmd.env(OUTPUT_DIR_ENV, d);
    }
    cmd.output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

#[test]
fn rate_end_to_end() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "rate.toml", RATE);
    let out = tmp.path().join("out");
    let o = selfnorm(&["rate", "-c", &cfg, "--output-dir", out.to_str().unwrap()], None);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("rate.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("x_n,reps,hits,p_hat,ci_low,ci_high,log_rate,oracle_p"));
    assert_eq!(lines.count(), 3);
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join(SUMMARY_FILE)).unwrap()).unwrap();
    assert_eq!(summary["subcommand"], "rate");
    assert_eq!(summary["seed"], 3);
    assert_eq!(summary["config"]["n"], 200);
    assert!(summary["generated_at_unix"].as_u64().unwrap() > 0);
    assert_eq!(summary["results"]["r_hat"].as_array().unwrap().len(), 3);
}

#[test]
fn env_var_sets_the_default_output_dir_and_flags_override_it() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "rate.toml", RATE);
    let env_dir = tmp.path().join("from-env");
    let o = selfnorm(&["run", "-c", &cfg, "--reps", "1000"], Some(&env_dir));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(env_dir.join("rate.csv").exists());

    let flag_dir = tmp.path().join("from-flag");
    let o = selfnorm(&["rate", "-c", &cfg, "--output-dir", flag_dir.to_str().unwrap()], Some(&env_dir));
    assert!(o.status.success());
    assert!(flag_dir.join("rate.csv").exists());
}

#[test]
fn validation_errors_exit_two_and_write_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = RATE.replace("x_grid = [1.0, 1.5, 2.0]", "x_grid = [1.0, 15.0]").replace("workers = 2", "workers = 0");
    let cfg = write_config(tmp.path(), "bad.toml", &bad);
    let out = tmp.path().join("out");
    let o = selfnorm(&["rate", "-c", &cfg, "--output-dir", out.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(EXIT_VALIDATION));
    let stderr = String::from_utf8_lossy(&o.stderr);
    assert!(stderr.contains("x_grid[1]"), "{stderr}");
    assert!(stderr.contains("workers"), "{stderr}");
    assert!(stderr.contains("validation_error"));
    assert!(!out.exists());
}

#[test]
fn unknown_fields_and_wrong_subcommand_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "rate.toml", RATE);
    let typo = write_config(tmp.path(), "typo2.toml", &RATE.replace("reps = 4000", "reps = 4000\nrepz = 5"));
    let o = selfnorm(&["rate", "-c", &typo], None);
    assert_eq!(o.status.code(), Some(EXIT_VALIDATION));
    assert!(String::from_utf8_lossy(&o.stderr).contains("repz"));
    let o = selfnorm(&["lil", "-c", &cfg], None);
    assert_eq!(o.status.code(), Some(EXIT_VALIDATION));
    assert!(String::from_utf8_lossy(&o.stderr).contains("subcommand"));
}

#[test]
fn runtime_failure_removes_partial_output() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "null.toml",
        r#"
subcommand = "zcalc"
seed = 1
n = 1000
x_n = 2.0
moment = "empirical"
budget = 1000

[distribution]
name = "bernoulli"
params = { p = 1e-9 }

[[kernel]]
lambda = 1.0
transform = "identity"
"#,
    );
    let out = tmp.path().join("out");
    let o = selfnorm(&["zcalc", "-c", &cfg, "--output-dir", out.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(EXIT_RUNTIME));
    assert!(String::from_utf8_lossy(&o.stderr).contains("runtime_error"));
    assert!(!out.exists());

    // A pre-existing directory is kept, along with files the run did not write.
    fs::create_dir(&out).unwrap();
    fs::write(out.join("keep.txt"), "x").unwrap();
    let o = selfnorm(&["zcalc", "-c", &cfg, "--output-dir", out.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(EXIT_RUNTIME));
    let left: Vec<_> = fs::read_dir(&out).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(left, vec!["keep.txt"]);
}

#[test]
fn config_round_trips_through_toml() {
    let cfg = ExperimentConfig::from_toml(RATE).unwrap();
    let again = ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
    assert_eq!(cfg, again);
    let mut resolved = cfg.clone();
    resolved.resolve_defaults();
    let again = ExperimentConfig::from_toml(&resolved.to_toml().unwrap()).unwrap();
    assert_eq!(resolved, again);
    assert_eq!(resolved.subcommand, Subcommand::Rate);
}

#[test]
fn identical_configs_give_identical_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let mut cfg = ExperimentConfig::from_toml(RATE).unwrap();
        cfg.output_dir = Some(tmp.path().join(name));
        run_config(cfg, None).unwrap()
    };
    let (a, b) = (run("a"), run("b"));
    assert_eq!(
        fs::read(a.output_dir.join("rate.csv")).unwrap(),
        fs::read(b.output_dir.join("rate.csv")).unwrap()
    );
    assert_eq!(a.summary["results"], b.summary["results"]);
}

#[test]
fn library_reports_every_field_error() {
    let mut cfg = ExperimentConfig::from_toml(RATE).unwrap();
    cfg.n = Some(1);
    cfg.reps = Some(0);
    match run_config(cfg, None) {
        Err(RunError::Validation(errors)) => {
            let fields: Vec<&str> = errors.iter().map(|e| e.field.as_str()).collect();
            assert!(fields.contains(&"n"), "{fields:?}");
            assert!(fields.contains(&"reps"), "{fields:?}");
        }
        other => panic!("expected validation error, got {other:?}"),
    }
}

#[test]
fn shipped_configs_parse_and_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let mut cfg = selfnorm_cli::load_config(&path).unwrap();
        cfg.resolve_defaults();
        selfnorm_cli::plan::validate(&cfg).unwrap_or_else(|e| panic!("{}: {e:?}", path.display()));
        seen += 1;
    }
    assert!(seen >= 5);
}
