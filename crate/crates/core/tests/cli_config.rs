use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use proptest::prelude::*;
use stripe_lab::config::{parse_config, render, ExperimentConfig, InitialConfig, ModelKind};
use stripe_lab::grid::Snapshot;

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_stripe-lab"))
}

fn exit_status(config: &str, sub: &str) -> i32 {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.toml");
    fs::write(&path, config).unwrap();
    bin()
        .arg("--config")
        .arg(&path)
        .arg("--out")
        .arg(dir.path().join("out"))
        .arg(sub)
        .output()
        .unwrap()
        .status
        .code()
        .unwrap()
}

#[test]
fn shipped_configs_parse_and_run() {
    let mut names: Vec<PathBuf> = fs::read_dir(configs_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "toml"))
        .collect();
    names.sort();
    assert!(names.len() >= 5);
    for path in names {
        let text = fs::read_to_string(&path).unwrap();
        let config = parse_config(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let sub = if config.sweep.is_some() { "sweep" } else { "simulate" };
        let out = tempfile::tempdir().unwrap();
        let start = Instant::now();
        let status = bin()
            .arg("--config")
            .arg(&path)
            .arg("--out")
            .arg(out.path())
            .arg("--threads")
            .arg("2")
            .arg(sub)
            .output()
            .unwrap();
        assert!(status.status.success(), "{}: {}", path.display(), String::from_utf8_lossy(&status.stderr));
        assert!(start.elapsed() < Duration::from_secs(300));
    }
}

#[test]
fn exit_codes_follow_error_kind() {
    assert_eq!(exit_status("[params]\neps = -1.0\n", "simulate"), 2);
    assert_eq!(exit_status("[params]\nepss = 1.0\n", "simulate"), 2);
    assert_eq!(exit_status("model = \"k-eecp\n", "simulate"), 2);
    // fixed step far above the diffusion bound
    let too_big = "[grid]\nn_x = 64\n\n[control]\nt_end = 0.1\ndt = 0.05\nadaptive = false\n";
    assert_eq!(exit_status(too_big, "simulate"), 3);
    let ok = "[grid]\nn_x = 16\nn_z = 16\n\n[control]\nt_end = 0.01\n";
    assert_eq!(exit_status(ok, "simulate"), 0);
}

#[test]
fn config_errors_name_the_position() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.toml");
    fs::write(&path, "model = \"ad-eecp\"\n[params]\ngamm = 1.0\n").unwrap();
    let out = bin().arg("--config").arg(&path).arg("simulate").output().unwrap();
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3") && err.contains("gamma"), "{err}");
}

#[test]
fn eps_sweep_writes_one_run_per_value() {
    let out = tempfile::tempdir().unwrap();
    let status = bin()
        .arg("--config")
        .arg(configs_dir().join("eps_sweep.toml"))
        .arg("--out")
        .arg(out.path())
        .arg("--threads")
        .arg("3")
        .arg("sweep")
        .output()
        .unwrap()
        .status;
    assert!(status.success());
    for i in 0..3 {
        let run = out.path().join(format!("run_{i:03}"));
        assert!(run.join("diagnostics.csv").exists());
        assert!(run.join("summary.json").exists());
    }
    let table = fs::read_to_string(out.path().join("sweep.csv")).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "index,params.eps,m2_z_rate,invariant_drift,status");
    assert_eq!(lines.len(), 4);
    assert!(lines[1..].iter().all(|l| l.ends_with(",ok")));
}

#[test]
fn reruns_are_bit_identical() {
    let run = || {
        let out = tempfile::tempdir().unwrap();
        let status = bin()
            .arg("--config")
            .arg(configs_dir().join("conservation.toml"))
            .arg("--out")
            .arg(out.path())
            .arg("simulate")
            .output()
            .unwrap()
            .status;
        assert!(status.success());
        fs::read(out.path().join("diagnostics.csv")).unwrap()
    };
    assert_eq!(run(), run());
}

#[test]
fn seed_flag_changes_random_data() {
    let run = |seed: &str| {
        let out = tempfile::tempdir().unwrap();
        let status = bin()
            .arg("--config")
            .arg(configs_dir().join("conservation.toml"))
            .arg("--out")
            .arg(out.path())
            .arg("--seed")
            .arg(seed)
            .arg("simulate")
            .output()
            .unwrap()
            .status;
        assert!(status.success());
        fs::read(out.path().join("diagnostics.csv")).unwrap()
    };
    assert_ne!(run("1"), run("2"));
}

#[test]
fn snapshots_read_back() {
    let text = "model = \"k-eecp\"\n[grid]\nn_x = 8\nn_z = 16\n\n[control]\nt_end = 0.01\nsnapshot_every = 5\n\n[diagnostics]\nsnapshots = true\n";
    let config = parse_config(text).unwrap();
    let out = tempfile::tempdir().unwrap();
    stripe_lab::experiment::run_experiment(&config, out.path()).unwrap();
    let first = out.path().join("snapshots/snap_00000.txt");
    let snap = Snapshot::read(BufReader::new(fs::File::open(&first).unwrap())).unwrap();
    assert_eq!((snap.dim_x, snap.n_x, snap.n_z), (1, 8, 16));
    assert_eq!(snap.fields[0].len(), 8 * 16);
    let mut buf = Vec::new();
    snap.write(&mut buf).unwrap();
    assert_eq!(Snapshot::read(buf.as_slice()).unwrap(), snap);
}

fn config_strategy() -> impl Strategy<Value = ExperimentConfig> {
    (
        prop_oneof![Just(ModelKind::Kinetic), Just(ModelKind::AdEecp), Just(ModelKind::Science2011)],
        0.01f64..5.0,
        0.1f64..3.0,
        4usize..9,
        0u64..1_000_000,
        any::<bool>(),
    )
        .prop_map(|(model, eps, gamma, log_n, seed, random)| {
            let mut c = ExperimentConfig {
                model,
                ..ExperimentConfig::default()
            };
            c.params.eps = eps;
            c.params.gamma = gamma;
            c.grid.n_x = 1 << log_n;
            if random {
                c.initial = InitialConfig::Random {
                    scale_rho: 1.0,
                    scale_h: 0.5,
                    scale_n: 2.0,
                    seed,
                };
            }
            c
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rendered_configs_parse_back(config in config_strategy()) {
        let text = render(&config);
        let back = parse_config(&text).unwrap();
        prop_assert_eq!(back, config);
    }
}
