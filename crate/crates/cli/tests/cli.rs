use std::path::Path;
use std::process::{Command, Output};

use dinls_cli::experiment::CSV_HEADER;
use dinls_cli::sweep::TABLE_HEADER;
use dinls_cli::ExperimentConfig;
use proptest::prelude::*;

const SMALL: &str = r#"
experiment.kind = "simulate"
experiment.t_final = 0.1
model.N = 1
model.b = 0.5
model.alpha = 1.0
model.mu = 1.0
model.a = 0.3
grid.points = 128
grid.half_width = 16.0
propagator.dt0 = 0.005
data.kind = "gaussian"
data.width = 1.0
checks.enabled = ["mass_law", "gradient_bound", "domain"]
"#;

fn dinls(args: &[&str], config: &str, dir: &Path) -> Output {
    let path = dir.join("run.toml");
    std::fs::write(&path, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_dinls"))
        .args(args)
        .arg("--config")
        .arg(&path)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap()
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join("out").join(name)).unwrap()
}

#[test]
fn csv_columns_are_frozen() {
    let cols = "t,mass_u,energy_u,kinetic_K,H,variance_I,virial_V,pohozaev_P,grad_sq,sup_norm,weighted_pot,boundary_frac,dt";
    assert_eq!(CSV_HEADER, cols);
    let dir = tempfile::tempdir().unwrap();
    let out = dinls(&["simulate"], SMALL, dir.path());
    assert!(out.status.code().is_some());
    let csv = read(dir.path(), "diagnostics.csv");
    assert_eq!(csv.lines().next().unwrap(), cols);
    assert!(csv.lines().skip(1).all(|l| l.split(',').count() == 13));
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let o1 = dinls(&["simulate"], SMALL, d1.path());
    let o2 = dinls(&["simulate"], SMALL, d2.path());
    assert_eq!(o1.status.code(), o2.status.code());
    assert_eq!(o1.stdout, o2.stdout);
    for name in ["diagnostics.csv", "summary.json"] {
        assert_eq!(read(d1.path(), name), read(d2.path(), name), "{name}");
    }
}

#[test]
fn summary_carries_the_resolved_config() {
    let dir = tempfile::tempdir().unwrap();
    dinls(&["simulate"], SMALL, dir.path());
    let json: serde_json::Value = serde_json::from_str(&read(dir.path(), "summary.json")).unwrap();
    assert_eq!(json["config"]["model"]["b"], 0.5);
    assert_eq!(json["config"]["propagator"]["dt0"], 0.005);
    assert!(json["checks"].as_array().is_some_and(|c| !c.is_empty()));
    assert!(json["bounds"].is_object());
    for key in ["outcome", "t_blow", "scatter", "pass"] {
        assert!(json.get(key).is_some(), "{key}");
    }
}

#[test]
fn free_flow_mass_column_is_exponential() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = SMALL.replace("model.mu = 1.0", "model.mu = 0.0");
    let out = dinls(&["simulate"], &cfg, dir.path());
    let csv = read(dir.path(), "diagnostics.csv");
    let rows: Vec<Vec<f64>> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    let m0 = rows[0][1];
    for r in &rows {
        assert!((r[1] - (-0.6 * r[0]).exp() * m0).abs() <= 1e-10 * m0, "t = {}", r[0]);
    }
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
}

#[test]
fn exit_status_follows_the_checks() {
    let dir = tempfile::tempdir().unwrap();
    let pass = dinls(&["simulate"], SMALL, dir.path());
    assert_eq!(pass.status.code(), Some(0), "{}", String::from_utf8_lossy(&pass.stdout));

    let tight = format!("{SMALL}checks.mass_tol = 1e-300\n");
    let fail = dinls(&["simulate"], &tight, dir.path());
    assert_eq!(fail.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&fail.stdout).contains("FAIL mass_law"));
}

#[test]
fn strict_turns_warnings_into_failure() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!("{SMALL}propagator.boundary_tol = inf\n");
    assert_eq!(dinls(&["simulate"], &cfg, dir.path()).status.code(), Some(0));
    let strict = dinls(&["simulate", "--strict"], &cfg, dir.path());
    assert_eq!(strict.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&strict.stderr).contains("boundary monitor disabled"));
}

#[test]
fn bad_input_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let mismatch = dinls(&["groundstate"], SMALL, dir.path());
    assert_eq!(mismatch.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&mismatch.stderr).contains("subcommand"));

    let unknown = dinls(&["simulate"], &format!("{SMALL}grid.spacing = 0.1\n"), dir.path());
    assert_eq!(unknown.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&unknown.stderr).contains("spacing"));

    let invalid = dinls(&["simulate"], &SMALL.replace("model.b = 0.5", "model.b = 1.5"), dir.path());
    assert_eq!(invalid.status.code(), Some(2));
}

const SWEEP: &str = r#"
experiment.kind = "sweep"
experiment.t_final = 0.05
model.N = 1
model.b = 0.5
model.alpha = 1.0
model.a = 0.1
grid.points = 64
grid.half_width = 12.0
propagator.dt0 = 0.01
data.kind = "gaussian"
data.width = 1.0
checks.enabled = ["mass_law"]
sweep.axis = "a"
sweep.base = "simulate"
"#;

#[test]
fn empty_sweep_gives_an_empty_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = dinls(&["sweep"], &format!("{SWEEP}sweep.values = []\n"), dir.path());
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(read(dir.path(), "sweep.csv"), format!("{TABLE_HEADER}\n"));
}

#[test]
fn sweep_records_failures_and_keeps_going() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!("{SWEEP}sweep.axis = \"b\"\nsweep.values = [0.2, 3.0, 0.4]\n").replace("sweep.axis = \"a\"\n", "");
    let out = dinls(&["sweep"], &cfg, dir.path());
    assert_eq!(out.status.code(), Some(1));
    let table = read(dir.path(), "sweep.csv");
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("0.2,completed,") && lines[1].ends_with(",true"));
    assert!(lines[2].starts_with("3.0,error,") && lines[2].ends_with(",false"));
    assert!(lines[3].starts_with("0.4,completed,") && lines[3].ends_with(",true"));
}

#[test]
fn sweep_table_is_independent_of_jobs() {
    let cfg = format!("{SWEEP}sweep.values = [0.0, 0.5, 1.0, 1.5, 2.0]\n");
    let (d1, d3) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let o1 = dinls(&["sweep", "--jobs", "1"], &cfg, d1.path());
    let o3 = dinls(&["sweep", "--jobs", "3"], &cfg, d3.path());
    assert_eq!(o1.status.code(), Some(0));
    assert_eq!(o3.status.code(), Some(0));
    for name in ["sweep.csv", "summary.json"] {
        assert_eq!(read(d1.path(), name), read(d3.path(), name), "{name}");
    }
}

#[test]
fn thread_cap_is_validated() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.toml");
    std::fs::write(&path, SMALL).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_dinls"))
        .args(["simulate", "--config"])
        .arg(&path)
        .arg("--out")
        .arg(dir.path())
        .env("DINLS_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("DINLS_THREADS"));
}

#[test]
fn reference_configs_parse_and_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let cfg = ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        cfg.validate().unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        n += 1;
    }
    assert!(n >= 10);
}

fn data_strategy() -> impl Strategy<Value = String> {
    prop_oneof![
        (0.3f64..3.0, 0.1f64..4.0, -2.0f64..2.0)
            .prop_map(|(w, a, c)| format!("data.kind = \"gaussian\"\ndata.width = {w:?}\ndata.amplitude = {a:?}\ndata.chirp = {c:?}\n")),
        (0.3f64..3.0, 0.5f64..2.0)
            .prop_map(|(w, f)| format!("data.kind = \"scaled_lambda\"\ndata.width = {w:?}\ndata.factor = {f:?}\n")),
        (0.3f64..3.0, 0.1f64..2.0)
            .prop_map(|(w, v)| format!("data.kind = \"sigma_zero_energy\"\ndata.width = {w:?}\ndata.target_variance = {v:?}\n")),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn flat_config_round_trips(
        dim in 1usize..=3,
        b in 0.0f64..1.0,
        alpha in 0.1f64..4.0,
        mu in -2.0f64..2.0,
        a in 0.0f64..3.0,
        dt0 in 1e-5f64..0.1,
        tol in prop::option::of(1e-8f64..1e-2),
        points in prop::sample::select(vec![64usize, 128, 256]),
        data in data_strategy(),
        enabled in prop::sample::subsequence(vec!["mass_law", "h_drift", "domain"], 0..=3),
    ) {
        let tol = tol.map_or("inf".to_string(), |t| format!("{t:?}"));
        let enabled: Vec<String> = enabled.iter().map(|e| format!("\"{e}\"")).collect();
        let text = format!(
            "experiment.kind = \"simulate\"\nmodel.N = {dim}\nmodel.b = {b:?}\nmodel.alpha = {alpha:?}\n\
             model.mu = {mu:?}\nmodel.a = {a:?}\ngrid.points = {points}\npropagator.dt0 = {dt0:?}\n\
             propagator.boundary_tol = {tol}\nchecks.enabled = [{}]\n{data}",
            enabled.join(", ")
        );
        let cfg = ExperimentConfig::parse(&text).unwrap();
        let flat = cfg.to_flat_string();
        let back = ExperimentConfig::parse(&flat).unwrap();
        prop_assert_eq!(&back, &cfg);
        prop_assert_eq!(back.to_flat_string(), flat);
    }
}
