use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dinls_cli::{run_experiment_with_jobs, Artifacts, ExperimentConfig, Kind};

#[derive(Parser)]
#[command(name = "dinls", version, about = "Damped inhomogeneous NLS simulator and verification runs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Propagate and check conservation and dissipation laws.
    Simulate(Opts),
    /// Compare the declared blow-up time with the closed-form upper bound.
    BlowupVerify(Opts),
    /// Compare the run with the life-span lower bound.
    LifespanVerify(Opts),
    /// Build the scattering state and fit the decay rate.
    ScatterVerify(Opts),
    /// Solve the radial ground-state equation.
    Groundstate(Opts),
    /// Run one experiment per value of a parameter.
    Sweep(Opts),
}

#[derive(Args)]
struct Opts {
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long, value_name = "DIR", default_value = ".")]
    out: PathBuf,
    /// Concurrent sweep entries.
    #[arg(long, value_name = "N", default_value_t = 1)]
    jobs: usize,
    /// Fail on any warning.
    #[arg(long)]
    strict: bool,
}

impl Command {
    fn split(self) -> (Kind, Opts) {
        match self {
            Command::Simulate(o) => (Kind::Simulate, o),
            Command::BlowupVerify(o) => (Kind::BlowupVerify, o),
            Command::LifespanVerify(o) => (Kind::LifespanVerify, o),
            Command::ScatterVerify(o) => (Kind::ScatterVerify, o),
            Command::Groundstate(o) => (Kind::Groundstate, o),
            Command::Sweep(o) => (Kind::Sweep, o),
        }
    }
}

fn write(dir: &Path, name: &str, text: &str) -> Result<(), String> {
    let path = dir.join(name);
    std::fs::write(&path, text).map_err(|e| format!("cannot write {}: {e}", path.display()))
}

fn emit(dir: &Path, cfg: &ExperimentConfig, art: &Artifacts) -> Result<(), String> {
    std::fs::create_dir_all(dir).map_err(|e| format!("cannot create {}: {e}", dir.display()))?;
    let out = &cfg.output;
    if let Some(csv) = &art.csv {
        write(dir, &out.csv, csv)?;
    }
    if let Some(profile) = &art.profile {
        write(dir, &out.profile, profile)?;
    }
    if let Some(table) = &art.table {
        write(dir, &out.table, table)?;
    }
    write(dir, &out.json, &art.summary.to_json())
}

fn init_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("DINLS_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .map_err(|_| format!("DINLS_THREADS must be a positive integer, got `{v}`"))?;
    if n == 0 {
        return Err("DINLS_THREADS must be a positive integer, got `0`".into());
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn real_main() -> Result<bool, String> {
    let cli = Cli::parse();
    init_threads()?;
    let (kind, opts) = cli.command.split();
    let cfg = ExperimentConfig::load(&opts.config).map_err(|e| format!("{}: {e}", opts.config.display()))?;
    if cfg.experiment.kind != kind {
        return Err(format!(
            "{} sets experiment.kind = \"{}\" but the subcommand is {}",
            opts.config.display(),
            cfg.experiment.kind.name(),
            kind.name()
        ));
    }
    if opts.jobs == 0 {
        return Err("--jobs must be at least 1".into());
    }
    let art = run_experiment_with_jobs(&cfg, opts.jobs).map_err(|e| e.to_string())?;
    emit(&opts.out, &cfg, &art)?;
    let s = &art.summary;
    for c in &s.checks {
        println!("{} {}: {:?} (limit {:?}) {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.value, c.limit, c.detail);
    }
    for w in &s.warnings {
        eprintln!("warning: {w}");
    }
    Ok(s.pass && !(opts.strict && !s.warnings.is_empty()))
}

fn main() -> ExitCode {
    match real_main() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
