//! `qfd`: run scenario files, verification suites, and inspect run outputs.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

mod config;
mod error;
mod manifest;
mod run;

use config::{CheckBlock, Mode, ScenarioConfig};
use error::CliError;
use manifest::Manifest;

#[derive(Parser)]
#[command(name = "qfd", version, about = "Quantum fluid dynamics scenarios and checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file, or repeat the run recorded in a manifest.json.
    Run {
        config: PathBuf,
        /// Write here instead of the configured output_dir.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a verification suite (or `all`). Verdicts go to stdout as CSV
    /// unless --out is given.
    Check {
        suite: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Summarize a run directory and verify its checksums.
    Info { dir: PathBuf },
}

/// Outcome of a command that did not error.
enum Status {
    Ok,
    /// Finished, but some verdict or checksum failed.
    Failed,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = init_threads().and_then(|()| match cli.command {
        Command::Run { config, out } => cmd_run(&config, out),
        Command::Check { suite, out } => cmd_check(suite, out),
        Command::Info { dir } => cmd_info(&dir),
    });
    match result {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::Failed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("qfd: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

/// QFD_THREADS sizes the worker pool; results do not depend on it.
fn init_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("QFD_THREADS") else {
        return Ok(());
    };
    let n: usize = v.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| CliError::Validation {
        field: "QFD_THREADS".into(),
        reason: format!("must be a positive integer, got `{v}`"),
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Numerical(e.to_string()))
}

fn load_scenario(path: &Path) -> Result<(String, ScenarioConfig), CliError> {
    if path.extension().is_some_and(|e| e == "json") {
        let m = Manifest::read(path)?;
        let cfg = config::parse(&m.config_toml)?;
        return Ok((m.config_toml, cfg));
    }
    config::load(path)
}

fn cmd_run(path: &Path, out: Option<PathBuf>) -> Result<Status, CliError> {
    let (text, mut cfg) = load_scenario(path)?;
    if let Some(o) = out {
        cfg.output_dir = o;
    }
    execute(text, cfg)
}

fn cmd_check(suite: String, out: Option<PathBuf>) -> Result<Status, CliError> {
    let cfg = ScenarioConfig {
        mode: Mode::Check,
        output_dir: out.clone().unwrap_or_else(|| PathBuf::from(".")),
        grid: None,
        potential: None,
        state: Vec::new(),
        propagator: None,
        trajectories: None,
        interaction: None,
        twobody: None,
        functional: None,
        scf: None,
        check: Some(CheckBlock { suite: suite.clone() }),
    };
    if out.is_some() {
        let text = format!("mode = \"check\"\noutput_dir = {:?}\n\n[check]\nsuite = {suite:?}\n", cfg.output_dir.display().to_string());
        return execute(text, cfg);
    }
    cfg.validate()?;
    let verdicts = qfd_core::checks::run(&suite)?;
    let stdout = std::io::stdout();
    qfd_core::checks::write_verdicts_csv(&verdicts, stdout.lock())?;
    for v in &verdicts {
        eprintln!("{v}");
    }
    Ok(if qfd_core::checks::all_pass(&verdicts) { Status::Ok } else { Status::Failed })
}

fn execute(text: String, cfg: ScenarioConfig) -> Result<Status, CliError> {
    cfg.validate()?;
    let out = cfg.output_dir.clone();
    run::prepare_output(&out)?;
    let start = Instant::now();
    let applied = run::execute(&cfg, &out)?;
    let wall = start.elapsed().as_secs_f64();
    let m = Manifest {
        versions: manifest::versions(),
        mode: cfg.mode.as_str().to_string(),
        config_toml: text,
        config: cfg,
        applied_defaults: applied.defaults,
        seeds: applied.seeds,
        threads: rayon::current_num_threads(),
        wall_clock_seconds: wall,
        files: manifest::scan(&out)?,
    };
    m.write(&out)?;
    eprintln!("wrote {} files to {} in {wall:.2} s", m.files.len() + 1, out.display());
    Ok(if applied.failed_checks > 0 { Status::Failed } else { Status::Ok })
}

fn cmd_info(dir: &Path) -> Result<Status, CliError> {
    let path = dir.join(manifest::FILE_NAME);
    if !path.exists() {
        return Err(CliError::Io(format!("{}: no manifest", dir.display())));
    }
    let m = Manifest::read(&path)?;
    println!("mode: {}", m.mode);
    for (k, v) in &m.versions {
        println!("version {k}: {v}");
    }
    println!("threads: {}", m.threads);
    println!("wall clock: {:.3} s", m.wall_clock_seconds);
    for (k, v) in &m.seeds {
        println!("seed {k}: {v}");
    }
    for (k, v) in &m.applied_defaults {
        println!("default {k}: {v}");
    }
    println!("files: {}", m.files.len());
    let bad = m.verify(dir);
    if bad.is_empty() {
        println!("checksums: ok");
        Ok(Status::Ok)
    } else {
        for b in &bad {
            println!("checksum failure: {b}");
        }
        Ok(Status::Failed)
    }
}
