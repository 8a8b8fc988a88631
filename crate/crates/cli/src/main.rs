//! `pilotsim` command-line runner.
//!
//! Exit codes: 0 success, 1 configuration or usage error, 2 the closed loop
//! diverged (run) or a verification check failed (verify).

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use pilotsim::diagnostics::{compute_metrics, RunMetrics};
use pilotsim::scenario::{builtin_747, load_config, simulate, sweep, ScenarioConfig};
use pilotsim::verify::{run_checks, VerifyOptions};
use pilotsim::Error;
use sha2::{Digest, Sha256};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "pilotsim", version, about = "Adaptive pilot / MRAC simulation runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scenario and write run.csv, metrics.csv and manifest.json.
    Run(Common),
    /// Run the delay x learning-rate-scale grid and write sweep.csv.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Worker threads (default: all logical cores).
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Run the acceptance checks and print a pass/fail table.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Run a single check (e.g. eigenvalues, lyapunov, predictor).
        #[arg(long)]
        only: Option<String>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Print the scenario JSON (builtin unless --scenario is given) after overrides.
    EmitConfig(Common),
}

#[derive(Args, Clone)]
struct Common {
    /// Scenario JSON; the built-in 747 case when omitted.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Output directory.
    #[arg(long, env = "ADAPTIVE_SIM_OUT", default_value = "out")]
    out: PathBuf,
    /// Dotted-path override, e.g. inner.gamma_x=0.01. Repeatable; last wins.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

enum Failure {
    Config(anyhow::Error),
    Diverged(anyhow::Error),
    Checks,
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Config(e)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(c) => cmd_run(&c),
        Command::Sweep { common, workers } => cmd_sweep(&common, workers),
        Command::Verify { common, only, workers } => cmd_verify(&common, only.as_deref(), workers),
        Command::EmitConfig(c) => cmd_emit(&c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Diverged(e)) => {
            eprintln!("diverged: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Checks) => ExitCode::from(2),
    }
}

fn load(c: &Common) -> anyhow::Result<ScenarioConfig> {
    let base = match &c.scenario {
        Some(p) => load_config(p).with_context(|| format!("loading {}", p.display()))?,
        None => builtin_747(),
    };
    let cfg = base.with_overrides(&c.overrides).context("applying overrides")?;
    Ok(cfg)
}

/// Writes `contents` to `dir/name` through a temporary file in the same directory.
fn write_atomic(dir: &Path, name: &str, contents: &[u8]) -> anyhow::Result<PathBuf> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let target = dir.join(name);
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(&target)
        .with_context(|| format!("writing {}", target.display()))?;
    Ok(target)
}

fn config_hash(cfg: &ScenarioConfig) -> String {
    let digest = Sha256::digest(cfg.to_json().as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn manifest(cfg: &ScenarioConfig, status: &str, extra: serde_json::Value) -> serde_json::Value {
    serde_json::json!({
        "scenario": cfg.name,
        "config_sha256": config_hash(cfg),
        "config": cfg.to_value(),
        "status": status,
        "pilotsim_version": env!("CARGO_PKG_VERSION"),
        "details": extra,
    })
}

fn cmd_run(c: &Common) -> Result<(), Failure> {
    let cfg = load(c)?;
    let sc = cfg.validate().context("validating scenario")?;
    let outcome = simulate(&sc);
    let log = &outcome.log;
    let csv = write_atomic(&c.out, "run.csv", log.to_csv().as_bytes())?;
    println!("wrote {} ({} samples)", csv.display(), log.len());

    if let Some(e) = &outcome.error {
        let m = manifest(&cfg, "diverged", serde_json::json!({ "error": e.to_string() }));
        write_atomic(&c.out, "manifest.json", serde_json::to_string_pretty(&m).unwrap().as_bytes())?;
        let err = anyhow::Error::new(e.clone());
        return Err(if e.is_divergence() { Failure::Diverged(err) } else { Failure::Config(err) });
    }

    let end = log.time(log.len() - 1);
    let (ws, we) = cfg.sim.metrics_window.map_or((0.0, end), |w| (w[0], w[1].min(end)));
    let metrics = compute_metrics(log, ws, we).context("computing metrics")?;
    let body = format!("{}\n{}\n", RunMetrics::CSV_HEADER, metrics.csv_row());
    write_atomic(&c.out, "metrics.csv", body.as_bytes())?;
    let m = manifest(&cfg, "ok", serde_json::to_value(metrics).unwrap());
    write_atomic(&c.out, "manifest.json", serde_json::to_string_pretty(&m).unwrap().as_bytes())?;
    println!(
        "rms tracking error {:.4} crad, saturation duty cycle {:.4}, peak |e_y| {:.4} over [{ws}, {we}] s",
        metrics.rms_tracking_error, metrics.saturation_duty_cycle, metrics.peak_e_y
    );
    Ok(())
}

fn cmd_sweep(c: &Common, workers: Option<usize>) -> Result<(), Failure> {
    let cfg = load(c)?;
    cfg.validate().context("validating scenario")?;
    let table = sweep(&cfg, &cfg.sweep.tau, &cfg.sweep.scale, workers).context("sweep")?;
    let path = write_atomic(&c.out, "sweep.csv", table.to_csv().as_bytes())?;
    let bounded = table.rows.iter().filter(|r| r.bounded).count();
    println!("wrote {} ({} runs, {bounded} bounded)", path.display(), table.rows.len());
    let m = manifest(&cfg, "ok", serde_json::json!({ "runs": table.rows.len(), "bounded": bounded }));
    write_atomic(&c.out, "manifest.json", serde_json::to_string_pretty(&m).unwrap().as_bytes())?;
    Ok(())
}

fn cmd_verify(c: &Common, only: Option<&str>, workers: Option<usize>) -> Result<(), Failure> {
    let cfg = load(c)?;
    let opts = VerifyOptions {
        workers: workers.or(VerifyOptions::default().workers),
    };
    let reports = run_checks(&cfg, only, &opts).map_err(|e: Error| Failure::Config(e.into()))?;
    for r in &reports {
        print!("{r}");
    }
    let failed = reports.iter().filter(|r| !r.passed()).count();
    println!("{} of {} checks passed", reports.len() - failed, reports.len());
    if failed > 0 {
        Err(Failure::Checks)
    } else {
        Ok(())
    }
}

fn cmd_emit(c: &Common) -> Result<(), Failure> {
    let cfg = load(c)?;
    println!("{}", cfg.to_json());
    Ok(())
}
