//! `embedopt` command-line runner.
//!
//! Exit codes: 0 success, 2 validation or parse error, 3 divergence, 4 I/O.

mod output;
mod plots;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use embedopt::config::{bundled, Overrides, ScenarioFile, BUNDLED_NAMES};
use embedopt::control::Variant;
use embedopt::sim::{metrics, pe_monitor, run};
use embedopt::sweep::{run_cell, table_csv, CellOutcome, SweepParam};
use rayon::prelude::*;

use output::write_atomic;

/// Band for the `time_to_band` metric.
const BAND: f64 = 0.05;

#[derive(Parser)]
#[command(
    name = "embedopt",
    version,
    about = "Distributed optimization with embedded adaptive control"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario and write trajectory, metrics and PE report.
    Run {
        #[command(flatten)]
        common: Common,
        /// Also write SVG figures.
        #[arg(long)]
        plots: bool,
    },
    /// Run a scenario once per value of one parameter.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// epsilon, sigma, lambda_gain or step.
        #[arg(long)]
        param: SweepParam,
        /// Comma-separated values; may be empty.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        values: Vec<f64>,
    },
    /// Print the global optimum of the scenario's costs.
    Optimum {
        #[arg(long)]
        scenario: String,
    },
    /// Check a scenario without running it.
    Validate {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    /// Bundled scenario name or path to a scenario file.
    #[arg(long)]
    scenario: String,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    variant: Option<Variant>,
    #[arg(long, allow_negative_numbers = true)]
    epsilon: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    sigma: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    lambda_gain: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    step: Option<f64>,
    #[arg(long = "t-end", allow_negative_numbers = true)]
    t_end: Option<f64>,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            variant: self.variant,
            epsilon: self.epsilon,
            sigma: self.sigma,
            lambda_gain: self.lambda_gain,
            step: self.step,
            t_end: self.t_end,
        }
    }
}

fn load(spec: &str) -> Result<ScenarioFile> {
    let path = Path::new(spec);
    let text = if path.exists() {
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?
    } else if let Some(text) = bundled(spec) {
        text.to_string()
    } else {
        return Err(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!(
                "`{spec}` is neither a file nor a bundled scenario ({})",
                BUNDLED_NAMES.join(", ")
            ),
        )
        .into());
    };
    Ok(ScenarioFile::parse(&text)?)
}

fn cmd_run(common: &Common, plots: bool) -> Result<()> {
    let mut file = load(&common.scenario)?;
    file.apply(&common.overrides());
    let scenario = file.build()?;
    for w in scenario.warnings() {
        eprintln!("warning: {w}");
    }
    let traj = run(&scenario)?;
    let out = &common.out;

    let mut csv = Vec::new();
    traj.write_csv(&mut csv)?;
    write_atomic(&out.join("trajectory.csv"), &csv)?;

    let summary = metrics(&traj, BAND);
    write_atomic(&out.join("metrics.txt"), summary.to_key_values().as_bytes())?;

    let pe_text = match pe_monitor(&traj, &scenario) {
        Ok(report) => report.to_text(),
        Err(e) => format!("skipped = {e}\n"),
    };
    write_atomic(&out.join("pe_report.txt"), pe_text.as_bytes())?;

    let mut written = vec![
        "trajectory.csv".to_string(),
        "metrics.txt".into(),
        "pe_report.txt".into(),
    ];
    if plots {
        written.extend(plots::write_plots(out, &traj)?);
    }
    println!("y* = {:.6}", summary.y_star);
    for (i, y) in summary.final_outputs.iter().enumerate() {
        println!("y_{}({}) = {y:.6}", i + 1, summary.t_final);
    }
    println!(
        "max gap = {:.3e}, consensus spread = {:.3e}",
        summary.max_final_gap, summary.consensus_spread
    );
    println!("wrote {} to {}", written.join(", "), out.display());
    Ok(())
}

fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("SIM_THREADS") {
        let n: usize = v.parse().ok().filter(|&n| n > 0).ok_or_else(|| {
            embedopt::Error::Invalid(format!("SIM_THREADS must be a positive integer, got `{v}`"))
        })?;
        builder = builder.num_threads(n);
    }
    builder.build().context("starting worker threads")
}

fn cmd_sweep(common: &Common, param: SweepParam, values: &[f64]) -> Result<()> {
    let base = load(&common.scenario)?;
    let overrides = common.overrides();
    let out = &common.out;
    let pool = thread_pool()?;
    let cells = pool.install(|| {
        values
            .par_iter()
            .enumerate()
            .map(|(k, &v)| {
                let cell = run_cell(&base, &overrides, param, v);
                let text = match &cell.outcome {
                    CellOutcome::Ok(s) => s.to_key_values(),
                    CellOutcome::Failed(msg) => format!("failed = {msg}\n"),
                };
                let body = format!("{param} = {v}\n{text}");
                write_atomic(&out.join(format!("cell_{:03}.txt", k + 1)), body.as_bytes())
                    .map(|_| cell)
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let table = table_csv(param, &cells)?;
    write_atomic(&out.join("sweep.csv"), table.as_bytes())?;
    print!("{table}");
    let failed = cells.iter().filter(|c| c.summary().is_none()).count();
    if failed > 0 {
        eprintln!("{failed} of {} cells failed", cells.len());
    }
    Ok(())
}

fn cmd_optimum(spec: &str) -> Result<()> {
    let file = load(spec)?;
    let costs = file.cost_set()?;
    let bracket = (file.optimum.bracket[0], file.optimum.bracket[1]);
    let y = costs.minimize_global(bracket, 1e-10)?;
    println!("y* = {y:.2} ({y:.10})");
    for (i, c) in costs.iter().enumerate() {
        println!("grad f_{}(y*) = {:.6}", i + 1, c.gradient(y));
    }
    println!("sum of gradients = {:.3e}", costs.global_gradient(y));
    Ok(())
}

fn cmd_validate(common: &Common) -> Result<()> {
    let mut file = load(&common.scenario)?;
    file.apply(&common.overrides());
    let sc = file.build()?;
    println!(
        "ok: {} ({} agents, variant {}, t_end {}, step {})",
        sc.name,
        sc.n_agents(),
        file.controller.variant.as_str(),
        sc.integrator.t_end,
        sc.integrator.step
    );
    for w in sc.warnings() {
        println!("warning: {w}");
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<embedopt::Error>() {
            return match e {
                embedopt::Error::Io(_) | embedopt::Error::Csv(_) => 4,
                e if e.is_validation() => 2,
                _ => 3,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some()
            || cause.downcast_ref::<tempfile::PersistError>().is_some()
        {
            return 4;
        }
    }
    4
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { common, plots } => cmd_run(common, *plots),
        Command::Sweep {
            common,
            param,
            values,
        } => cmd_sweep(common, *param, values),
        Command::Optimum { scenario } => cmd_optimum(scenario),
        Command::Validate { common } => cmd_validate(common),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
