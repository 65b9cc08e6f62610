//! Experiment harness CLI: loads a key-value config, dispatches one of the
//! study subcommands, and writes CSV results plus a reproducing manifest
//! into the output directory.
//!
//! Exit codes: 0 success, 1 configuration error, 2 solver or runtime
//! failure.

mod config_file;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config_file::{parse_config, parse_config_text, render_manifest, RunConfig};
use mrdro::experiments::{
    run_out_of_sample, run_sensitivity, run_trust_study, write_comparison_csv, write_event_csv,
    write_sensitivity_csv, write_trajectory_csv, write_trust_summary_csv,
};
use mrdro::fusion::{fuse_marginals, sample_empirical, RngSeed};
use mrdro::models::{solve_dro, SupportPolyhedron};
use mrdro::trust::realized_loss;

#[derive(Parser)]
#[command(
    name = "mrdro",
    version,
    about = "Multi-reference distributionally robust allocation experiments"
)]
struct Cli {
    /// Key-value configuration file; omitted means baseline defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for CSV files and the run manifest.
    #[arg(long, global = true, default_value = "mrdro-out")]
    out: PathBuf,
    /// Override the configured seed list (repeatable).
    #[arg(long = "seed", global = true, value_name = "U64")]
    seeds: Vec<u64>,
    /// Suppress progress on standard output.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Solve one fused robust allocation for the first generated event.
    SolveOnce,
    /// Run the trust-update study and emit the trajectory.
    TrustStudy,
    /// Compare the fused model with single-source models out of sample.
    OosEval,
    /// Sweep budgets, event counts, and region counts.
    Sensitivity,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::SolveOnce => "solve-once",
            Command::TrustStudy => "trust-study",
            Command::OosEval => "oos-eval",
            Command::Sensitivity => "sensitivity",
        }
    }
}

enum CliError {
    Config(String),
    Runtime(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Runtime(m) => m,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mrdro: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let mut run_cfg = match &cli.config {
        Some(path) => parse_config(path).map_err(|e| CliError::Config(e.to_string()))?,
        None => parse_config_text("").expect("baseline defaults are valid"),
    };
    if !cli.seeds.is_empty() {
        run_cfg.experiment.seeds = cli.seeds.clone();
    }

    fs::create_dir_all(&cli.out)
        .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", cli.out.display())))?;

    let manifest = render_manifest(&run_cfg, cli.command.name(), &cli.out.display().to_string());
    write_file(&cli.out.join("manifest.txt"), manifest.as_bytes())?;

    match cli.command {
        Command::SolveOnce => solve_once(cli, &run_cfg),
        Command::TrustStudy => trust_study(cli, &run_cfg),
        Command::OosEval => oos_eval(cli, &run_cfg),
        Command::Sensitivity => sensitivity(cli, &run_cfg),
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes)
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

fn solve_once(cli: &Cli, run_cfg: &RunConfig) -> Result<(), CliError> {
    let cfg = &run_cfg.experiment;
    let event = mrdro::experiments::make_event(cfg, RngSeed(cfg.seeds[0]), 1);
    let trust = cfg.trust_star_matrix().map_err(runtime)?;
    let fused = fuse_marginals(&event.forecasts, &trust).map_err(runtime)?;
    let scen = sample_empirical(
        &fused,
        cfg.problem.num_samples,
        &cfg.problem.support_upper,
        event.seed,
    );
    let support = SupportPolyhedron::from_box(&cfg.problem.support_upper);
    let sol = solve_dro(&scen, &cfg.problem, &support).map_err(runtime)?;
    if sol.status != mrdro::lp::Status::Optimal {
        return Err(CliError::Runtime(format!(
            "solver finished with status {:?}",
            sol.status
        )));
    }
    let loss = realized_loss(&sol.allocation, &event.true_demand, &cfg.problem);

    let mut csv = String::from("event,objective,loss,time");
    for k in 0..cfg.problem.num_regions {
        csv.push_str(&format!(",x_{}", k + 1));
    }
    csv.push('\n');
    csv.push_str(&format!("1,{},{},{}", sol.objective, loss, sol.solve_time));
    for x in &sol.allocation {
        csv.push_str(&format!(",{x}"));
    }
    csv.push('\n');
    write_file(&cli.out.join("solution.csv"), csv.as_bytes())?;

    if !cli.quiet {
        println!(
            "allocation: {:?}\nobjective: {}\nrealized loss: {}",
            sol.allocation, sol.objective, loss
        );
    }
    Ok(())
}

fn trust_study(cli: &Cli, run_cfg: &RunConfig) -> Result<(), CliError> {
    let cfg = &run_cfg.experiment;
    let report = run_trust_study(cfg).map_err(runtime)?;
    let mut trajectory = Vec::new();
    write_trajectory_csv(&report.trajectory, &mut trajectory).map_err(runtime)?;
    write_file(&cli.out.join("trajectory.csv"), &trajectory)?;
    let mut summary = Vec::new();
    write_trust_summary_csv(cfg, &report, &mut summary).map_err(runtime)?;
    write_file(&cli.out.join("summary.csv"), &summary)?;
    if !cli.quiet {
        let stable = report
            .mean_stable_loss
            .map(|l| format!("{l:.2}"))
            .unwrap_or_else(|| "N/A".into());
        println!(
            "trust study: {} events, mean stable loss {stable}, solver time {:.1}s",
            cfg.num_events, report.solver_time
        );
        for source in 0..report.intervals.num_sources() {
            for region in 0..report.intervals.num_regions() {
                match report.intervals.get(source, region) {
                    Some((lo, hi)) => println!(
                        "  source {} region {}: [{lo:.3}, {hi:.3}]",
                        source + 1,
                        region + 1
                    ),
                    None => println!("  source {} region {}: N/A", source + 1, region + 1),
                }
            }
        }
    }
    Ok(())
}

fn oos_eval(cli: &Cli, run_cfg: &RunConfig) -> Result<(), CliError> {
    let cfg = &run_cfg.experiment;
    let trust = cfg.trust_star_matrix().map_err(runtime)?;
    let report = run_out_of_sample(&trust, cfg).map_err(runtime)?;
    let mut events = Vec::new();
    write_event_csv(&report.events, &mut events).map_err(runtime)?;
    write_file(&cli.out.join("events.csv"), &events)?;
    let mut summary = Vec::new();
    write_comparison_csv(&report.rows, &mut summary).map_err(runtime)?;
    write_file(&cli.out.join("summary.csv"), &summary)?;
    if !cli.quiet {
        for row in &report.rows {
            println!(
                "{:10} avg loss {:14.2}  solver time {:.2}s",
                row.method, row.avg_loss, row.total_time
            );
        }
    }
    Ok(())
}

fn sensitivity(cli: &Cli, run_cfg: &RunConfig) -> Result<(), CliError> {
    let cfg = &run_cfg.experiment;
    let sweeps = &run_cfg.sweeps;
    let report = run_sensitivity(
        cfg,
        &sweeps.budgets,
        &sweeps.event_counts,
        &sweeps.region_counts,
    )
    .map_err(runtime)?;
    let mut out = Vec::new();
    write_sensitivity_csv(&report, &mut out).map_err(runtime)?;
    write_file(&cli.out.join("sensitivity.csv"), &out)?;
    if !cli.quiet {
        for run in &report.budget_runs {
            println!("budget {}:", run.budget);
            for row in &run.rows {
                println!("  {:10} avg loss {:14.2}", row.method, row.avg_loss);
            }
        }
        for run in &report.region_runs {
            println!(
                "regions {}: wall {:.1}s solver {:.1}s",
                run.num_regions, run.wall_time, run.solver_time
            );
        }
    }
    Ok(())
}
