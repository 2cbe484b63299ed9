use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use airy_flow::harness::{self, HarnessError, ParsedConfig, Preset, RunConfig, RunSummary};

#[derive(Parser)]
#[command(
    name = "airy-flow",
    version,
    about = "Airy flow of closed curves in the theta-L formulation"
)]
struct Cli {
    /// Output directory (overrides the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Concurrent runs in convergence and filter studies (0: all cores).
    #[arg(long, global = true, default_value_t = 0)]
    parallel: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment from a TOML config.
    Run { config: PathBuf },
    /// Run a three-level convergence study from a TOML config with a [convergence] section.
    Converge { config: PathBuf },
    /// Run the filter comparison on the config's shape and resolution.
    Filters { config: PathBuf },
    /// Run a named preset, optionally with key=value overrides.
    Preset {
        name: Option<String>,
        overrides: Vec<String>,
        /// List presets and exit.
        #[arg(long)]
        list: bool,
    },
}

fn report_run(summary: &RunSummary, cfg: &RunConfig) {
    println!(
        "{}: {} steps in {:.2}s, max |xi| = {:.6e}, output in {}",
        summary.status.name(),
        summary.steps,
        summary.wall_time,
        summary.max_xi,
        cfg.output_dir.display()
    );
}

fn run(cfg: &RunConfig) -> Result<(), HarnessError> {
    let summary = harness::run_experiment(cfg)?;
    report_run(&summary, cfg);
    Ok(())
}

fn converge(study: &harness::ConvergenceStudyConfig, parallel: usize) -> Result<(), HarnessError> {
    let row = harness::run_convergence_study(study, parallel)?;
    println!("{}", harness::CONVERGENCE_HEADER);
    println!("{}", row.csv());
    Ok(())
}

fn filters(cfg: &RunConfig, parallel: usize) -> Result<(), HarnessError> {
    let runs = harness::run_filter_study(cfg, parallel)?;
    println!(
        "{:<8} {:<10} {:>10} {:>14} {:>14}",
        "scheme", "status", "t_end", "max|xi|", "tail"
    );
    for r in &runs {
        println!(
            "{:<8} {:<10} {:>10.4} {:>14.6e} {:>14.6e}",
            r.label,
            r.status.name(),
            r.final_time,
            r.max_xi(),
            r.tail_max
        );
    }
    println!("output in {}", cfg.output_dir.display());
    Ok(())
}

fn execute(cli: Cli) -> Result<(), HarnessError> {
    let out = cli.out;
    let with_out = |mut cfg: RunConfig| {
        if let Some(dir) = &out {
            cfg.output_dir = dir.clone();
        }
        cfg
    };
    match cli.command {
        Command::Run { config } => match harness::load_config(&config)? {
            ParsedConfig::Run(cfg) => run(&with_out(cfg)),
            ParsedConfig::Convergence(_) => Err(HarnessError::ValidationError(
                "config has a [convergence] section; use `converge`".into(),
            )),
        },
        Command::Converge { config } => match harness::load_config(&config)? {
            ParsedConfig::Convergence(mut study) => {
                study.base = with_out(study.base);
                converge(&study, cli.parallel)
            }
            ParsedConfig::Run(_) => Err(HarnessError::ValidationError(
                "`converge` needs a [convergence] section".into(),
            )),
        },
        Command::Filters { config } => match harness::load_config(&config)? {
            ParsedConfig::Run(cfg) => filters(&with_out(cfg), cli.parallel),
            ParsedConfig::Convergence(study) => filters(&with_out(study.base), cli.parallel),
        },
        Command::Preset { name, overrides, list } => {
            let Some(name) = name.filter(|_| !list) else {
                for p in harness::PRESETS {
                    let tag = if p.extended { " [extended]" } else { "" };
                    println!("{:<18} {}{tag}", p.name, p.description);
                }
                return Ok(());
            };
            let mut preset = harness::preset(&name)?;
            harness::apply_overrides(&mut preset, &overrides)?;
            match preset {
                Preset::Run(cfg) => run(&with_out(cfg)),
                Preset::Filters(cfg) => filters(&with_out(cfg), cli.parallel),
                Preset::Convergence(mut study) => {
                    study.base = with_out(study.base);
                    converge(&study, cli.parallel)
                }
            }
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                HarnessError::ParseError { .. } | HarnessError::ValidationError(_) | HarnessError::UnknownPreset(_) => {
                    ExitCode::from(2)
                }
                _ => ExitCode::FAILURE,
            }
        }
    }
}
