use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use regvi_cli::config::{FixtureConfig, OutputConfig, ProblemKind, RunConfig};
use regvi_cli::{run_config, CliError, RunOptions, RunSummary};
use regvi_core::fixtures::CASE_NAMES;

#[derive(Parser)]
#[command(name = "regvi", version, about = "Finite-volume solvers for obstacle, friction and game problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the problem described by a TOML config.
    Solve {
        config: PathBuf,
        /// Write the grid with boundary labels to mesh.json.
        #[arg(long)]
        dump_mesh: bool,
        /// Write the system matrix to matrix.mtx.
        #[arg(long)]
        dump_matrix: bool,
        /// Output directory, overriding the config.
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Analytic benchmark problems.
    Fixtures {
        #[command(subcommand)]
        action: FixtureAction,
    },
}

#[derive(Subcommand)]
enum FixtureAction {
    /// List the available cases.
    List,
    /// Run a convergence study.
    Run {
        name: String,
        /// Comma-separated refinement levels.
        #[arg(long, value_delimiter = ',')]
        levels: Option<Vec<usize>>,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
}

fn print_summary(summary: &RunSummary) {
    println!("status: {:?}", summary.status);
    for f in &summary.files {
        println!("wrote {}", f.display());
    }
}

fn print_study(summary: &RunSummary) {
    let Some(study) = summary.report.get("results") else { return };
    println!("{:>6} {:>12} {:>10} {:>14}", "m", "h", "unknowns", "error");
    for l in study["levels"].as_array().into_iter().flatten() {
        println!(
            "{:>6} {:>12.6e} {:>10} {:>14.6e}",
            l["m"],
            l["h"].as_f64().unwrap_or(f64::NAN),
            l["unknowns"],
            l["error"].as_f64().unwrap_or(f64::NAN)
        );
    }
    println!(
        "order {:.4}, expected window {}",
        study["order"].as_f64().unwrap_or(f64::NAN),
        study["window"]
    );
}

fn run(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Solve { config, dump_mesh, dump_matrix, output } => {
            let opts = RunOptions { dump_mesh, dump_matrix, output_dir: output };
            let cfg = RunConfig::from_file(&config)?;
            println!("{}", toml::to_string(&cfg).unwrap_or_default());
            let summary = run_config(cfg, &opts)?;
            if summary.report["problem"] == "fixture" {
                print_study(&summary);
            }
            print_summary(&summary);
            Ok(summary.status.exit_code())
        }
        Command::Fixtures { action: FixtureAction::List } => {
            for name in CASE_NAMES {
                println!("{name}");
            }
            Ok(0)
        }
        Command::Fixtures { action: FixtureAction::Run { name, levels, output } } => {
            let cfg = RunConfig {
                fixture: Some(FixtureConfig { name: name.clone(), levels }),
                output: OutputConfig { directory: format!("output/{name}"), ..OutputConfig::default() },
                ..RunConfig::blank(ProblemKind::Fixture)
            }
            .effective()?;
            let summary = run_config(cfg, &RunOptions { output_dir: output, ..RunOptions::default() })?;
            print_study(&summary);
            print_summary(&summary);
            Ok(summary.status.exit_code())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
