use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use meanflow::config::{parse_pi_multiple, ExperimentConfig};
use meanflow::experiments::{self, EXIT_CONTRARY, EXIT_ERROR, EXIT_EXPECTED};
use meanflow::generators::build_problem;
use meanflow::output::BubbleReportJson;
use meanflow_core::concentration::extract_bubbles;
use meanflow_core::grid::{read_snapshot, Snapshot};
use meanflow_core::{ExtractConfig, Field64, Problem64};

#[derive(Parser)]
#[command(name = "meanflow", version, about = "Mean-field gradient flow on the flat torus")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config.
    Run { config: PathBuf },
    /// Bubble report of a snapshot, printed as JSON.
    Analyze {
        snapshot: PathBuf,
        /// Accepts a number or a multiple of pi such as `12pi`.
        #[arg(long, value_parser = parse_rho)]
        rho: f64,
        /// Snapshot of `h`, the negated time derivative at the same state.
        #[arg(long)]
        h: Option<PathBuf>,
        /// Take the background `Q` from this config instead of the constant `ρ/|M|`.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Newton solve of the stationary equation.
    Stationary { config: PathBuf },
    /// Perturbation-response probe at the configured final time.
    ProbeContinuity { config: PathBuf },
    /// Run several configs in parallel, each into its own output directory.
    Batch {
        configs: Vec<PathBuf>,
        #[arg(long, short, default_value_t = 4)]
        jobs: usize,
    },
}

fn parse_rho(s: &str) -> Result<f64, String> {
    s.parse::<f64>()
        .ok()
        .or_else(|| parse_pi_multiple(s))
        .ok_or_else(|| format!("not a number: {s}"))
}

fn read_snap(path: &PathBuf) -> anyhow::Result<Snapshot> {
    let file = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(read_snapshot(std::io::BufReader::new(file))?)
}

fn analyze(snapshot: &PathBuf, rho: f64, h: Option<&PathBuf>, config: Option<&PathBuf>) -> anyhow::Result<i32> {
    let v: Field64 = read_snap(snapshot)?.to_field()?;
    let (p, extract) = match config {
        Some(path) => {
            let mut cfg = ExperimentConfig::load(path)?;
            cfg.rho = rho;
            cfg.grid_n = v.grid().n();
            cfg.side_length = v.grid().side_length();
            let setup = build_problem(&cfg)?;
            (setup.problem, cfg.extract.to_core())
        }
        None => (Problem64::constant(v.grid(), rho)?, ExtractConfig::default()),
    };
    let h = match h {
        Some(path) => Some(read_snap(path)?.to_field_on(v.grid())?),
        None => None,
    };
    let report = extract_bubbles(&v, &p, h.as_ref(), &extract)?;
    println!("{}", serde_json::to_string_pretty(&BubbleReportJson::from(&report))?);
    Ok(if report.bubbles.is_empty() { EXIT_CONTRARY } else { EXIT_EXPECTED })
}

fn dispatch(cli: Cli) -> anyhow::Result<i32> {
    match cli.command {
        Command::Run { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let report = experiments::run_experiment(&cfg)?;
            println!("{}", serde_json::to_string_pretty(&report.verdict)?);
            Ok(report.exit_code())
        }
        Command::Analyze { snapshot, rho, h, config } => analyze(&snapshot, rho, h.as_ref(), config.as_ref()),
        Command::Stationary { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let report = experiments::run_stationary(&cfg)?;
            println!("{}", serde_json::to_string_pretty(&report.json)?);
            Ok(if report.converged { EXIT_EXPECTED } else { EXIT_CONTRARY })
        }
        Command::ProbeContinuity { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let report = experiments::run_continuity_probe(&cfg)?;
            println!("{}", serde_json::to_string_pretty(&report.verdict)?);
            Ok(report.exit_code())
        }
        Command::Batch { configs, jobs } => {
            let results = experiments::run_batch(&configs, jobs);
            let mut worst = EXIT_EXPECTED;
            for (path, (code, summary)) in configs.iter().zip(&results) {
                println!("{}\t{code}\t{summary}", path.display());
                worst = match (worst, *code) {
                    (EXIT_ERROR, _) | (_, EXIT_ERROR) => EXIT_ERROR,
                    (EXIT_CONTRARY, _) | (_, EXIT_CONTRARY) => EXIT_CONTRARY,
                    _ => EXIT_EXPECTED,
                };
            }
            Ok(worst)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR as u8)
        }
    }
}
