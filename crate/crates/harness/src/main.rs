use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use relaycast_harness::acceptance::{self, Scale};
use relaycast_harness::config::{ExperimentConfig, Method, Profile, Seeds};
use relaycast_harness::runner::{run_cell, Instance, ResultRecord};
use relaycast_harness::sweep::{sweep, write_outputs};
use relaycast_harness::HarnessError;

#[derive(Clone, Copy, ValueEnum)]
enum ProfileArg {
    Smoke,
    Desk,
    Full,
}

#[derive(Parser)]
#[command(name = "relaycast", version, about = "Relay multicast beamforming experiments")]
struct Cli {
    /// Experiment file (TOML); overrides --profile.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Built-in experiment used when no --config is given.
    #[arg(long, global = true, value_enum, default_value = "smoke")]
    profile: ProfileArg,
    /// Run a single channel seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a channel realization and print it as CSV.
    Generate {
        #[arg(long)]
        destinations: Option<usize>,
    },
    /// Solve one realization with one method and print the result as JSON.
    Solve {
        #[arg(long, value_parser = parse_method)]
        method: Method,
        #[arg(long)]
        destinations: Option<usize>,
        #[arg(long)]
        power_dbm: Option<f64>,
    },
    /// Run the configured sweep and write the result files.
    Sweep,
    /// Run the acceptance checks; exits non-zero if any fails.
    Verify {
        /// Reduced instance counts.
        #[arg(long)]
        quick: bool,
    },
}

fn parse_method(s: &str) -> Result<Method, String> {
    Method::parse(s).ok_or_else(|| {
        let names: Vec<&str> = Method::ALL.iter().map(|m| m.label()).collect();
        format!("unknown method '{s}', expected one of {}", names.join(", "))
    })
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, HarnessError> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::profile(match cli.profile {
            ProfileArg::Smoke => Profile::Smoke,
            ProfileArg::Desk => Profile::Desk,
            ProfileArg::Full => Profile::Full,
        }),
    };
    if let Some(s) = cli.seed {
        cfg.seeds = Seeds::List(vec![s]);
    }
    if let Some(o) = &cli.out {
        cfg.out_dir = o.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Serialize)]
struct Weights {
    w_re: Vec<f64>,
    w_im: Vec<f64>,
    a: f64,
    min_snr_db: f64,
}

#[derive(Serialize)]
struct SolveOutput<'a> {
    config_sha256: String,
    record: &'a ResultRecord,
    /// Physical-unit weights, absent for methods without relay weights.
    weights: Option<Weights>,
}

fn run(cli: &Cli) -> Result<bool, HarnessError> {
    let cfg = load_config(cli)?;
    let (m0, p0) = cfg.points().first().copied().unwrap_or((cfg.scenario.destination_count, cfg.budget.total_dbm));
    let seed = cfg.seeds.values().first().copied().unwrap_or(0);
    match &cli.command {
        Command::Generate { destinations } => {
            let ch = cfg.scenario.scenario(destinations.unwrap_or(m0)).generate(seed)?;
            print!("{}", ch.to_csv());
        }
        Command::Solve {
            method,
            destinations,
            power_dbm,
        } => {
            let inst = Instance::generate(&cfg, destinations.unwrap_or(m0), power_dbm.unwrap_or(p0), seed)?;
            let mut one = cfg.clone();
            one.methods = vec![*method];
            let cell = run_cell(&one, power_dbm.unwrap_or(p0), inst);
            let record = cell.record(*method).expect("the requested method ran");
            let weights = cell.physical_solution(*method).map(|s| Weights {
                w_re: s.w.iter().map(|c| c.re).collect(),
                w_im: s.w.iter().map(|c| c.im).collect(),
                a: s.a,
                min_snr_db: record.min_snr_db,
            });
            let out = SolveOutput {
                config_sha256: one.hash(),
                record,
                weights,
            };
            println!("{}", serde_json::to_string_pretty(&out).expect("output serializes"));
        }
        Command::Sweep => {
            let out = sweep(&cfg, cli.jobs)?;
            write_outputs(&cfg, &out, &cfg.out_dir)?;
            eprintln!(
                "{} cells, {} records, {} failures written to {}",
                out.cells.len(),
                out.records().count(),
                out.failures.len(),
                cfg.out_dir.display()
            );
        }
        Command::Verify { quick } => {
            let scale = if *quick { Scale::quick() } else { Scale::full() };
            let results = acceptance::run_all(&scale, cli.jobs, |r| eprintln!("{r}"));
            println!();
            for r in &results {
                println!("{r}");
            }
            let passed = results.iter().filter(|r| r.passed).count();
            println!("{passed}/{} criteria passed", results.len());
            return Ok(passed == results.len());
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("relaycast: {e}");
            ExitCode::from(2)
        }
    }
}
