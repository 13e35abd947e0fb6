use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use cdeob::harness::{
    self, gen_synthetic_empirical, run_pipeline, run_simulation, write_simulation, HarnessError, PipelineOptions, SimConfig,
};
use cdeob::ignorability::{build_case, check_corpus, condition_report, parse_rational, Case, IgnorabilityError};

#[derive(Parser)]
#[command(name = "cdeob", version, about = "Second-stage discrimination estimation and diagnostics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo study over the (alpha_black, beta_black) grid.
    Simulate {
        /// JSON document with SimConfig fields.
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "sim_out")]
        out: PathBuf,
        /// Overrides the config's worker count.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Propensity, regression, AUC and sensitivity on a CSV with z, y and covariates.
    Pipeline {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// JSON document with pipeline options.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Writes a synthetic charging dataset and its recipe sidecar.
    Synth {
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        effect: f64,
    },
    /// Exact condition report for a built-in distribution.
    Ignorability {
        /// case2, case3, case6 or appendixB.
        #[arg(long)]
        case: String,
        /// Rational such as 1/2; required for case6.
        #[arg(long)]
        alpha: Option<String>,
        #[arg(long)]
        json: bool,
        /// Also print the atoms.
        #[arg(long)]
        atoms: bool,
    },
    /// Implication checks over a corpus of random distributions.
    Check {
        #[arg(long)]
        corpus: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0)]
        workers: usize,
    },
}

#[derive(Debug)]
enum CliError {
    Harness(HarnessError),
    Ignorability(IgnorabilityError),
    Io(String, std::io::Error),
    Json(String, serde_json::Error),
    Invariant(String),
}

impl CliError {
    fn to_json(&self) -> serde_json::Value {
        let (kind, message) = match self {
            CliError::Harness(e) => (e.kind(), e.to_string()),
            CliError::Ignorability(e) => ("ignorability", e.to_string()),
            CliError::Io(p, e) => ("io", format!("{p}: {e}")),
            CliError::Json(p, e) => ("json", format!("{p}: {e}")),
            CliError::Invariant(m) => ("violation", m.clone()),
        };
        json!({ "error": { "kind": kind, "message": message } })
    }
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        CliError::Harness(e)
    }
}

impl From<IgnorabilityError> for CliError {
    fn from(e: IgnorabilityError) -> Self {
        CliError::Ignorability(e)
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io(path.display().to_string(), e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Json(path.display().to_string(), e))
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate { config, out, workers } => {
            let mut cfg: SimConfig = read_json(&config)?;
            if let Some(w) = workers {
                cfg.parallelism = w;
            }
            let result = run_simulation(&cfg)?;
            write_simulation(&out, &result)?;
            println!("wrote {} summary rows to {}", result.summary.len(), out.display());
        }
        Command::Pipeline {
            data,
            out,
            config,
            workers,
        } => {
            let mut options: PipelineOptions = match config {
                Some(p) => read_json(&p)?,
                None => PipelineOptions::default(),
            };
            if let Some(w) = workers {
                options.workers = w;
            }
            let report = run_pipeline(&data, &out, &options)?;
            let e = &report.estimate;
            println!(
                "estimate {:.4} (se {:.4}, 95% CI [{:.4}, {:.4}]), n = {}",
                e.point, e.se, e.ci_low, e.ci_high, report.n
            );
        }
        Command::Synth { seed, n, out, effect } => {
            let synth = gen_synthetic_empirical(seed, n, effect)?;
            harness::write_synthetic(&out, &synth)?;
            println!("wrote {} rows to {}", n, out.display());
        }
        Command::Ignorability {
            case,
            alpha,
            json,
            atoms,
        } => {
            let which: Case = case.parse()?;
            let alpha = alpha.as_deref().map(parse_rational).transpose()?;
            let dist = build_case(which, alpha)?;
            let report = condition_report(&dist);
            if json {
                let mut v = report.to_json();
                if atoms {
                    v["distribution"] = dist.to_json();
                }
                println!("{}", serde_json::to_string_pretty(&v).expect("json"));
            } else {
                if atoms {
                    println!("{dist}");
                }
                println!("{report}");
            }
        }
        Command::Check { corpus, seed, workers } => {
            let exec = cdeob::exec::execution_for(workers);
            let report = cdeob::exec::with_workers(workers, || check_corpus(seed..seed + corpus, exec));
            println!("{}", serde_json::to_string_pretty(&report).expect("json"));
            if report.violations() > 0 {
                return Err(CliError::Invariant(format!("{} implication violations", report.violations())));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::FAILURE
        }
    }
}
