use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hsb::experiment::verify::{verify, VerifyOptions};
use hsb::experiment::{
    build_structure, run_ecoc, run_replay, run_synthetic, Algorithm, AlgorithmSpec, ExperimentConfig,
};
use hsb::experts::{enumerate_weighted_experts, write_experts_csv};
use hsb::Result;

#[derive(Parser)]
#[command(name = "hsb", version, about = "Contextual bandits over hierarchical context partitions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Overrides `output_dir` from the configuration.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Overrides `seeds`, comma separated.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Overrides `horizon`.
    #[arg(long)]
    horizon: Option<u64>,
    /// Overrides `presentations`.
    #[arg(long)]
    presentations: Option<usize>,
    /// Print the JSON summary instead of the text report.
    #[arg(long)]
    json: bool,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        if let Some(d) = &self.output_dir {
            cfg.output_dir = Some(d.clone());
        }
        if let Some(s) = &self.seeds {
            cfg.seeds = s.clone();
        }
        if let Some(h) = self.horizon {
            cfg.horizon = h;
        }
        if let Some(p) = self.presentations {
            cfg.presentations = p;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Ensemble runs on the synthetic sinusoidal model.
    RunSynthetic(Common),
    /// Offline evaluation on logged click data.
    RunReplay {
        #[command(flatten)]
        common: Common,
        /// Log CSV; overrides the configured log.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Online multi-class classification with one-vs-all codes.
    RunEcoc(Common),
    /// Oracle-equivalence and bound suites.
    Verify {
        /// Random histories per structure.
        #[arg(long, default_value_t = 10)]
        seeds: u64,
        #[arg(long, default_value_t = 200)]
        rounds: usize,
        #[arg(long)]
        json: bool,
    },
    /// Write a structure as JSON (and optionally its expert class as CSV).
    DumpStructure {
        #[arg(long, value_parser = parse_algorithm)]
        algorithm: Algorithm,
        #[arg(long)]
        depth: Option<u32>,
        #[arg(long)]
        leaves: Option<usize>,
        #[arg(long)]
        k: Option<usize>,
        /// Context dimension.
        #[arg(long, default_value_t = 1)]
        dims: usize,
        /// Output file; stdout if absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also enumerate the root's experts into this CSV.
        #[arg(long)]
        experts_csv: Option<PathBuf>,
        #[arg(long, default_value_t = 2)]
        arms: usize,
    },
}

fn parse_algorithm(s: &str) -> std::result::Result<Algorithm, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|_| format!("unknown algorithm {s:?}"))
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::RunSynthetic(common) => {
            let out = run_synthetic(&common.load()?)?;
            if common.json {
                print_json(&out)?;
            } else {
                println!("clairvoyant loss {:.4}", out.clairvoyant_loss);
                for a in &out.algorithms {
                    println!(
                        "{:<16} final {:.4} (+/- {:.4})  last quarter {:.4}  regret {:.1}",
                        a.info.label, a.final_loss, a.final_loss_stderr, a.final_quarter_loss, a.mean_regret
                    );
                }
            }
        }
        Command::RunReplay { common, log } => {
            let out = run_replay(&common.load()?, log.as_deref())?;
            if common.json {
                print_json(&out)?;
            } else {
                for a in &out.algorithms {
                    println!(
                        "{:<16} click rate {:.4} (+/- {:.4})  matched {:.0}",
                        a.info.label, a.click_rate, a.loss_rate_stderr, a.mean_matched
                    );
                }
            }
        }
        Command::RunEcoc(common) => {
            let out = run_ecoc(&common.load()?)?;
            if common.json {
                print_json(&out)?;
            } else {
                for a in &out.algorithms {
                    let epochs: Vec<String> = a.epoch_errors.iter().map(|e| format!("{e:.3}")).collect();
                    println!("{:<16} error {:.4}  epochs [{}]", a.info.label, a.overall_error, epochs.join(" "));
                }
            }
        }
        Command::Verify { seeds, rounds, json } => {
            let opts = VerifyOptions {
                seeds: (0..seeds).collect(),
                rounds,
                ..VerifyOptions::default()
            };
            let report = verify(&opts)?;
            if json {
                print_json(&report)?;
            } else {
                for s in &report.suites {
                    println!("{} {:<28} {}", if s.pass { "PASS" } else { "FAIL" }, s.name, s.detail);
                }
            }
            return Ok(report.all_pass());
        }
        Command::DumpStructure {
            algorithm,
            depth,
            leaves,
            k,
            dims,
            out,
            experts_csv,
            arms,
        } => {
            let spec = AlgorithmSpec {
                depth,
                leaves,
                k,
                ..AlgorithmSpec::new(algorithm)
            };
            let s = build_structure(&spec, dims)?;
            let json = s.to_json()?;
            match out {
                Some(p) => std::fs::write(p, json)?,
                None => println!("{json}"),
            }
            if let Some(p) = experts_csv {
                let experts = enumerate_weighted_experts(&s, s.root(), arms)?;
                write_experts_csv(&experts, std::fs::File::create(p)?)?;
            }
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
