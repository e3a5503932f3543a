use std::fs::File;
use std::io::BufWriter;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    ensure_dir, mean_and_stderr, presentation_rng, write_json, EnvironmentSpec, ExperimentConfig, PhaseName,
    PolicyFactory, PolicyInfo,
};
use crate::environments::{mean_losses, FullInfoRound, Phase, SinusoidalEnv};
use crate::error::{Error, Result};
use crate::evaluation::{
    best_mapping_loss, pointwise_optimal_rate, running_average, simulate, write_curves_csv, write_round_records,
    BoundCheck,
};

/// Ensemble results for one algorithm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmSummary {
    pub info: PolicyInfo,
    pub runs: usize,
    /// Mean over runs of the average loss after the last round.
    pub final_loss: f64,
    pub final_loss_stderr: f64,
    /// Mean over runs of the average loss over the last quarter of rounds.
    pub final_quarter_loss: f64,
    /// Mean regret against the best mapping of the algorithm's own grid.
    pub mean_regret: f64,
    pub regret_stderr: f64,
    /// Mean regret compared with the tuned closed-form guarantee, for
    /// hierarchical learners.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound_check: Option<BoundCheck>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SyntheticOutcome {
    pub horizon: u64,
    pub datasets: usize,
    pub presentations: usize,
    /// Average loss per round of the pointwise optimal policy.
    pub clairvoyant_loss: f64,
    pub algorithms: Vec<AlgorithmSummary>,
    /// Curve rows: round numbers sampled every `curve_stride` rounds.
    pub curve_rounds: Vec<u64>,
    /// One averaged running-loss curve per algorithm, sampled at
    /// `curve_rounds`.
    #[serde(skip)]
    pub curves: Vec<Vec<f64>>,
}

struct RunResult {
    sampled_curve: Vec<f64>,
    final_quarter: f64,
    regret: f64,
    records: Option<Vec<crate::evaluation::RoundRecord>>,
}

fn sample_points(horizon: usize, stride: usize) -> Vec<usize> {
    let stride = stride.max(1);
    (0..horizon)
        .filter(|t| (t + 1) % stride == 0 || t + 1 == horizon)
        .collect()
}

/// Runs every algorithm on every (dataset, presentation) pair of the
/// sinusoidal environment and aggregates the results. Writes
/// `curves.csv`, `summary.json` and optionally per-run round records when
/// `output_dir` is set.
pub fn run_synthetic(cfg: &ExperimentConfig) -> Result<SyntheticOutcome> {
    cfg.validate()?;
    let env = match cfg.environment {
        EnvironmentSpec::Sinusoidal { phase, switch_fraction } => SinusoidalEnv {
            phase: match phase {
                PhaseName::Stationary => Phase::Stationary,
                PhaseName::Switched => Phase::Switched {
                    fraction: switch_fraction,
                },
            },
            horizon: cfg.horizon,
        },
        _ => return Err(Error::config("environment.kind: run-synthetic needs a sinusoidal environment")),
    };
    if cfg.horizon == 0 {
        return Err(Error::config("horizon: must be at least 1"));
    }
    let datasets: Vec<Vec<FullInfoRound>> = cfg.seeds.par_iter().map(|&s| env.generate(s)).collect();
    let factories = cfg
        .algorithms
        .iter()
        .map(|a| PolicyFactory::new(a, 1, SinusoidalEnv::ARMS, cfg.horizon))
        .collect::<Result<Vec<_>>>()?;

    let horizon = cfg.horizon as usize;
    let points = sample_points(horizon, cfg.curve_stride);
    let quarter_start = horizon - (horizon / 4).max(1);
    let tasks: Vec<(usize, usize)> = (0..datasets.len())
        .flat_map(|d| (0..cfg.presentations).map(move |p| (d, p)))
        .collect();

    let mut summaries = Vec::new();
    let mut curves = Vec::new();
    for factory in &factories {
        let results = tasks
            .par_iter()
            .map(|&(d, p)| {
                let mut policy = factory.make()?;
                let mut rng = presentation_rng(cfg.seeds[d], p);
                let records = simulate(policy.as_mut(), &datasets[d], &mut rng)?;
                let losses: Vec<f64> = records.iter().map(|r| r.loss).collect();
                let avg = running_average(&losses);
                let total: f64 = losses.iter().sum();
                let best = best_mapping_loss(&datasets[d], factory.grid())?.loss;
                let tail = &losses[quarter_start..];
                Ok(RunResult {
                    sampled_curve: points.iter().map(|&t| avg[t]).collect(),
                    final_quarter: tail.iter().sum::<f64>() / tail.len() as f64,
                    regret: total - best,
                    records: cfg.record_rounds.then_some(records),
                })
            })
            .collect::<Result<Vec<RunResult>>>()?;

        let mut curve = vec![0.0; points.len()];
        for r in &results {
            for (c, v) in curve.iter_mut().zip(&r.sampled_curve) {
                *c += v;
            }
        }
        curve.iter_mut().for_each(|c| *c /= results.len() as f64);
        let finals: Vec<f64> = results.iter().map(|r| *r.sampled_curve.last().unwrap()).collect();
        let quarters: Vec<f64> = results.iter().map(|r| r.final_quarter).collect();
        let regrets: Vec<f64> = results.iter().map(|r| r.regret).collect();
        let (final_loss, final_loss_stderr) = mean_and_stderr(&finals);
        let (final_quarter_loss, _) = mean_and_stderr(&quarters);
        let (mean_regret, regret_stderr) = mean_and_stderr(&regrets);
        let info = factory.info().clone();
        let bound_check = info.tuned_bound.map(|b| BoundCheck::new(b, mean_regret));

        if let (Some(dir), true) = (&cfg.output_dir, cfg.record_rounds) {
            let runs_dir = dir.join("runs");
            ensure_dir(&runs_dir)?;
            for (&(d, p), r) in tasks.iter().zip(&results) {
                let path = runs_dir.join(format!("{}_seed{}_p{}.csv", info.label, cfg.seeds[d], p));
                write_round_records(r.records.as_deref().unwrap_or(&[]), BufWriter::new(File::create(path)?))?;
            }
        }
        summaries.push(AlgorithmSummary {
            info,
            runs: results.len(),
            final_loss,
            final_loss_stderr,
            final_quarter_loss,
            mean_regret,
            regret_stderr,
            bound_check,
        });
        curves.push(curve);
    }

    let clairvoyant_loss = clairvoyant_rate(&env);
    let outcome = SyntheticOutcome {
        horizon: cfg.horizon,
        datasets: datasets.len(),
        presentations: cfg.presentations,
        clairvoyant_loss,
        algorithms: summaries,
        curve_rounds: points.iter().map(|&t| t as u64 + 1).collect(),
        curves,
    };
    if let Some(dir) = &cfg.output_dir {
        ensure_dir(dir)?;
        let labels: Vec<String> = outcome.algorithms.iter().map(|a| a.info.label.clone()).collect();
        write_curves_csv("t", &labels, &outcome.curve_rounds, &outcome.curves, File::create(dir.join("curves.csv"))?)?;
        write_json(&dir.join("summary.json"), &outcome)?;
    }
    Ok(outcome)
}

/// Expected loss per round of the policy that knows the loss model.
fn clairvoyant_rate(env: &SinusoidalEnv) -> f64 {
    const POINTS: usize = 1_000_000;
    let stationary = pointwise_optimal_rate(|s| mean_losses(s, false).to_vec(), POINTS);
    match env.switch_round() {
        None => stationary,
        Some(r) => {
            // the rotated model has the same pointwise minimum
            let switched = pointwise_optimal_rate(|s| mean_losses(s, true).to_vec(), POINTS);
            let frac = r.min(env.horizon) as f64 / env.horizon.max(1) as f64;
            frac * stationary + (1.0 - frac) * switched
        }
    }
}
