use std::fs::File;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    ensure_dir, mean_and_stderr, presentation_rng, write_json, EnvironmentSpec, ExperimentConfig, PolicyFactory,
    PolicyInfo,
};
use crate::environments::{read_logged_csv, replay_evaluate, uniform_logged_stream, LoggedRound, SinusoidalEnv};
use crate::error::{Error, Result};
use crate::evaluation::csv_error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayRun {
    pub label: String,
    pub seed: u64,
    pub presentation: usize,
    pub loss: u64,
    pub matched: u64,
    pub rounds: u64,
}

impl ReplayRun {
    pub fn loss_rate(&self) -> f64 {
        if self.matched == 0 {
            f64::NAN
        } else {
            self.loss as f64 / self.matched as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayAlgorithmSummary {
    pub info: PolicyInfo,
    pub mean_loss_rate: f64,
    pub loss_rate_stderr: f64,
    /// `1 - mean_loss_rate`.
    pub click_rate: f64,
    pub mean_matched: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayOutcomeSummary {
    pub algorithms: Vec<ReplayAlgorithmSummary>,
    pub runs: Vec<ReplayRun>,
}

/// A log generated from the stationary sinusoidal model with a uniformly
/// random logging policy; the logging draws use their own stream of `seed`.
pub fn synthetic_log(seed: u64, horizon: u64) -> Vec<LoggedRound> {
    let rounds = SinusoidalEnv::stationary(horizon).generate(seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX);
    uniform_logged_stream(&rounds, &mut rng)
}

/// Scores every algorithm on logged data. `log_override` takes precedence
/// over the configured log path. Learners are tuned for the expected number
/// of matched rounds, `rounds / arms`.
pub fn run_replay(cfg: &ExperimentConfig, log_override: Option<&Path>) -> Result<ReplayOutcomeSummary> {
    cfg.validate()?;
    let (log_path, arms_hint) = match &cfg.environment {
        EnvironmentSpec::Replay { log, arms } => (log_override.map(Path::to_path_buf).or_else(|| log.clone()), *arms),
        _ if log_override.is_some() => (log_override.map(Path::to_path_buf), None),
        _ => return Err(Error::config("environment.kind: run-replay needs a replay environment")),
    };
    let logs: Vec<Vec<LoggedRound>> = match &log_path {
        Some(p) => vec![read_logged_csv(p)?],
        None => cfg.seeds.par_iter().map(|&s| synthetic_log(s, cfg.horizon)).collect(),
    };
    let first = logs.iter().find_map(|l| l.first());
    let dims = first.map_or(1, |r| r.context.len());
    let arms = match (arms_hint, &log_path) {
        (Some(a), _) => a,
        (None, None) => SinusoidalEnv::ARMS,
        (None, Some(_)) => logs.iter().flatten().map(|r| r.displayed_arm + 1).max().unwrap_or(1),
    };
    let log_len = logs.iter().map(Vec::len).max().unwrap_or(0) as u64;
    let tuning_horizon = (log_len / arms as u64).max(1);

    // a log file is shared by all seeds; generated logs are one per seed
    let tasks: Vec<(usize, u64, usize)> = cfg
        .seeds
        .iter()
        .enumerate()
        .flat_map(|(i, &s)| (0..cfg.presentations).map(move |p| (i, s, p)))
        .collect();
    let mut runs = Vec::new();
    let mut algorithms = Vec::new();
    for spec in &cfg.algorithms {
        let factory = PolicyFactory::new(spec, dims, arms, tuning_horizon)?;
        let label = factory.info().label.clone();
        let batch = tasks
            .par_iter()
            .map(|&(i, seed, p)| {
                let log = &logs[if logs.len() == 1 { 0 } else { i }];
                let mut policy = factory.make()?;
                let mut rng = presentation_rng(seed, p);
                let out = replay_evaluate(policy.as_mut(), log, &mut rng)?;
                Ok(ReplayRun {
                    label: label.clone(),
                    seed,
                    presentation: p,
                    loss: out.loss,
                    matched: out.matched,
                    rounds: out.rounds,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let rates: Vec<f64> = batch.iter().map(ReplayRun::loss_rate).filter(|r| r.is_finite()).collect();
        let (mean_loss_rate, loss_rate_stderr) = mean_and_stderr(&rates);
        let mean_matched = batch.iter().map(|r| r.matched as f64).sum::<f64>() / batch.len() as f64;
        algorithms.push(ReplayAlgorithmSummary {
            info: factory.info().clone(),
            mean_loss_rate,
            loss_rate_stderr,
            click_rate: 1.0 - mean_loss_rate,
            mean_matched,
        });
        runs.extend(batch);
    }
    let summary = ReplayOutcomeSummary { algorithms, runs };
    if let Some(dir) = &cfg.output_dir {
        ensure_dir(dir)?;
        let mut w = csv::Writer::from_writer(File::create(dir.join("replay.csv"))?);
        w.write_record(["label", "seed", "presentation", "loss", "matched", "rounds", "click_rate"])
            .map_err(csv_error)?;
        for r in &summary.runs {
            w.write_record([
                r.label.clone(),
                r.seed.to_string(),
                r.presentation.to_string(),
                r.loss.to_string(),
                r.matched.to_string(),
                r.rounds.to_string(),
                (1.0 - r.loss_rate()).to_string(),
            ])
            .map_err(csv_error)?;
        }
        w.flush()?;
        write_json(&dir.join("summary.json"), &summary)?;
    }
    Ok(summary)
}
