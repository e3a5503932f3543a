use std::fs::File;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    ensure_dir, presentation_rng, write_json, EnvironmentSpec, ExperimentConfig, PolicyFactory, PolicyInfo,
};
use crate::environments::{load_labeled_csv, separable_dataset, CodingMatrix, EcocSetup, LabeledSample};
use crate::error::{Error, Result};
use crate::evaluation::write_curves_csv;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EcocAlgorithmSummary {
    pub info: PolicyInfo,
    /// Mean misclassification rate per epoch.
    pub epoch_errors: Vec<f64>,
    pub overall_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EcocOutcome {
    pub classes: usize,
    pub samples: usize,
    pub epoch_length: usize,
    pub algorithms: Vec<EcocAlgorithmSummary>,
}

const DEFAULT_CLASSES: usize = 6;
const DEFAULT_FEATURES: usize = 36;
const DEFAULT_SAMPLES: usize = 6435;

/// Online multi-class classification: one-vs-all perceptrons turn features
/// into a codeword, the bandit maps the codeword to a class and sees only
/// whether it was right. Samples are presented in order and split into
/// consecutive epochs of equal length; a final partial epoch is dropped.
pub fn run_ecoc(cfg: &ExperimentConfig) -> Result<EcocOutcome> {
    cfg.validate()?;
    let EnvironmentSpec::Ecoc {
        dataset,
        classes,
        features,
        samples,
        epochs,
    } = &cfg.environment
    else {
        return Err(Error::config("environment.kind: run-ecoc needs an ecoc environment"));
    };
    if *epochs == 0 {
        return Err(Error::config("environment.epochs: must be at least 1"));
    }
    let data: Vec<Vec<LabeledSample>> = match dataset {
        Some(path) => vec![load_labeled_csv(path)?],
        None => cfg
            .seeds
            .iter()
            .map(|&s| {
                separable_dataset(
                    classes.unwrap_or(DEFAULT_CLASSES),
                    features.unwrap_or(DEFAULT_FEATURES),
                    samples.unwrap_or(DEFAULT_SAMPLES),
                    s,
                )
            })
            .collect::<Result<_>>()?,
    };
    let n_classes = match classes {
        Some(c) => *c,
        None => data.iter().flatten().map(|s| s.label + 1).max().unwrap_or(0),
    };
    let matrix = CodingMatrix::one_vs_all(n_classes)?;
    let feature_dims = data
        .iter()
        .find_map(|d| d.first())
        .map(|s| s.features.len())
        .ok_or_else(|| Error::config("environment.dataset: no samples"))?;
    let length = data[0].len().min(cfg.horizon as usize);
    let epoch_length = length / epochs;
    if epoch_length == 0 {
        return Err(Error::config(format!(
            "environment.epochs: {epochs} epochs do not fit in {length} rounds (samples capped by horizon)"
        )));
    }
    let used = epoch_length * epochs;

    let tasks: Vec<(usize, u64, usize)> = cfg
        .seeds
        .iter()
        .enumerate()
        .flat_map(|(i, &s)| (0..cfg.presentations).map(move |p| (i, s, p)))
        .collect();
    let mut algorithms = Vec::new();
    for spec in &cfg.algorithms {
        let factory = PolicyFactory::new(spec, n_classes, n_classes, used as u64)?;
        let per_run = tasks
            .par_iter()
            .map(|&(i, seed, p)| {
                let samples = &data[if data.len() == 1 { 0 } else { i }];
                let mut setup = EcocSetup::new(matrix.clone(), feature_dims);
                let mut policy = factory.make()?;
                let mut rng = presentation_rng(seed, p);
                let mut errors = vec![0usize; *epochs];
                for (t, s) in samples[..used].iter().enumerate() {
                    let round = setup.observe(&s.features, s.label)?;
                    let d = policy.select(&round.context, &mut rng)?;
                    let loss = round.loss(d.arm);
                    policy.update(&d, loss)?;
                    setup.train(&round);
                    if loss > 0.0 {
                        errors[t / epoch_length] += 1;
                    }
                }
                Ok(errors)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut epoch_errors = vec![0.0; *epochs];
        for run in &per_run {
            for (acc, &e) in epoch_errors.iter_mut().zip(run) {
                *acc += e as f64 / epoch_length as f64;
            }
        }
        epoch_errors.iter_mut().for_each(|e| *e /= per_run.len() as f64);
        let overall_error = epoch_errors.iter().sum::<f64>() / *epochs as f64;
        algorithms.push(EcocAlgorithmSummary {
            info: factory.info().clone(),
            epoch_errors,
            overall_error,
        });
    }
    let outcome = EcocOutcome {
        classes: n_classes,
        samples: used,
        epoch_length,
        algorithms,
    };
    if let Some(dir) = &cfg.output_dir {
        ensure_dir(dir)?;
        let labels: Vec<String> = outcome.algorithms.iter().map(|a| a.info.label.clone()).collect();
        let rows: Vec<u64> = (1..=*epochs as u64).collect();
        let curves: Vec<Vec<f64>> = outcome.algorithms.iter().map(|a| a.epoch_errors.clone()).collect();
        write_curves_csv("epoch", &labels, &rows, &curves, File::create(dir.join("epochs.csv"))?)?;
        write_json(&dir.join("summary.json"), &outcome)?;
    }
    Ok(outcome)
}
