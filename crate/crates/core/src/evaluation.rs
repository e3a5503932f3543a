//! Regret measurement against the best cell-to-arm mapping, bound checks and
//! run aggregation.

use std::io::Write;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::environments::FullInfoRound;
use crate::error::{Error, Result};
use crate::hierarchy::CellGrid;
use crate::learner::regret_bound;
use crate::policy::Policy;

/// What happened in one round of a simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub t: u64,
    pub cell: usize,
    pub arm: usize,
    pub loss: f64,
    pub simplex: Vec<f64>,
}

/// Runs `policy` over a full-information stream, revealing only the chosen
/// arm's loss.
pub fn simulate<P: Policy + ?Sized>(
    policy: &mut P,
    rounds: &[FullInfoRound],
    rng: &mut dyn RngCore,
) -> Result<Vec<RoundRecord>> {
    let mut out = Vec::with_capacity(rounds.len());
    for (t, round) in rounds.iter().enumerate() {
        let d = policy.select(&round.context, rng)?;
        let loss = *round
            .losses
            .get(d.arm)
            .ok_or_else(|| Error::domain(format!("arm {} has no loss in round {t}", d.arm)))?;
        policy.update(&d, loss)?;
        out.push(RoundRecord {
            t: t as u64,
            cell: d.cell,
            arm: d.arm,
            loss,
            simplex: d.simplex,
        });
    }
    Ok(out)
}

/// Writes records as CSV with columns `t,cell,arm,loss,p_0,...`.
pub fn write_round_records<W: Write>(records: &[RoundRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let arms = records.first().map_or(0, |r| r.simplex.len());
    let mut header = vec!["t".to_string(), "cell".into(), "arm".into(), "loss".into()];
    header.extend((0..arms).map(|m| format!("p_{m}")));
    w.write_record(&header).map_err(csv_error)?;
    for r in records {
        let mut row = vec![r.t.to_string(), r.cell.to_string(), r.arm.to_string(), r.loss.to_string()];
        row.extend(r.simplex.iter().map(|p| p.to_string()));
        w.write_record(&row).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn csv_error(e: csv::Error) -> Error {
    Error::Format(e.to_string())
}

/// The best assignment of arms to grid cells in hindsight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestMapping {
    pub loss: f64,
    /// Arm per cell; cells never visited get arm 0.
    pub mapping: Vec<usize>,
}

/// Cumulative true loss per cell and arm.
pub fn cell_arm_losses(rounds: &[FullInfoRound], grid: &CellGrid) -> Result<Vec<Vec<f64>>> {
    let arms = rounds.first().map_or(0, |r| r.losses.len());
    let mut totals = vec![vec![0.0; arms]; grid.total_cells()];
    for r in rounds {
        if r.losses.len() != arms {
            return Err(Error::Shape {
                expected: arms,
                got: r.losses.len(),
            });
        }
        let cell = grid.quantize(&r.context)?;
        for (acc, l) in totals[cell].iter_mut().zip(&r.losses) {
            *acc += l;
        }
    }
    Ok(totals)
}

/// Since every cell may take any arm, the optimum decouples: each cell picks
/// its own cheapest arm (lowest index on ties).
pub fn best_mapping_loss(rounds: &[FullInfoRound], grid: &CellGrid) -> Result<BestMapping> {
    if rounds.is_empty() {
        return Err(Error::domain("best mapping of an empty history"));
    }
    let totals = cell_arm_losses(rounds, grid)?;
    let mut loss = 0.0;
    let mapping = totals
        .iter()
        .map(|per_arm| {
            let mut best = 0;
            for (m, &v) in per_arm.iter().enumerate() {
                if v < per_arm[best] {
                    best = m;
                }
            }
            loss += per_arm[best];
            best
        })
        .collect();
    Ok(BestMapping { loss, mapping })
}

/// Total true loss of a fixed mapping.
pub fn mapping_loss(rounds: &[FullInfoRound], grid: &CellGrid, mapping: &[usize]) -> Result<f64> {
    let mut loss = 0.0;
    for r in rounds {
        loss += r.losses[mapping[grid.quantize(&r.context)?]];
    }
    Ok(loss)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretReport {
    pub algorithm_loss: f64,
    pub best_mapping_loss: f64,
    pub regret: f64,
    pub bound: Option<f64>,
}

impl RegretReport {
    pub fn new(records: &[RoundRecord], rounds: &[FullInfoRound], grid: &CellGrid) -> Result<Self> {
        let algorithm_loss = records.iter().map(|r| r.loss).sum();
        let best = best_mapping_loss(rounds, grid)?.loss;
        Ok(RegretReport {
            algorithm_loss,
            best_mapping_loss: best,
            regret: algorithm_loss - best,
            bound: None,
        })
    }
}

/// A bound compared against a mean empirical regret.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub bound: f64,
    pub mean_regret: f64,
    /// `bound - mean_regret`; nonnegative when the check passes.
    pub margin: f64,
    pub pass: bool,
}

impl BoundCheck {
    pub fn new(bound: f64, mean_regret: f64) -> Self {
        BoundCheck {
            bound,
            mean_regret,
            margin: bound - mean_regret,
            pass: mean_regret <= bound,
        }
    }
}

/// Checks a mean regret against the hierarchical learner's bound at `eta`.
/// A zero horizon passes vacuously.
pub fn check_hierarchical_bound(
    mean_regret: f64,
    psi: f64,
    hs: f64,
    a_r: f64,
    arms: usize,
    horizon: u64,
    eta: f64,
) -> BoundCheck {
    if horizon == 0 {
        return BoundCheck::new(0.0, mean_regret.min(0.0));
    }
    BoundCheck::new(regret_bound(psi, hs, a_r, arms, horizon, eta), mean_regret)
}

/// The exponential-weights guarantee against an expert with log prior
/// `log_prior`: `ln(1 / prior) / eta + M T eta / 2`.
pub fn mixture_regret_bound(log_prior: f64, eta: f64, arms: usize, horizon: u64) -> f64 {
    -log_prior / eta + arms as f64 * horizon as f64 * eta / 2.0
}

/// Discretization gap of a deterministic loss family on one grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantizationGapReport {
    pub cells: usize,
    pub dims: usize,
    pub lipschitz: f64,
    /// Average loss of the best mapping minus that of the pointwise optimum.
    pub gap: f64,
    pub bound: f64,
}

impl QuantizationGapReport {
    pub fn holds(&self) -> bool {
        self.gap <= self.bound
    }
}

/// `2 c sqrt(n) / N^(1/n)`.
pub fn quantization_bound(lipschitz: f64, dims: usize, cells: usize) -> f64 {
    2.0 * lipschitz * (dims as f64).sqrt() / (cells as f64).powf(1.0 / dims as f64)
}

/// Measures the gap for each grid size in `cells` by midpoint quadrature with
/// roughly `points` evaluations per grid. The grids follow the power-of-two
/// splitting scheme of [`CellGrid::uniform`].
pub fn quantization_gap<F>(
    losses: F,
    arms: usize,
    lipschitz: f64,
    dims: usize,
    cells: &[usize],
    points: usize,
) -> Result<Vec<QuantizationGapReport>>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    cells
        .iter()
        .map(|&n| {
            let grid = CellGrid::uniform(dims, n)?;
            // sub-points per cell and dimension, so that cells are covered exactly
            let per_dim = (points as f64).powf(1.0 / dims as f64);
            let q: Vec<usize> = grid
                .splits()
                .iter()
                .map(|&s| ((per_dim / s as f64).ceil() as usize).max(1))
                .collect();
            let res: Vec<usize> = grid.splits().iter().zip(&q).map(|(s, q)| s * q).collect();
            let total: usize = res.iter().product();
            let mut per_cell = vec![vec![0.0; arms]; grid.total_cells()];
            let mut pointwise_per_cell = vec![0.0; grid.total_cells()];
            let mut idx = vec![0usize; dims];
            let mut x = vec![0.0; dims];
            let mut coords = vec![0usize; dims];
            for _ in 0..total {
                for d in 0..dims {
                    x[d] = (idx[d] as f64 + 0.5) / res[d] as f64;
                    coords[d] = idx[d] / q[d];
                }
                let l = losses(&x);
                let cell = grid.cell_index(&coords);
                pointwise_per_cell[cell] += l.iter().copied().fold(f64::INFINITY, f64::min);
                for (acc, v) in per_cell[cell].iter_mut().zip(&l) {
                    *acc += v;
                }
                for d in (0..dims).rev() {
                    idx[d] += 1;
                    if idx[d] < res[d] {
                        break;
                    }
                    idx[d] = 0;
                }
            }
            let best: f64 = per_cell
                .iter()
                .map(|a| a.iter().copied().fold(f64::INFINITY, f64::min))
                .sum();
            let pointwise: f64 = pointwise_per_cell.iter().sum();
            Ok(QuantizationGapReport {
                cells: n,
                dims,
                lipschitz,
                gap: (best - pointwise) / total as f64,
                bound: quantization_bound(lipschitz, dims, n),
            })
        })
        .collect()
}

/// Average of `min_m f(x)_m` over `[0, 1]` by the midpoint rule.
pub fn pointwise_optimal_rate<F>(losses: F, points: usize) -> f64
where
    F: Fn(f64) -> Vec<f64>,
{
    let sum: f64 = (0..points)
        .map(|i| {
            let s = (i as f64 + 0.5) / points as f64;
            losses(s).into_iter().fold(f64::INFINITY, f64::min)
        })
        .sum();
    sum / points as f64
}

/// Running average loss `sum_{tau <= t} l_tau / t` for one run.
pub fn running_average(losses: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    losses
        .iter()
        .enumerate()
        .map(|(t, l)| {
            acc += l;
            acc / (t + 1) as f64
        })
        .collect()
}

/// Mean running-average curve over equally long runs.
pub fn aggregate_runs(runs: &[Vec<f64>]) -> Result<Vec<f64>> {
    let len = runs.first().map_or(0, Vec::len);
    let mut curve = vec![0.0; len];
    for run in runs {
        if run.len() != len {
            return Err(Error::Shape {
                expected: len,
                got: run.len(),
            });
        }
        for (c, v) in curve.iter_mut().zip(running_average(run)) {
            *c += v;
        }
    }
    let k = runs.len().max(1) as f64;
    curve.iter_mut().for_each(|c| *c /= k);
    Ok(curve)
}

/// Writes labelled curves side by side: `<index>,<label_0>,<label_1>,...`,
/// one row per entry of `rounds`.
pub fn write_curves_csv<W: Write>(
    index: &str,
    labels: &[String],
    rounds: &[u64],
    curves: &[Vec<f64>],
    out: W,
) -> Result<()> {
    if let Some(bad) = curves.iter().find(|c| c.len() != rounds.len()) {
        return Err(Error::Shape {
            expected: rounds.len(),
            got: bad.len(),
        });
    }
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec![index.to_string()];
    header.extend(labels.iter().cloned());
    w.write_record(&header).map_err(csv_error)?;
    for (i, t) in rounds.iter().enumerate() {
        let mut row = vec![t.to_string()];
        row.extend(curves.iter().map(|c| c[i].to_string()));
        w.write_record(&row).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}
