//! Reproducible experiment protocols driven by a TOML configuration: the
//! synthetic ensemble runs, replay of logged data, the ECOC classifier, the
//! oracle verification suites and structure dumps.

mod config;
mod ecoc;
mod replay;
mod synthetic;
pub mod verify;

use std::path::Path;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use config::{
    Algorithm, AlgorithmSpec, EnvironmentSpec, EtaKeyword, EtaSpec, ExperimentConfig, PhaseName,
};
pub use ecoc::{run_ecoc, EcocAlgorithmSummary, EcocOutcome};
pub use replay::{run_replay, ReplayAlgorithmSummary, ReplayOutcomeSummary, ReplayRun};
pub use synthetic::{run_synthetic, AlgorithmSummary, SyntheticOutcome};

use crate::baselines::{Exp3, SExp3};
use crate::environments::{CodingMatrix, HammingDecoder};
use crate::error::{Error, Result};
use crate::experts::FlatMixture;
use crate::hierarchy::{
    arbitrary_position_splitting, arbitrary_splitting, binary_tree, kary_tree, kgroup_lexicographic,
    lexicographic_graph, CellGrid, Structure,
};
use crate::learner::{optimal_eta, optimal_regret_bound, regret_bound, HsbLearner};
use crate::policy::Policy;

/// Static facts about a configured algorithm, reported in summaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyInfo {
    pub label: String,
    pub algorithm: Algorithm,
    pub arms: usize,
    /// Cells of the context grid (1 for context-free algorithms).
    pub cells: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nodes: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub psi: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a_r: Option<f64>,
    /// Regret bound at `eta`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound_at_eta: Option<f64>,
    /// Closed-form guarantee quoted for the tuned learning rate.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tuned_bound: Option<f64>,
}

#[derive(Debug, Clone)]
enum Template {
    Hsb(Arc<Structure>, f64),
    Exp3(usize, u64),
    SExp3(CellGrid, usize, u64),
    Flat(FlatMixture),
    Hamming(CodingMatrix),
}

/// Builds fresh, identically configured policies for independent runs.
#[derive(Debug, Clone)]
pub struct PolicyFactory {
    template: Template,
    info: PolicyInfo,
    grid: CellGrid,
}

impl PolicyFactory {
    /// Configures `spec` for contexts of dimension `dims`, `arms` arms and a
    /// horizon of `horizon` rounds.
    pub fn new(spec: &AlgorithmSpec, dims: usize, arms: usize, horizon: u64) -> Result<Self> {
        let label = spec.display_label();
        let mut info = PolicyInfo {
            label: label.clone(),
            algorithm: spec.algorithm,
            arms,
            cells: 1,
            eta: None,
            nodes: None,
            psi: None,
            hs: None,
            a_r: None,
            bound_at_eta: None,
            tuned_bound: None,
        };
        let field = |name: &str| format!("{label}.{name}");
        let fixed_eta = match spec.eta {
            EtaSpec::Fixed(e) => Some(e),
            EtaSpec::Keyword(EtaKeyword::Auto) => None,
        };
        let (template, grid) = match spec.algorithm {
            a if a.is_hierarchical() => {
                let structure = Arc::new(build_structure(spec, dims)?);
                let params = structure.params();
                let regions = spec.regions.unwrap_or(DEFAULT_REGIONS);
                let a_r = params.a_r(regions, arms);
                let (psi, hs) = (params.psi as f64, params.hs as f64);
                let eta = match fixed_eta {
                    Some(e) => e,
                    None => {
                        let a_r = a_r.ok_or_else(|| Error::config(format!("{}: no closed form", field("eta"))))?;
                        optimal_eta(psi, hs, a_r, arms, horizon.max(1))?
                    }
                };
                if let Some(a_r) = a_r {
                    info.bound_at_eta = Some(regret_bound(psi, hs, a_r, arms, horizon, eta));
                    info.tuned_bound = Some(optimal_regret_bound(psi, hs, a_r, arms, horizon));
                }
                info.eta = Some(eta);
                info.nodes = Some(structure.node_count());
                info.psi = Some(params.psi);
                info.hs = Some(params.hs);
                info.a_r = a_r;
                let grid = structure.grid().clone();
                (Template::Hsb(structure, eta), grid)
            }
            Algorithm::Exp3 => (Template::Exp3(arms, horizon), CellGrid::new(vec![1; dims.max(1)])?),
            Algorithm::Sexp3 => {
                let grid = grid_for(dims, cells_of(spec, &label)?)?;
                (Template::SExp3(grid.clone(), arms, horizon), grid)
            }
            Algorithm::Exp4Flat => {
                let grid = grid_for(dims, cells_of(spec, &label)?)?;
                // equal priors over arms^N mappings: ln(1 / prior) = N ln M
                let log_inv_prior = grid.total_cells() as f64 * (arms as f64).ln();
                let eta = fixed_eta
                    .unwrap_or_else(|| (2.0 * log_inv_prior.max(f64::MIN_POSITIVE) / (arms as f64 * horizon.max(1) as f64)).sqrt());
                info.eta = Some(eta);
                info.bound_at_eta = Some(log_inv_prior / eta + arms as f64 * horizon as f64 * eta / 2.0);
                (Template::Flat(FlatMixture::uniform(&grid, arms, eta)?), grid)
            }
            Algorithm::Hamming => {
                if dims != arms {
                    return Err(Error::config(format!(
                        "{}: one-vs-all decoding needs code length == classes",
                        field("algorithm")
                    )));
                }
                (
                    Template::Hamming(CodingMatrix::one_vs_all(arms)?),
                    CellGrid::uniform(dims, 1 << dims.min(20))?,
                )
            }
            _ => unreachable!("hierarchical algorithms handled above"),
        };
        info.cells = match template {
            Template::Exp3(..) => 1,
            _ => grid.total_cells(),
        };
        Ok(PolicyFactory { template, info, grid })
    }

    pub fn info(&self) -> &PolicyInfo {
        &self.info
    }

    /// The grid regret is measured on: the finest partition the policy can
    /// express.
    pub fn grid(&self) -> &CellGrid {
        &self.grid
    }

    pub fn structure(&self) -> Option<&Arc<Structure>> {
        match &self.template {
            Template::Hsb(s, _) => Some(s),
            _ => None,
        }
    }

    pub fn make(&self) -> Result<Box<dyn Policy>> {
        Ok(match &self.template {
            Template::Hsb(s, eta) => Box::new(HsbLearner::new(Arc::clone(s), self.info.arms, *eta)?),
            Template::Exp3(arms, horizon) => Box::new(Exp3::new(*arms, *horizon)?),
            Template::SExp3(grid, arms, horizon) => Box::new(SExp3::new(grid.clone(), *arms, *horizon)?),
            Template::Flat(f) => Box::new(f.clone()),
            Template::Hamming(m) => Box::new(HammingDecoder::new(m.clone())),
        })
    }
}

/// Region count assumed by the tuned learning rate when none is given.
pub const DEFAULT_REGIONS: usize = 2;

fn cells_of(spec: &AlgorithmSpec, label: &str) -> Result<usize> {
    match (spec.leaves, spec.depth) {
        (Some(n), _) => Ok(n),
        (None, Some(d)) if d < 31 => Ok(1usize << d),
        (None, Some(d)) => Err(Error::config(format!("{label}.depth: {d} is too deep"))),
        (None, None) => Err(Error::config(format!("{label}: needs `depth` or `leaves`"))),
    }
}

/// A grid of `cells` cells over `dims` dimensions: a plain line for one
/// dimension, otherwise the power-of-two splitting scheme.
pub fn grid_for(dims: usize, cells: usize) -> Result<CellGrid> {
    if dims == 1 {
        CellGrid::new(vec![cells])
    } else {
        CellGrid::uniform(dims, cells)
    }
}

/// The structure described by a hierarchical algorithm spec.
pub fn build_structure(spec: &AlgorithmSpec, dims: usize) -> Result<Structure> {
    let label = spec.display_label();
    let need_k = || spec.k.ok_or_else(|| Error::config(format!("{label}.k: required")));
    match spec.algorithm {
        Algorithm::HsbBt => binary_tree(&grid_for(dims, cells_of(spec, &label)?)?),
        Algorithm::HsbLg => lexicographic_graph(&grid_for(dims, cells_of(spec, &label)?)?),
        Algorithm::HsbArb => arbitrary_splitting(&grid_for(dims, cells_of(spec, &label)?)?),
        Algorithm::HsbKgroup => kgroup_lexicographic(&grid_for(dims, cells_of(spec, &label)?)?, need_k()?),
        Algorithm::HsbKary => {
            let k = need_k()?;
            let cells = match (spec.leaves, spec.depth) {
                (Some(n), _) => n,
                (None, Some(d)) => k
                    .checked_pow(d)
                    .ok_or_else(|| Error::config(format!("{label}.depth: too many leaves")))?,
                (None, None) => return Err(Error::config(format!("{label}: needs `depth` or `leaves`"))),
            };
            kary_tree(&grid_for(dims, cells)?, k)
        }
        Algorithm::HsbAps => {
            let depth = spec
                .depth
                .ok_or_else(|| Error::config(format!("{label}.depth: required")))?;
            let cells = cells_of(spec, &label)?;
            arbitrary_position_splitting(&CellGrid::uniform(dims, cells)?, depth as usize)
        }
        other => Err(Error::config(format!("{label}: {} has no structure", other.name()))),
    }
}

/// Independent generator for presentation `presentation` of dataset `seed`.
pub fn presentation_rng(seed: u64, presentation: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(presentation as u64 + 1);
    rng
}

pub(crate) fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

/// Mean and standard error of a sample.
pub fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
