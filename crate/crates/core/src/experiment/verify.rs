//! Oracle and bound suites that certify the hierarchical learner against
//! brute-force expert enumeration, plus self-checks showing that the suites
//! catch deliberately broken recursions.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::environments::mean_losses;
use crate::error::Result;
use crate::evaluation::{quantization_gap, mixture_regret_bound};
use crate::experts::{enumerate_weighted_experts, log_arm_mass, log_prior_mass, log_total_weight, FlatMixture};
use crate::hierarchy::{
    arbitrary_position_splitting, arbitrary_splitting, binary_tree, kary_tree, kgroup_lexicographic,
    lexicographic_graph, CellGrid, Structure,
};
use crate::learner::{HsbLearner, Mutation};
use crate::numerics::relative_error;
use crate::policy::Policy;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteResult {
    pub name: String,
    pub pass: bool,
    pub checks: usize,
    /// Largest observed error (relative error, or bound excess).
    pub worst: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub suites: Vec<SuiteResult>,
}

impl VerifyReport {
    pub fn all_pass(&self) -> bool {
        self.suites.iter().all(|s| s.pass)
    }
}

/// A structure small enough for brute-force enumeration.
#[derive(Debug, Clone)]
pub struct OracleInstance {
    pub name: String,
    pub structure: Arc<Structure>,
    pub arms: usize,
}

/// Every builder at a size with at most 60 experts at the root.
pub fn small_instances() -> Result<Vec<OracleInstance>> {
    let line = |n: usize| CellGrid::new(vec![n]);
    let items: Vec<(&str, Structure, usize)> = vec![
        ("binary-tree N=4 M=2", binary_tree(&line(4)?)?, 2),
        ("binary-tree N=2 M=3", binary_tree(&line(2)?)?, 3),
        ("kary-tree K=3 N=3 M=3", kary_tree(&line(3)?, 3)?, 3),
        ("lexicographic N=3 M=2", lexicographic_graph(&line(3)?)?, 2),
        ("kgroup K=3 N=3 M=3", kgroup_lexicographic(&line(3)?, 3)?, 3),
        ("kgroup K=4 N=4 M=2", kgroup_lexicographic(&line(4)?, 4)?, 2),
        ("arbitrary N=3 M=2", arbitrary_splitting(&line(3)?)?, 2),
        (
            "position 2x2 depth=1 M=3",
            arbitrary_position_splitting(&CellGrid::uniform(2, 4)?, 1)?,
            3,
        ),
        ("position N=4 depth=2 M=2", arbitrary_position_splitting(&line(4)?, 2)?, 2),
    ];
    Ok(items
        .into_iter()
        .map(|(name, s, arms)| OracleInstance {
            name: name.to_string(),
            structure: Arc::new(s),
            arms,
        })
        .collect())
}

fn fail_detail(name: &str, failures: &[String]) -> String {
    match failures.first() {
        None => format!("{name}: ok"),
        Some(f) => format!("{name}: {} failures, first: {f}", failures.len()),
    }
}

/// Fresh node weights are one everywhere and priors under every node sum to
/// one.
pub fn initialization_suite(instances: &[OracleInstance], mutation: Mutation) -> Result<SuiteResult> {
    let mut worst: f64 = 0.0;
    let mut checks = 0;
    let mut failures = Vec::new();
    for inst in instances {
        let learner = HsbLearner::with_mutation(Arc::clone(&inst.structure), inst.arms, 0.5, mutation)?;
        for node in 0..inst.structure.node_count() {
            let w = learner.log_w(node).exp();
            let mass = log_prior_mass(&enumerate_weighted_experts(&inst.structure, node, inst.arms)?).exp();
            let err = (w - 1.0).abs().max((mass - 1.0).abs());
            worst = worst.max(err);
            checks += 1;
            if (w - 1.0).abs() > 1e-12 || (mass - 1.0).abs() > 1e-12 {
                failures.push(format!("{} node {node}: w = {w}, prior mass = {mass}", inst.name));
            }
        }
    }
    Ok(SuiteResult {
        name: "initialization".into(),
        pass: failures.is_empty(),
        checks,
        worst,
        detail: fail_detail("initialization", &failures),
    })
}

/// Runs random histories through the learner and checks node weights
/// (first result) and arm distributions (second result) against the
/// enumerated experts and the flat mixture.
pub fn oracle_equivalence_suites(
    instances: &[OracleInstance],
    seeds: &[u64],
    rounds: usize,
    mutation: Mutation,
) -> Result<(SuiteResult, SuiteResult)> {
    const TOL: f64 = 1e-9;
    let (mut w_worst, mut p_worst) = (0.0f64, 0.0f64);
    let (mut w_checks, mut p_checks) = (0, 0);
    let (mut w_fail, mut p_fail) = (Vec::new(), Vec::new());
    for inst in instances {
        let s = &inst.structure;
        let m = inst.arms;
        let classes = (0..s.node_count())
            .map(|i| enumerate_weighted_experts(s, i, m))
            .collect::<Result<Vec<_>>>()?;
        for &seed in seeds {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let eta = rng.gen_range(0.05..1.0);
            let mut learner = HsbLearner::with_mutation(Arc::clone(s), m, eta, mutation)?;
            let mut flat = FlatMixture::from_structure(s, m, eta)?;
            let mut history = Vec::with_capacity(rounds);
            for t in 0..rounds {
                let ctx: Vec<f64> = (0..s.grid().dims()).map(|_| rng.gen()).collect();
                let d = learner.select_arm(&ctx, &mut rng)?;
                let oracle_p = flat.flat_simplex(d.cell)?;
                for (a, b) in d.simplex.iter().zip(&oracle_p) {
                    let e = relative_error(*a, *b);
                    p_worst = p_worst.max(e);
                    p_checks += 1;
                    if e > TOL {
                        p_fail.push(format!("{} seed {seed} round {t}: p {a} vs {b}", inst.name));
                    }
                }
                // occasional zero losses exercise the no-op branch
                let loss = if rng.gen_bool(0.1) { 0.0 } else { rng.gen::<f64>() };
                let mut est = vec![0.0; m];
                est[d.arm] = loss / d.simplex[d.arm];
                history.push((d.cell, est));
                flat.flat_update(d.cell, d.arm, d.simplex[d.arm], loss)?;
                learner.update(&d, loss)?;
            }
            for (node, class) in classes.iter().enumerate() {
                let oracle = log_total_weight(class, eta, &history).exp();
                let got = learner.log_w(node).exp();
                let e = relative_error(got, oracle);
                w_worst = w_worst.max(e);
                w_checks += 1;
                if e > TOL {
                    w_fail.push(format!("{} seed {seed} node {node}: {got} vs {oracle}", inst.name));
                }
            }
            for cell in 0..s.grid().total_cells() {
                let (gamma, _) = learner.log_gamma_root(cell);
                let oracle = log_arm_mass(&classes[s.root()], m, eta, &history, cell);
                for (g, o) in gamma.iter().zip(&oracle) {
                    let e = relative_error(g.exp(), o.exp());
                    p_worst = p_worst.max(e);
                    p_checks += 1;
                    if e > TOL {
                        p_fail.push(format!("{} seed {seed} cell {cell}: gamma {} vs {}", inst.name, g.exp(), o.exp()));
                    }
                }
            }
        }
    }
    Ok((
        SuiteResult {
            name: "node-weights".into(),
            pass: w_fail.is_empty(),
            checks: w_checks,
            worst: w_worst,
            detail: fail_detail("node-weights", &w_fail),
        },
        SuiteResult {
            name: "arm-distribution".into(),
            pass: p_fail.is_empty(),
            checks: p_checks,
            worst: p_worst,
            detail: fail_detail("arm-distribution", &p_fail),
        },
    ))
}

/// Oblivious adversarial losses for two cells and two arms: each cell's
/// better arm flips on a seed-dependent schedule and losses are noisy.
pub fn adversarial_sequence(seed: u64, horizon: usize) -> Vec<(f64, [f64; 2])> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let period = rng.gen_range(200..1200);
    let bias = rng.gen_range(0.1..0.4);
    (0..horizon)
        .map(|t| {
            let s: f64 = rng.gen();
            let cell = usize::from(s >= 0.5);
            let phase = (t / period + cell) % 2;
            let good = if rng.gen_bool(0.5 - bias) { 1.0 } else { 0.0 };
            let bad = if rng.gen_bool(0.5 + bias) { 1.0 } else { 0.0 };
            let losses = if phase == 0 { [good, bad] } else { [bad, good] };
            (s, losses)
        })
        .collect()
}

/// Mean regret of the flat mixture with equal priors over all mappings of
/// two cells to two arms, against every expert, compared with the
/// exponential-weights bound.
pub fn flat_mixture_bound_suite(seeds: &[u64], horizon: usize) -> Result<SuiteResult> {
    let grid = CellGrid::new(vec![2])?;
    let arms = 2;
    let probe = FlatMixture::uniform(&grid, arms, 1.0)?;
    let n_experts = probe.experts().len();
    let log_prior = probe.experts()[0].log_prior;
    let eta = (2.0 * -log_prior / (arms as f64 * horizon as f64)).sqrt();
    let mut regret_sums = vec![0.0; n_experts];
    for &seed in seeds {
        let seq = adversarial_sequence(seed, horizon);
        let mut flat = FlatMixture::uniform(&grid, arms, eta)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1);
        let mut alg_loss = 0.0;
        let mut expert_loss = vec![0.0; n_experts];
        for (s, losses) in &seq {
            let d = flat.select(&[*s], &mut rng)?;
            alg_loss += losses[d.arm];
            for (k, e) in flat.experts().iter().enumerate() {
                expert_loss[k] += losses[e.arm_at(d.cell).unwrap_or(0)];
            }
            flat.update(&d, losses[d.arm])?;
        }
        for (acc, l) in regret_sums.iter_mut().zip(&expert_loss) {
            *acc += alg_loss - l;
        }
    }
    let bound = mixture_regret_bound(log_prior, eta, arms, horizon as u64);
    let mut worst = f64::NEG_INFINITY;
    let mut failures = Vec::new();
    for (k, sum) in regret_sums.iter().enumerate() {
        let mean = sum / seeds.len() as f64;
        worst = worst.max(mean - bound);
        if mean > bound {
            failures.push(format!("expert {k}: mean regret {mean:.2} > bound {bound:.2}"));
        }
    }
    Ok(SuiteResult {
        name: "flat-mixture-bound".into(),
        pass: failures.is_empty(),
        checks: n_experts,
        worst,
        detail: if failures.is_empty() {
            format!("bound {bound:.2}, largest mean regret {:.2}", worst + bound)
        } else {
            fail_detail("flat-mixture-bound", &failures)
        },
    })
}

/// Largest slope of the sinusoidal mean-loss curves.
pub const SINUSOIDAL_LIPSCHITZ: f64 = std::f64::consts::PI;

/// Discretization gap of the sinusoidal mean losses against `2 c sqrt(n) /
/// N^(1/n)` for each grid size, plus a strict decrease from the first to
/// the last size.
pub fn quantization_suite(cells: &[usize], points: usize) -> Result<SuiteResult> {
    let reports = quantization_gap(
        |x| mean_losses(x[0], false).to_vec(),
        3,
        SINUSOIDAL_LIPSCHITZ,
        1,
        cells,
        points,
    )?;
    let mut failures = Vec::new();
    let mut worst = f64::NEG_INFINITY;
    for r in &reports {
        worst = worst.max(r.gap - r.bound);
        if !r.holds() {
            failures.push(format!("N={}: gap {} > bound {}", r.cells, r.gap, r.bound));
        }
    }
    if let (Some(first), Some(last)) = (reports.first(), reports.last()) {
        if reports.len() > 1 && last.gap >= first.gap {
            failures.push(format!("gap did not shrink: {} at N={} vs {} at N={}", last.gap, last.cells, first.gap, first.cells));
        }
    }
    let summary: Vec<String> = reports.iter().map(|r| format!("N={} gap={:.5}", r.cells, r.gap)).collect();
    Ok(SuiteResult {
        name: "quantization-gap".into(),
        pass: failures.is_empty(),
        checks: reports.len(),
        worst,
        detail: if failures.is_empty() {
            summary.join(", ")
        } else {
            fail_detail("quantization-gap", &failures)
        },
    })
}

/// Options for [`verify`].
#[derive(Debug, Clone)]
pub struct VerifyOptions {
    pub seeds: Vec<u64>,
    pub rounds: usize,
    pub bound_seeds: Vec<u64>,
    pub bound_horizon: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            seeds: (0..10).collect(),
            rounds: 200,
            bound_seeds: (0..20).collect(),
            bound_horizon: 5000,
        }
    }
}

/// Runs every suite, then reruns the oracle suites against two broken
/// learners and records whether each defect was caught.
pub fn verify(opts: &VerifyOptions) -> Result<VerifyReport> {
    let instances = small_instances()?;
    let mut suites = vec![initialization_suite(&instances, Mutation::None)?];
    let (w, p) = oracle_equivalence_suites(&instances, &opts.seeds, opts.rounds, Mutation::None)?;
    suites.push(w);
    suites.push(p);
    suites.push(flat_mixture_bound_suite(&opts.bound_seeds, opts.bound_horizon)?);
    suites.push(quantization_suite(&[4, 16, 64, 256], 1_000_000)?);

    let (_, p_mut) = oracle_equivalence_suites(&instances, &opts.seeds[..1.min(opts.seeds.len())], 50, Mutation::GammaAllChildren)?;
    suites.push(SuiteResult {
        name: "mutation:sibling-gamma".into(),
        pass: !p_mut.pass,
        checks: p_mut.checks,
        worst: p_mut.worst,
        detail: format!("arm-distribution suite {} on the broken learner", if p_mut.pass { "passed" } else { "failed" }),
    });
    let init_mut = initialization_suite(&instances, Mutation::DropPriorNormalizer)?;
    suites.push(SuiteResult {
        name: "mutation:prior-normalizer".into(),
        pass: !init_mut.pass,
        checks: init_mut.checks,
        worst: init_mut.worst,
        detail: format!(
            "initialization suite {} on the broken learner",
            if init_mut.pass { "passed" } else { "failed" }
        ),
    });
    Ok(VerifyReport { suites })
}
