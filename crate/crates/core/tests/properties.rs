use std::sync::Arc;

use hsb::baselines::{Exp3, SExp3};
use hsb::environments::{
    parse_logged_csv, replay_evaluate, write_logged_csv, FullInfoRound, LoggedRound, SinusoidalEnv,
};
use hsb::evaluation::{best_mapping_loss, mapping_loss, quantization_gap, simulate};
use hsb::experiment::{Algorithm, AlgorithmSpec, ExperimentConfig};
use hsb::hierarchy::*;
use hsb::learner::HsbLearner;
use hsb::policy::{ArmDecision, Policy};
use proptest::prelude::*;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn structure(kind: usize, cells: usize) -> Structure {
    let line = CellGrid::new(vec![cells]).unwrap();
    match kind {
        0 => binary_tree(&CellGrid::new(vec![cells.next_power_of_two()]).unwrap()).unwrap(),
        1 => kary_tree(&CellGrid::new(vec![if cells > 4 { 9 } else { 3 }]).unwrap(), 3).unwrap(),
        2 => lexicographic_graph(&line).unwrap(),
        3 => kgroup_lexicographic(&line, 2).unwrap(),
        4 => arbitrary_splitting(&CellGrid::new(vec![cells.min(6)]).unwrap()).unwrap(),
        _ => arbitrary_position_splitting(&CellGrid::new(vec![cells.next_power_of_two(), 4]).unwrap(), 2).unwrap(),
    }
}

fn random_rounds(seed: u64, n: usize, cells: usize, arms: usize) -> Vec<FullInfoRound> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| FullInfoRound {
            context: vec![rng.gen_range(0..cells) as f64 / cells as f64 + 0.5 / cells as f64],
            losses: (0..arms).map(|_| rng.gen::<f64>()).collect(),
        })
        .collect()
}

/// Wraps a policy and records every update it receives.
struct Recording<P> {
    inner: P,
    updates: Vec<(usize, f64)>,
}

impl<P: Policy> Policy for Recording<P> {
    fn arms(&self) -> usize {
        self.inner.arms()
    }

    fn select(&mut self, context: &[f64], rng: &mut dyn RngCore) -> hsb::Result<ArmDecision> {
        self.inner.select(context, rng)
    }

    fn update(&mut self, decision: &ArmDecision, loss: f64) -> hsb::Result<()> {
        self.updates.push((decision.arm, loss));
        self.inner.update(decision, loss)
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 32, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn simplex_is_a_distribution(
        kind in 0usize..6,
        cells in 2usize..8,
        arms in 1usize..5,
        eta in 0.01f64..5.0,
        seed in any::<u64>(),
    ) {
        let s = Arc::new(structure(kind, cells));
        let mut learner = HsbLearner::new(Arc::clone(&s), arms, eta).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..100 {
            let ctx: Vec<f64> = (0..s.grid().dims()).map(|_| rng.gen()).collect();
            let d = learner.select_arm(&ctx, &mut rng).unwrap();
            prop_assert!((d.simplex.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert!(d.simplex.iter().all(|p| p.is_finite() && *p >= 0.0));
            prop_assert!(d.simplex[d.arm] > 0.0);
            learner.update(&d, rng.gen()).unwrap();
        }
    }

    #[test]
    fn every_chain_runs_leaf_to_root_through_containing_nodes(kind in 0usize..6, cells in 2usize..9) {
        let s = structure(kind, cells);
        s.check_partitions().unwrap();
        for cell in 0..s.grid().total_cells() {
            let chain = s.chain(cell);
            prop_assert_eq!(*chain.nodes().last().unwrap(), s.root());
            prop_assert!(chain.nodes().iter().all(|&n| s.contains(n, cell)));
            let mut holding = s.nodes_containing(cell);
            let mut on_chain = chain.nodes().to_vec();
            holding.sort_unstable();
            on_chain.sort_unstable();
            prop_assert_eq!(holding, on_chain);
        }
    }

    #[test]
    fn snapshot_restores_bit_identical_state(seed in any::<u64>(), rounds in 0usize..300) {
        let s = Arc::new(binary_tree(&CellGrid::new(vec![16]).unwrap()).unwrap());
        let mut a = HsbLearner::new(Arc::clone(&s), 3, 0.2).unwrap();
        let data = random_rounds(seed, rounds, 16, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        simulate(&mut a, &data, &mut rng).unwrap();
        let mut b = HsbLearner::restore(Arc::clone(&s), &a.snapshot()).unwrap();
        prop_assert_eq!(a.round(), b.round());
        for node in 0..s.node_count() {
            prop_assert_eq!(a.log_w(node).to_bits(), b.log_w(node).to_bits());
            prop_assert_eq!(a.log_alpha(node), b.log_alpha(node));
        }
        let more = random_rounds(seed ^ 1, 50, 16, 3);
        let ra = simulate(&mut a, &more, &mut rng.clone()).unwrap();
        let rb = simulate(&mut b, &more, &mut rng).unwrap();
        prop_assert_eq!(ra, rb);
    }

    #[test]
    fn best_mapping_matches_brute_force(seed in any::<u64>(), cells in 1usize..5, arms in 1usize..4) {
        let grid = CellGrid::new(vec![cells]).unwrap();
        let data = random_rounds(seed, 60, cells, arms);
        let best = best_mapping_loss(&data, &grid).unwrap();
        let mut brute = f64::INFINITY;
        for code in 0..arms.pow(cells as u32) {
            let mapping: Vec<usize> = (0..cells).map(|c| code / arms.pow(c as u32) % arms).collect();
            brute = brute.min(mapping_loss(&data, &grid, &mapping).unwrap());
        }
        prop_assert!((best.loss - brute).abs() < 1e-9);
        prop_assert!((mapping_loss(&data, &grid, &best.mapping).unwrap() - best.loss).abs() < 1e-9);
    }

    #[test]
    fn replay_only_learns_from_displayed_arms(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let log: Vec<LoggedRound> = (0..400)
            .map(|_| LoggedRound {
                context: vec![rng.gen()],
                displayed_arm: rng.gen_range(0..3),
                clicked: rng.gen_bool(0.4),
            })
            .collect();
        let grid = CellGrid::new(vec![4]).unwrap();
        let mut policy = Recording { inner: SExp3::new(grid, 3, 400).unwrap(), updates: Vec::new() };
        let out = replay_evaluate(&mut policy, &log, &mut rng).unwrap();
        prop_assert_eq!(out.rounds, 400);
        prop_assert_eq!(out.matched, policy.updates.len() as u64);
        let losses: f64 = policy.updates.iter().map(|u| u.1).sum();
        prop_assert_eq!(losses as u64, out.loss);
    }

    #[test]
    fn logged_csv_round_trips(seed in any::<u64>(), dims in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let log: Vec<LoggedRound> = (0..30)
            .map(|_| LoggedRound {
                context: (0..dims).map(|_| rng.gen()).collect(),
                displayed_arm: rng.gen_range(0..5),
                clicked: rng.gen(),
            })
            .collect();
        let mut buf = Vec::new();
        write_logged_csv(&log, &mut buf).unwrap();
        prop_assert_eq!(parse_logged_csv(buf.as_slice()).unwrap(), log);
    }

    #[test]
    fn quantization_gap_respects_lipschitz_bound(freq in 0.5f64..8.0, phase in 0.0f64..6.3) {
        let c = std::f64::consts::PI * freq;
        let reports = quantization_gap(
            |x| vec![0.5 + 0.5 * (std::f64::consts::PI * freq * x[0] + phase).sin(), 0.5],
            2,
            c,
            1,
            &[1, 2, 8, 32],
            4000,
        )
        .unwrap();
        for r in reports {
            prop_assert!(r.holds(), "N={} gap {} bound {}", r.cells, r.gap, r.bound);
        }
    }
}

#[test]
fn importance_weighted_loss_is_unbiased() {
    // the estimate loss / p on the drawn arm averages to the true loss
    let mut learner = HsbLearner::new(Arc::new(binary_tree(&CellGrid::new(vec![4]).unwrap()).unwrap()), 3, 0.5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..50 {
        let d = learner.select_arm(&[0.3], &mut rng).unwrap();
        learner.update(&d, if d.arm == 0 { 0.9 } else { 0.1 }).unwrap();
    }
    let losses = [0.9, 0.1, 0.6];
    let draws = 200_000;
    let mut estimate = [0.0; 3];
    let simplex = learner.simplex(&[0.3]).unwrap();
    for _ in 0..draws {
        let d = learner.select_arm(&[0.3], &mut rng).unwrap();
        estimate[d.arm] += losses[d.arm] / d.simplex[d.arm];
        // discard the round so the distribution stays fixed
        learner = HsbLearner::restore(Arc::clone(learner.structure()), &learner.snapshot()).unwrap();
    }
    for arm in 0..3 {
        let mean = estimate[arm] / draws as f64;
        let sd = losses[arm] * ((1.0 / simplex[arm] - 1.0) / draws as f64).sqrt();
        assert!((mean - losses[arm]).abs() < 4.0 * sd + 1e-12, "arm {arm}: {mean} vs {}", losses[arm]);
    }
}

#[test]
fn config_round_trips_through_toml() {
    let cfg = ExperimentConfig::from_toml_str(
        "horizon = 1000\nseeds = [3, 4]\npresentations = 2\nrecord_rounds = true\n\n\
         [environment]\nkind = \"sinusoidal\"\nphase = \"switched\"\nswitch_fraction = 0.5\n\n\
         [[algorithms]]\nalgorithm = \"hsb-kgroup\"\nleaves = 9\nk = 3\neta = 0.2\n\n\
         [[algorithms]]\nalgorithm = \"hsb-bt\"\ndepth = 4\nregions = 2\neta = \"auto\"\n",
    )
    .unwrap();
    let text = cfg.to_toml_string().unwrap();
    assert_eq!(ExperimentConfig::from_toml_str(&text).unwrap(), cfg);
    assert_eq!(cfg.algorithms[0], AlgorithmSpec::new(Algorithm::HsbKgroup).leaves(9).k(3).eta(0.2));
}

#[test]
fn seeded_runs_are_reproducible() {
    let data = SinusoidalEnv::switched(5000).generate(8);
    let run = || {
        let mut e = Exp3::new(3, 5000).unwrap();
        simulate(&mut e, &data, &mut ChaCha8Rng::seed_from_u64(2)).unwrap()
    };
    assert_eq!(run(), run());
    assert_eq!(SinusoidalEnv::switched(5000).generate(8), data);
}
