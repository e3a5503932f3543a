use std::sync::Arc;

use hsb::experts::{enumerate_weighted_experts, log_arm_mass, log_prior_mass, log_total_weight, FlatMixture};
use hsb::hierarchy::*;
use hsb::learner::HsbLearner;
use hsb::numerics::relative_error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn line(n: usize) -> CellGrid {
    CellGrid::new(vec![n]).unwrap()
}

fn small_structures() -> Vec<(&'static str, Structure)> {
    vec![
        ("binary", binary_tree(&line(4)).unwrap()),
        ("kary", kary_tree(&line(3), 3).unwrap()),
        ("lexicographic", lexicographic_graph(&line(3)).unwrap()),
        ("kgroup", kgroup_lexicographic(&line(4), 3).unwrap()),
        ("arbitrary", arbitrary_splitting(&line(3)).unwrap()),
        ("position", arbitrary_position_splitting(&CellGrid::new(vec![2, 2]).unwrap(), 2).unwrap()),
    ]
}

fn random_context(grid: &CellGrid, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..grid.dims()).map(|_| rng.gen::<f64>()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn node_weights_match_enumerated_experts(
        seed in any::<u64>(),
        arms in 2usize..=3,
        eta in 0.05f64..1.0,
        rounds in 1usize..=200,
    ) {
        for (name, s) in small_structures() {
            let s = Arc::new(s);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut learner = HsbLearner::new(Arc::clone(&s), arms, eta).unwrap();
            let mut mixture = FlatMixture::from_structure(&s, arms, eta).unwrap();
            let classes: Vec<_> = (0..s.node_count())
                .map(|i| enumerate_weighted_experts(&s, i, arms).unwrap())
                .collect();
            let mut history = Vec::new();
            for _ in 0..rounds {
                let ctx = random_context(s.grid(), &mut rng);
                let d = learner.select_arm(&ctx, &mut rng).unwrap();
                let flat = mixture.flat_simplex(d.cell).unwrap();
                for (a, b) in d.simplex.iter().zip(&flat) {
                    prop_assert!(relative_error(*a, *b) < 1e-9, "{name}: simplex {a} vs {b}");
                }
                let loss: f64 = rng.gen();
                let mut est = vec![0.0; arms];
                est[d.arm] = loss / d.simplex[d.arm];
                history.push((d.cell, est));
                mixture.flat_update(d.cell, d.arm, d.simplex[d.arm], loss).unwrap();
                learner.update(&d, loss).unwrap();
            }
            for (i, class) in classes.iter().enumerate() {
                let oracle = log_total_weight(class, eta, &history).exp();
                let got = learner.log_w(i).exp();
                prop_assert!(relative_error(got, oracle) < 1e-9, "{name} node {i}: {got} vs {oracle}");
            }
            for cell in 0..s.grid().total_cells() {
                let (gamma, _) = learner.log_gamma_root(cell);
                let oracle = log_arm_mass(&classes[s.root()], arms, eta, &history, cell);
                for (g, o) in gamma.iter().zip(&oracle) {
                    prop_assert!(relative_error(g.exp(), o.exp()) < 1e-9, "{name} cell {cell}");
                }
            }
        }
    }
}

#[test]
fn priors_and_initial_weights_are_normalized() {
    for (name, s) in small_structures() {
        let learner = HsbLearner::new(Arc::new(s.clone()), 3, 0.3).unwrap();
        for i in 0..s.node_count() {
            assert_eq!(learner.log_w(i), 0.0, "{name} node {i}");
            let class = enumerate_weighted_experts(&s, i, 3).unwrap();
            assert!((log_prior_mass(&class).exp() - 1.0).abs() < 1e-12, "{name} node {i}");
        }
    }
}
