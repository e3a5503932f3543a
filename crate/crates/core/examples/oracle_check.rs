//! Enumerates every expert of a small hierarchy, runs the flat mixture over
//! them side by side with the hierarchical learner, and shows that both give
//! the same arm distribution while the learner touches only one chain.
//!
//! cargo run --example oracle_check

use std::sync::Arc;

use hsb::experts::{enumerate_weighted_experts, log_prior_mass, FlatMixture};
use hsb::hierarchy::{lexicographic_graph, CellGrid};
use hsb::learner::HsbLearner;
use hsb::policy::Policy;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> hsb::Result<()> {
    let arms = 2;
    let eta = 0.3;
    let structure = Arc::new(lexicographic_graph(&CellGrid::new(vec![4])?)?);
    let experts = enumerate_weighted_experts(&structure, structure.root(), arms)?;
    println!(
        "{} experts, total prior mass {:.15}",
        experts.len(),
        log_prior_mass(&experts).exp()
    );
    for e in experts.iter().take(4) {
        println!("  prior {:.5}  arms by cell {:?}", e.prior(), e.assignment().collect::<Vec<_>>());
    }

    let mut learner = HsbLearner::new(Arc::clone(&structure), arms, eta)?;
    let mut flat = FlatMixture::from_structure(&structure, arms, eta)?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for _ in 0..500 {
        let s: f64 = rng.gen();
        let d = learner.select(&[s], &mut rng)?;
        let reference = flat.flat_simplex(d.cell)?;
        for (a, b) in d.simplex.iter().zip(&reference) {
            worst = worst.max((a - b).abs());
        }
        let loss = if rng.gen_bool(0.3 + 0.4 * s) { 1.0 } else { 0.0 };
        flat.flat_update(d.cell, d.arm, d.simplex[d.arm], loss)?;
        learner.update(&d, loss)?;
    }
    let touches = learner.touch_stats();
    println!("largest simplex difference over 500 rounds: {worst:.2e}");
    println!(
        "last round touched {} node-arm pairs and rewrote {} nodes out of {}",
        touches.select_evaluations,
        touches.update_writes,
        structure.node_count()
    );
    Ok(())
}
