//! Online learning on the stationary sinusoidal model with a binary-tree
//! learner, printing the running average loss against the clairvoyant rate.
//!
//! cargo run --release --example stationary_binary_tree

use std::sync::Arc;

use hsb::environments::{mean_losses, SinusoidalEnv};
use hsb::evaluation::{pointwise_optimal_rate, simulate};
use hsb::hierarchy::{binary_tree, CellGrid};
use hsb::learner::{optimal_eta, HsbLearner};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> hsb::Result<()> {
    let horizon = 50_000;
    let arms = SinusoidalEnv::ARMS;
    let structure = Arc::new(binary_tree(&CellGrid::new(vec![32])?)?);
    let params = structure.params();
    let a_r = params.a_r(3, arms).expect("binary trees have a closed-form A_R");
    let eta = optimal_eta(params.psi as f64, params.hs as f64, a_r, arms, horizon)?;
    let mut learner = HsbLearner::new(Arc::clone(&structure), arms, eta)?;

    let rounds = SinusoidalEnv::stationary(horizon).generate(7);
    let records = simulate(&mut learner, &rounds, &mut ChaCha8Rng::seed_from_u64(7))?;
    let best = pointwise_optimal_rate(|s| mean_losses(s, false).to_vec(), 100_000);

    println!("{} nodes, eta {eta:.4}, clairvoyant rate {best:.4}", structure.node_count());
    let mut total = 0.0;
    for r in &records {
        total += r.loss;
        let t = r.t + 1;
        if t % 10_000 == 0 {
            println!("t = {t:>6}  average loss {:.4}", total / t as f64);
        }
    }
    Ok(())
}
