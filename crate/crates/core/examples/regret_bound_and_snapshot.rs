//! Picks a learning rate from the structure constants, checks one run's
//! regret against the guarantee, then saves the learner mid-run and shows
//! the restored copy continues identically.
//!
//! cargo run --release --example regret_bound_and_snapshot

use std::sync::Arc;

use hsb::environments::SinusoidalEnv;
use hsb::evaluation::{best_mapping_loss, simulate};
use hsb::hierarchy::{binary_tree, CellGrid};
use hsb::learner::{optimal_eta, optimal_regret_bound, regret_bound, HsbLearner};
use hsb::policy::Policy;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> hsb::Result<()> {
    let horizon = 40_000;
    let arms = SinusoidalEnv::ARMS;
    let grid = CellGrid::new(vec![16])?;
    let structure = Arc::new(binary_tree(&grid)?);
    let p = structure.params();
    let (psi, hs) = (p.psi as f64, p.hs as f64);
    let a_r = p.a_r(3, arms).expect("closed form exists for binary trees");
    let eta = optimal_eta(psi, hs, a_r, arms, horizon)?;
    println!("psi {psi}, hs {hs}, A_R {a_r}, eta {eta:.5}");
    println!(
        "guarantee at eta: {:.1} (closed form {:.1})",
        regret_bound(psi, hs, a_r, arms, horizon, eta),
        optimal_regret_bound(psi, hs, a_r, arms, horizon)
    );

    let rounds = SinusoidalEnv::stationary(horizon).generate(21);
    let mut learner = HsbLearner::new(Arc::clone(&structure), arms, eta)?;
    let records = simulate(&mut learner, &rounds, &mut ChaCha8Rng::seed_from_u64(21))?;
    let loss: f64 = records.iter().map(|r| r.loss).sum();
    let best = best_mapping_loss(&rounds, &grid)?;
    println!("regret against the best of {} mappings: {:.1}", arms.pow(16), loss - best.loss);

    // interrupt a run halfway and resume it from bytes
    let mut a = HsbLearner::new(Arc::clone(&structure), arms, eta)?;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let half = rounds.len() / 2;
    simulate(&mut a, &rounds[..half], &mut rng)?;
    let bytes = a.snapshot();
    let mut b = HsbLearner::restore(Arc::clone(&structure), &bytes)?;
    let mut rng_b = rng.clone();
    let tail_a = simulate(&mut a, &rounds[half..], &mut rng)?;
    let tail_b = simulate(&mut b, &rounds[half..], &mut rng_b)?;
    println!(
        "snapshot of {} bytes; resumed run identical: {}",
        bytes.len(),
        tail_a.iter().zip(&tail_b).all(|(x, y)| x.arm == y.arm && x.simplex == y.simplex)
    );
    println!("arms after resuming: {}", b.arms());
    Ok(())
}
