//! The loss model rotates a quarter of the way through the horizon. Compares
//! how quickly a binary-tree learner, per-cell EXP3 and plain EXP3 recover,
//! using the loss over the last quarter of rounds.
//!
//! cargo run --release --example switching_environment

use hsb::environments::SinusoidalEnv;
use hsb::evaluation::simulate;
use hsb::experiment::{presentation_rng, Algorithm, AlgorithmSpec, PolicyFactory};

fn main() -> hsb::Result<()> {
    let horizon = 60_000;
    let env = SinusoidalEnv::switched(horizon);
    println!("model switches at round {}", env.switch_round().unwrap_or(horizon));

    let specs = [
        AlgorithmSpec::new(Algorithm::HsbBt).depth(5).regions(3),
        AlgorithmSpec::new(Algorithm::Sexp3).depth(5),
        AlgorithmSpec::new(Algorithm::Exp3),
    ];
    let seeds = [1, 2, 3];
    for spec in &specs {
        let factory = PolicyFactory::new(spec, 1, SinusoidalEnv::ARMS, horizon)?;
        let mut tail = 0.0;
        for &seed in &seeds {
            let rounds = env.generate(seed);
            let mut policy = factory.make()?;
            let records = simulate(policy.as_mut(), &rounds, &mut presentation_rng(seed, 0))?;
            let last = &records[records.len() * 3 / 4..];
            tail += last.iter().map(|r| r.loss).sum::<f64>() / last.len() as f64;
        }
        println!("{:<10} last-quarter loss {:.4}", factory.info().label, tail / seeds.len() as f64);
    }
    Ok(())
}
