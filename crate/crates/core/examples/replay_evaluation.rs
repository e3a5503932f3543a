//! Offline evaluation from click logs. Writes a log collected by a uniform
//! logging policy to CSV, reads it back, and scores two policies on it.
//! With a path argument the log is read from that file instead.
//!
//! cargo run --release --example replay_evaluation [-- log.csv]

use std::fs::File;
use std::io::BufWriter;

use hsb::environments::{read_logged_csv, replay_evaluate, uniform_logged_stream, write_logged_csv, SinusoidalEnv};
use hsb::experiment::{presentation_rng, Algorithm, AlgorithmSpec, PolicyFactory};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> hsb::Result<()> {
    let log = match std::env::args().nth(1) {
        Some(path) => read_logged_csv(path.as_ref())?,
        None => {
            let rounds = SinusoidalEnv::stationary(60_000).generate(3);
            let log = uniform_logged_stream(&rounds, &mut ChaCha8Rng::seed_from_u64(99));
            let path = std::env::temp_dir().join("hsb_replay_example.csv");
            write_logged_csv(&log, BufWriter::new(File::create(&path)?))?;
            println!("wrote {} logged rounds to {}", log.len(), path.display());
            read_logged_csv(&path)?
        }
    };
    let arms = log.iter().map(|r| r.displayed_arm + 1).max().unwrap_or(1);
    let dims = log.first().map_or(1, |r| r.context.len());
    let matched_rounds = (log.len() / arms).max(1) as u64;

    for spec in [
        AlgorithmSpec::new(Algorithm::HsbBt).depth(5).regions(3),
        AlgorithmSpec::new(Algorithm::Exp3),
    ] {
        let factory = PolicyFactory::new(&spec, dims, arms, matched_rounds)?;
        let mut policy = factory.make()?;
        let out = replay_evaluate(policy.as_mut(), &log, &mut presentation_rng(3, 0))?;
        println!(
            "{:<8} click rate {:.4} over {} matched of {} rounds",
            factory.info().label,
            out.click_rate().unwrap_or(f64::NAN),
            out.matched,
            out.rounds
        );
    }
    Ok(())
}
