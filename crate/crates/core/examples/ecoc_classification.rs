//! Online multi-class classification. One perceptron per class produces a
//! one-vs-all codeword, and a bandit learner maps codewords to predicted
//! classes from correct/incorrect feedback only. Hamming decoding of the same
//! codewords is the reference.
//!
//! cargo run --release --example ecoc_classification

use hsb::environments::{separable_dataset, CodingMatrix, EcocSetup, HammingDecoder};
use hsb::experiment::{presentation_rng, Algorithm, AlgorithmSpec, PolicyFactory};
use hsb::policy::Policy;

fn main() -> hsb::Result<()> {
    let classes = 4;
    let features = 12;
    let data = separable_dataset(classes, features, 6000, 11)?;
    let matrix = CodingMatrix::one_vs_all(classes)?;

    let factory = PolicyFactory::new(
        &AlgorithmSpec::new(Algorithm::HsbAps).depth(4).regions(classes),
        classes,
        classes,
        data.len() as u64,
    )?;
    let policies: Vec<(String, Box<dyn Policy>)> = vec![
        (factory.info().label.clone(), factory.make()?),
        ("hamming".into(), Box::new(HammingDecoder::new(matrix.clone()))),
    ];
    for (label, mut policy) in policies {
        let mut setup = EcocSetup::new(matrix.clone(), features);
        let mut rng = presentation_rng(11, 0);
        let mut errors = 0;
        for (t, sample) in data.iter().enumerate() {
            let round = setup.observe(&sample.features, sample.label)?;
            let d = policy.select(&round.context, &mut rng)?;
            let loss = round.loss(d.arm);
            policy.update(&d, loss)?;
            setup.train(&round);
            errors += loss as usize;
            if (t + 1) % 1500 == 0 {
                println!("{label:<8} after {:>5} samples: error rate {:.4}", t + 1, errors as f64 / (t + 1) as f64);
            }
        }
    }
    Ok(())
}
