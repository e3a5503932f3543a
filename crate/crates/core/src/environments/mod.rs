//! Loss sources for the bandits: the synthetic sinusoidal model, replay of
//! logged click data, and an error-correcting output code classifier whose
//! codewords serve as contexts.

mod ecoc;
mod replay;
mod sinusoidal;

pub use ecoc::{
    codeword_context, hamming_decode, load_labeled_csv, parse_labeled_csv, separable_dataset, CodingMatrix, EcocRound, EcocSetup,
    HammingDecoder, LabeledSample, Perceptron, RunningScaler,
};
pub use replay::{
    parse_logged_csv, read_logged_csv, replay_evaluate, uniform_logged_stream, write_logged_csv,
    LoggedRound, ReplayOutcome,
};
pub use sinusoidal::{mean_losses, optimal_arm, switch_threshold, FullInfoRound, Phase, SinusoidalEnv};
