//! The select/update protocol shared by every bandit in the crate.

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::Result;

/// One arm choice together with the distribution it was drawn from.
///
/// The simplex is needed again by `update` to form the importance-weighted
/// loss estimate, so it travels with the decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmDecision {
    pub arm: usize,
    pub simplex: Vec<f64>,
    /// Quantized cell of the context (0 for context-free policies).
    pub cell: usize,
    /// Round index the decision belongs to.
    pub round: u64,
}

/// A bandit that alternates strictly between `select` and `update`.
pub trait Policy: Send {
    fn arms(&self) -> usize;

    fn select(&mut self, context: &[f64], rng: &mut dyn RngCore) -> Result<ArmDecision>;

    /// Feeds the loss of `decision.arm`, which must come from the
    /// immediately preceding `select`.
    fn update(&mut self, decision: &ArmDecision, loss: f64) -> Result<()>;
}

/// A uniform draw in `[0, 1)`.
pub(crate) fn uniform_draw(rng: &mut dyn RngCore) -> f64 {
    rng.gen::<f64>()
}
