use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// A context together with the loss every arm would have incurred.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FullInfoRound {
    pub context: Vec<f64>,
    pub losses: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Phase {
    Stationary,
    /// The arm roles rotate after `fraction * horizon` rounds.
    Switched { fraction: f64 },
}

/// Loss probabilities of the three arms at context `s`. The switched model
/// rotates the roles: arm 0 takes arm 1's curve, arm 1 takes arm 2's and
/// arm 2 takes arm 0's.
pub fn mean_losses(s: f64, switched: bool) -> [f64; 3] {
    let a = 0.5 + 0.5 * (2.0 * PI * s).sin();
    let b = (PI * s).sin();
    let c = s;
    if switched {
        [b, c, a]
    } else {
        [a, b, c]
    }
}

/// The arm with the smallest loss probability at `s` (lowest index on ties).
pub fn optimal_arm(s: f64, switched: bool) -> usize {
    let p = mean_losses(s, switched);
    let mut best = 0;
    for (i, &v) in p.iter().enumerate() {
        if v < p[best] {
            best = i;
        }
    }
    best
}

/// The point in `(0.5, 1)` where arm 0 and arm 1 of the stationary model
/// have equal loss probability, found by bisection.
pub fn switch_threshold() -> f64 {
    let f = |s: f64| {
        let p = mean_losses(s, false);
        p[0] - p[1]
    };
    let (mut lo, mut hi) = (0.6, 0.99);
    debug_assert!(f(lo) < 0.0 && f(hi) > 0.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Three Bernoulli arms whose loss probabilities vary sinusoidally with a
/// uniform one-dimensional context.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinusoidalEnv {
    pub phase: Phase,
    pub horizon: u64,
}

impl SinusoidalEnv {
    pub const ARMS: usize = 3;

    pub fn stationary(horizon: u64) -> Self {
        SinusoidalEnv {
            phase: Phase::Stationary,
            horizon,
        }
    }

    pub fn switched(horizon: u64) -> Self {
        SinusoidalEnv {
            phase: Phase::Switched { fraction: 0.25 },
            horizon,
        }
    }

    /// First round (0-based) that uses the rotated model.
    pub fn switch_round(&self) -> Option<u64> {
        match self.phase {
            Phase::Stationary => None,
            Phase::Switched { fraction } => Some((fraction * self.horizon as f64).floor() as u64),
        }
    }

    pub fn is_switched_at(&self, t: u64) -> bool {
        self.switch_round().is_some_and(|r| t >= r)
    }

    pub fn step<R: Rng + ?Sized>(&self, t: u64, rng: &mut R) -> FullInfoRound {
        let s: f64 = rng.gen();
        let p = mean_losses(s, self.is_switched_at(t));
        let losses = p
            .iter()
            .map(|&q| if rng.gen::<f64>() < q { 1.0 } else { 0.0 })
            .collect();
        FullInfoRound {
            context: vec![s],
            losses,
        }
    }

    /// The full stream for one dataset seed.
    pub fn generate(&self, seed: u64) -> Vec<FullInfoRound> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..self.horizon).map(|t| self.step(t, &mut rng)).collect()
    }
}
