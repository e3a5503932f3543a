//! Context-free EXP3 and its per-cell contextual extension.

use rand::RngCore;

use crate::error::{Error, Result};
use crate::hierarchy::CellGrid;
use crate::numerics::{sample_index, LogSumExp};
use crate::policy::{uniform_draw, ArmDecision, Policy};

/// Exploration rate and learning rate of EXP3 tuned for a known horizon:
/// `gamma = min(1, sqrt(M ln M / ((e - 1) T)))` and `eta = gamma / M`.
pub fn exp3_tuning(arms: usize, horizon: u64) -> (f64, f64) {
    let m = arms as f64;
    let gamma = if arms < 2 {
        1.0
    } else {
        (m * m.ln() / ((std::f64::consts::E - 1.0) * horizon.max(1) as f64))
            .sqrt()
            .min(1.0)
    };
    (gamma, gamma / m)
}

#[derive(Debug, Clone, Copy)]
struct Exp3Pending {
    arm: usize,
    round: u64,
    p: f64,
}

/// Exponential weights on importance-weighted losses, mixed with the
/// uniform distribution.
#[derive(Debug, Clone)]
pub struct Exp3 {
    log_weights: Vec<f64>,
    gamma: f64,
    eta: f64,
    round: u64,
    pending: Option<Exp3Pending>,
}

impl Exp3 {
    pub fn new(arms: usize, horizon: u64) -> Result<Self> {
        let (gamma, eta) = exp3_tuning(arms, horizon);
        Self::with_params(arms, gamma, eta)
    }

    pub fn with_params(arms: usize, gamma: f64, eta: f64) -> Result<Self> {
        if arms == 0 {
            return Err(Error::config("a bandit needs at least one arm"));
        }
        if !(0.0..=1.0).contains(&gamma) || !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::domain(format!(
                "EXP3 needs gamma in [0, 1] and eta > 0, got {gamma} and {eta}"
            )));
        }
        Ok(Exp3 {
            log_weights: vec![0.0; arms],
            gamma,
            eta,
            round: 0,
            pending: None,
        })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn simplex(&self) -> Vec<f64> {
        let m = self.log_weights.len() as f64;
        let mut total = LogSumExp::new();
        for &w in &self.log_weights {
            total.add(w);
        }
        let norm = total.value();
        self.log_weights
            .iter()
            .map(|w| (1.0 - self.gamma) * (w - norm).exp() + self.gamma / m)
            .collect()
    }

    fn draw(&mut self, rng: &mut dyn RngCore) -> (usize, Vec<f64>) {
        let simplex = self.simplex();
        let arm = sample_index(&simplex, uniform_draw(rng));
        self.pending = Some(Exp3Pending {
            arm,
            round: self.round,
            p: simplex[arm],
        });
        (arm, simplex)
    }

    fn feed(&mut self, arm: usize, round: u64, loss: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&loss) {
            return Err(Error::domain(format!("loss {loss} is outside [0, 1]")));
        }
        match self.pending {
            Some(p) if p.arm == arm && p.round == round => {
                self.log_weights[arm] -= self.eta * loss / p.p;
                self.pending = None;
                self.round += 1;
                Ok(())
            }
            _ => Err(Error::Protocol(
                "update must follow the select call that produced the decision".into(),
            )),
        }
    }
}

impl Policy for Exp3 {
    fn arms(&self) -> usize {
        self.log_weights.len()
    }

    fn select(&mut self, _context: &[f64], rng: &mut dyn RngCore) -> Result<ArmDecision> {
        let round = self.round;
        let (arm, simplex) = self.draw(rng);
        Ok(ArmDecision {
            arm,
            simplex,
            cell: 0,
            round,
        })
    }

    fn update(&mut self, decision: &ArmDecision, loss: f64) -> Result<()> {
        self.feed(decision.arm, decision.round, loss)
    }
}

/// One independent EXP3 instance per grid cell.
///
/// Each cell is tuned for `horizon / N` rounds, its expected share of a
/// horizon when contexts spread evenly over the cells.
#[derive(Debug, Clone)]
pub struct SExp3 {
    grid: CellGrid,
    cells: Vec<Exp3>,
    round: u64,
    pending: Option<(usize, u64)>,
}

impl SExp3 {
    pub fn new(grid: CellGrid, arms: usize, horizon: u64) -> Result<Self> {
        let n = grid.total_cells() as u64;
        let per_cell = (horizon / n).max(1);
        let cell = Exp3::new(arms, per_cell)?;
        Ok(SExp3 {
            cells: vec![cell; n as usize],
            grid,
            round: 0,
            pending: None,
        })
    }

    pub fn grid(&self) -> &CellGrid {
        &self.grid
    }

    pub fn cell(&self, cell: usize) -> &Exp3 {
        &self.cells[cell]
    }
}

impl Policy for SExp3 {
    fn arms(&self) -> usize {
        self.cells[0].log_weights.len()
    }

    fn select(&mut self, context: &[f64], rng: &mut dyn RngCore) -> Result<ArmDecision> {
        let cell = self.grid.quantize(context)?;
        let inner = &mut self.cells[cell];
        let inner_round = inner.round;
        let (arm, simplex) = inner.draw(rng);
        self.pending = Some((cell, inner_round));
        Ok(ArmDecision {
            arm,
            simplex,
            cell,
            round: self.round,
        })
    }

    fn update(&mut self, decision: &ArmDecision, loss: f64) -> Result<()> {
        match self.pending {
            Some((cell, inner_round)) if cell == decision.cell && decision.round == self.round => {
                self.cells[cell].feed(decision.arm, inner_round, loss)?;
                self.pending = None;
                self.round += 1;
                Ok(())
            }
            _ => Err(Error::Protocol(
                "update must follow the select call that produced the decision".into(),
            )),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn fresh_simplex_is_uniform() {
        let e = Exp3::new(4, 1000).unwrap();
        for p in e.simplex() {
            assert!((p - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn tuning_formula() {
        let (g, eta) = exp3_tuning(2, 10_000);
        let expected = (2.0 * 2f64.ln() / ((std::f64::consts::E - 1.0) * 1e4)).sqrt();
        assert!((g - expected).abs() < 1e-15);
        assert!((eta - g / 2.0).abs() < 1e-15);
        assert_eq!(exp3_tuning(3, 1).0, 1.0);
    }

    #[test]
    fn zero_loss_keeps_weights() {
        let mut e = Exp3::new(3, 100).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let d = e.select(&[], &mut rng).unwrap();
        e.update(&d, 0.0).unwrap();
        assert_eq!(e.log_weights(), &[0.0; 3]);
        assert!(matches!(e.update(&d, 0.0), Err(Error::Protocol(_))));
    }

    #[test]
    fn learns_the_lossless_arm() {
        let t = 10_000;
        let mut e = Exp3::new(2, t).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..t {
            let d = e.select(&[], &mut rng).unwrap();
            let loss = if d.arm == 0 { 1.0 } else { 0.0 };
            e.update(&d, loss).unwrap();
        }
        assert!(e.simplex()[1] >= 0.9);
    }

    #[test]
    fn exploration_floor() {
        let mut e = Exp3::with_params(3, 0.3, 5.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let d = e.select(&[], &mut rng).unwrap();
            e.update(&d, 1.0).unwrap();
            let s = e.simplex();
            assert!((s.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(s.iter().all(|&p| p >= 0.1 - 1e-12));
        }
    }

    #[test]
    fn single_cell_matches_exp3() {
        let grid = CellGrid::new(vec![1]).unwrap();
        let mut s = SExp3::new(grid, 3, 500).unwrap();
        let mut e = Exp3::new(3, 500).unwrap();
        let mut r1 = ChaCha8Rng::seed_from_u64(11);
        let mut r2 = ChaCha8Rng::seed_from_u64(11);
        for t in 0..500 {
            let a = s.select(&[0.4], &mut r1).unwrap();
            let b = e.select(&[0.4], &mut r2).unwrap();
            assert_eq!(a, b);
            let loss = ((t * 7) % 3) as f64 / 2.0;
            s.update(&a, loss).unwrap();
            e.update(&b, loss).unwrap();
        }
    }

    #[test]
    fn other_cells_stay_fresh() {
        let grid = CellGrid::new(vec![4]).unwrap();
        let mut s = SExp3::new(grid, 2, 400).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let d = s.select(&[0.1], &mut rng).unwrap();
            s.update(&d, 1.0).unwrap();
        }
        assert_ne!(s.cell(0).log_weights(), &[0.0, 0.0]);
        for c in 1..4 {
            assert_eq!(s.cell(c).log_weights(), &[0.0, 0.0]);
        }
    }
}
