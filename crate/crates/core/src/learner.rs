//! The hierarchical-structure bandit learner.
//!
//! Every node keeps one weight per arm and a node weight `w`, which equals the
//! total prior-weighted exponentiated loss of every expert (partition plus
//! arm assignment) expressible under that node. The arm distribution for a
//! context is obtained by a bottom-up pass over the nodes containing its cell,
//! so one round costs `O(M)` per such node instead of touching the
//! exponentially many experts.
//!
//! All weights live in the natural-log domain.

use std::sync::Arc;

use rand::RngCore;

use crate::error::{Error, Result};
use crate::hierarchy::{Chain, Structure};
use crate::numerics::{sample_index, LogSumExp};
use crate::policy::{uniform_draw, ArmDecision, Policy};

/// Deliberate defects in the recursions, used to check that the oracle
/// suites actually catch broken implementations.
#[doc(hidden)]
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mutation {
    #[default]
    None,
    /// Siblings that do not contain the context contribute `w / M` as if
    /// they did, instead of their plain `w`.
    GammaAllChildren,
    /// Leaves out the `1 / (|groups| + 1)` factor of the node recursion.
    DropPriorNormalizer,
}

/// Number of nodes read and written by the most recent calls.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TouchStats {
    /// (node, arm) pairs evaluated while forming the last simplex.
    pub select_evaluations: usize,
    /// Nodes whose weights were rewritten by the last update.
    pub update_writes: usize,
}

#[derive(Debug, Clone)]
struct Pending {
    chain: Chain,
    arm: usize,
    round: u64,
}

#[derive(Debug, Clone)]
pub struct HsbLearner {
    structure: Arc<Structure>,
    arms: usize,
    eta: f64,
    log_alpha: Vec<f64>,
    log_w: Vec<f64>,
    round: u64,
    pending: Option<Pending>,
    stats: TouchStats,
    mutation: Mutation,
    // scratch: log gamma per chain position and arm
    gamma: Vec<f64>,
}

impl HsbLearner {
    pub fn new(structure: Arc<Structure>, arms: usize, eta: f64) -> Result<Self> {
        Self::with_mutation(structure, arms, eta, Mutation::None)
    }

    #[doc(hidden)]
    pub fn with_mutation(
        structure: Arc<Structure>,
        arms: usize,
        eta: f64,
        mutation: Mutation,
    ) -> Result<Self> {
        if arms == 0 {
            return Err(Error::config("a bandit needs at least one arm"));
        }
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::domain(format!("learning rate must be positive, got {eta}")));
        }
        let h = structure.node_count();
        let mut learner = HsbLearner {
            arms,
            eta,
            log_alpha: vec![0.0; h * arms],
            log_w: vec![0.0; h],
            round: 0,
            pending: None,
            stats: TouchStats::default(),
            mutation,
            gamma: Vec::new(),
            structure,
        };
        let structure = Arc::clone(&learner.structure);
        for &node in structure.bottom_up_order() {
            learner.log_w[node as usize] = learner.node_log_w(node as usize);
        }
        Ok(learner)
    }

    pub fn structure(&self) -> &Arc<Structure> {
        &self.structure
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// Number of completed rounds.
    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn log_w(&self, node: usize) -> f64 {
        self.log_w[node]
    }

    pub fn log_alpha(&self, node: usize) -> &[f64] {
        &self.log_alpha[node * self.arms..(node + 1) * self.arms]
    }

    pub fn touch_stats(&self) -> TouchStats {
        self.stats
    }

    fn group_log_norm(&self, node: usize) -> f64 {
        match self.mutation {
            Mutation::DropPriorNormalizer => 0.0,
            _ => ((self.structure.num_groups(node) + 1) as f64).ln(),
        }
    }

    /// Node weight recursion evaluated from the current arm weights and the
    /// stored weights of the children.
    fn node_log_w(&self, node: usize) -> f64 {
        let norm = self.group_log_norm(node);
        let arm_norm = norm + (self.arms as f64).ln();
        let mut acc = LogSumExp::new();
        for &a in self.log_alpha(node) {
            acc.add(a - arm_norm);
        }
        for group in self.structure.child_groups(node) {
            let product: f64 = group.iter().map(|&j| self.log_w[j as usize]).sum();
            acc.add(product - norm);
        }
        acc.value()
    }

    /// Fills `self.gamma` with log gamma for every chain position and arm.
    fn fill_gamma(&mut self, chain: &Chain) {
        let m = self.arms;
        let ln_m = (m as f64).ln();
        self.gamma.clear();
        self.gamma.resize(chain.len() * m, 0.0);
        for (pos, &node) in chain.nodes().iter().enumerate() {
            let norm = self.group_log_norm(node);
            let hits = chain.hits(pos);
            // sum of log w over each group's members that do not hold the cell
            let mut sibling_terms = Vec::with_capacity(hits.len());
            for (group, &hit) in self.structure.child_groups(node).zip(hits) {
                let hit_node = chain.nodes()[hit] as u32;
                let siblings: f64 = group
                    .iter()
                    .filter(|&&j| j != hit_node)
                    .map(|&j| match self.mutation {
                        Mutation::GammaAllChildren => self.log_w[j as usize] - ln_m,
                        _ => self.log_w[j as usize],
                    })
                    .sum();
                sibling_terms.push((hit, siblings - norm));
            }
            for arm in 0..m {
                let mut acc = LogSumExp::new();
                acc.add(self.log_alpha[node * m + arm] - norm - ln_m);
                for &(hit, rest) in &sibling_terms {
                    acc.add(self.gamma[hit * m + arm] + rest);
                }
                self.gamma[pos * m + arm] = acc.value();
            }
        }
        self.stats.select_evaluations = chain.len() * m;
    }

    /// Log of the prior-weighted mass of experts choosing each arm at `cell`,
    /// evaluated at the root, together with the root's log weight.
    pub fn log_gamma_root(&mut self, cell: usize) -> (Vec<f64>, f64) {
        let chain = self.structure.chain(cell);
        self.fill_gamma(&chain);
        let last = chain.len() - 1;
        let g = self.gamma[last * self.arms..(last + 1) * self.arms].to_vec();
        (g, self.log_w[self.structure.root()])
    }

    fn simplex_for(&mut self, chain: &Chain) -> Vec<f64> {
        self.fill_gamma(chain);
        let last = chain.len() - 1;
        let log_w_root = self.log_w[self.structure.root()];
        (0..self.arms)
            .map(|arm| (self.gamma[last * self.arms + arm] - log_w_root).exp())
            .collect()
    }

    /// The arm distribution at a context, without starting a round.
    pub fn simplex(&mut self, context: &[f64]) -> Result<Vec<f64>> {
        let cell = self.structure.grid().quantize(context)?;
        let chain = self.structure.chain(cell);
        Ok(self.simplex_for(&chain))
    }

    pub fn select_arm(&mut self, context: &[f64], rng: &mut dyn RngCore) -> Result<ArmDecision> {
        let cell = self.structure.grid().quantize(context)?;
        let chain = self.structure.chain(cell);
        let simplex = self.simplex_for(&chain);
        let arm = sample_index(&simplex, uniform_draw(rng));
        self.begin(chain, simplex, arm)
    }

    /// Starts a round whose arm was fixed externally (for example by a
    /// logging policy), with the simplex the learner would have used.
    pub fn select_fixed(&mut self, context: &[f64], arm: usize) -> Result<ArmDecision> {
        if arm >= self.arms {
            return Err(Error::domain(format!("arm {arm} out of range")));
        }
        let cell = self.structure.grid().quantize(context)?;
        let chain = self.structure.chain(cell);
        let simplex = self.simplex_for(&chain);
        self.begin(chain, simplex, arm)
    }

    fn begin(&mut self, chain: Chain, simplex: Vec<f64>, arm: usize) -> Result<ArmDecision> {
        let cell = chain.cell;
        self.pending = Some(Pending {
            chain,
            arm,
            round: self.round,
        });
        Ok(ArmDecision {
            arm,
            simplex,
            cell,
            round: self.round,
        })
    }

    pub fn update(&mut self, decision: &ArmDecision, loss: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&loss) {
            return Err(Error::domain(format!("loss {loss} is outside [0, 1]")));
        }
        let pending = match self.pending.take() {
            Some(p) if p.arm == decision.arm && p.round == decision.round && p.chain.cell == decision.cell => p,
            other => {
                self.pending = other;
                return Err(Error::Protocol(
                    "update must follow the select call that produced the decision".into(),
                ));
            }
        };
        let p = decision.simplex[decision.arm];
        let estimate = loss / p;
        self.round += 1;
        if estimate == 0.0 {
            self.stats.update_writes = 0;
            return Ok(());
        }
        let step = self.eta * estimate;
        for &node in pending.chain.nodes() {
            self.log_alpha[node * self.arms + decision.arm] -= step;
            self.log_w[node] = self.node_log_w(node);
        }
        self.stats.update_writes = pending.chain.len();
        Ok(())
    }

    pub fn snapshot(&self) -> Vec<u8> {
        let h = self.structure.node_count();
        let mut out = Vec::with_capacity(40 + 8 * h * (self.arms + 1));
        out.extend_from_slice(SNAPSHOT_MAGIC);
        out.extend_from_slice(&SNAPSHOT_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.arms as u32).to_le_bytes());
        out.extend_from_slice(&(h as u64).to_le_bytes());
        out.extend_from_slice(&self.eta.to_le_bytes());
        out.extend_from_slice(&self.round.to_le_bytes());
        for v in self.log_alpha.iter().chain(&self.log_w) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn restore(structure: Arc<Structure>, bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, at: 0 };
        if r.take(4)? != SNAPSHOT_MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        let version = u16::from_le_bytes(r.take(2)?.try_into().unwrap());
        if version != SNAPSHOT_VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let arms = u32::from_le_bytes(r.take(4)?.try_into().unwrap()) as usize;
        let h = u64::from_le_bytes(r.take(8)?.try_into().unwrap()) as usize;
        let eta = r.f64()?;
        let round = u64::from_le_bytes(r.take(8)?.try_into().unwrap());
        if h != structure.node_count() {
            return Err(Error::Format(format!(
                "snapshot has {h} nodes, structure has {}",
                structure.node_count()
            )));
        }
        if arms == 0 || !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::Format("invalid arm count or learning rate".into()));
        }
        let expected = h
            .checked_mul(arms + 1)
            .and_then(|n| n.checked_mul(8))
            .ok_or_else(|| Error::Format("size overflow".into()))?;
        if r.remaining() != expected {
            return Err(Error::Format(format!(
                "expected {expected} payload bytes, found {}",
                r.remaining()
            )));
        }
        let log_alpha = (0..h * arms).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        let log_w = (0..h).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        Ok(HsbLearner {
            structure,
            arms,
            eta,
            log_alpha,
            log_w,
            round,
            pending: None,
            stats: TouchStats::default(),
            mutation: Mutation::None,
            gamma: Vec::new(),
        })
    }
}

const SNAPSHOT_MAGIC: &[u8; 4] = b"HSBS";
const SNAPSHOT_VERSION: u16 = 1;

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.remaining() < n {
            return Err(Error::Format("snapshot is truncated".into()));
        }
        let s = &self.bytes[self.at..self.at + n];
        self.at += n;
        Ok(s)
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn remaining(&self) -> usize {
        self.bytes.len() - self.at
    }
}

impl Policy for HsbLearner {
    fn arms(&self) -> usize {
        self.arms
    }

    fn select(&mut self, context: &[f64], rng: &mut dyn RngCore) -> Result<ArmDecision> {
        self.select_arm(context, rng)
    }

    fn update(&mut self, decision: &ArmDecision, loss: f64) -> Result<()> {
        HsbLearner::update(self, decision, loss)
    }
}

/// Learning rate minimizing the regret bound for a structure with constants
/// `psi`, `hs` and `a_r`, `arms` arms and horizon `horizon`.
pub fn optimal_eta(psi: f64, hs: f64, a_r: f64, arms: usize, horizon: u64) -> Result<f64> {
    if !(psi > 0.0) || !(hs >= 0.0) || !(a_r >= 0.0) || arms == 0 || horizon == 0 {
        return Err(Error::domain(format!(
            "optimal_eta needs psi > 0, hs >= 0, a_r >= 0, arms >= 1, horizon >= 1 \
             (got {psi}, {hs}, {a_r}, {arms}, {horizon})"
        )));
    }
    let m = arms as f64;
    let complexity = psi * (a_r + 1.0) * ((hs + 1.0) * m).ln();
    if !(complexity > 0.0) {
        return Err(Error::domain("the bound's complexity term must be positive"));
    }
    Ok((2.0 * complexity / (m * horizon as f64)).sqrt())
}

/// Regret bound of the learner at learning rate `eta`.
pub fn regret_bound(psi: f64, hs: f64, a_r: f64, arms: usize, horizon: u64, eta: f64) -> f64 {
    let m = arms as f64;
    psi * (a_r + 1.0) * ((hs + 1.0) * m).ln() / eta + m * horizon as f64 * eta / 2.0
}

/// Closed-form regret guarantee quoted for the tuned learning rate
/// [`optimal_eta`].
///
/// This is half of [`regret_bound`] evaluated at that same rate; both are
/// exposed so callers can pick the guarantee they want to check against.
pub fn optimal_regret_bound(psi: f64, hs: f64, a_r: f64, arms: usize, horizon: u64) -> f64 {
    let m = arms as f64;
    (0.5 * psi * m * horizon as f64 * (a_r + 1.0) * ((hs + 1.0) * m).ln()).sqrt()
}
