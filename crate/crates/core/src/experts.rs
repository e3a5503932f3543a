//! Brute-force expert classes and the flat exponential-weights mixture.
//!
//! An expert is a fixed assignment of arms to the cells of a node's region.
//! The class under a node is built recursively: the node contributes one
//! constant expert per arm, and each of its child groups contributes the
//! cross product of the children's classes, stitched together. Priors follow
//! the same recursion, so the total prior mass under every node is one.
//!
//! Enumerating the class is exponential in the structure size. It is used as
//! an independent oracle for the hierarchical learner on small instances and
//! as the flat EXP4-style baseline.

use std::collections::HashMap;
use std::io::Write;
use std::sync::Arc;

use rand::RngCore;

use crate::error::{Error, Result};
use crate::hierarchy::{CellGrid, NodeId, Structure};
use crate::numerics::{sample_index, LogSumExp};
use crate::policy::{uniform_draw, ArmDecision, Policy};

/// Default limit on the number of enumerated experts.
pub const DEFAULT_EXPERT_CAP: usize = 100_000;

/// One cell-to-arm mapping over a region, with its prior weight.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedExpert {
    pub log_prior: f64,
    region: Arc<[u32]>,
    arms: Box<[u16]>,
}

impl WeightedExpert {
    pub fn prior(&self) -> f64 {
        self.log_prior.exp()
    }

    /// Sorted cells the mapping is defined on.
    pub fn region(&self) -> &[u32] {
        &self.region
    }

    /// Arm assigned to each region cell, in region order.
    pub fn assignment(&self) -> impl Iterator<Item = usize> + '_ {
        self.arms.iter().map(|&a| a as usize)
    }

    /// The arm chosen at `cell`, or `None` outside the region.
    pub fn arm_at(&self, cell: usize) -> Option<usize> {
        let cell = u32::try_from(cell).ok()?;
        self.region
            .binary_search(&cell)
            .ok()
            .map(|i| self.arms[i] as usize)
    }
}

/// A cell together with the estimated loss of every arm in that round.
pub type EstimatedRound = (usize, Vec<f64>);

/// Enumerates the expert class under `node` with the default cap.
pub fn enumerate_weighted_experts(
    structure: &Structure,
    node: NodeId,
    arms: usize,
) -> Result<Vec<WeightedExpert>> {
    enumerate_weighted_experts_capped(structure, node, arms, DEFAULT_EXPERT_CAP)
}

/// Enumerates the expert class under `node`, failing if it would hold more
/// than `cap` entries. Equal mappings reached along different splits are
/// kept as separate entries.
pub fn enumerate_weighted_experts_capped(
    structure: &Structure,
    node: NodeId,
    arms: usize,
    cap: usize,
) -> Result<Vec<WeightedExpert>> {
    if arms == 0 || arms > u16::MAX as usize {
        return Err(Error::config(format!("unsupported arm count {arms}")));
    }
    if node >= structure.node_count() {
        return Err(Error::domain(format!("node {node} does not exist")));
    }
    let needed = expert_count(structure, node, arms);
    if needed > cap as u128 {
        return Err(Error::Capacity { needed, cap });
    }
    let mut memo = HashMap::new();
    let experts = enumerate(structure, node, arms, &mut memo);
    Ok(Arc::try_unwrap(experts).unwrap_or_else(|shared| (*shared).clone()))
}

/// Size of the expert multiset under `node`, saturating at `u128::MAX`.
pub fn expert_count(structure: &Structure, node: NodeId, arms: usize) -> u128 {
    fn go(s: &Structure, node: NodeId, arms: u128, memo: &mut HashMap<NodeId, u128>) -> u128 {
        if let Some(&c) = memo.get(&node) {
            return c;
        }
        let mut total = arms;
        for group in s.child_groups(node) {
            let mut product: u128 = 1;
            for &j in group {
                product = product.saturating_mul(go(s, j as usize, arms, memo));
            }
            total = total.saturating_add(product);
        }
        memo.insert(node, total);
        total
    }
    go(structure, node, arms as u128, &mut HashMap::new())
}

fn enumerate(
    structure: &Structure,
    node: NodeId,
    arms: usize,
    memo: &mut HashMap<NodeId, Arc<Vec<WeightedExpert>>>,
) -> Arc<Vec<WeightedExpert>> {
    if let Some(e) = memo.get(&node) {
        return Arc::clone(e);
    }
    let region: Arc<[u32]> = structure
        .region_cells(node)
        .into_iter()
        .map(|c| c as u32)
        .collect();
    let log_norm = ((structure.num_groups(node) + 1) as f64).ln();
    let mut out = Vec::new();
    let constant_prior = -log_norm - (arms as f64).ln();
    for arm in 0..arms {
        out.push(WeightedExpert {
            log_prior: constant_prior,
            region: Arc::clone(&region),
            arms: vec![arm as u16; region.len()].into_boxed_slice(),
        });
    }
    for group in structure.child_groups(node) {
        let children: Vec<Arc<Vec<WeightedExpert>>> = group
            .iter()
            .map(|&j| enumerate(structure, j as usize, arms, memo))
            .collect();
        // position of each child cell inside the parent region
        let slots: Vec<Vec<usize>> = children
            .iter()
            .map(|c| {
                c[0].region
                    .iter()
                    .map(|cell| region.binary_search(cell).expect("child cell outside parent"))
                    .collect()
            })
            .collect();
        let mut choice = vec![0usize; children.len()];
        loop {
            let mut stitched = vec![0u16; region.len()];
            let mut log_prior = -log_norm;
            for (k, &i) in choice.iter().enumerate() {
                let e = &children[k][i];
                log_prior += e.log_prior;
                for (&slot, &arm) in slots[k].iter().zip(e.arms.iter()) {
                    stitched[slot] = arm;
                }
            }
            out.push(WeightedExpert {
                log_prior,
                region: Arc::clone(&region),
                arms: stitched.into_boxed_slice(),
            });
            // odometer over the cross product
            let mut k = children.len();
            let exhausted = loop {
                if k == 0 {
                    break true;
                }
                k -= 1;
                choice[k] += 1;
                if choice[k] < children[k].len() {
                    break false;
                }
                choice[k] = 0;
            };
            if exhausted {
                break;
            }
        }
    }
    let out = Arc::new(out);
    memo.insert(node, Arc::clone(&out));
    out
}

/// Log of the summed prior mass of `experts`.
pub fn log_prior_mass(experts: &[WeightedExpert]) -> f64 {
    let mut acc = LogSumExp::new();
    for e in experts {
        acc.add(e.log_prior);
    }
    acc.value()
}

fn log_weight_after(expert: &WeightedExpert, eta: f64, history: &[EstimatedRound]) -> f64 {
    let mut loss = 0.0;
    for (cell, estimates) in history {
        if let Some(arm) = expert.arm_at(*cell) {
            loss += estimates[arm];
        }
    }
    expert.log_prior - eta * loss
}

/// Log of the total exponentiated weight of `experts` after `history`.
/// Rounds whose cell falls outside an expert's region leave it unchanged.
pub fn log_total_weight(experts: &[WeightedExpert], eta: f64, history: &[EstimatedRound]) -> f64 {
    let mut acc = LogSumExp::new();
    for e in experts {
        acc.add(log_weight_after(e, eta, history));
    }
    acc.value()
}

/// Log of the weight mass of experts choosing each arm at `cell`.
pub fn log_arm_mass(
    experts: &[WeightedExpert],
    arms: usize,
    eta: f64,
    history: &[EstimatedRound],
    cell: usize,
) -> Vec<f64> {
    let mut acc = vec![LogSumExp::new(); arms];
    for e in experts {
        if let Some(arm) = e.arm_at(cell) {
            acc[arm].add(log_weight_after(e, eta, history));
        }
    }
    acc.iter().map(LogSumExp::value).collect()
}

#[derive(Debug, Clone, Copy)]
struct FlatPending {
    arm: usize,
    cell: usize,
    round: u64,
    p: f64,
}

/// Exponential weights over an explicit list of experts covering the whole
/// grid, with importance-weighted bandit losses.
#[derive(Debug, Clone)]
pub struct FlatMixture {
    grid: CellGrid,
    arms: usize,
    eta: f64,
    experts: Vec<WeightedExpert>,
    log_weights: Vec<f64>,
    round: u64,
    pending: Option<FlatPending>,
}

impl FlatMixture {
    /// The mixture over every expert expressible by `structure`, with the
    /// structure's priors.
    pub fn from_structure(structure: &Structure, arms: usize, eta: f64) -> Result<Self> {
        let experts = enumerate_weighted_experts(structure, structure.root(), arms)?;
        Self::new(structure.grid().clone(), arms, eta, experts)
    }

    /// The mixture over all `arms^N` mappings of the grid's cells, with
    /// equal priors.
    pub fn uniform(grid: &CellGrid, arms: usize, eta: f64) -> Result<Self> {
        if arms == 0 || arms > u16::MAX as usize {
            return Err(Error::config(format!("unsupported arm count {arms}")));
        }
        let n = grid.total_cells();
        let needed = (arms as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
        if needed > DEFAULT_EXPERT_CAP as u128 {
            return Err(Error::Capacity {
                needed,
                cap: DEFAULT_EXPERT_CAP,
            });
        }
        let region: Arc<[u32]> = (0..n as u32).collect();
        let log_prior = -(n as f64) * (arms as f64).ln();
        let mut experts = Vec::with_capacity(needed as usize);
        let mut digits = vec![0u16; n];
        for _ in 0..needed {
            experts.push(WeightedExpert {
                log_prior,
                region: Arc::clone(&region),
                arms: digits.clone().into_boxed_slice(),
            });
            for d in digits.iter_mut() {
                *d += 1;
                if (*d as usize) < arms {
                    break;
                }
                *d = 0;
            }
        }
        Self::new(grid.clone(), arms, eta, experts)
    }

    pub fn new(grid: CellGrid, arms: usize, eta: f64, experts: Vec<WeightedExpert>) -> Result<Self> {
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::domain(format!("learning rate must be positive, got {eta}")));
        }
        if experts.is_empty() {
            return Err(Error::config("a mixture needs at least one expert"));
        }
        let n = grid.total_cells();
        for e in &experts {
            if e.region.len() != n || e.arms.iter().any(|&a| a as usize >= arms) {
                return Err(Error::config("every expert must map the whole grid to valid arms"));
            }
        }
        let log_weights = experts.iter().map(|e| e.log_prior).collect();
        Ok(FlatMixture {
            grid,
            arms,
            eta,
            experts,
            log_weights,
            round: 0,
            pending: None,
        })
    }

    pub fn experts(&self) -> &[WeightedExpert] {
        &self.experts
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn grid(&self) -> &CellGrid {
        &self.grid
    }

    /// Arm distribution at `cell` under the normalized expert weights.
    pub fn flat_simplex(&self, cell: usize) -> Result<Vec<f64>> {
        if cell >= self.grid.total_cells() {
            return Err(Error::domain(format!("cell {cell} out of range")));
        }
        let mut total = LogSumExp::new();
        let mut per_arm = vec![LogSumExp::new(); self.arms];
        for (e, &lw) in self.experts.iter().zip(&self.log_weights) {
            total.add(lw);
            per_arm[e.arms[cell] as usize].add(lw);
        }
        let norm = total.value();
        Ok(per_arm.iter().map(|a| (a.value() - norm).exp()).collect())
    }

    /// Charges `loss / p_chosen` to every expert that picks `arm` at `cell`.
    pub fn flat_update(&mut self, cell: usize, arm: usize, p_chosen: f64, loss: f64) -> Result<()> {
        if !(p_chosen > 0.0) {
            return Err(Error::domain(format!("selection probability {p_chosen} must be positive")));
        }
        if !(0.0..=1.0).contains(&loss) {
            return Err(Error::domain(format!("loss {loss} is outside [0, 1]")));
        }
        if cell >= self.grid.total_cells() || arm >= self.arms {
            return Err(Error::domain(format!("cell {cell} or arm {arm} out of range")));
        }
        let step = self.eta * loss / p_chosen;
        if step == 0.0 {
            return Ok(());
        }
        for (e, lw) in self.experts.iter().zip(self.log_weights.iter_mut()) {
            if e.arms[cell] as usize == arm {
                *lw -= step;
            }
        }
        Ok(())
    }

    /// Writes one CSV row per expert: prior, then the arm of every cell.
    pub fn write_experts_csv<W: Write>(&self, out: W) -> Result<()> {
        write_experts_csv(&self.experts, out)
    }
}

/// Writes `experts` as CSV rows `prior,cell_0,cell_1,...` over their region.
pub fn write_experts_csv<W: Write>(experts: &[WeightedExpert], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if let Some(first) = experts.first() {
        let mut header = vec!["prior".to_string()];
        header.extend(first.region.iter().map(|c| format!("cell_{c}")));
        w.write_record(&header).map_err(csv_error)?;
    }
    for e in experts {
        let mut row = vec![format!("{:e}", e.prior())];
        row.extend(e.arms.iter().map(|a| a.to_string()));
        w.write_record(&row).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_error(e: csv::Error) -> Error {
    Error::Format(e.to_string())
}

impl Policy for FlatMixture {
    fn arms(&self) -> usize {
        self.arms
    }

    fn select(&mut self, context: &[f64], rng: &mut dyn RngCore) -> Result<ArmDecision> {
        let cell = self.grid.quantize(context)?;
        let simplex = self.flat_simplex(cell)?;
        let arm = sample_index(&simplex, uniform_draw(rng));
        self.pending = Some(FlatPending {
            arm,
            cell,
            round: self.round,
            p: simplex[arm],
        });
        Ok(ArmDecision {
            arm,
            simplex,
            cell,
            round: self.round,
        })
    }

    fn update(&mut self, decision: &ArmDecision, loss: f64) -> Result<()> {
        match self.pending {
            Some(p) if p.arm == decision.arm && p.cell == decision.cell && p.round == decision.round => {
                self.flat_update(p.cell, p.arm, p.p, loss)?;
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
