use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::grid::CellGrid;
use crate::error::{Error, Result};

pub type NodeId = usize;

/// Which builder produced a structure; determines the closed form for `A_R`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StructureKind {
    BinaryTree { leaves: usize },
    KaryTree { k: usize, depth: usize },
    Lexicographic { leaves: usize },
    KGroupLexicographic { k: usize, leaves: usize },
    ArbitrarySplitting { leaves: usize },
    ArbitraryPosition { dims: usize, depth: usize },
    Custom,
}

/// The three constants entering the regret bound of a structure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StructureParams {
    /// Upper bound on the size of any child group.
    pub psi: usize,
    /// Upper bound on the number of child groups of any node.
    pub hs: usize,
    pub kind: StructureKind,
}

impl StructureParams {
    /// Number of splits needed to express the best `regions`-region
    /// partition, from the closed form of the builder.
    ///
    /// Returns `None` for custom structures, where the caller must supply
    /// `A_R` directly. For arbitrary splitting the closed form is `M - 1`
    /// and does not depend on `regions` at all.
    pub fn a_r(&self, regions: usize, arms: usize) -> Option<f64> {
        let r = regions.saturating_sub(1) as f64;
        match self.kind {
            StructureKind::BinaryTree { leaves } => Some(r * (leaves as f64).log2()),
            StructureKind::KaryTree { depth, .. } => Some(r * depth as f64),
            StructureKind::Lexicographic { .. } => Some(r),
            StructureKind::KGroupLexicographic { k, .. } => {
                Some((regions.saturating_sub(1)).div_ceil(k - 1) as f64)
            }
            StructureKind::ArbitrarySplitting { .. } => Some(arms.saturating_sub(1) as f64),
            StructureKind::ArbitraryPosition { depth, .. } => Some(r * depth as f64),
            StructureKind::Custom => None,
        }
    }
}

/// An immutable hierarchical partitioning structure over the cells of a grid.
///
/// Node `0` is the root and covers every cell. Each node owns a region (a
/// set of cells, stored as sorted inclusive intervals) and a list of child
/// groups; the regions of the members of any group partition the region of
/// the node exactly. Nodes may be shared between parents, so the structure
/// is in general a DAG rather than a tree.
#[derive(Debug, Clone)]
pub struct Structure {
    grid: CellGrid,
    kind: StructureKind,
    psi: usize,
    hs: usize,
    region_offsets: Vec<u32>,
    intervals: Vec<(u32, u32)>,
    group_offsets: Vec<u32>,
    member_offsets: Vec<u32>,
    members: Vec<u32>,
    bottom_up: Vec<u32>,
}

/// The nodes whose region contains one cell, children before parents,
/// together with which member of every child group holds the cell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Chain {
    pub cell: usize,
    nodes: Vec<NodeId>,
    hit_offsets: Vec<usize>,
    hits: Vec<usize>,
}

impl Chain {
    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// For the node at `pos`, the chain position of the member of each of its
    /// child groups (in group order) that contains the cell.
    pub fn hits(&self, pos: usize) -> &[usize] {
        &self.hits[self.hit_offsets[pos]..self.hit_offsets[pos + 1]]
    }
}

impl Structure {
    pub fn grid(&self) -> &CellGrid {
        &self.grid
    }

    pub fn kind(&self) -> StructureKind {
        self.kind
    }

    pub(crate) fn set_kind(&mut self, kind: StructureKind) {
        self.kind = kind;
    }

    pub fn root(&self) -> NodeId {
        0
    }

    pub fn node_count(&self) -> usize {
        self.region_offsets.len() - 1
    }

    pub fn group_count(&self) -> usize {
        self.member_offsets.len() - 1
    }

    pub fn psi(&self) -> usize {
        self.psi
    }

    pub fn hs(&self) -> usize {
        self.hs
    }

    pub fn params(&self) -> StructureParams {
        StructureParams {
            psi: self.psi,
            hs: self.hs,
            kind: self.kind,
        }
    }

    /// Region of a node as sorted, disjoint, non-adjacent inclusive intervals.
    pub fn intervals(&self, node: NodeId) -> &[(u32, u32)] {
        let lo = self.region_offsets[node] as usize;
        let hi = self.region_offsets[node + 1] as usize;
        &self.intervals[lo..hi]
    }

    pub fn region_cells(&self, node: NodeId) -> Vec<usize> {
        self.intervals(node)
            .iter()
            .flat_map(|&(a, b)| a as usize..=b as usize)
            .collect()
    }

    pub fn region_size(&self, node: NodeId) -> usize {
        self.intervals(node)
            .iter()
            .map(|&(a, b)| (b - a) as usize + 1)
            .sum()
    }

    pub fn contains(&self, node: NodeId, cell: usize) -> bool {
        let ivs = self.intervals(node);
        let cell = cell as u32;
        match ivs.binary_search_by(|&(a, _)| a.cmp(&cell)) {
            Ok(_) => true,
            Err(0) => false,
            Err(i) => ivs[i - 1].1 >= cell,
        }
    }

    pub fn group_range(&self, node: NodeId) -> std::ops::Range<usize> {
        self.group_offsets[node] as usize..self.group_offsets[node + 1] as usize
    }

    pub fn num_groups(&self, node: NodeId) -> usize {
        self.group_range(node).len()
    }

    pub fn is_leaf(&self, node: NodeId) -> bool {
        self.num_groups(node) == 0
    }

    pub fn group_members(&self, group: usize) -> &[u32] {
        let lo = self.member_offsets[group] as usize;
        let hi = self.member_offsets[group + 1] as usize;
        &self.members[lo..hi]
    }

    /// Child groups of a node, each as a slice of member ids.
    pub fn child_groups(&self, node: NodeId) -> impl Iterator<Item = &[u32]> + '_ {
        self.group_range(node).map(move |g| self.group_members(g))
    }

    /// Every node, children before parents.
    pub fn bottom_up_order(&self) -> &[u32] {
        &self.bottom_up
    }

    fn hit_member(&self, group: usize, cell: usize) -> NodeId {
        self.group_members(group)
            .iter()
            .map(|&m| m as NodeId)
            .find(|&m| self.contains(m, cell))
            .expect("validated structure: every group covers its parent region")
    }

    /// All nodes whose region contains `cell`, ordered so that every node
    /// comes after the members of its groups that also contain the cell.
    pub fn nodes_containing(&self, cell: usize) -> Vec<NodeId> {
        self.chain(cell).nodes
    }

    /// Like [`Structure::nodes_containing`], but also records the member of
    /// each child group that holds the cell.
    pub fn chain(&self, cell: usize) -> Chain {
        assert!(cell < self.grid.total_cells(), "cell {cell} out of range");
        let mut position: HashMap<NodeId, usize> = HashMap::new();
        let mut nodes = Vec::new();
        let mut stack: Vec<(NodeId, usize)> = vec![(0, 0)];
        position.insert(0, usize::MAX);
        while let Some(&mut (node, ref mut next)) = stack.last_mut() {
            let groups = self.group_range(node);
            if *next < groups.len() {
                let child = self.hit_member(groups.start + *next, cell);
                *next += 1;
                if let std::collections::hash_map::Entry::Vacant(e) = position.entry(child) {
                    e.insert(usize::MAX);
                    stack.push((child, 0));
                }
            } else {
                stack.pop();
                position.insert(node, nodes.len());
                nodes.push(node);
            }
        }
        let mut hit_offsets = Vec::with_capacity(nodes.len() + 1);
        let mut hits = Vec::new();
        hit_offsets.push(0);
        for &node in &nodes {
            for g in self.group_range(node) {
                hits.push(position[&self.hit_member(g, cell)]);
            }
            hit_offsets.push(hits.len());
        }
        Chain {
            cell,
            nodes,
            hit_offsets,
            hits,
        }
    }

    /// Checks the exact-partition property of every group by enumeration.
    pub fn check_partitions(&self) -> Result<()> {
        for node in 0..self.node_count() {
            let parent = self.region_cells(node);
            for (gi, group) in self.child_groups(node).enumerate() {
                let mut union: Vec<usize> = group
                    .iter()
                    .flat_map(|&m| self.region_cells(m as NodeId))
                    .collect();
                let total = union.len();
                union.sort_unstable();
                union.dedup();
                if union.len() != total {
                    return Err(Error::config(format!(
                        "node {node}, group {gi}: member regions overlap"
                    )));
                }
                if union != parent {
                    return Err(Error::config(format!(
                        "node {node}, group {gi}: member regions do not cover the parent"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn descriptor(&self) -> StructureDescriptor {
        StructureDescriptor {
            kind: self.kind,
            psi: self.psi,
            hs: self.hs,
            grid: self.grid.clone(),
            nodes: (0..self.node_count())
                .map(|id| NodeDescriptor {
                    id,
                    region: self.intervals(id).to_vec(),
                    child_groups: self.child_groups(id).map(|g| g.to_vec()).collect(),
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.descriptor())?)
    }
}

/// Serializable view of a structure, for debugging and golden files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureDescriptor {
    pub kind: StructureKind,
    pub psi: usize,
    pub hs: usize,
    pub grid: CellGrid,
    pub nodes: Vec<NodeDescriptor>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeDescriptor {
    pub id: NodeId,
    /// Inclusive cell intervals.
    pub region: Vec<(u32, u32)>,
    pub child_groups: Vec<Vec<u32>>,
}

impl StructureDescriptor {
    pub fn into_structure(self) -> Result<Structure> {
        let mut b = StructureBuilder::new(self.grid, self.kind);
        for (expect, node) in self.nodes.iter().enumerate() {
            if node.id != expect {
                return Err(Error::config("node ids must be dense and in order"));
            }
            b.add_node_intervals(node.region.clone())?;
        }
        for node in &self.nodes {
            for g in &node.child_groups {
                b.add_group(node.id, g.iter().map(|&m| m as NodeId))?;
            }
        }
        b.finish()
    }
}

/// Incremental construction of a [`Structure`]. The first node added is the
/// root. Groups may be added in any order and may name nodes that are added
/// later; references are resolved by [`StructureBuilder::finish`].
pub struct StructureBuilder {
    grid: CellGrid,
    kind: StructureKind,
    region_offsets: Vec<u32>,
    intervals: Vec<(u32, u32)>,
    // (owner, start into members, len)
    groups: Vec<(u32, u32, u32)>,
    members: Vec<u32>,
}

impl StructureBuilder {
    pub fn new(grid: CellGrid, kind: StructureKind) -> Self {
        StructureBuilder {
            grid,
            kind,
            region_offsets: vec![0],
            intervals: Vec::new(),
            groups: Vec::new(),
            members: Vec::new(),
        }
    }

    pub fn node_count(&self) -> usize {
        self.region_offsets.len() - 1
    }

    /// Adds a node over the given cells (any order, duplicates ignored).
    pub fn add_node(&mut self, cells: impl IntoIterator<Item = usize>) -> Result<NodeId> {
        let mut cells: Vec<usize> = cells.into_iter().collect();
        cells.sort_unstable();
        cells.dedup();
        let mut ivs: Vec<(u32, u32)> = Vec::new();
        for c in cells {
            let c = c as u32;
            match ivs.last_mut() {
                Some((_, b)) if *b + 1 == c => *b = c,
                _ => ivs.push((c, c)),
            }
        }
        self.add_node_intervals(ivs)
    }

    /// Adds a node over sorted inclusive intervals.
    pub fn add_node_intervals(&mut self, mut ivs: Vec<(u32, u32)>) -> Result<NodeId> {
        let n = self.grid.total_cells() as u32;
        if ivs.is_empty() {
            return Err(Error::config("node regions must be nonempty"));
        }
        for w in ivs.windows(2) {
            if w[0].1 >= w[1].0 {
                return Err(Error::config("region intervals must be sorted and disjoint"));
            }
        }
        if ivs.iter().any(|&(a, b)| a > b || b >= n) {
            return Err(Error::config("region interval out of range"));
        }
        // merge adjacent intervals
        let mut merged: Vec<(u32, u32)> = Vec::with_capacity(ivs.len());
        for iv in ivs.drain(..) {
            match merged.last_mut() {
                Some((_, b)) if *b + 1 == iv.0 => *b = iv.1,
                _ => merged.push(iv),
            }
        }
        self.intervals.extend(merged);
        self.region_offsets.push(self.intervals.len() as u32);
        Ok(self.node_count() - 1)
    }

    pub fn add_group(
        &mut self,
        node: NodeId,
        members: impl IntoIterator<Item = NodeId>,
    ) -> Result<()> {
        let start = self.members.len();
        self.members.extend(members.into_iter().map(|m| m as u32));
        let len = self.members.len() - start;
        if len == 0 {
            return Err(Error::config("child groups must be nonempty"));
        }
        self.groups.push((node as u32, start as u32, len as u32));
        Ok(())
    }

    pub fn finish(mut self) -> Result<Structure> {
        let h = self.node_count();
        if h == 0 {
            return Err(Error::config("structure has no nodes"));
        }
        let full = [(0u32, self.grid.total_cells() as u32 - 1)];
        let root_lo = self.region_offsets[0] as usize;
        let root_hi = self.region_offsets[1] as usize;
        if self.intervals[root_lo..root_hi] != full {
            return Err(Error::config("root region must be the whole cell set"));
        }
        if let Some(&(owner, _, _)) = self.groups.iter().find(|g| g.0 as usize >= h) {
            return Err(Error::config(format!("group owner {owner} does not exist")));
        }
        if let Some(&m) = self.members.iter().find(|&&m| m as usize >= h) {
            return Err(Error::config(format!("group member {m} does not exist")));
        }
        self.groups.sort_by_key(|g| g.0);
        let mut group_offsets = vec![0u32; h + 1];
        for &(owner, _, _) in &self.groups {
            group_offsets[owner as usize + 1] += 1;
        }
        for i in 0..h {
            group_offsets[i + 1] += group_offsets[i];
        }
        let mut member_offsets = Vec::with_capacity(self.groups.len() + 1);
        let mut members = Vec::with_capacity(self.members.len());
        member_offsets.push(0u32);
        let mut psi = 1;
        for &(_, start, len) in &self.groups {
            let (start, len) = (start as usize, len as usize);
            members.extend_from_slice(&self.members[start..start + len]);
            member_offsets.push(members.len() as u32);
            psi = psi.max(len);
        }
        let hs = (0..h)
            .map(|i| (group_offsets[i + 1] - group_offsets[i]) as usize)
            .max()
            .unwrap_or(0);
        let mut s = Structure {
            grid: self.grid,
            kind: self.kind,
            psi,
            hs,
            region_offsets: self.region_offsets,
            intervals: self.intervals,
            group_offsets,
            member_offsets,
            members,
            bottom_up: Vec::new(),
        };
        s.bottom_up = topological_bottom_up(&s)?;
        for g in 0..s.group_count() {
            let owner_size = {
                // owner lookup through offsets
                let owner = s.group_offsets.partition_point(|&o| o as usize <= g) - 1;
                s.region_size(owner)
            };
            let sum: usize = s
                .group_members(g)
                .iter()
                .map(|&m| s.region_size(m as NodeId))
                .sum();
            if sum != owner_size {
                return Err(Error::config(format!(
                    "group {g}: member region sizes do not add up to the parent's"
                )));
            }
        }
        Ok(s)
    }
}

/// Post-order from the root over the whole DAG; fails on cycles or on nodes
/// that cannot be reached from the root.
fn topological_bottom_up(s: &Structure) -> Result<Vec<u32>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        New,
        Open,
        Done,
    }
    let h = s.node_count();
    let mut mark = vec![Mark::New; h];
    let mut order = Vec::with_capacity(h);
    // (node, next group, next member)
    let mut stack: Vec<(usize, usize, usize)> = vec![(0, 0, 0)];
    mark[0] = Mark::Open;
    while let Some(top) = stack.last_mut() {
        let (node, gi, mi) = *top;
        let groups = s.group_range(node);
        if gi < groups.len() {
            let members = s.group_members(groups.start + gi);
            if mi < members.len() {
                top.2 += 1;
                let child = members[mi] as usize;
                match mark[child] {
                    Mark::New => {
                        mark[child] = Mark::Open;
                        stack.push((child, 0, 0));
                    }
                    Mark::Open => {
                        return Err(Error::config(format!("cycle through node {child}")));
                    }
                    Mark::Done => {}
                }
            } else {
                top.1 += 1;
                top.2 = 0;
            }
        } else {
            stack.pop();
            mark[node] = Mark::Done;
            order.push(node as u32);
        }
    }
    if order.len() != h {
        return Err(Error::config("some nodes are unreachable from the root"));
    }
    Ok(order)
}
