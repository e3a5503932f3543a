//! Hierarchical partitioning structures over a quantized context space.
//!
//! A [`CellGrid`] quantizes `[0, 1]^n` into `N` cells. A [`Structure`] is a
//! graph of nodes, each owning a set of cells and a list of child groups
//! whose members split that set exactly. The builders in this module produce
//! the binary tree, K-ary tree, lexicographic graph, K-group lexicographic
//! graph, arbitrary splitting and arbitrary position splitting.

mod builders;
mod grid;
mod structure;

pub use builders::{
    arbitrary_position_splitting, arbitrary_splitting, arbitrary_splitting_capped, binary_tree,
    kary_tree, kgroup_lexicographic, lexicographic_graph, ARBITRARY_SPLITTING_MAX_CELLS,
};
pub use grid::CellGrid;
pub use structure::{
    Chain, NodeDescriptor, NodeId, Structure, StructureBuilder, StructureDescriptor,
    StructureKind, StructureParams,
};
