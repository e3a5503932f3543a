//! Builds every hierarchy over a small grid and prints its size, the
//! constants that enter the learning rate, and the regions along one chain.
//! Pass `--json` to print the binary tree as JSON.
//!
//! cargo run --example structures_tour [-- --json]

use hsb::experts::expert_count;
use hsb::hierarchy::{
    arbitrary_position_splitting, arbitrary_splitting, binary_tree, kary_tree, kgroup_lexicographic,
    lexicographic_graph, CellGrid, Structure,
};

fn main() -> hsb::Result<()> {
    let line = CellGrid::new(vec![8])?;
    let plane = CellGrid::uniform(2, 16)?;
    let structures: Vec<(&str, Structure)> = vec![
        ("binary tree, 8 cells", binary_tree(&line)?),
        ("3-ary tree, 9 cells", kary_tree(&CellGrid::new(vec![9])?, 3)?),
        ("lexicographic, 8 cells", lexicographic_graph(&line)?),
        ("3-group lexicographic, 8 cells", kgroup_lexicographic(&line, 3)?),
        ("arbitrary splitting, 6 cells", arbitrary_splitting(&CellGrid::new(vec![6])?)?),
        ("position splitting, 4x4 depth 2", arbitrary_position_splitting(&plane, 2)?),
    ];

    let arms = 2;
    println!("{:<34}{:>7}{:>7}{:>5}{:>5}{:>14}", "structure", "nodes", "groups", "psi", "hs", "experts");
    for (name, s) in &structures {
        println!(
            "{name:<34}{:>7}{:>7}{:>5}{:>5}{:>14}",
            s.node_count(),
            s.group_count(),
            s.psi(),
            s.hs(),
            expert_count(s, s.root(), arms)
        );
    }

    let (name, tree) = &structures[0];
    let chain = tree.chain(5);
    println!("\nnodes of the {name} holding cell 5, leaf first:");
    for &node in chain.nodes() {
        println!("  node {node:>2}: cells {:?}", tree.region_cells(node));
    }

    if std::env::args().any(|a| a == "--json") {
        println!("{}", tree.to_json()?);
    }
    Ok(())
}
