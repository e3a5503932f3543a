//! Builders for the standard hierarchical structures.
//!
//! Every builder numbers the root `0`. Trees use heap order, interval
//! structures enumerate intervals from the longest to the shortest.

use super::grid::{scheme_bits, CellGrid};
use super::structure::{Structure, StructureBuilder, StructureKind};
use crate::error::{Error, Result};

/// Default cap on the cell count for [`arbitrary_splitting`]; the structure
/// has `2^N - 1` nodes.
pub const ARBITRARY_SPLITTING_MAX_CELLS: usize = 16;

/// Complete binary tree over the cells in index order.
pub fn binary_tree(grid: &CellGrid) -> Result<Structure> {
    let n = grid.total_cells();
    if n < 2 || !n.is_power_of_two() {
        return Err(Error::config(format!(
            "binary tree needs a power-of-two cell count >= 2, got {n}"
        )));
    }
    let depth = n.trailing_zeros() as usize;
    let mut s = kary(grid, 2, depth)?;
    s = relabel(s, StructureKind::BinaryTree { leaves: n });
    Ok(s)
}

/// Complete K-ary tree; the cell count must be `K^D` with `D >= 1`.
pub fn kary_tree(grid: &CellGrid, k: usize) -> Result<Structure> {
    if k < 2 {
        return Err(Error::config("K-ary tree needs K >= 2"));
    }
    let n = grid.total_cells();
    let mut depth = 0;
    let mut size = 1usize;
    while size < n {
        size = size
            .checked_mul(k)
            .ok_or_else(|| Error::config("cell count overflows"))?;
        depth += 1;
    }
    if size != n || depth == 0 {
        return Err(Error::config(format!(
            "cell count {n} is not a positive power of {k}"
        )));
    }
    kary(grid, k, depth)
}

fn kary(grid: &CellGrid, k: usize, depth: usize) -> Result<Structure> {
    let mut b = StructureBuilder::new(grid.clone(), StructureKind::KaryTree { k, depth });
    let mut next_id = 1usize;
    for level in 0..=depth {
        let width = k.pow((depth - level) as u32);
        for i in 0..k.pow(level as u32) {
            let lo = (i * width) as u32;
            let id = b.add_node_intervals(vec![(lo, lo + width as u32 - 1)])?;
            if level < depth {
                b.add_group(id, next_id..next_id + k)?;
                next_id += k;
            }
        }
    }
    b.finish()
}

fn relabel(mut s: Structure, kind: StructureKind) -> Structure {
    s.set_kind(kind);
    s
}

/// Id of interval `[a, b]` when intervals are listed longest first, and
/// left to right within a length.
fn interval_id(n: usize, a: usize, b: usize) -> usize {
    // lengths n, n-1, ..., len+1 come first; length l contributes n - l + 1
    let longer = n - (b - a + 1);
    longer * (longer + 1) / 2 + a
}

fn add_all_intervals(b: &mut StructureBuilder, n: usize) -> Result<()> {
    for len in (1..=n).rev() {
        for a in 0..=n - len {
            let id = b.add_node_intervals(vec![(a as u32, (a + len - 1) as u32)])?;
            debug_assert_eq!(id, interval_id(n, a, a + len - 1));
        }
    }
    Ok(())
}

/// One node per contiguous cell interval; the node over `[a, b]` has one
/// two-member group per split point.
pub fn lexicographic_graph(grid: &CellGrid) -> Result<Structure> {
    let n = grid.total_cells();
    if n < 2 {
        return Err(Error::config("lexicographic graph needs at least 2 cells"));
    }
    let mut b = StructureBuilder::new(grid.clone(), StructureKind::Lexicographic { leaves: n });
    add_all_intervals(&mut b, n)?;
    for a in 0..n {
        for end in a + 1..n {
            let id = interval_id(n, a, end);
            for c in a..end {
                b.add_group(id, [interval_id(n, a, c), interval_id(n, c + 1, end)])?;
            }
        }
    }
    b.finish()
}

/// Interval nodes; an interval of length `L >= K` has one group per
/// composition into `K` contiguous nonempty pieces. Shorter intervals (of
/// length at least 2) get every composition into 2 to `L` pieces, so each
/// non-singleton node remains splittable. Only intervals reachable from the
/// root become nodes.
pub fn kgroup_lexicographic(grid: &CellGrid, k: usize) -> Result<Structure> {
    let n = grid.total_cells();
    if k < 2 || k > n {
        return Err(Error::config(format!(
            "K-group splitting needs 2 <= K <= N, got K = {k}, N = {n}"
        )));
    }
    let compositions = |a: usize, end: usize| -> Vec<Vec<(usize, usize)>> {
        let len = end - a + 1;
        let pieces: Vec<usize> = match len {
            1 => vec![],
            l if l >= k => vec![k],
            l => (2..=l).collect(),
        };
        let mut out = Vec::new();
        let mut buf = Vec::new();
        for p in pieces {
            // choose p - 1 cut positions among the len - 1 gaps
            for_each_combination(len - 1, p - 1, &mut buf, &mut |cuts| {
                let mut start = a;
                let mut group = Vec::with_capacity(p);
                for &c in cuts {
                    group.push((start, a + c));
                    start = a + c + 1;
                }
                group.push((start, end));
                out.push(group);
                Ok(())
            })
            .expect("collecting compositions cannot fail");
        }
        out
    };

    // reachable intervals, discovered from the root
    let mut reachable = vec![vec![false; n]; n];
    reachable[0][n - 1] = true;
    let mut frontier = vec![(0, n - 1)];
    while let Some((a, end)) = frontier.pop() {
        for group in compositions(a, end) {
            for (x, y) in group {
                if !reachable[x][y] {
                    reachable[x][y] = true;
                    frontier.push((x, y));
                }
            }
        }
    }
    let mut ids = vec![vec![usize::MAX; n]; n];
    let mut b = StructureBuilder::new(
        grid.clone(),
        StructureKind::KGroupLexicographic { k, leaves: n },
    );
    for len in (1..=n).rev() {
        for a in 0..=n - len {
            if reachable[a][a + len - 1] {
                ids[a][a + len - 1] =
                    b.add_node_intervals(vec![(a as u32, (a + len - 1) as u32)])?;
            }
        }
    }
    for len in (2..=n).rev() {
        for a in 0..=n - len {
            let end = a + len - 1;
            if !reachable[a][end] {
                continue;
            }
            for group in compositions(a, end) {
                b.add_group(ids[a][end], group.into_iter().map(|(x, y)| ids[x][y]))?;
            }
        }
    }
    b.finish()
}

/// Visits every increasing `choose`-subset of `0..from` in lexicographic order.
fn for_each_combination(
    from: usize,
    choose: usize,
    buf: &mut Vec<usize>,
    f: &mut dyn FnMut(&[usize]) -> Result<()>,
) -> Result<()> {
    buf.clear();
    buf.extend(0..choose);
    if choose > from {
        return Ok(());
    }
    loop {
        f(buf)?;
        // advance
        let mut i = choose;
        loop {
            if i == 0 {
                return Ok(());
            }
            i -= 1;
            if buf[i] < from - choose + i {
                buf[i] += 1;
                for j in i + 1..choose {
                    buf[j] = buf[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// One node per nonempty cell subset; each node with two or more cells has
/// one group per unordered bipartition of its region. Capped at
/// [`ARBITRARY_SPLITTING_MAX_CELLS`] cells.
pub fn arbitrary_splitting(grid: &CellGrid) -> Result<Structure> {
    arbitrary_splitting_capped(grid, ARBITRARY_SPLITTING_MAX_CELLS)
}

pub fn arbitrary_splitting_capped(grid: &CellGrid, max_cells: usize) -> Result<Structure> {
    let n = grid.total_cells();
    if n > max_cells || n > 30 {
        return Err(Error::config(format!(
            "arbitrary splitting over {n} cells exceeds the cap of {max_cells}"
        )));
    }
    if n < 2 {
        return Err(Error::config("arbitrary splitting needs at least 2 cells"));
    }
    let full: u32 = (1u32 << n) - 1;
    // node id of subset `mask` is `full - mask`, so the root is 0
    let id = |mask: u32| (full - mask) as usize;
    let mut b = StructureBuilder::new(grid.clone(), StructureKind::ArbitrarySplitting { leaves: n });
    for node in 0..full as usize {
        let mask = full - node as u32;
        b.add_node((0..n).filter(|&c| mask >> c & 1 == 1))?;
    }
    for node in 0..full as usize {
        let mask = full - node as u32;
        if mask.count_ones() < 2 {
            continue;
        }
        let low = mask & mask.wrapping_neg();
        let rest = mask ^ low;
        // submasks of `rest`, each joined with the lowest bit, except the full set
        let mut sub = rest;
        loop {
            let part = sub | low;
            if part != mask {
                b.add_group(node, [id(part), id(mask ^ part)])?;
            }
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & rest;
        }
    }
    b.finish()
}

/// Axis-aligned boxes; every box can be halved along any dimension that
/// still has resolution left, giving at most `dims` groups per node.
///
/// The leaf resolution follows the power-of-two scheme for `2^depth` leaves;
/// it must not exceed the grid's own resolution along any dimension. When it
/// is coarser, each leaf box covers a block of grid cells.
pub fn arbitrary_position_splitting(grid: &CellGrid, depth: usize) -> Result<Structure> {
    let dims = grid.dims();
    if depth == 0 || depth >= usize::BITS as usize {
        return Err(Error::config("arbitrary position splitting needs depth >= 1"));
    }
    let levels = scheme_bits(dims, depth);
    for (d, &s) in grid.splits().iter().enumerate() {
        if !s.is_power_of_two() || (s.trailing_zeros() as usize) < levels[d] {
            return Err(Error::config(format!(
                "depth {depth} exceeds the grid resolution along dimension {d}"
            )));
        }
    }
    // per dimension, dyadic intervals in heap order: 2^(levels+1) - 1 of them
    let radix: Vec<usize> = levels.iter().map(|&l| (2usize << l) - 1).collect();
    let total: usize = radix.iter().product();
    let decode = |mut id: usize| -> Vec<usize> {
        let mut out = vec![0; dims];
        for d in (0..dims).rev() {
            out[d] = id % radix[d];
            id /= radix[d];
        }
        out
    };
    let encode = |coords: &[usize]| -> usize {
        coords.iter().zip(&radix).fold(0, |acc, (&c, &r)| acc * r + c)
    };
    let mut b = StructureBuilder::new(
        grid.clone(),
        StructureKind::ArbitraryPosition { dims, depth },
    );
    for id in 0..total {
        let heap = decode(id);
        // cell range along each dimension
        let ranges: Vec<(usize, usize)> = heap
            .iter()
            .enumerate()
            .map(|(d, &h)| {
                let level = usize::BITS as usize - 1 - (h + 1).leading_zeros() as usize;
                let index = h + 1 - (1 << level);
                let width = grid.splits()[d] >> level;
                (index * width, (index + 1) * width)
            })
            .collect();
        b.add_node_intervals(box_intervals(grid, &ranges))?;
    }
    for id in 0..total {
        let heap = decode(id);
        for d in 0..dims {
            let level = usize::BITS as usize - 1 - (heap[d] + 1).leading_zeros() as usize;
            if level < levels[d] {
                let mut left = heap.clone();
                left[d] = 2 * heap[d] + 1;
                let mut right = heap.clone();
                right[d] = 2 * heap[d] + 2;
                b.add_group(id, [encode(&left), encode(&right)])?;
            }
        }
    }
    b.finish()
}

/// Row-major intervals of the cells in a box given by half-open ranges.
fn box_intervals(grid: &CellGrid, ranges: &[(usize, usize)]) -> Vec<(u32, u32)> {
    let dims = ranges.len();
    let last = ranges[dims - 1];
    let mut out: Vec<(u32, u32)> = Vec::new();
    let mut coords: Vec<usize> = ranges.iter().map(|r| r.0).collect();
    loop {
        coords[dims - 1] = last.0;
        let a = grid.cell_index(&coords) as u32;
        let b = a + (last.1 - last.0) as u32 - 1;
        match out.last_mut() {
            Some((_, end)) if *end + 1 == a => *end = b,
            _ => out.push((a, b)),
        }
        // odometer over the leading dimensions
        let mut d = dims - 1;
        loop {
            if d == 0 {
                return out;
            }
            d -= 1;
            coords[d] += 1;
            if coords[d] < ranges[d].1 {
                break;
            }
            coords[d] = ranges[d].0;
        }
    }
}
