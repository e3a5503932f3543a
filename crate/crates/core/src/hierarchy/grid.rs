use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform axis-aligned quantization of `[0, 1]^n`.
///
/// Cells are numbered row-major over the dimensions in declaration order
/// (the last dimension varies fastest). Along each dimension the cell
/// `k` owns the half-open slab `[k / S, (k + 1) / S)`, except that a
/// coordinate of exactly `1.0` falls into the last slab.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellGrid {
    splits: Vec<usize>,
}

impl CellGrid {
    /// A grid with explicit per-dimension split counts.
    pub fn new(splits: Vec<usize>) -> Result<Self> {
        if splits.is_empty() {
            return Err(Error::config("a grid needs at least one dimension"));
        }
        if splits.contains(&0) {
            return Err(Error::config("split counts must be positive"));
        }
        splits
            .iter()
            .try_fold(1usize, |acc, &s| acc.checked_mul(s))
            .ok_or_else(|| Error::config("total cell count overflows"))?;
        Ok(CellGrid { splits })
    }

    /// The power-of-two scheme: with `L = log2(total_cells)`, the first
    /// `L mod n` dimensions get `2^(floor(L/n)+1)` slabs and the remaining
    /// ones `2^floor(L/n)`.
    pub fn uniform(dims: usize, total_cells: usize) -> Result<Self> {
        if dims == 0 {
            return Err(Error::config("a grid needs at least one dimension"));
        }
        if !total_cells.is_power_of_two() {
            return Err(Error::config(format!(
                "cell count {total_cells} is not a power of two"
            )));
        }
        let bits = scheme_bits(dims, total_cells.trailing_zeros() as usize);
        CellGrid::new(bits.into_iter().map(|b| 1usize << b).collect())
    }

    pub fn dims(&self) -> usize {
        self.splits.len()
    }

    pub fn splits(&self) -> &[usize] {
        &self.splits
    }

    pub fn total_cells(&self) -> usize {
        self.splits.iter().product()
    }

    pub fn quantize(&self, context: &[f64]) -> Result<usize> {
        if context.len() != self.dims() {
            return Err(Error::Shape {
                expected: self.dims(),
                got: context.len(),
            });
        }
        let mut cell = 0usize;
        for (d, (&x, &s)) in context.iter().zip(&self.splits).enumerate() {
            if !(0.0..=1.0).contains(&x) {
                return Err(Error::domain(format!(
                    "context coordinate {d} = {x} is outside [0, 1]"
                )));
            }
            let k = ((x * s as f64) as usize).min(s - 1);
            cell = cell * s + k;
        }
        Ok(cell)
    }

    /// Per-dimension slab indices of a cell.
    pub fn coords(&self, cell: usize) -> Vec<usize> {
        let mut out = vec![0; self.dims()];
        let mut rest = cell;
        for d in (0..self.dims()).rev() {
            out[d] = rest % self.splits[d];
            rest /= self.splits[d];
        }
        out
    }

    pub fn cell_index(&self, coords: &[usize]) -> usize {
        coords
            .iter()
            .zip(&self.splits)
            .fold(0, |acc, (&k, &s)| acc * s + k)
    }

    pub fn cell_center(&self, cell: usize) -> Vec<f64> {
        self.coords(cell)
            .iter()
            .zip(&self.splits)
            .map(|(&k, &s)| (k as f64 + 0.5) / s as f64)
            .collect()
    }

    /// Longest diagonal of a cell.
    pub fn cell_diagonal(&self) -> f64 {
        self.splits
            .iter()
            .map(|&s| (1.0 / s as f64).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

/// log2 of the per-dimension split counts under the power-of-two scheme.
pub(crate) fn scheme_bits(dims: usize, total_bits: usize) -> Vec<usize> {
    let base = total_bits / dims;
    let extra = total_bits % dims;
    (0..dims).map(|d| base + usize::from(d < extra)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_dims_sixteen_cells() {
        let g = CellGrid::uniform(2, 16).unwrap();
        assert_eq!(g.splits(), &[4, 4]);
        assert_eq!(g.quantize(&[0.3, 0.7]).unwrap(), 6);
    }

    #[test]
    fn extra_resolution_goes_to_leading_dims() {
        assert_eq!(CellGrid::uniform(3, 16).unwrap().splits(), &[4, 2, 2]);
        assert_eq!(CellGrid::uniform(3, 32).unwrap().splits(), &[4, 4, 2]);
        assert_eq!(CellGrid::uniform(6, 64).unwrap().splits(), &[2; 6]);
    }

    #[test]
    fn upper_boundary_clamps() {
        let g = CellGrid::uniform(1, 4).unwrap();
        assert_eq!(g.quantize(&[1.0]).unwrap(), 3);
        assert_eq!(g.quantize(&[0.0]).unwrap(), 0);
        assert_eq!(g.quantize(&[0.25]).unwrap(), 1);
    }

    #[test]
    fn rejects_bad_contexts() {
        let g = CellGrid::uniform(2, 16).unwrap();
        assert!(matches!(g.quantize(&[0.5]), Err(Error::Shape { .. })));
        assert!(matches!(g.quantize(&[0.5, 1.01]), Err(Error::Domain(_))));
        assert!(matches!(g.quantize(&[-0.1, 0.2]), Err(Error::Domain(_))));
        assert!(matches!(g.quantize(&[f64::NAN, 0.2]), Err(Error::Domain(_))));
    }

    #[test]
    fn rejects_non_power_of_two() {
        assert!(CellGrid::uniform(1, 12).is_err());
        assert!(CellGrid::new(vec![3, 0]).is_err());
    }

    #[test]
    fn centers_round_trip() {
        let g = CellGrid::uniform(3, 64).unwrap();
        for c in 0..g.total_cells() {
            assert_eq!(g.quantize(&g.cell_center(c)).unwrap(), c);
            assert_eq!(g.cell_index(&g.coords(c)), c);
        }
    }
}
