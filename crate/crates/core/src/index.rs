//! Shape- and dimension-invariant indexing of the k-dimensional score tensor.
//!
//! A tensor of shape `(rho_0, ..., rho_{k-1})` is laid out row-major
//! (last axis fastest) and addressed by flat offsets. Every cell has up to
//! `2^k - 1` lower neighbours, one per non-zero 0/1 offset vector; the same
//! offset vectors describe higher neighbours and partition-grid dependencies.
//!
//! All types are immutable values and every operation is pure.

use std::fmt;

use crate::error::{Error, Result};

/// Geometry of the score tensor: cells per axis and the derived row-major
/// strides. Axis lengths are sequence lengths plus one (the initial gap row).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Shape {
    dims: Vec<usize>,
    strides: Vec<u64>,
    cells: u64,
}

impl Shape {
    /// Builds a shape, checking `k >= 2`, every axis `>= 2`, and that the
    /// total cell count fits the 64-bit offset type.
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::Config(format!(
                "shape needs at least 2 axes, got {}",
                dims.len()
            )));
        }
        if let Some(axis) = dims.iter().position(|&d| d < 2) {
            return Err(Error::Config(format!(
                "axis {axis} has extent {}; every axis needs at least 2 cells \
                 (sequence length + 1)",
                dims[axis]
            )));
        }
        let mut cells: u64 = 1;
        for &d in &dims {
            cells = cells
                .checked_mul(d as u64)
                .ok_or_else(|| Error::Config("cell count overflows u64 offsets".into()))?;
        }
        let mut strides = vec![1u64; dims.len()];
        for axis in (0..dims.len() - 1).rev() {
            strides[axis] = strides[axis + 1] * dims[axis + 1] as u64;
        }
        Ok(Shape {
            dims,
            strides,
            cells,
        })
    }

    pub fn k(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self, axis: usize) -> usize {
        self.dims[axis]
    }

    /// Total number of cells, `tau = prod(rho_i)`.
    pub fn cell_count(&self) -> u64 {
        self.cells
    }

    /// Row-major strides: `stride_i = prod_{j>i} rho_j`, last stride 1.
    pub fn strides(&self) -> &[u64] {
        &self.strides
    }

    pub fn contains(&self, idx: &MultiIndex) -> bool {
        idx.coords().len() == self.dims.len()
            && idx.coords().iter().zip(&self.dims).all(|(&c, &d)| c < d)
    }

    /// Flat row-major offset of `idx`.
    pub fn flatten(&self, idx: &MultiIndex) -> Result<u64> {
        if !self.contains(idx) {
            return Err(Error::OutOfBounds {
                what: "multi-index",
                detail: format!("{idx} does not fit shape {self}"),
            });
        }
        Ok(self.flatten_unchecked(idx.coords()))
    }

    pub(crate) fn flatten_unchecked(&self, coords: &[usize]) -> u64 {
        coords
            .iter()
            .zip(&self.strides)
            .map(|(&c, &s)| c as u64 * s)
            .sum()
    }

    /// Inverse of [`Shape::flatten`].
    pub fn unflatten(&self, offset: u64) -> Result<MultiIndex> {
        if offset >= self.cells {
            return Err(Error::OutOfBounds {
                what: "flat offset",
                detail: format!("{offset} >= cell count {}", self.cells),
            });
        }
        let mut rest = offset;
        let coords = self
            .strides
            .iter()
            .map(|&s| {
                let c = (rest / s) as usize;
                rest %= s;
                c
            })
            .collect();
        Ok(MultiIndex::new(coords))
    }

    /// All in-bounds lower neighbours `idx - d` in canonical offset order.
    /// Cells on low faces yield fewer than `2^k - 1` entries.
    pub fn lower_neighbors(&self, idx: &MultiIndex) -> Result<Vec<(OffsetVector, MultiIndex)>> {
        self.neighbors_of(idx, Direction::Lower)
    }

    /// Mirror of [`Shape::lower_neighbors`]: in-bounds `idx + d`.
    pub fn higher_neighbors(&self, idx: &MultiIndex) -> Result<Vec<(OffsetVector, MultiIndex)>> {
        self.neighbors_of(idx, Direction::Higher)
    }

    fn neighbors_of(
        &self,
        idx: &MultiIndex,
        dir: Direction,
    ) -> Result<Vec<(OffsetVector, MultiIndex)>> {
        if !self.contains(idx) {
            return Err(Error::OutOfBounds {
                what: "multi-index",
                detail: format!("{idx} does not fit shape {self}"),
            });
        }
        let k = self.k();
        let mut out = Vec::new();
        for d in OffsetVector::all(k) {
            let mut coords = idx.coords().to_vec();
            let mut ok = true;
            for axis in 0..k {
                if d.component(axis) == 0 {
                    continue;
                }
                match dir {
                    Direction::Lower => {
                        if coords[axis] == 0 {
                            ok = false;
                            break;
                        }
                        coords[axis] -= 1;
                    }
                    Direction::Higher => {
                        if coords[axis] + 1 >= self.dims[axis] {
                            ok = false;
                            break;
                        }
                        coords[axis] += 1;
                    }
                }
            }
            if ok {
                out.push((d, MultiIndex::new(coords)));
            }
        }
        Ok(out)
    }

    /// The all-zero index.
    pub fn origin(&self) -> MultiIndex {
        MultiIndex::new(vec![0; self.k()])
    }

    /// The cell with every coordinate maximal; its score is the optimal
    /// global alignment score.
    pub fn terminal(&self) -> MultiIndex {
        MultiIndex::new(self.dims.iter().map(|&d| d - 1).collect())
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, d) in self.dims.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{d}")?;
        }
        write!(f, ")")
    }
}

#[derive(Debug, Clone, Copy)]
enum Direction {
    Lower,
    Higher,
}

/// A cell address: one coordinate per axis.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex {
    coords: Vec<usize>,
}

impl MultiIndex {
    pub fn new(coords: Vec<usize>) -> Self {
        MultiIndex { coords }
    }

    pub fn coords(&self) -> &[usize] {
        &self.coords
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn is_origin(&self) -> bool {
        self.coords.iter().all(|&c| c == 0)
    }
}

impl From<Vec<usize>> for MultiIndex {
    fn from(coords: Vec<usize>) -> Self {
        MultiIndex::new(coords)
    }
}

impl std::ops::Index<usize> for MultiIndex {
    type Output = usize;

    fn index(&self, axis: usize) -> &usize {
        &self.coords[axis]
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.coords.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// A non-zero 0/1 offset between a cell and one of its `2^k - 1` neighbours
/// (or between a partition and a dependent partition in grid coordinates).
///
/// Stored as a bitmask with axis 0 as the most significant of `k` bits, so
/// counting the mask from 1 to `2^k - 1` yields the canonical enumeration
/// order: `(0,..,0,1)` first, the all-ones diagonal last.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OffsetVector {
    k: u8,
    mask: u64,
}

impl OffsetVector {
    /// Maximum supported dimensionality for offset masks.
    pub const MAX_K: usize = 63;

    /// Builds an offset from its canonical mask (`1 <= mask < 2^k`).
    pub fn from_mask(mask: u64, k: usize) -> Result<Self> {
        if k < 2 || k > Self::MAX_K {
            return Err(Error::Config(format!(
                "offset dimensionality {k} outside 2..={}",
                Self::MAX_K
            )));
        }
        if mask == 0 || mask >= 1u64 << k {
            return Err(Error::Config(format!(
                "offset mask {mask} invalid for k={k}: must be in 1..2^k"
            )));
        }
        Ok(OffsetVector { k: k as u8, mask })
    }

    /// Builds an offset from explicit 0/1 components.
    pub fn from_components(bits: &[u8]) -> Result<Self> {
        let k = bits.len();
        let mut mask = 0u64;
        for (axis, &b) in bits.iter().enumerate() {
            if b > 1 {
                return Err(Error::Config(format!(
                    "offset component {b} at axis {axis}: components are 0 or 1"
                )));
            }
            if b == 1 {
                mask |= 1u64 << (k - 1 - axis);
            }
        }
        Self::from_mask(mask, k)
    }

    /// All `2^k - 1` offsets in canonical (binary counting) order.
    pub fn all(k: usize) -> impl Iterator<Item = OffsetVector> {
        let k = k as u8;
        (1..(1u64 << k)).map(move |mask| OffsetVector { k, mask })
    }

    pub fn k(&self) -> usize {
        self.k as usize
    }

    /// The canonical mask, also used as the compact stored move code.
    pub fn mask(&self) -> u64 {
        self.mask
    }

    /// Component along `axis`, 0 or 1.
    pub fn component(&self, axis: usize) -> usize {
        debug_assert!(axis < self.k as usize);
        ((self.mask >> (self.k as usize - 1 - axis)) & 1) as usize
    }

    /// Number of axes along which the offset moves.
    pub fn popcount(&self) -> u32 {
        self.mask.count_ones()
    }

    /// True for the all-ones diagonal move.
    pub fn is_full_diagonal(&self) -> bool {
        self.mask == (1u64 << self.k) - 1
    }
}

impl fmt::Display for OffsetVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for axis in 0..self.k as usize {
            if axis > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{}", self.component(axis))?;
        }
        write!(f, ")")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shape(dims: &[usize]) -> Shape {
        Shape::new(dims.to_vec()).unwrap()
    }

    fn idx(coords: &[usize]) -> MultiIndex {
        MultiIndex::new(coords.to_vec())
    }

    #[test]
    fn strides_row_major() {
        assert_eq!(shape(&[9, 9]).strides(), &[9, 1]);
        assert_eq!(shape(&[9, 9, 9, 9]).strides(), &[729, 81, 9, 1]);
        assert_eq!(shape(&[2, 3, 4]).strides(), &[12, 4, 1]);
    }

    #[test]
    fn strides_decreasing_and_cover_tensor() {
        for dims in [vec![2, 2], vec![9, 9, 9, 9], vec![3, 5, 2, 7]] {
            let s = shape(&dims);
            let strides = s.strides();
            assert!(strides.windows(2).all(|w| w[0] > w[1]));
            assert_eq!(strides[0] * dims[0] as u64, s.cell_count());
        }
    }

    #[test]
    fn flatten_examples() {
        assert_eq!(shape(&[9, 9]).flatten(&idx(&[2, 3])).unwrap(), 21);
        assert_eq!(
            shape(&[9, 9, 9, 9]).flatten(&idx(&[0, 0, 0, 0])).unwrap(),
            0
        );
        let s = shape(&[2, 3, 4]);
        assert_eq!(s.flatten(&idx(&[1, 2, 3])).unwrap(), 23);
        assert_eq!(s.cell_count() - 1, 23);
    }

    #[test]
    fn unflatten_examples() {
        assert_eq!(shape(&[9, 9]).unflatten(21).unwrap(), idx(&[2, 3]));
        assert_eq!(shape(&[9, 9]).unflatten(0).unwrap(), idx(&[0, 0]));
        assert_eq!(shape(&[2, 3, 4]).unflatten(23).unwrap(), idx(&[1, 2, 3]));
    }

    #[test]
    fn bounds_errors() {
        let s = shape(&[9, 9]);
        assert!(s.flatten(&idx(&[9, 0])).is_err());
        assert!(s.flatten(&idx(&[0, 0, 0])).is_err());
        assert!(s.unflatten(81).is_err());
    }

    #[test]
    fn shape_invariants_enforced() {
        assert!(Shape::new(vec![9]).is_err());
        assert!(Shape::new(vec![9, 1]).is_err());
        assert!(Shape::new(vec![u64::MAX as usize, 2, 2]).is_err());
    }

    #[test]
    fn offset_canonical_order_axis0_most_significant() {
        let all: Vec<_> = OffsetVector::all(2).collect();
        assert_eq!(all.len(), 3);
        assert_eq!(all[0].component(0), 0);
        assert_eq!(all[0].component(1), 1);
        assert_eq!(all[1].component(0), 1);
        assert_eq!(all[1].component(1), 0);
        assert!(all[2].is_full_diagonal());
    }

    #[test]
    fn offset_count_is_2k_minus_1() {
        for k in 2..=6 {
            assert_eq!(OffsetVector::all(k).count(), (1 << k) - 1);
        }
    }

    #[test]
    fn offset_from_components_round_trip() {
        let d = OffsetVector::from_components(&[1, 0, 1]).unwrap();
        assert_eq!(d.mask(), 0b101);
        assert_eq!(d.popcount(), 2);
        assert_eq!(d.to_string(), "(1, 0, 1)");
        assert!(OffsetVector::from_components(&[0, 0]).is_err());
        assert!(OffsetVector::from_components(&[2, 0]).is_err());
    }

    #[test]
    fn lower_neighbors_2d_interior() {
        let s = shape(&[9, 9]);
        let n = s.lower_neighbors(&idx(&[3, 4])).unwrap();
        let expect = [
            (&[0u8, 1][..], &[3usize, 3][..]),
            (&[1, 0], &[2, 4]),
            (&[1, 1], &[2, 3]),
        ];
        assert_eq!(n.len(), expect.len());
        for ((d, nb), (bits, coords)) in n.iter().zip(expect.iter()) {
            assert_eq!(d, &OffsetVector::from_components(bits).unwrap());
            assert_eq!(nb.coords(), *coords);
        }
    }

    #[test]
    fn lower_neighbors_origin_empty() {
        for dims in [vec![9, 9], vec![3, 3, 3], vec![2, 4, 2, 3]] {
            let s = shape(&dims);
            assert!(s.lower_neighbors(&s.origin()).unwrap().is_empty());
        }
    }

    #[test]
    fn lower_neighbors_3d_interior_count() {
        let s = shape(&[9, 9, 9]);
        assert_eq!(s.lower_neighbors(&idx(&[4, 4, 4])).unwrap().len(), 7);
    }

    #[test]
    fn higher_neighbors_examples() {
        let s = shape(&[9, 9]);
        assert!(s.higher_neighbors(&s.terminal()).unwrap().is_empty());
        let n = s.higher_neighbors(&s.origin()).unwrap();
        let coords: Vec<_> = n.iter().map(|(_, nb)| nb.coords().to_vec()).collect();
        assert_eq!(coords, vec![vec![0, 1], vec![1, 0], vec![1, 1]]);

        // Oracle: enumerate all d in {0,1}^3 minus zero by hand.
        let s3 = shape(&[3, 3, 3]);
        assert_eq!(s3.higher_neighbors(&idx(&[1, 1, 1])).unwrap().len(), 7);
    }

    #[test]
    fn clipped_neighbor_counts_sum_to_full_fan() {
        let s = shape(&[4, 3, 5]);
        let k = s.k();
        for offset in 0..s.cell_count() {
            let cell = s.unflatten(offset).unwrap();
            let present = s.lower_neighbors(&cell).unwrap().len();
            let clipped = OffsetVector::all(k)
                .filter(|d| (0..k).any(|a| d.component(a) == 1 && cell[a] == 0))
                .count();
            assert_eq!(present + clipped, (1 << k) - 1);
        }
    }
}

#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    fn small_shape() -> impl Strategy<Value = Shape> {
        proptest::collection::vec(2usize..6, 2..5).prop_map(|dims| Shape::new(dims).unwrap())
    }

    proptest! {
        #[test]
        fn flatten_unflatten_identity(shape in small_shape()) {
            for offset in 0..shape.cell_count() {
                let idx = shape.unflatten(offset).unwrap();
                prop_assert_eq!(shape.flatten(&idx).unwrap(), offset);
            }
        }

        #[test]
        fn neighbors_are_converses(shape in small_shape()) {
            for offset in 0..shape.cell_count() {
                let cell = shape.unflatten(offset).unwrap();
                for (d, lower) in shape.lower_neighbors(&cell).unwrap() {
                    let highers = shape.higher_neighbors(&lower).unwrap();
                    prop_assert!(highers.iter().any(|(hd, hn)| *hd == d && *hn == cell));
                }
                for (d, higher) in shape.higher_neighbors(&cell).unwrap() {
                    let lowers = shape.lower_neighbors(&higher).unwrap();
                    prop_assert!(lowers.iter().any(|(ld, ln)| *ld == d && *ln == cell));
                }
            }
        }

        #[test]
        fn flatten_is_bijective(shape in small_shape()) {
            let mut seen = vec![false; shape.cell_count() as usize];
            let mut stack = vec![vec![]];
            while let Some(prefix) = stack.pop() {
                if prefix.len() == shape.k() {
                    let flat = shape.flatten(&MultiIndex::new(prefix)).unwrap() as usize;
                    prop_assert!(!seen[flat]);
                    seen[flat] = true;
                    continue;
                }
                for c in 0..shape.dim(prefix.len()) {
                    let mut next = prefix.clone();
                    next.push(c);
                    stack.push(next);
                }
            }
            prop_assert!(seen.into_iter().all(|s| s));
        }
    }
}
