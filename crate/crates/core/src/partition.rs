//! Dividing the tensor: the partition grid, wave enumeration, overlap
//! accounting, worker ownership and the dependency network.
//!
//! Partitions are k-dimensional boxes of side `S` that overlap their
//! neighbours by one cell per axis; partition `g` starts at global cell
//! `g_i * (S - 1)`. All partitions whose grid coordinates sum to `w` form
//! wave `w`: they are mutually independent and computable concurrently once
//! every earlier wave has finished.

use crate::error::{Error, Result};
use crate::index::{MultiIndex, OffsetVector, Shape};

/// The lattice of partitions covering a shape for one partition size.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionGrid {
    shape: Shape,
    partition_size: usize,
    counts: Vec<usize>,
    total: u64,
    waves: usize,
}

impl PartitionGrid {
    /// Builds the grid: `p_i = ceil((rho_i - 1) / (S - 1))`, `P = prod p_i`,
    /// `t = sum(p_i - 1) + 1`. When every `rho_i - 1` divides by `S - 1`
    /// these match the closed forms exactly; otherwise the last partition
    /// per axis is smaller, keeping coverage exact.
    pub fn new(shape: Shape, partition_size: usize) -> Result<Self> {
        if partition_size < 2 {
            return Err(Error::Config(format!(
                "partition size {partition_size} must be at least 2"
            )));
        }
        if let Some(axis) = shape.dims().iter().position(|&d| partition_size > d) {
            return Err(Error::Config(format!(
                "partition size {partition_size} exceeds axis {axis} extent {}",
                shape.dim(axis)
            )));
        }
        let step = partition_size - 1;
        let counts: Vec<usize> = shape
            .dims()
            .iter()
            .map(|&d| (d - 1).div_ceil(step))
            .collect();
        let mut total = 1u64;
        for &p in &counts {
            total = total
                .checked_mul(p as u64)
                .ok_or_else(|| Error::Config("partition count overflows u64".into()))?;
        }
        let waves = counts.iter().map(|&p| p - 1).sum::<usize>() + 1;
        Ok(PartitionGrid {
            shape,
            partition_size,
            counts,
            total,
            waves,
        })
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn k(&self) -> usize {
        self.shape.k()
    }

    pub fn partition_size(&self) -> usize {
        self.partition_size
    }

    /// Partitions per axis, `p_i`.
    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    /// Total number of partitions, `P`.
    pub fn total_partitions(&self) -> u64 {
        self.total
    }

    /// Total number of waves, `t`.
    pub fn wave_count(&self) -> usize {
        self.waves
    }

    /// Flat index of a partition in row-major grid order.
    pub fn flat_of(&self, partition: &PartitionId) -> u64 {
        let mut flat = 0u64;
        for (axis, &g) in partition.grid_coords().iter().enumerate() {
            flat = flat * self.counts[axis] as u64 + g as u64;
        }
        flat
    }

    pub fn contains(&self, partition: &PartitionId) -> bool {
        partition.grid_coords().len() == self.counts.len()
            && partition
                .grid_coords()
                .iter()
                .zip(&self.counts)
                .all(|(&g, &p)| g < p)
    }

    /// Global coordinate of the partition's first cell along `axis`.
    pub fn first_cell_coord(&self, partition: &PartitionId, axis: usize) -> usize {
        partition.grid_coords()[axis] * (self.partition_size - 1)
    }

    pub fn first_cell(&self, partition: &PartitionId) -> MultiIndex {
        MultiIndex::new(
            (0..self.k())
                .map(|axis| self.first_cell_coord(partition, axis))
                .collect(),
        )
    }

    /// Inclusive global coordinate range covered along `axis`:
    /// `[g_i (S-1), min(g_i (S-1) + S - 1, rho_i - 1)]`.
    pub fn covered_range(&self, partition: &PartitionId, axis: usize) -> (usize, usize) {
        let lo = self.first_cell_coord(partition, axis);
        let hi = (lo + self.partition_size - 1).min(self.shape.dim(axis) - 1);
        (lo, hi)
    }

    /// Cells covered along `axis` (the box extent).
    pub fn extent(&self, partition: &PartitionId, axis: usize) -> usize {
        let (lo, hi) = self.covered_range(partition, axis);
        hi - lo + 1
    }

    /// Number of cells this partition computes (box cells minus low faces
    /// received from predecessors); `(S-1)^k` for full interior partitions.
    pub fn owned_cell_count(&self, partition: &PartitionId) -> u64 {
        (0..self.k())
            .map(|axis| {
                let ext = self.extent(partition, axis) as u64;
                if partition.grid_coords()[axis] > 0 {
                    ext - 1
                } else {
                    ext
                }
            })
            .product()
    }

    /// The interior boundary coordinates along `axis`: cells shared between
    /// adjacent partitions, `m (S-1)` for `1 <= m <= p_i - 1`.
    pub fn boundary_coords(&self, axis: usize) -> Vec<usize> {
        let step = self.partition_size - 1;
        (1..self.counts[axis]).map(|m| m * step).collect()
    }

    /// The unique partition that computes `cell`:
    /// `g_i = 0` when `cell_i = 0`, else `ceil(cell_i / (S-1)) - 1`.
    pub fn owner_of_cell(&self, cell: &MultiIndex) -> Result<PartitionId> {
        if !self.shape.contains(cell) {
            return Err(Error::OutOfBounds {
                what: "cell",
                detail: format!("{cell} does not fit shape {}", self.shape),
            });
        }
        Ok(PartitionId::new(
            cell.coords().iter().map(|&c| self.owner_coord(c)).collect(),
        ))
    }

    #[inline]
    pub(crate) fn owner_coord(&self, cell_coord: usize) -> usize {
        if cell_coord == 0 {
            0
        } else {
            cell_coord.div_ceil(self.partition_size - 1) - 1
        }
    }

    /// All forward dependency edges, clipped at grid bounds: partition `g`
    /// feeds `g + d` for every offset `d`, at most `2^k - 1` successors.
    pub fn dependency_edges(&self) -> Vec<DependencyEdge> {
        let k = self.k();
        let mut edges = Vec::new();
        let mut coords = vec![0usize; k];
        loop {
            let from = PartitionId::new(coords.clone());
            for d in OffsetVector::all(k) {
                let mut to = coords.clone();
                let mut ok = true;
                for axis in 0..k {
                    to[axis] += d.component(axis);
                    if to[axis] >= self.counts[axis] {
                        ok = false;
                        break;
                    }
                }
                if ok {
                    edges.push(DependencyEdge {
                        from: from.clone(),
                        to: PartitionId::new(to),
                        offset: d,
                    });
                }
            }
            if !crate::dp::advance_odometer(&mut coords, &self.counts) {
                break;
            }
        }
        edges
    }
}

/// A partition, identified by its grid coordinates.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PartitionId {
    grid_coords: Vec<usize>,
}

impl PartitionId {
    pub fn new(grid_coords: Vec<usize>) -> Self {
        PartitionId { grid_coords }
    }

    pub fn grid_coords(&self) -> &[usize] {
        &self.grid_coords
    }

    /// Wave index: the grid-coordinate sum (distance from the origin
    /// partition), zero-based.
    pub fn wave(&self) -> usize {
        self.grid_coords.iter().sum()
    }
}

impl std::fmt::Display for PartitionId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[")?;
        for (i, g) in self.grid_coords.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            write!(f, "{g}")?;
        }
        write!(f, "]")
    }
}

/// A forward dependency between partitions: `to = from + offset`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DependencyEdge {
    pub from: PartitionId,
    pub to: PartitionId,
    pub offset: OffsetVector,
}

/// All partitions of wave `w`: grid coordinate vectors summing to `w` within
/// the per-axis bounds.
///
/// Generated the way the scheduler pre-processes waves: iterate the integer
/// partitions of `w` into at most `k` parts, then the distinct permutations
/// of each, dropping vectors that exceed an axis bound. The result is sorted
/// lexicographically so downstream schedules never depend on generation
/// order.
pub fn enumerate_wave(grid: &PartitionGrid, wave: usize) -> Result<Vec<PartitionId>> {
    if wave >= grid.wave_count() {
        return Err(Error::OutOfBounds {
            what: "wave",
            detail: format!("{wave} >= wave count {}", grid.wave_count()),
        });
    }
    let k = grid.k();
    let max_part = grid.counts().iter().max().copied().unwrap_or(1) - 1;
    let mut out = Vec::new();
    for parts in integer_partitions(wave, k, max_part) {
        // Pad to k axes and start from the ascending arrangement so the
        // permutation cycle visits each distinct arrangement once.
        let mut vector = vec![0usize; k - parts.len()];
        vector.extend(parts.iter().rev());
        debug_assert!(vector.windows(2).all(|w| w[0] <= w[1]));
        loop {
            if vector.iter().zip(grid.counts()).all(|(&g, &p)| g < p) {
                out.push(PartitionId::new(vector.clone()));
            }
            if !next_permutation(&mut vector) {
                break;
            }
        }
    }
    out.sort();
    Ok(out)
}

/// Integer partitions of `total` into at most `max_parts` parts, each at
/// most `max_part`, parts in non-increasing order.
fn integer_partitions(total: usize, max_parts: usize, max_part: usize) -> Vec<Vec<usize>> {
    fn recurse(
        remaining: usize,
        largest_next: usize,
        slots: usize,
        current: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        if remaining == 0 {
            out.push(current.clone());
            return;
        }
        if slots == 0 {
            return;
        }
        for part in (1..=largest_next.min(remaining)).rev() {
            current.push(part);
            recurse(remaining - part, part, slots - 1, current, out);
            current.pop();
        }
    }
    let mut out = Vec::new();
    recurse(total, max_part, max_parts, &mut Vec::new(), &mut out);
    out
}

/// In-place next lexicographic permutation of a multiset.
fn next_permutation(arr: &mut [usize]) -> bool {
    if arr.len() < 2 {
        return false;
    }
    let mut i = arr.len() - 1;
    while i > 0 && arr[i - 1] >= arr[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = arr.len() - 1;
    while arr[j] <= arr[i - 1] {
        j -= 1;
    }
    arr.swap(i - 1, j);
    arr[i..].reverse();
    true
}

/// Number of partitions in wave `w` without materialising them.
///
/// Unbounded (no `p_i` limits) this is the lattice composition count
/// `C(w + k - 1, k - 1)`; with bounds it counts vectors with `g_i < p_i` by
/// dynamic programming over axes.
pub fn count_wave(k: usize, wave: usize, bounds: Option<&[usize]>) -> u128 {
    match bounds {
        None => binomial(wave as u128 + k as u128 - 1, k as u128 - 1),
        Some(p) => {
            debug_assert_eq!(p.len(), k);
            let mut ways = vec![0u128; wave + 1];
            ways[0] = 1;
            for &bound in p {
                let mut next = vec![0u128; wave + 1];
                for (target, slot) in next.iter_mut().enumerate() {
                    for v in 0..bound.min(target + 1) {
                        *slot = slot.saturating_add(ways[target - v]);
                    }
                }
                ways = next;
            }
            ways[wave]
        }
    }
}

fn binomial(n: u128, r: u128) -> u128 {
    let r = r.min(n - r);
    let mut result = 1u128;
    for i in 1..=r {
        result = result.saturating_mul(n - r + i) / i;
    }
    result
}

/// Evaluates the published overlapping-cell recurrence exactly as printed:
/// `C = sum C_i` with `C_0 = rho_0 - 1` and
/// `C_i = C_{i-1} * rho_i + (prod_{j<=i} p_j) * 2^i - 1`.
///
/// This published estimate disagrees with the direct boundary-cell count
/// (its 1D slice gives `rho_0 - 1 = 8` for a 9-cell axis where 3 cells are
/// shared); [`overlap_cells_oracle`] is the ground truth used for buffer
/// accounting.
pub fn overlap_cells_formula(grid: &PartitionGrid) -> u128 {
    let mut prod_p = 1u128;
    let mut total = 0u128;
    let mut prev = 0u128;
    for axis in 0..grid.k() {
        prod_p = prod_p.saturating_mul(grid.counts()[axis] as u128);
        let c_i = if axis == 0 {
            (grid.shape().dim(0) - 1) as u128
        } else {
            prev.saturating_mul(grid.shape().dim(axis) as u128)
                .saturating_add(prod_p.saturating_mul(1u128 << axis))
                .saturating_sub(1)
        };
        total = total.saturating_add(c_i);
        prev = c_i;
    }
    total
}

/// Enumeration cap for the overlap oracle.
pub const OVERLAP_ORACLE_CELL_CAP: u64 = 10_000_000;

/// Counts global cells covered by two or more partitions: cells with at
/// least one coordinate on an interior partition boundary.
pub fn overlap_cells_oracle(grid: &PartitionGrid) -> Result<u64> {
    let cells = grid.shape().cell_count();
    if cells > OVERLAP_ORACLE_CELL_CAP {
        return Err(Error::TooLarge(format!(
            "overlap oracle refuses {cells} cells (cap {OVERLAP_ORACLE_CELL_CAP})"
        )));
    }
    let k = grid.k();
    let boundary: Vec<Vec<bool>> = (0..k)
        .map(|axis| {
            let mut mark = vec![false; grid.shape().dim(axis)];
            for b in grid.boundary_coords(axis) {
                mark[b] = true;
            }
            mark
        })
        .collect();
    let dims = grid.shape().dims().to_vec();
    let mut coords = vec![0usize; k];
    let mut shared = 0u64;
    loop {
        if coords
            .iter()
            .enumerate()
            .any(|(axis, &c)| boundary[axis][c])
        {
            shared += 1;
        }
        if !crate::dp::advance_odometer(&mut coords, &dims) {
            break;
        }
    }
    Ok(shared)
}

/// How partitions within a wave are assigned to workers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Assignment {
    /// Contiguous blocks of `ceil(p_w / V)` lexicographically adjacent
    /// partitions per worker, clustering closest-indexed partitions to
    /// reduce communication.
    #[default]
    Block,
    /// Round-robin, for experiments.
    RoundRobin,
}

impl std::str::FromStr for Assignment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "block" => Ok(Assignment::Block),
            "round-robin" | "roundrobin" => Ok(Assignment::RoundRobin),
            other => Err(Error::Config(format!(
                "unknown assignment {other:?}; expected block or round-robin"
            ))),
        }
    }
}

/// The pre-processed schedule: every wave's partitions in order, plus worker
/// ownership for each partition.
#[derive(Debug, Clone)]
pub struct WaveSchedule {
    grid: PartitionGrid,
    workers: usize,
    assignment: Assignment,
    waves: Vec<Vec<PartitionId>>,
    owners: Vec<u32>,
}

impl WaveSchedule {
    /// Assigns each wave's lexicographically sorted partitions to the `V`
    /// workers; under block assignment position `j` goes to worker
    /// `floor(j / ceil(p_w / V))`, clamped to `V - 1`.
    pub fn new(grid: PartitionGrid, workers: usize, assignment: Assignment) -> Result<Self> {
        if workers < 1 {
            return Err(Error::Config(format!(
                "worker count {workers} must be at least 1"
            )));
        }
        if workers > u32::MAX as usize {
            return Err(Error::Config(format!("worker count {workers} too large")));
        }
        let mut owners = vec![0u32; grid.total_partitions() as usize];
        let mut waves = Vec::with_capacity(grid.wave_count());
        for wave in 0..grid.wave_count() {
            let partitions = enumerate_wave(&grid, wave)?;
            let width = partitions.len();
            for (j, partition) in partitions.iter().enumerate() {
                let owner = match assignment {
                    Assignment::Block => {
                        let block = width.div_ceil(workers);
                        (j / block).min(workers - 1)
                    }
                    Assignment::RoundRobin => j % workers,
                };
                owners[grid.flat_of(partition) as usize] = owner as u32;
            }
            waves.push(partitions);
        }
        Ok(WaveSchedule {
            grid,
            workers,
            assignment,
            waves,
            owners,
        })
    }

    pub fn grid(&self) -> &PartitionGrid {
        &self.grid
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    pub fn assignment(&self) -> Assignment {
        self.assignment
    }

    pub fn waves(&self) -> &[Vec<PartitionId>] {
        &self.waves
    }

    pub fn partitions_in_wave(&self, wave: usize) -> &[PartitionId] {
        &self.waves[wave]
    }

    pub fn owner_of(&self, partition: &PartitionId) -> usize {
        self.owners[self.grid.flat_of(partition) as usize] as usize
    }

    pub(crate) fn owner_of_flat(&self, flat: u64) -> usize {
        self.owners[flat as usize] as usize
    }

    /// Partitions per worker over the whole run, `p_m`.
    pub fn allocation(&self) -> Vec<u64> {
        let mut per_worker = vec![0u64; self.workers];
        for &owner in &self.owners {
            per_worker[owner as usize] += 1;
        }
        per_worker
    }
}
