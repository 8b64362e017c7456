//! The k-dimensional dynamic-programming kernel.
//!
//! Every non-origin cell is the maximum over its in-bounds lower neighbours
//! of `neighbour score + column cost of the move`; only the origin is
//! special-cased to zero, so face cells fall out of the same recurrence
//! restricted to feasible moves. The winning move is stored per cell and
//! traceback replays it from the terminal corner.
//!
//! [`brute_force_best`] enumerates every monotone lattice path on tiny
//! instances and is the independent oracle for the recurrence.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::index::{MultiIndex, OffsetVector, Shape};
use crate::scalar::Score;
use crate::sequences::{column_score_coords, Alignment, ScoringScheme, SequenceSet};

/// Default memory cap for dense tensors: 1 GiB.
pub const DEFAULT_MEMORY_CAP: u64 = 1 << 30;

/// Enumeration cap for the brute-force oracle (cells).
pub const BRUTE_FORCE_CELL_CAP: u64 = 1_000_000;

/// Enumeration cap for the brute-force oracle (lattice paths).
pub const BRUTE_FORCE_PATH_CAP: u128 = 5_000_000;

/// Score and winning move of one cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellScore<T: Score> {
    pub value: T,
    /// Absent only at the origin.
    pub best_move: Option<OffsetVector>,
}

/// Densely scored tensor plus per-cell move provenance.
#[derive(Debug, Clone)]
pub struct ScoreTensor<T: Score> {
    shape: Shape,
    values: Vec<T>,
    moves: Vec<u32>,
}

/// Bytes per cell in a dense tensor (score + move code).
pub fn bytes_per_cell<T: Score>() -> u64 {
    (std::mem::size_of::<T>() + std::mem::size_of::<u32>()) as u64
}

impl<T: Score> ScoreTensor<T> {
    /// Allocates a zeroed tensor after checking the memory cap.
    pub fn alloc(shape: Shape, cap_bytes: u64) -> Result<Self> {
        if shape.k() > 31 {
            return Err(Error::TooLarge(format!(
                "{}-dimensional tensors exceed the dense move encoding (k <= 31)",
                shape.k()
            )));
        }
        let cells = shape.cell_count();
        let required = cells.saturating_mul(bytes_per_cell::<T>());
        if required > cap_bytes {
            return Err(Error::MemoryCap {
                cells,
                required,
                cap: cap_bytes,
            });
        }
        Ok(ScoreTensor {
            values: vec![T::zero(); cells as usize],
            moves: vec![0; cells as usize],
            shape,
        })
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn value_at_flat(&self, flat: u64) -> T {
        self.values[flat as usize]
    }

    pub fn value_at(&self, idx: &MultiIndex) -> Result<T> {
        Ok(self.values[self.shape.flatten(idx)? as usize])
    }

    pub fn move_code_at_flat(&self, flat: u64) -> u32 {
        self.moves[flat as usize]
    }

    pub fn best_move_at(&self, idx: &MultiIndex) -> Result<Option<OffsetVector>> {
        let code = self.moves[self.shape.flatten(idx)? as usize];
        if code == 0 {
            Ok(None)
        } else {
            Ok(Some(OffsetVector::from_mask(code as u64, self.shape.k())?))
        }
    }

    pub(crate) fn set_cell(&mut self, flat: u64, value: T, move_code: u32) {
        self.values[flat as usize] = value;
        self.moves[flat as usize] = move_code;
    }

    /// Score at the terminal corner: the optimal global alignment score.
    pub fn terminal_score(&self) -> T {
        self.values[self.values.len() - 1]
    }

    /// Writes the dump format: a small text header (shape, scheme digest)
    /// followed by the raw little-endian scores in flatten order.
    pub fn write_dump(&self, writer: &mut dyn Write, scheme_digest: u64) -> Result<()> {
        writeln!(writer, "wavealign-tensor v1")?;
        writeln!(writer, "dtype {}", T::DTYPE)?;
        let dims: Vec<String> = self.shape.dims().iter().map(|d| d.to_string()).collect();
        writeln!(writer, "shape {}", dims.join(","))?;
        writeln!(writer, "scheme {scheme_digest:016x}")?;
        writeln!(writer, "data")?;
        for v in &self.values {
            v.write_le(writer)?;
        }
        Ok(())
    }
}

/// A tensor dump read back from disk: scores only, no move provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorDump<T: Score> {
    pub shape: Shape,
    pub scheme_digest: u64,
    pub values: Vec<T>,
}

impl<T: Score> TensorDump<T> {
    pub fn read(reader: &mut dyn BufRead) -> Result<Self> {
        let mut line = String::new();
        let next_line = |reader: &mut dyn BufRead, line: &mut String| -> Result<String> {
            line.clear();
            reader.read_line(line)?;
            Ok(line.trim_end().to_string())
        };
        let magic = next_line(reader, &mut line)?;
        if magic != "wavealign-tensor v1" {
            return Err(Error::Parse {
                line: 1,
                message: format!("not a tensor dump (magic {magic:?})"),
            });
        }
        let dtype = next_line(reader, &mut line)?;
        let expected = format!("dtype {}", T::DTYPE);
        if dtype != expected {
            return Err(Error::Parse {
                line: 2,
                message: format!("expected {expected:?}, got {dtype:?}"),
            });
        }
        let shape_line = next_line(reader, &mut line)?;
        let dims = shape_line
            .strip_prefix("shape ")
            .ok_or_else(|| Error::Parse {
                line: 3,
                message: format!("expected shape header, got {shape_line:?}"),
            })?
            .split(',')
            .map(|tok| {
                tok.parse::<usize>().map_err(|_| Error::Parse {
                    line: 3,
                    message: format!("bad axis length {tok:?}"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let shape = Shape::new(dims)?;
        let scheme_line = next_line(reader, &mut line)?;
        let scheme_digest = scheme_line
            .strip_prefix("scheme ")
            .and_then(|h| u64::from_str_radix(h, 16).ok())
            .ok_or_else(|| Error::Parse {
                line: 4,
                message: format!("bad scheme digest line {scheme_line:?}"),
            })?;
        let data_line = next_line(reader, &mut line)?;
        if data_line != "data" {
            return Err(Error::Parse {
                line: 5,
                message: format!("expected data marker, got {data_line:?}"),
            });
        }
        let mut values = Vec::with_capacity(shape.cell_count() as usize);
        for _ in 0..shape.cell_count() {
            values.push(T::read_le(reader)?);
        }
        let mut rest = [0u8; 1];
        if reader.read(&mut rest)? != 0 {
            return Err(Error::Parse {
                line: 0,
                message: "trailing bytes after tensor data".into(),
            });
        }
        Ok(TensorDump {
            shape,
            scheme_digest,
            values,
        })
    }
}

/// Move codes in tie-break preference order: the all-ones diagonal first,
/// then canonical binary counting order.
pub(crate) fn preference_order(k: usize) -> impl Iterator<Item = u64> {
    let full = (1u64 << k) - 1;
    std::iter::once(full).chain(1..full)
}

/// Scores one cell given a neighbour lookup, generic over where the
/// neighbour scores live (dense tensor, partition block). The lookup is
/// called only for feasible moves and must yield every such score; a lookup
/// failure surfaces as a dependency error.
pub(crate) fn score_cell_coords<T: Score>(
    coords: &[usize],
    seqs: &SequenceSet,
    scheme: &ScoringScheme<T>,
    mut lookup: impl FnMut(u64) -> Result<T>,
) -> Result<(T, u32)> {
    let k = coords.len();
    let mut best: Option<(T, u32)> = None;
    for code in preference_order(k) {
        let feasible = (0..k).all(|axis| (code >> (k - 1 - axis)) & 1 == 0 || coords[axis] > 0);
        if !feasible {
            continue;
        }
        let neighbor = lookup(code)?;
        let candidate = neighbor + column_score_coords(scheme, seqs, coords, code)?;
        // Strictly-greater replacement keeps the earliest move in preference
        // order on ties (and on incomparable float candidates).
        let better = match &best {
            None => true,
            Some((value, _)) => candidate > *value,
        };
        if better {
            best = Some((candidate, code as u32));
        }
    }
    best.ok_or_else(|| {
        Error::Contract("score_cell called on the origin, which has no predecessors".into())
    })
}

/// Scores one cell of the recurrence. `neighbor_lookup` must return the
/// score of every in-bounds lower neighbour; `None` is reported as a
/// dependency error (a protocol bug when reached from the executor).
pub fn score_cell<T: Score>(
    shape: &Shape,
    cell: &MultiIndex,
    seqs: &SequenceSet,
    scheme: &ScoringScheme<T>,
    mut neighbor_lookup: impl FnMut(&MultiIndex) -> Option<T>,
) -> Result<CellScore<T>> {
    if !shape.contains(cell) {
        return Err(Error::OutOfBounds {
            what: "cell",
            detail: format!("{cell} does not fit shape {shape}"),
        });
    }
    let k = shape.k();
    let (value, code) = score_cell_coords(cell.coords(), seqs, scheme, |code| {
        let mut coords = cell.coords().to_vec();
        for axis in 0..k {
            if (code >> (k - 1 - axis)) & 1 == 1 {
                coords[axis] -= 1;
            }
        }
        let neighbor = MultiIndex::new(coords);
        neighbor_lookup(&neighbor).ok_or_else(|| Error::Dependency {
            cell: neighbor.to_string(),
            flat: shape.flatten_unchecked(cell.coords()),
            source_partition: "(lookup)".into(),
            source_worker: 0,
        })
    })?;
    Ok(CellScore {
        value,
        best_move: Some(OffsetVector::from_mask(code as u64, k)?),
    })
}

/// Advances a row-major odometer; returns false after the last index.
pub(crate) fn advance_odometer(coords: &mut [usize], dims: &[usize]) -> bool {
    for axis in (0..coords.len()).rev() {
        coords[axis] += 1;
        if coords[axis] < dims[axis] {
            return true;
        }
        coords[axis] = 0;
    }
    false
}

/// Scores the whole tensor in ascending flat order (a topological order of
/// the lower-neighbour DAG under the row-major layout).
pub fn score_sequential<T: Score>(
    seqs: &SequenceSet,
    scheme: &ScoringScheme<T>,
) -> Result<ScoreTensor<T>> {
    score_sequential_with_cap(seqs, scheme, DEFAULT_MEMORY_CAP)
}

pub fn score_sequential_with_cap<T: Score>(
    seqs: &SequenceSet,
    scheme: &ScoringScheme<T>,
    cap_bytes: u64,
) -> Result<ScoreTensor<T>> {
    scheme.supports(seqs)?;
    let shape = seqs.shape()?;
    let mut tensor = ScoreTensor::alloc(shape, cap_bytes)?;
    let k = tensor.shape.k();
    let strides = tensor.shape.strides().to_vec();
    let dims = tensor.shape.dims().to_vec();
    let mut coords = vec![0usize; k];
    let mut flat = 0u64;
    loop {
        if flat > 0 {
            let (value, code) = score_cell_coords(&coords, seqs, scheme, |code| {
                let mut delta = 0u64;
                let mut bits = code;
                while bits != 0 {
                    let axis = k - 1 - bits.trailing_zeros() as usize;
                    delta += strides[axis];
                    bits &= bits - 1;
                }
                Ok(tensor.values[(flat - delta) as usize])
            })?;
            tensor.set_cell(flat, value, code);
        }
        if !advance_odometer(&mut coords, &dims) {
            break;
        }
        flat += 1;
    }
    Ok(tensor)
}

/// Walks stored moves from the terminal corner back to the origin and emits
/// one alignment column per step.
pub fn traceback<T: Score>(tensor: &ScoreTensor<T>, seqs: &SequenceSet) -> Result<Alignment> {
    let shape = tensor.shape();
    let k = shape.k();
    let mut coords = shape.terminal().coords().to_vec();
    let mut columns: Vec<Vec<u8>> = Vec::new();
    while coords.iter().any(|&c| c > 0) {
        let flat = shape.flatten_unchecked(&coords);
        let code = tensor.moves[flat as usize] as u64;
        if code == 0 {
            return Err(Error::Contract(format!(
                "move provenance missing at cell {} during traceback",
                MultiIndex::new(coords)
            )));
        }
        let mut column = vec![crate::sequences::GAP; k];
        for axis in 0..k {
            if (code >> (k - 1 - axis)) & 1 == 1 {
                column[axis] = seqs.residues(axis)[coords[axis] - 1];
                coords[axis] -= 1;
            }
        }
        columns.push(column);
    }
    columns.reverse();
    let rows = (0..k)
        .map(|axis| columns.iter().map(|c| c[axis]).collect())
        .collect();
    Alignment::new(rows)
}

/// Exhaustively enumerates every monotone lattice path from origin to
/// terminal corner (equivalently, every gapped alignment without all-gap
/// columns) and returns the best sum-of-pairs score with one witness.
///
/// Independent of the recurrence: path scores accumulate column by column,
/// never reusing cell maxima.
pub fn brute_force_best<T: Score>(
    seqs: &SequenceSet,
    scheme: &ScoringScheme<T>,
) -> Result<(T, Alignment)> {
    scheme.supports(seqs)?;
    let shape = seqs.shape()?;
    if shape.cell_count() > BRUTE_FORCE_CELL_CAP {
        return Err(Error::TooLarge(format!(
            "brute force refuses {} cells (cap {BRUTE_FORCE_CELL_CAP})",
            shape.cell_count()
        )));
    }
    let paths = count_paths(&shape);
    if paths > BRUTE_FORCE_PATH_CAP {
        return Err(Error::TooLarge(format!(
            "brute force refuses {paths} lattice paths (cap {BRUTE_FORCE_PATH_CAP})"
        )));
    }

    let k = shape.k();
    let terminal = shape.terminal().coords().to_vec();
    let mut coords = vec![0usize; k];
    let mut moves: Vec<u64> = Vec::new();
    let mut running = vec![T::zero()];
    let mut best: Option<(T, Vec<u64>)> = None;

    // Iterative depth-first search over forward moves in preference order.
    let mut pending: Vec<(usize, u64)> = Vec::new();
    push_forward_moves(&coords, &terminal, k, 0, &mut pending);
    while let Some((depth, code)) = pending.pop() {
        while moves.len() > depth {
            let undone = moves.pop().unwrap();
            undo_move(&mut coords, undone, k);
            running.pop();
        }
        apply_move(&mut coords, code, k);
        let column = column_score_coords(scheme, seqs, &coords, code)?;
        running.push(*running.last().unwrap() + column);
        moves.push(code);
        if coords == terminal {
            let score = *running.last().unwrap();
            let better = match &best {
                None => true,
                Some((b, _)) => score > *b,
            };
            if better {
                best = Some((score, moves.clone()));
            }
        } else {
            push_forward_moves(&coords, &terminal, k, moves.len(), &mut pending);
        }
    }

    let (score, path) = best.expect("non-empty shape always has at least one path");
    let mut cursor = vec![0usize; k];
    let mut columns = Vec::with_capacity(path.len());
    for code in path {
        apply_move(&mut cursor, code, k);
        let mut column = vec![crate::sequences::GAP; k];
        for axis in 0..k {
            if (code >> (k - 1 - axis)) & 1 == 1 {
                column[axis] = seqs.residues(axis)[cursor[axis] - 1];
            }
        }
        columns.push(column);
    }
    let rows = (0..k)
        .map(|axis| columns.iter().map(|c| c[axis]).collect())
        .collect();
    Ok((score, Alignment::new(rows)?))
}

fn push_forward_moves(
    coords: &[usize],
    terminal: &[usize],
    k: usize,
    depth: usize,
    pending: &mut Vec<(usize, u64)>,
) {
    // Pushed in reverse so the stack pops the all-ones diagonal first, then
    // canonical order.
    let order: Vec<u64> = preference_order(k)
        .filter(|&code| {
            (0..k).all(|axis| (code >> (k - 1 - axis)) & 1 == 0 || coords[axis] < terminal[axis])
        })
        .collect();
    for &code in order.iter().rev() {
        pending.push((depth, code));
    }
}

fn apply_move(coords: &mut [usize], code: u64, k: usize) {
    for axis in 0..k {
        if (code >> (k - 1 - axis)) & 1 == 1 {
            coords[axis] += 1;
        }
    }
}

fn undo_move(coords: &mut [usize], code: u64, k: usize) {
    for axis in 0..k {
        if (code >> (k - 1 - axis)) & 1 == 1 {
            coords[axis] -= 1;
        }
    }
}

/// Number of monotone lattice paths from origin to terminal, saturating.
fn count_paths(shape: &Shape) -> u128 {
    let cells = shape.cell_count();
    let mut counts = vec![0u128; cells as usize];
    counts[0] = 1;
    let dims = shape.dims().to_vec();
    let strides = shape.strides().to_vec();
    let k = shape.k();
    let mut coords = vec![0usize; k];
    let mut flat = 0usize;
    loop {
        if flat > 0 {
            let mut total = 0u128;
            for code in 1..(1u64 << k) {
                let feasible =
                    (0..k).all(|axis| (code >> (k - 1 - axis)) & 1 == 0 || coords[axis] > 0);
                if !feasible {
                    continue;
                }
                let mut delta = 0u64;
                let mut bits = code;
                while bits != 0 {
                    let axis = k - 1 - bits.trailing_zeros() as usize;
                    delta += strides[axis];
                    bits &= bits - 1;
                }
                total = total.saturating_add(counts[flat - delta as usize]);
            }
            counts[flat] = total;
        }
        if !advance_odometer(&mut coords, &dims) {
            break;
        }
        flat += 1;
    }
    counts[cells as usize - 1]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sequences::{similarity_score, Alphabet};

    fn unit() -> ScoringScheme<i64> {
        ScoringScheme::unit()
    }

    fn seqs(strs: &[&str]) -> SequenceSet {
        SequenceSet::from_strs(strs, Alphabet::Text).unwrap()
    }

    #[test]
    fn score_cell_hand_evaluated_2d() {
        let s = unit();
        let set = seqs(&["A", "A"]);
        let shape = set.shape().unwrap();
        // Faces hold cumulative gap scores -1; the diagonal wins with 0 + 1.
        let cell = MultiIndex::new(vec![1, 1]);
        let got = score_cell(&shape, &cell, &set, &s, |idx| {
            Some(match idx.coords() {
                [0, 0] => 0,
                [0, 1] | [1, 0] => -1,
                _ => unreachable!(),
            })
        })
        .unwrap();
        assert_eq!(got.value, 1);
        assert!(got.best_move.unwrap().is_full_diagonal());

        let mismatch = seqs(&["A", "G"]);
        let got = score_cell(&shape, &cell, &mismatch, &s, |idx| {
            Some(match idx.coords() {
                [0, 0] => 0,
                [0, 1] | [1, 0] => -1,
                _ => unreachable!(),
            })
        })
        .unwrap();
        assert_eq!(got.value, 0);
        assert!(got.best_move.unwrap().is_full_diagonal());
    }

    #[test]
    fn score_cell_face_single_predecessor() {
        let s = unit();
        let set = seqs(&["A", "A"]);
        let shape = set.shape().unwrap();
        let cell = MultiIndex::new(vec![1, 0]);
        let got = score_cell(&shape, &cell, &set, &s, |idx| {
            assert_eq!(idx.coords(), [0, 0]);
            Some(0)
        })
        .unwrap();
        assert_eq!(got.value, -1);
        assert_eq!(got.best_move.unwrap().mask(), 0b10);
    }

    #[test]
    fn score_cell_missing_lookup_is_dependency_error() {
        let s = unit();
        let set = seqs(&["A", "A"]);
        let shape = set.shape().unwrap();
        let cell = MultiIndex::new(vec![1, 1]);
        let err = score_cell(&shape, &cell, &set, &s, |_| None::<i64>).unwrap_err();
        assert!(matches!(err, Error::Dependency { .. }));
    }

    #[test]
    fn sequential_terminal_scores_match_brute_force() {
        for strs in [
            &["AC", "AC"][..],
            &["A", "A", "A"][..],
            &["A", "G"][..],
            &["AC", "A"][..],
            &["AG", "AC"][..],
        ] {
            let set = seqs(strs);
            let s = unit();
            let tensor = score_sequential(&set, &s).unwrap();
            let (brute, _) = brute_force_best(&set, &s).unwrap();
            assert_eq!(tensor.terminal_score(), brute, "instance {strs:?}");
        }
        // Frozen values computed by the brute-force enumerator.
        assert_eq!(
            score_sequential(&seqs(&["AC", "AC"]), &unit())
                .unwrap()
                .terminal_score(),
            2
        );
        assert_eq!(
            score_sequential(&seqs(&["A", "A", "A"]), &unit())
                .unwrap()
                .terminal_score(),
            3
        );
        assert_eq!(
            score_sequential(&seqs(&["A", "G"]), &unit())
                .unwrap()
                .terminal_score(),
            0
        );
    }

    #[test]
    fn sequential_origin_zero_and_gap_edges_cumulative() {
        let set = seqs(&["ACG", "ACG"]);
        let tensor = score_sequential(&set, &unit()).unwrap();
        assert_eq!(tensor.value_at(&MultiIndex::new(vec![0, 0])).unwrap(), 0);
        for i in 1..4 {
            assert_eq!(
                tensor.value_at(&MultiIndex::new(vec![i, 0])).unwrap(),
                -(i as i64)
            );
            assert_eq!(
                tensor.value_at(&MultiIndex::new(vec![0, i])).unwrap(),
                -(i as i64)
            );
        }
    }

    #[test]
    fn memory_cap_refused_with_size_report() {
        let set = seqs(&["ACGTACGT", "ACGTACGT"]);
        let err = score_sequential_with_cap(&set, &unit(), 16).unwrap_err();
        match err {
            Error::MemoryCap { cells, cap, .. } => {
                assert_eq!(cells, 81);
                assert_eq!(cap, 16);
            }
            other => panic!("expected memory cap error, got {other}"),
        }
    }

    #[test]
    fn traceback_examples() {
        let s = unit();

        let set = seqs(&["AC", "AC"]);
        let tensor = score_sequential(&set, &s).unwrap();
        let aln = traceback(&tensor, &set).unwrap();
        assert_eq!(aln.rows(), &[b"AC".to_vec(), b"AC".to_vec()]);

        // Brute force confirms 0 is optimal for ("AC", "A").
        let set = seqs(&["AC", "A"]);
        let tensor = score_sequential(&set, &set_scheme()).unwrap();
        let (brute, _) = brute_force_best(&set, &set_scheme()).unwrap();
        assert_eq!(tensor.terminal_score(), 0);
        assert_eq!(brute, 0);
        let aln = traceback(&tensor, &set).unwrap();
        assert_eq!(aln.rows(), &[b"AC".to_vec(), b"A-".to_vec()]);

        let set = seqs(&["A", "A", "A"]);
        let tensor = score_sequential(&set, &s).unwrap();
        let aln = traceback(&tensor, &set).unwrap();
        assert_eq!(aln.num_columns(), 1);
        assert!(aln.rows().iter().all(|r| r == b"A"));
    }

    fn set_scheme() -> ScoringScheme<i64> {
        unit()
    }

    #[test]
    fn traceback_round_trips_and_path_score_matches() {
        let set = seqs(&["GATTACA", "GCATGCT"]);
        let s = unit();
        let tensor = score_sequential(&set, &s).unwrap();
        let aln = traceback(&tensor, &set).unwrap();
        let stripped = aln.strip_gaps();
        for (axis, rec) in set.records().iter().enumerate() {
            assert_eq!(stripped[axis], rec.residues);
        }
        assert_eq!(similarity_score(&s, &aln).unwrap(), tensor.terminal_score());
    }

    #[test]
    fn brute_force_examples() {
        let s = unit();
        let (score, aln) = brute_force_best(&seqs(&["A", "A"]), &s).unwrap();
        assert_eq!(score, 1);
        assert_eq!(aln.rows(), &[b"A".to_vec(), b"A".to_vec()]);

        let (score, _) = brute_force_best(&seqs(&["AC", "AC"]), &s).unwrap();
        assert_eq!(score, 2);

        let (score, _) = brute_force_best(&seqs(&["AG", "AC"]), &s).unwrap();
        assert_eq!(score, 1);
    }

    #[test]
    fn brute_force_refuses_large_instances() {
        let long = "A".repeat(2000);
        let set = seqs(&[&long, &long]);
        assert!(matches!(
            brute_force_best(&set, &unit()),
            Err(Error::TooLarge(_))
        ));
    }

    #[test]
    fn real_mode_agrees_with_brute_force_within_tolerance() {
        let set = seqs(&["ACG", "AGG", "CG"]);
        let scheme = ScoringScheme::<f64>::new(1.25, -0.25, -0.75, 0.0);
        let tensor = score_sequential(&set, &scheme).unwrap();
        let (brute, _) = brute_force_best(&set, &scheme).unwrap();
        assert!(
            (tensor.terminal_score() - brute).abs() <= 1e-9,
            "dp {} vs brute {brute}",
            tensor.terminal_score()
        );
    }

    #[test]
    fn dump_round_trip() {
        let set = seqs(&["ACGT", "ACT"]);
        let scheme = unit();
        let tensor = score_sequential(&set, &scheme).unwrap();
        let mut bytes = Vec::new();
        tensor.write_dump(&mut bytes, scheme.digest()).unwrap();
        let dump = TensorDump::<i64>::read(&mut bytes.as_slice()).unwrap();
        assert_eq!(dump.shape, *tensor.shape());
        assert_eq!(dump.scheme_digest, scheme.digest());
        assert_eq!(dump.values, tensor.values());
        // Wrong dtype is rejected.
        assert!(TensorDump::<f64>::read(&mut bytes.as_slice()).is_err());
    }

    #[test]
    fn tensor_cells_satisfy_recurrence() {
        let set = seqs(&["ACG", "AG", "CG"]);
        let s = unit();
        let tensor = score_sequential(&set, &s).unwrap();
        let shape = tensor.shape().clone();
        for flat in 1..shape.cell_count() {
            let cell = shape.unflatten(flat).unwrap();
            let expect = score_cell(&shape, &cell, &set, &s, |idx| {
                Some(tensor.value_at(idx).unwrap())
            })
            .unwrap();
            assert_eq!(tensor.value_at_flat(flat), expect.value);
            assert_eq!(
                tensor.move_code_at_flat(flat),
                expect.best_move.unwrap().mask() as u32
            );
        }
    }
}
