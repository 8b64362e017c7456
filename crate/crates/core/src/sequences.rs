//! Sequence ingestion, scoring schemes and sum-of-pairs column costs.
//!
//! The scoring scheme assigns a pair score to every unordered pair of
//! column symbols: residue/residue pairs come from a substitution table (or
//! the match/mismatch defaults), residue/gap pairs cost `gap`, and gap/gap
//! pairs cost `gap_gap`. A move into a cell induces one alignment column;
//! its cost is the sum over all `k(k-1)/2` pairs.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::BufRead;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::index::{MultiIndex, OffsetVector, Shape};
use crate::scalar::Score;

/// Column symbol used for gaps.
pub const GAP: u8 = b'-';

/// Residue alphabets accepted on ingestion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Alphabet {
    /// A, C, G, T.
    Dna,
    /// The 20 standard amino-acid letters.
    Protein,
    /// Any ASCII letter.
    Text,
}

impl Alphabet {
    pub fn contains(&self, residue: u8) -> bool {
        match self {
            Alphabet::Dna => matches!(residue, b'A' | b'C' | b'G' | b'T'),
            Alphabet::Protein => {
                residue.is_ascii_uppercase()
                    && !matches!(residue, b'B' | b'J' | b'O' | b'U' | b'X' | b'Z')
            }
            Alphabet::Text => residue.is_ascii_uppercase(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Alphabet::Dna => "dna",
            Alphabet::Protein => "protein",
            Alphabet::Text => "text",
        }
    }
}

impl FromStr for Alphabet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dna" => Ok(Alphabet::Dna),
            "protein" => Ok(Alphabet::Protein),
            "text" | "ascii" => Ok(Alphabet::Text),
            other => Err(Error::Config(format!(
                "unknown alphabet {other:?}; expected dna, protein or text"
            ))),
        }
    }
}

/// One named input sequence, residues upper-cased.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SequenceRecord {
    pub id: String,
    pub residues: Vec<u8>,
}

/// The k input sequences of one alignment instance.
#[derive(Debug, Clone)]
pub struct SequenceSet {
    records: Vec<SequenceRecord>,
    alphabet: Alphabet,
}

impl SequenceSet {
    pub fn new(records: Vec<SequenceRecord>, alphabet: Alphabet) -> Result<Self> {
        if records.len() < 2 {
            return Err(Error::Config(format!(
                "need at least 2 sequences, got {}",
                records.len()
            )));
        }
        for rec in &records {
            if rec.residues.is_empty() {
                return Err(Error::Config(format!("sequence {:?} is empty", rec.id)));
            }
            if let Some(&bad) = rec.residues.iter().find(|&&r| !alphabet.contains(r)) {
                return Err(Error::Config(format!(
                    "sequence {:?} contains {:?}, not in the {} alphabet",
                    rec.id,
                    bad as char,
                    alphabet.name()
                )));
            }
        }
        Ok(SequenceSet { records, alphabet })
    }

    /// Convenience constructor for tests and examples.
    pub fn from_strs(seqs: &[&str], alphabet: Alphabet) -> Result<Self> {
        let records = seqs
            .iter()
            .enumerate()
            .map(|(i, s)| SequenceRecord {
                id: format!("seq{i}"),
                residues: s.to_ascii_uppercase().into_bytes(),
            })
            .collect();
        Self::new(records, alphabet)
    }

    /// Parses FASTA text: `>` header lines start records, sequence lines are
    /// concatenated and upper-cased, blank lines are ignored.
    pub fn from_fasta_reader(reader: impl BufRead, alphabet: Alphabet) -> Result<Self> {
        let records = parse_fasta_records(reader, alphabet, false)?;
        Self::new(records, alphabet)
    }

    pub fn from_fasta_str(text: &str, alphabet: Alphabet) -> Result<Self> {
        Self::from_fasta_reader(text.as_bytes(), alphabet)
    }

    pub fn k(&self) -> usize {
        self.records.len()
    }

    pub fn records(&self) -> &[SequenceRecord] {
        &self.records
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn residues(&self, seq: usize) -> &[u8] {
        &self.records[seq].residues
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.records.iter().map(|r| r.id.as_str())
    }

    /// The induced tensor shape `(len_0 + 1, ..., len_{k-1} + 1)`.
    pub fn shape(&self) -> Result<Shape> {
        Shape::new(self.records.iter().map(|r| r.residues.len() + 1).collect())
    }
}

fn parse_fasta_records(
    reader: impl BufRead,
    alphabet: Alphabet,
    allow_gaps: bool,
) -> Result<Vec<SequenceRecord>> {
    let mut records: Vec<SequenceRecord> = Vec::new();
    let mut saw_any = false;
    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        saw_any = true;
        if let Some(header) = trimmed.strip_prefix('>') {
            records.push(SequenceRecord {
                id: header.trim().to_string(),
                residues: Vec::new(),
            });
            continue;
        }
        let rec = records.last_mut().ok_or_else(|| Error::Parse {
            line: lineno,
            message: "sequence data before any '>' header".into(),
        })?;
        for ch in trimmed.bytes() {
            let up = ch.to_ascii_uppercase();
            if alphabet.contains(up) || (allow_gaps && up == GAP) {
                rec.residues.push(up);
            } else {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!(
                        "illegal character {:?} for the {} alphabet",
                        ch as char,
                        alphabet.name()
                    ),
                });
            }
        }
    }
    if !saw_any {
        return Err(Error::Parse {
            line: 0,
            message: "empty FASTA input".into(),
        });
    }
    if let Some(rec) = records.iter().find(|r| r.residues.is_empty()) {
        return Err(Error::Parse {
            line: 0,
            message: format!("record {:?} has an empty sequence", rec.id),
        });
    }
    Ok(records)
}

/// Writes records as FASTA, wrapping sequence lines at 60 columns.
pub fn write_fasta(out: &mut String, ids: &[String], rows: &[Vec<u8>]) {
    for (id, row) in ids.iter().zip(rows) {
        let _ = writeln!(out, ">{id}");
        for chunk in row.chunks(60) {
            let _ = writeln!(out, "{}", String::from_utf8_lossy(chunk));
        }
    }
}

/// Symmetric residue-pair substitution table, overriding match/mismatch.
#[derive(Debug, Clone)]
pub struct SubstitutionTable<T: Score> {
    residues: Vec<u8>,
    lookup: [Option<u8>; 256],
    scores: Vec<T>,
}

impl<T: Score> SubstitutionTable<T> {
    pub fn new(residues: Vec<u8>, rows: Vec<Vec<T>>) -> Result<Self> {
        let n = residues.len();
        if n == 0 {
            return Err(Error::Scheme("substitution table is empty".into()));
        }
        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
            return Err(Error::Scheme(format!(
                "substitution table must be square over its {n} residues"
            )));
        }
        let mut lookup = [None; 256];
        for (i, &r) in residues.iter().enumerate() {
            if lookup[r as usize].is_some() {
                return Err(Error::Scheme(format!(
                    "residue {:?} listed twice in substitution table",
                    r as char
                )));
            }
            lookup[r as usize] = Some(i as u8);
        }
        let mut scores = Vec::with_capacity(n * n);
        for row in &rows {
            scores.extend_from_slice(row);
        }
        for i in 0..n {
            for j in 0..n {
                if scores[i * n + j] != scores[j * n + i] {
                    return Err(Error::Scheme(format!(
                        "substitution table not symmetric at ({}, {})",
                        residues[i] as char, residues[j] as char
                    )));
                }
            }
        }
        Ok(SubstitutionTable {
            residues,
            lookup,
            scores,
        })
    }

    /// Parses the whitespace-separated square matrix format: a header row of
    /// residues followed by one score row per residue.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (_, header) = lines.next().ok_or_else(|| Error::Parse {
            line: 0,
            message: "substitution matrix file is empty".into(),
        })?;
        let residues: Vec<u8> = header
            .split_whitespace()
            .map(|tok| {
                if tok.len() == 1 {
                    Ok(tok.as_bytes()[0].to_ascii_uppercase())
                } else {
                    Err(Error::Parse {
                        line: 1,
                        message: format!("residue {tok:?} is not a single character"),
                    })
                }
            })
            .collect::<Result<_>>()?;
        let mut rows = Vec::with_capacity(residues.len());
        for (lineno, line) in lines {
            let row: Vec<T> = line
                .split_whitespace()
                .map(|tok| {
                    T::parse_text(tok).ok_or_else(|| Error::Parse {
                        line: lineno,
                        message: format!("cannot parse score {tok:?} as {}", T::DTYPE),
                    })
                })
                .collect::<Result<_>>()?;
            rows.push(row);
        }
        Self::new(residues, rows)
    }

    pub fn residues(&self) -> &[u8] {
        &self.residues
    }

    pub fn score(&self, x: u8, y: u8) -> Option<T> {
        let i = self.lookup[x as usize]? as usize;
        let j = self.lookup[y as usize]? as usize;
        Some(self.scores[i * self.residues.len() + j])
    }
}

/// Pair scores for alignment columns: substitution scores (or the
/// match/mismatch defaults), gap and gap/gap penalties.
#[derive(Debug, Clone)]
pub struct ScoringScheme<T: Score> {
    match_score: T,
    mismatch_score: T,
    gap: T,
    gap_gap: T,
    table: Option<SubstitutionTable<T>>,
}

impl<T: Score> ScoringScheme<T> {
    pub fn new(match_score: T, mismatch_score: T, gap: T, gap_gap: T) -> Self {
        ScoringScheme {
            match_score,
            mismatch_score,
            gap,
            gap_gap,
            table: None,
        }
    }

    /// The default scheme: match +1, mismatch 0, gap -1, gap/gap 0. The DP
    /// optimisation target then equals the reported similarity score.
    pub fn unit() -> Self {
        ScoringScheme::new(T::one(), T::zero(), T::zero() - T::one(), T::zero())
    }

    pub fn with_table(mut self, table: SubstitutionTable<T>) -> Self {
        self.table = Some(table);
        self
    }

    pub fn match_score(&self) -> T {
        self.match_score
    }

    pub fn mismatch_score(&self) -> T {
        self.mismatch_score
    }

    pub fn gap(&self) -> T {
        self.gap
    }

    pub fn gap_gap(&self) -> T {
        self.gap_gap
    }

    pub fn table(&self) -> Option<&SubstitutionTable<T>> {
        self.table.as_ref()
    }

    /// Score of one unordered column pair; each argument is a residue or
    /// [`GAP`].
    pub fn pair_score(&self, x: u8, y: u8) -> Result<T> {
        match (x == GAP, y == GAP) {
            (true, true) => Ok(self.gap_gap),
            (true, false) | (false, true) => Ok(self.gap),
            (false, false) => match &self.table {
                Some(table) => table.score(x, y).ok_or_else(|| {
                    Error::Scheme(format!(
                        "substitution table has no entry for pair ({}, {})",
                        x as char, y as char
                    ))
                }),
                None => Ok(if x == y {
                    self.match_score
                } else {
                    self.mismatch_score
                }),
            },
        }
    }

    /// Checks the scheme is total over every residue in `seqs`.
    pub fn supports(&self, seqs: &SequenceSet) -> Result<()> {
        if let Some(table) = &self.table {
            for rec in seqs.records() {
                for &r in &rec.residues {
                    if table.score(r, r).is_none() {
                        return Err(Error::Scheme(format!(
                            "substitution table does not cover residue {:?} from sequence {:?}",
                            r as char, rec.id
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Stable 64-bit digest of the scheme parameters, recorded in tensor
    /// dumps so mismatched runs are rejected when diffing.
    pub fn digest(&self) -> u64 {
        let mut repr = format!(
            "match={:?};mismatch={:?};gap={:?};gapgap={:?}",
            self.match_score, self.mismatch_score, self.gap, self.gap_gap
        );
        if let Some(table) = &self.table {
            repr.push_str(";table=");
            for &r in &table.residues {
                repr.push(r as char);
            }
            for s in &table.scores {
                let _ = write!(repr, ",{s:?}");
            }
        }
        fnv1a64(repr.as_bytes())
    }
}

impl<T: Score> Default for ScoringScheme<T> {
    fn default() -> Self {
        ScoringScheme::unit()
    }
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf29ce484222325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

/// Sum-of-pairs cost of the alignment column induced by moving along `d`
/// into `cell`: sequence `s` contributes residue `cell_s - 1` when `d_s = 1`
/// and a gap otherwise.
pub fn move_column_score<T: Score>(
    scheme: &ScoringScheme<T>,
    seqs: &SequenceSet,
    cell: &MultiIndex,
    d: &OffsetVector,
) -> Result<T> {
    let k = seqs.k();
    if cell.len() != k || d.k() != k {
        return Err(Error::Contract(format!(
            "cell {cell} and offset {d} must both have {k} axes"
        )));
    }
    for axis in 0..k {
        if d.component(axis) == 1 && cell[axis] == 0 {
            return Err(Error::Contract(format!(
                "move {d} into {cell} consumes a residue before the start of sequence {axis}"
            )));
        }
    }
    column_score_coords(scheme, seqs, cell.coords(), d.mask())
}

/// Allocation-free inner form of [`move_column_score`]; `mask` is the
/// canonical offset code. Bounds are the caller's responsibility.
pub(crate) fn column_score_coords<T: Score>(
    scheme: &ScoringScheme<T>,
    seqs: &SequenceSet,
    coords: &[usize],
    mask: u64,
) -> Result<T> {
    let k = coords.len();
    let symbol = |axis: usize| -> u8 {
        if (mask >> (k - 1 - axis)) & 1 == 1 {
            seqs.residues(axis)[coords[axis] - 1]
        } else {
            GAP
        }
    };
    let mut total = T::zero();
    for i in 0..k {
        let si = symbol(i);
        for j in (i + 1)..k {
            total = total + scheme.pair_score(si, symbol(j))?;
        }
    }
    Ok(total)
}

/// A gapped alignment: k rows of equal length over alphabet + gap.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alignment {
    rows: Vec<Vec<u8>>,
}

impl Alignment {
    pub fn new(rows: Vec<Vec<u8>>) -> Result<Self> {
        if rows.len() < 2 {
            return Err(Error::Contract(format!(
                "alignment needs at least 2 rows, got {}",
                rows.len()
            )));
        }
        let len = rows[0].len();
        if let Some(row) = rows.iter().position(|r| r.len() != len) {
            return Err(Error::Contract(format!(
                "alignment rows are ragged: row 0 has {len} columns, row {row} has {}",
                rows[row].len()
            )));
        }
        if len == 0 {
            return Err(Error::Contract("alignment has no columns".into()));
        }
        for col in 0..len {
            if rows.iter().all(|r| r[col] == GAP) {
                return Err(Error::Contract(format!("column {col} is all gaps")));
            }
        }
        Ok(Alignment { rows })
    }

    /// Parses an aligned FASTA file (gaps allowed, equal-length rows).
    pub fn from_fasta_reader(reader: impl BufRead, alphabet: Alphabet) -> Result<Self> {
        let records = parse_fasta_records(reader, alphabet, true)?;
        Self::new(records.into_iter().map(|r| r.residues).collect())
    }

    pub fn rows(&self) -> &[Vec<u8>] {
        &self.rows
    }

    pub fn k(&self) -> usize {
        self.rows.len()
    }

    pub fn num_columns(&self) -> usize {
        self.rows[0].len()
    }

    pub fn column(&self, col: usize) -> Vec<u8> {
        self.rows.iter().map(|r| r[col]).collect()
    }

    /// Rows with gaps removed; equals the input sequences for any alignment
    /// produced by traceback.
    pub fn strip_gaps(&self) -> Vec<Vec<u8>> {
        self.rows
            .iter()
            .map(|r| r.iter().copied().filter(|&c| c != GAP).collect())
            .collect()
    }

    pub fn to_fasta(&self, ids: &[String]) -> String {
        let mut out = String::new();
        write_fasta(&mut out, ids, &self.rows);
        out
    }
}

/// Sum-of-pairs similarity score: over every column, the sum over all
/// unordered row pairs of the pair score.
pub fn similarity_score<T: Score>(scheme: &ScoringScheme<T>, aln: &Alignment) -> Result<T> {
    let k = aln.k();
    let mut total = T::zero();
    for col in 0..aln.num_columns() {
        for i in 0..k {
            for j in (i + 1)..k {
                total = total + scheme.pair_score(aln.rows()[i][col], aln.rows()[j][col])?;
            }
        }
    }
    Ok(total)
}

/// A scheme configuration read from a `key=value` file, kept as text so it
/// can be realised exactly as either an integral or a real scheme.
#[derive(Debug, Clone, Default)]
pub struct SchemeConfig {
    values: HashMap<String, String>,
    matrix_text: Option<String>,
}

impl SchemeConfig {
    /// Parses `key=value` lines (keys: match, mismatch, gap, gapgap,
    /// matrix=path). `#` starts a comment. A relative matrix path is
    /// resolved against the config file's directory.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = SchemeConfig::default();
        for (lineno, line) in text.lines().enumerate() {
            let lineno = lineno + 1;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: lineno,
                message: format!("expected key=value, got {line:?}"),
            })?;
            let key = key.trim().to_ascii_lowercase();
            let value = value.trim().to_string();
            match key.as_str() {
                "match" | "mismatch" | "gap" | "gapgap" => {
                    cfg.values.insert(key, value);
                }
                "matrix" => {
                    let mpath = Path::new(&value);
                    let resolved = if mpath.is_absolute() {
                        mpath.to_path_buf()
                    } else {
                        path.parent().unwrap_or(Path::new(".")).join(mpath)
                    };
                    cfg.matrix_text = Some(std::fs::read_to_string(resolved)?);
                }
                other => {
                    return Err(Error::Parse {
                        line: lineno,
                        message: format!("unknown scheme key {other:?}"),
                    })
                }
            }
        }
        Ok(cfg)
    }

    /// Realises the config for a concrete score type. Fails when a value
    /// does not parse as that type (e.g. `1.5` in integral mode).
    pub fn build<T: Score>(&self) -> Result<ScoringScheme<T>> {
        let unit = ScoringScheme::<T>::unit();
        let get = |key: &str, default: T| -> Result<T> {
            match self.values.get(key) {
                None => Ok(default),
                Some(text) => T::parse_text(text).ok_or_else(|| Error::Parse {
                    line: 0,
                    message: format!("scheme value {key}={text:?} does not parse as {}", T::DTYPE),
                }),
            }
        };
        let mut scheme = ScoringScheme::new(
            get("match", unit.match_score)?,
            get("mismatch", unit.mismatch_score)?,
            get("gap", unit.gap)?,
            get("gapgap", unit.gap_gap)?,
        );
        if let Some(text) = &self.matrix_text {
            scheme = scheme.with_table(SubstitutionTable::parse(text)?);
        }
        Ok(scheme)
    }

    /// True when every configured value parses as an exact integer, in which
    /// case the integral engine is preferred.
    pub fn is_integral(&self) -> bool {
        self.values.values().all(|v| i64::parse_text(v).is_some())
            && self
                .matrix_text
                .as_deref()
                .map(|t| SubstitutionTable::<i64>::parse(t).is_ok())
                .unwrap_or(true)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> ScoringScheme<i64> {
        ScoringScheme::unit()
    }

    #[test]
    fn parse_fasta_basic() {
        let seqs = SequenceSet::from_fasta_str(">a\nAC\n>b\nAG\n", Alphabet::Dna).unwrap();
        assert_eq!(seqs.k(), 2);
        assert_eq!(seqs.residues(0), b"AC");
        assert_eq!(seqs.residues(1), b"AG");
        assert_eq!(seqs.shape().unwrap().dims(), &[3, 3]);
    }

    #[test]
    fn parse_fasta_single_sequence_rejected() {
        let err = SequenceSet::from_fasta_str(">a\nACGT\n", Alphabet::Dna).unwrap_err();
        assert!(err.to_string().contains("at least 2 sequences"), "{err}");
    }

    #[test]
    fn parse_fasta_four_8mers_shape() {
        let text = ">s1\nACGTACGT\n>s2\nACGTACGT\n>s3\nACGTACGT\n>s4\nACGTACGT\n";
        let seqs = SequenceSet::from_fasta_str(text, Alphabet::Dna).unwrap();
        assert_eq!(seqs.shape().unwrap().dims(), &[9, 9, 9, 9]);
    }

    #[test]
    fn parse_fasta_errors_name_lines() {
        let err = SequenceSet::from_fasta_str(">a\nACGT\n>b\nAC1T\n", Alphabet::Dna).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 4),
            other => panic!("expected parse error, got {other}"),
        }
        assert!(SequenceSet::from_fasta_str("", Alphabet::Dna).is_err());
        assert!(SequenceSet::from_fasta_str(">a\n\n>b\nAC\n", Alphabet::Dna).is_err());
    }

    #[test]
    fn parse_fasta_case_folds_and_skips_blanks() {
        let seqs = SequenceSet::from_fasta_str(">a\nac\ngt\n\n>b\nACGT\n", Alphabet::Dna).unwrap();
        assert_eq!(seqs.residues(0), b"ACGT");
    }

    #[test]
    fn pair_score_default_scheme() {
        let s = unit();
        assert_eq!(s.pair_score(b'A', b'A').unwrap(), 1);
        assert_eq!(s.pair_score(b'A', b'G').unwrap(), 0);
        assert_eq!(s.pair_score(b'A', GAP).unwrap(), -1);
        assert_eq!(s.pair_score(GAP, b'A').unwrap(), -1);
        assert_eq!(s.pair_score(GAP, GAP).unwrap(), 0);
    }

    #[test]
    fn pair_score_table_missing_residue() {
        let table =
            SubstitutionTable::new(vec![b'A', b'C'], vec![vec![2, -1], vec![-1, 2]]).unwrap();
        let s = ScoringScheme::new(1, 0, -1, 0).with_table(table);
        assert_eq!(s.pair_score(b'A', b'C').unwrap(), -1);
        assert!(s.pair_score(b'A', b'G').is_err());
    }

    #[test]
    fn substitution_table_must_be_symmetric() {
        let err =
            SubstitutionTable::new(vec![b'A', b'C'], vec![vec![2, -1], vec![0, 2]]).unwrap_err();
        assert!(err.to_string().contains("symmetric"), "{err}");
    }

    #[test]
    fn substitution_table_parse() {
        let table =
            SubstitutionTable::<i64>::parse("A C G T\n1 0 0 0\n0 1 0 0\n0 0 1 0\n0 0 0 1\n")
                .unwrap();
        assert_eq!(table.score(b'A', b'A'), Some(1));
        assert_eq!(table.score(b'A', b'T'), Some(0));
        assert_eq!(table.score(b'A', b'X'), None);
    }

    #[test]
    fn move_column_scores() {
        let s = unit();
        let two = SequenceSet::from_strs(&["A", "A"], Alphabet::Dna).unwrap();
        let cell = MultiIndex::new(vec![1, 1]);
        let diag = OffsetVector::from_components(&[1, 1]).unwrap();
        assert_eq!(move_column_score(&s, &two, &cell, &diag).unwrap(), 1);

        // Hand oracle over the three unordered pairs.
        let three = SequenceSet::from_strs(&["A", "A", "A"], Alphabet::Dna).unwrap();
        let cell3 = MultiIndex::new(vec![1, 1, 1]);
        let diag3 = OffsetVector::from_components(&[1, 1, 1]).unwrap();
        assert_eq!(move_column_score(&s, &three, &cell3, &diag3).unwrap(), 3);
        let partial = OffsetVector::from_components(&[1, 1, 0]).unwrap();
        assert_eq!(move_column_score(&s, &three, &cell3, &partial).unwrap(), -1);
    }

    #[test]
    fn move_column_bounds_contract() {
        let s = unit();
        let seqs = SequenceSet::from_strs(&["A", "A"], Alphabet::Dna).unwrap();
        let d = OffsetVector::from_components(&[1, 1]).unwrap();
        let at_face = MultiIndex::new(vec![0, 1]);
        assert!(move_column_score(&s, &seqs, &at_face, &d).is_err());
    }

    #[test]
    fn similarity_examples() {
        let s = unit();
        let aln = Alignment::new(vec![b"AC".to_vec(), b"AC".to_vec()]).unwrap();
        assert_eq!(similarity_score(&s, &aln).unwrap(), 2);

        // Per-column pair oracle: two residue/gap columns.
        let aln = Alignment::new(vec![b"A-".to_vec(), b"-A".to_vec()]).unwrap();
        assert_eq!(similarity_score(&s, &aln).unwrap(), -2);

        // AA = +1, A- = -1, A- = -1.
        let aln = Alignment::new(vec![b"A".to_vec(), b"A".to_vec(), b"-".to_vec()]).unwrap();
        assert_eq!(similarity_score(&s, &aln).unwrap(), -1);
    }

    #[test]
    fn alignment_invariants() {
        assert!(Alignment::new(vec![b"AC".to_vec(), b"A".to_vec()]).is_err());
        assert!(Alignment::new(vec![b"-".to_vec(), b"-".to_vec()]).is_err());
        assert!(Alignment::new(vec![b"AC".to_vec()]).is_err());
    }

    #[test]
    fn aligned_fasta_round_trip() {
        let aln = Alignment::new(vec![b"AC-T".to_vec(), b"ACGT".to_vec()]).unwrap();
        let text = aln.to_fasta(&["a".to_string(), "b".to_string()]);
        let back = Alignment::from_fasta_reader(text.as_bytes(), Alphabet::Dna).unwrap();
        assert_eq!(back, aln);
    }

    #[test]
    fn scheme_config_integral_and_real() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scheme.conf");
        std::fs::write(&path, "match=2\nmismatch=-1\ngap=-2\ngapgap=0\n").unwrap();
        let cfg = SchemeConfig::from_file(&path).unwrap();
        assert!(cfg.is_integral());
        let s: ScoringScheme<i64> = cfg.build().unwrap();
        assert_eq!(s.match_score(), 2);
        assert_eq!(s.gap(), -2);

        std::fs::write(&path, "match=1.5\n").unwrap();
        let cfg = SchemeConfig::from_file(&path).unwrap();
        assert!(!cfg.is_integral());
        assert!(cfg.build::<i64>().is_err());
        let real: ScoringScheme<f64> = cfg.build().unwrap();
        assert_eq!(real.match_score(), 1.5);
    }

    #[test]
    fn scheme_config_with_matrix_file() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("m.txt"), "A C\n2 -1\n-1 2\n").unwrap();
        let path = dir.path().join("scheme.conf");
        std::fs::write(&path, "gap=-3\nmatrix=m.txt\n").unwrap();
        let cfg = SchemeConfig::from_file(&path).unwrap();
        let s: ScoringScheme<i64> = cfg.build().unwrap();
        assert_eq!(s.pair_score(b'A', b'C').unwrap(), -1);
        assert_eq!(s.gap(), -3);
    }

    #[test]
    fn digest_distinguishes_schemes() {
        let a = ScoringScheme::<i64>::unit();
        let b = ScoringScheme::<i64>::new(2, 0, -1, 0);
        assert_ne!(a.digest(), b.digest());
        assert_eq!(a.digest(), ScoringScheme::<i64>::unit().digest());
    }
}
