//! Optimal multiple sequence alignment by k-dimensional dynamic programming,
//! scored either sequentially or by a peer-to-peer wavefront engine that
//! partitions the score tensor into overlapping blocks and runs them over a
//! pool of message-passing workers.
//!
//! The crate is organised around the lifecycle of one alignment:
//!
//! - [`index`]: shape- and dimension-invariant addressing of the score tensor
//!   (ravel/unravel, the `2^k - 1` neighbour offsets).
//! - [`sequences`]: FASTA ingestion, scoring schemes, sum-of-pairs column
//!   costs, alignment similarity scoring.
//! - [`dp`]: the sequential scoring kernel, traceback, and a brute-force
//!   enumerator used as an oracle on tiny instances.
//! - [`partition`]: the partition grid, wave enumeration, overlap accounting
//!   and the dependency network between partitions.
//! - [`executor`]: the parallel engine; workers score whole waves of
//!   partitions and exchange overlapping-cell scores between waves.
//! - [`cost`]: the analytical execution-time model and a partition-size
//!   recommender.
//!
//! Scores are generic over [`Score`]; `i64` is the default exact mode and
//! `f64` supports real-valued substitution matrices.
//!
//! # Quick start
//!
//! ```
//! use wavealign_core::{Alphabet, IntScheme, SequenceSet};
//!
//! let seqs = SequenceSet::from_fasta_str(">a\nACGT\n>b\nAGT\n", Alphabet::Dna).unwrap();
//! let scheme = IntScheme::unit();
//! let tensor = wavealign_core::dp::score_sequential(&seqs, &scheme).unwrap();
//! let alignment = wavealign_core::dp::traceback(&tensor, &seqs).unwrap();
//! assert_eq!(tensor.terminal_score(), 2);
//! assert_eq!(alignment.num_columns(), 4);
//! ```

pub mod cost;
pub mod dp;
pub mod error;
pub mod executor;
pub mod index;
pub mod partition;
pub mod scalar;
pub mod sequences;

pub use error::{Error, Result};
pub use index::{MultiIndex, OffsetVector, Shape};
pub use scalar::Score;
pub use sequences::{Alignment, Alphabet, ScoringScheme, SequenceSet, SubstitutionTable};

/// Exact integer scoring scheme, the default mode.
pub type IntScheme = ScoringScheme<i64>;
/// Real-valued scoring scheme for fractional substitution matrices.
pub type RealScheme = ScoringScheme<f64>;
/// Score tensor in the default exact mode.
pub type IntTensor = dp::ScoreTensor<i64>;
/// Score tensor in real-valued mode.
pub type RealTensor = dp::ScoreTensor<f64>;
