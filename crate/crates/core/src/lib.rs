//! Seed-and-extend alignment of short and long nucleotide reads.
//!
//! A [`SeedIndex`] maps every fixed-length substring of the reference to its
//! positions. [`Aligner`] looks up a handful of seeds per read, votes for
//! candidate locations and scores them with a threshold-bounded edit
//! distance, stopping as soon as the answer is settled.

pub mod aligner;
pub mod distance;
pub mod driver;
pub mod error;
pub mod eval;
pub mod genome;
pub mod index;
pub mod io;
pub mod simulate;

pub use aligner::{
    align_read, classify_confidence, seed_offsets, Aligner, AlignerParams, AlignerStats, AlignmentResult, Hit,
    MaxDistance, ResultKind,
};
pub use distance::{bounded_distance, full_dp_distance, BoundedDistance, DistanceOutcome};
pub use error::{Error, Result};
pub use eval::{compile_report, exhaustive_oracle_align, oracle_align, score_result, EvalReport, Oracle, Verdict};
pub use genome::{load_fasta, reverse_complement, PackedGenome};
pub use index::{Direction, SeedHit, SeedIndex};
pub use io::{read_fastq, FastqReader, Read, SamRecord};
pub use simulate::{simulate, GenomeRecipe, SimProfile, SimulatedRead, Truth};
