//! Simulation of the DNA data-storage channel and the statistics used to
//! characterize it.
//!
//! A design (a [`ReferenceSet`]) is synthesized into a weighted [`Pool`],
//! pushed through PCR, decay and dilution stages, and sequenced into paired
//! reads. The analysis side merges read pairs, aligns them back to the
//! design and estimates error rates, substitution spectra and coverage
//! distributions.
//!
//! All randomness flows through [`RngStream`]s derived from a master seed and
//! a stable stream id, so results do not depend on the number of threads.

pub mod align;
pub mod channel;
mod error;
mod ids;
pub mod index;
pub mod merge;
pub mod par;
pub mod pool;
pub mod process;
pub mod rng;
pub mod seq;
pub mod sequencing;
pub mod stats;
pub mod submatrix;
pub mod synthesis;

pub use error::{Error, Result};
pub use pool::Pool;
pub use rng::RngStream;
pub use seq::{Nucleotide, ReferenceSet, Sequence};
