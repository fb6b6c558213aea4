//! Dirty paper coding with trellis coded modulation.
//!
//! A message selects one bin of edges at every trellis step; a Viterbi search
//! driven by the known interference ("dirt") picks the codeword `u` inside
//! those bins, and `x = u - alpha s` is transmitted. The receiver runs a
//! minimum Euclidean distance Viterbi decoder over the whole trellis, reads
//! the message off the bins, and can recover the dirt as
//! `(y - u_hat) / (1 - alpha)`.

pub mod broadcast;
pub mod channel;
pub mod constellation;
pub mod decoder;
pub mod encoder;
pub mod error;
pub mod harness;
pub mod trellis;
mod viterbi;

pub use num_complex::Complex64;

pub use constellation::{build_constellation, build_partition, Constellation, ConstellationKind, PartitionChain};
pub use decoder::{medd_decode, recover_dirt, tcm_decode, Decoded};
pub use encoder::{branch_metric, pip_encode, tcm_encode, Codeword, EncodedBlock};
pub use error::{Error, Result};
pub use trellis::{
    build_bins, build_preset, build_trellis, enumerate_valid_codewords, BinScheme, BinStrategy, DpcSpec,
    TrellisCode, TrellisPreset,
};
