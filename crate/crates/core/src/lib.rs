//! Residual vector quantization with beam-search encoding.
//!
//! The crate provides codebook sets ([`codebooks`]), greedy / beam-search /
//! exhaustive encoders ([`quantizer`]), reconstruction metrics ([`metrics`])
//! and a small waveform codec that quantizes overlapping signal frames
//! ([`pipeline`]).

pub mod codebooks;
pub mod error;
mod kmeans;
pub mod metrics;
pub mod pipeline;
pub mod quantizer;
pub mod synth;
pub mod window;

pub use codebooks::{Codebook, CodebookSet, GroupedCodebookSet};
pub use error::{Result, RvqError};
pub use metrics::{CiStat, MelConfig};
pub use quantizer::{
    decode, encode_beam, encode_exhaustive, encode_greedy, BeamNode, BeamParams, CodeSequence,
    ExecMode, QuantResult, Strategy,
};
pub use window::Window;
