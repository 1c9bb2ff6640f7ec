//! Waveform codec built from framing, residual quantization and overlap-add.
//!
//! Frames of the signal play the role of latent vectors: each windowed frame
//! is quantized as one `frame_len`-dimensional vector and the decoded frames
//! are overlap-added back into a waveform.

mod audio;
mod codec;
mod frame;

pub use audio::{read_audio, read_raw_f32, write_audio, write_raw_f32, Audio, SampleFormat};
pub use codec::{
    codec_roundtrip, interior, Codebooks, CodecOutput, CodecRun, CodecSummary, FrameCode,
};
pub use frame::{frame_signal, overlap_add, FrameConfig, ENVELOPE_FLOOR};
