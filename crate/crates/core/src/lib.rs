//! Turbo receiver for joint activity detection and data decoding in
//! grant-free massive random access.
//!
//! The crate is organised along the signal chain:
//!
//! * [`scenario`] draws the world: configuration, user placement, activity,
//!   pilots and payloads.
//! * [`channel`] synthesises the block-fading channel and `Y = sqrt(g) H X + N`.
//! * [`coding`] holds CRC-8 framing, the rate-1/2 LDPC code and its
//!   sum-product decoder.
//! * [`modem`] maps bits to QPSK and converts between symbol probabilities
//!   and bit LLRs.
//! * [`detector`] is the BiG-AMP detector for activity, channel and soft
//!   symbols.
//! * [`turbo`] wires detector and decoder together and provides the
//!   comparison receivers.
//! * [`harness`] runs Monte Carlo campaigns and computes the metrics.

pub mod channel;
pub mod coding;
pub mod detector;
mod error;
pub mod harness;
pub mod modem;
pub mod scenario;
pub mod turbo;

pub use error::{Error, Result};

/// Complex baseband sample.
pub type C64 = num_complex::Complex64;
/// Dense complex matrix.
pub type CMatrix = nalgebra::DMatrix<C64>;
/// Dense real matrix.
pub type RMatrix = nalgebra::DMatrix<f64>;

/// Magnitude at which every LLR produced by the crate is saturated.
pub const LLR_CLIP: f64 = 30.0;

/// Saturate an LLR to `[-LLR_CLIP, LLR_CLIP]`.
#[inline]
pub fn clip_llr(llr: f64) -> f64 {
    llr.clamp(-LLR_CLIP, LLR_CLIP)
}
