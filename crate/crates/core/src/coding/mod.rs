//! Channel coding: CRC-8 framing, the rate-1/2 LDPC code and its
//! belief-propagation decoder.

pub mod bp;
pub mod crc;
pub mod ldpc;
pub mod peg;

pub use bp::{hard_decision, BpDecoder, BpOutput};
pub use crc::{crc8, crc8_attach, crc8_check, CodeBlock};
pub use ldpc::{LdpcCode, ParityCheckMatrix};
