//! Bit-serial CRC-8 (polynomial x^8 + x^2 + x + 1, zero init, no
//! reflection, no output XOR).

use crate::{Error, Result};

pub const CRC8_POLY: u8 = 0x07;
pub const CRC8_BITS: usize = 8;

/// CRC-8 remainder of a bit sequence, most significant bit first.
pub fn crc8(bits: &[u8]) -> u8 {
    let mut reg = 0u8;
    for &b in bits {
        let feedback = (reg >> 7) ^ (b & 1);
        reg <<= 1;
        if feedback != 0 {
            reg ^= CRC8_POLY;
        }
    }
    reg
}

/// Unpack bytes into bits, MSB first.
pub fn bytes_to_bits(bytes: &[u8]) -> Vec<u8> {
    bytes
        .iter()
        .flat_map(|&byte| (0..8).rev().map(move |i| (byte >> i) & 1))
        .collect()
}

/// Payload followed by its CRC-8.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeBlock {
    bits: Vec<u8>,
}

impl CodeBlock {
    /// Wrap an already framed bit sequence (e.g. a hard decision).
    pub fn from_bits(bits: Vec<u8>) -> Self {
        CodeBlock { bits }
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// The payload with the CRC detached.
    pub fn payload(&self) -> &[u8] {
        &self.bits[..self.bits.len().saturating_sub(CRC8_BITS)]
    }
}

/// Append the CRC-8 of `payload`, which must hold exactly `payload_bits`
/// bits.
pub fn crc8_attach(payload: &[u8], payload_bits: usize) -> Result<CodeBlock> {
    if payload.len() != payload_bits {
        return Err(Error::invalid(format!(
            "payload has {} bits, expected {payload_bits}",
            payload.len()
        )));
    }
    if payload.iter().any(|&b| b > 1) {
        return Err(Error::invalid("payload bits must be 0 or 1"));
    }
    let crc = crc8(payload);
    let mut bits = payload.to_vec();
    bits.extend((0..CRC8_BITS).rev().map(|i| (crc >> i) & 1));
    Ok(CodeBlock { bits })
}

/// True when the trailing 8 bits equal the CRC-8 of the rest.
pub fn crc8_check(block: &CodeBlock) -> bool {
    // Appending the remainder makes the full register run end at zero.
    block.len() >= CRC8_BITS && crc8(block.bits()) == 0
}
