//! Fixed-width block payloads.

use rand::RngCore;
use serde::{Deserialize, Serialize};

/// A `B`-bit string, the unit of storage and communication. Stored in
/// `ceil(B/8)` bytes with unused high bits of the last byte kept zero.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BlockPayload {
    bits: u32,
    bytes: Vec<u8>,
}

impl BlockPayload {
    pub fn zero(bits: u32) -> Self {
        BlockPayload {
            bits,
            bytes: vec![0u8; (bits as usize).div_ceil(8)],
        }
    }

    /// Builds a payload from raw bytes, masking any bits beyond `bits`.
    pub fn from_bytes(bits: u32, mut bytes: Vec<u8>) -> Self {
        bytes.resize((bits as usize).div_ceil(8), 0);
        let mut p = BlockPayload { bits, bytes };
        p.mask_tail();
        p
    }

    /// A payload whose low 64 bits encode `x`; handy as a deterministic
    /// initial value stamped with the block address.
    pub fn from_u64(bits: u32, x: u64) -> Self {
        let mut p = Self::zero(bits);
        for (i, b) in x.to_le_bytes().iter().enumerate() {
            if i < p.bytes.len() {
                p.bytes[i] = *b;
            }
        }
        p.mask_tail();
        p
    }

    pub fn random<R: RngCore>(bits: u32, rng: &mut R) -> Self {
        let mut p = Self::zero(bits);
        rng.fill_bytes(&mut p.bytes);
        p.mask_tail();
        p
    }

    fn mask_tail(&mut self) {
        let rem = self.bits % 8;
        if rem != 0 {
            if let Some(last) = self.bytes.last_mut() {
                *last &= (1u8 << rem) - 1;
            }
        }
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn as_bytes_mut(&mut self) -> &mut [u8] {
        &mut self.bytes
    }

    pub fn to_u64(&self) -> u64 {
        let mut out = [0u8; 8];
        for (i, b) in self.bytes.iter().take(8).enumerate() {
            out[i] = *b;
        }
        u64::from_le_bytes(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tail_bits_masked() {
        let p = BlockPayload::from_bytes(12, vec![0xff, 0xff]);
        assert_eq!(p.as_bytes(), &[0xff, 0x0f]);
    }

    #[test]
    fn u64_roundtrip() {
        let p = BlockPayload::from_u64(64, 0xdead_beef_cafe_f00d);
        assert_eq!(p.to_u64(), 0xdead_beef_cafe_f00d);
    }
}
