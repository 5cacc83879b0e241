//! Bit-exact metadata encoding and the packed metadata-tree layout.
//!
//! Every data-block slot carries one metadata word of
//! `1 + ceil(lg N) + L` bits: a type bit, the block address and the position
//! label. The words of all slots, taken in breadth-first bucket order with
//! slots in index order, form one contiguous bitstring packed into `B`-bit
//! metadata blocks with no per-bucket padding; a word may straddle two
//! blocks. Bits are numbered LSB-first within each byte.

use serde::{Deserialize, Serialize};

use crate::params::TreeParams;

/// Metadata of one data-block slot. A dummy slot's address and label bits
/// are arbitrary and never interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BlockMeta {
    Real { addr: u64, pos: u64 },
    Dummy,
}

impl BlockMeta {
    pub fn is_real(&self) -> bool {
        matches!(self, BlockMeta::Real { .. })
    }
}

/// Packs a metadata word into the low `meta_word_bits` of a `u64`.
/// Bit 0 is the type flag, then the address, then the label. For dummies the
/// address/label field bits are taken from `filler` so that stored garbage
/// is arbitrary rather than a fixed pattern.
pub fn encode_meta(meta: BlockMeta, filler: u64, params: &TreeParams) -> u64 {
    let aw = params.addr_width;
    let lw = params.label_width;
    match meta {
        BlockMeta::Real { addr, pos } => {
            debug_assert!(addr < params.n_blocks);
            debug_assert!(pos < params.leaves());
            1 | (addr << 1) | (pos << (1 + aw))
        }
        BlockMeta::Dummy => (filler << 1) & mask(1 + aw + lw),
    }
}

/// Inverse of [`encode_meta`]; a clear type bit decodes to `Dummy`
/// regardless of the remaining bits.
pub fn decode_meta(word: u64, params: &TreeParams) -> BlockMeta {
    if word & 1 == 0 {
        return BlockMeta::Dummy;
    }
    let aw = params.addr_width;
    let addr = (word >> 1) & mask(aw);
    let pos = (word >> (1 + aw)) & mask(params.label_width);
    BlockMeta::Real { addr, pos }
}

fn mask(width: u32) -> u64 {
    if width >= 64 {
        u64::MAX
    } else {
        (1u64 << width) - 1
    }
}

/// Reads a `width <= 64` bit field starting at bit `bit_off` of `buf`.
pub fn read_bits(buf: &[u8], bit_off: u64, width: u32) -> u64 {
    debug_assert!(width <= 64);
    let byte = (bit_off / 8) as usize;
    let shift = (bit_off % 8) as u32;
    let mut window = [0u8; 16];
    let take = (buf.len() - byte).min(16);
    window[..take].copy_from_slice(&buf[byte..byte + take]);
    let wide = u128::from_le_bytes(window);
    ((wide >> shift) as u64) & mask(width)
}

/// Writes a `width <= 64` bit field starting at bit `bit_off` of `buf`.
pub fn write_bits(buf: &mut [u8], bit_off: u64, width: u32, value: u64) {
    debug_assert!(width <= 64);
    debug_assert!(width == 64 || value < (1u64 << width));
    let byte = (bit_off / 8) as usize;
    let shift = (bit_off % 8) as u32;
    let take = (buf.len() - byte).min(16);
    let mut window = [0u8; 16];
    window[..take].copy_from_slice(&buf[byte..byte + take]);
    let mut wide = u128::from_le_bytes(window);
    wide &= !(u128::from(mask(width)) << shift);
    wide |= u128::from(value) << shift;
    let out = wide.to_le_bytes();
    buf[byte..byte + take].copy_from_slice(&out[..take]);
}

/// Location of one metadata word inside the packed metadata region.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MetaSlot {
    /// Region-relative metadata block index.
    pub block: u64,
    /// Bit offset inside that block.
    pub bit_offset: u32,
    /// Bit offset inside the whole concatenated bitstring.
    pub global_bit: u64,
}

/// Closed-form layout of the packed metadata tree.
///
/// Interval arithmetic only; nothing here touches storage. Internal buckets
/// precede all leaf buckets in slot numbering so that internal addressing is
/// independent of `M`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetaLayout {
    pub word_bits: u32,
    pub block_bits: u32,
    height: u32,
    z: u64,
    m: u64,
    pub total_slots: u64,
    pub total_bits: u64,
    /// `ceil(total_bits / B)`: blocks the packed bitstring occupies.
    pub packed_blocks: u64,
    /// Allocated region size: one spare block past `packed_blocks` so the
    /// fixed-width bucket windows below never run off the end.
    pub region_blocks: u64,
}

impl MetaLayout {
    pub fn new(params: &TreeParams) -> Self {
        let word_bits = params.meta_word_bits();
        let total_slots = params.data_tree_blocks();
        let total_bits = total_slots * word_bits as u64;
        let packed_blocks = total_bits.div_ceil(params.block_bits as u64);
        MetaLayout {
            word_bits,
            block_bits: params.block_bits,
            height: params.height,
            z: params.bucket_cap as u64,
            m: params.leaf_cap as u64,
            total_slots,
            total_bits,
            packed_blocks,
            region_blocks: packed_blocks + 1,
        }
    }

    /// Global slot index of `(bucket, 0)` in the concatenated ordering.
    pub fn bucket_base_slot(&self, bucket: u64) -> u64 {
        let internal = (1u64 << self.height) - 1;
        if bucket < internal {
            bucket * self.z
        } else {
            internal * self.z + (bucket - internal) * self.m
        }
    }

    pub fn bucket_cap(&self, bucket: u64) -> u64 {
        if bucket < (1u64 << self.height) - 1 {
            self.z
        } else {
            self.m
        }
    }

    /// Bit interval `[start, end)` of one bucket's metadata.
    pub fn bucket_bit_range(&self, bucket: u64) -> (u64, u64) {
        let start = self.bucket_base_slot(bucket) * self.word_bits as u64;
        (start, start + self.bucket_cap(bucket) * self.word_bits as u64)
    }

    /// Maps `(bucket, slot)` to its metadata block and bit offset.
    pub fn locate(&self, bucket: u64, slot: u64) -> MetaSlot {
        debug_assert!(slot < self.bucket_cap(bucket));
        let global_bit = (self.bucket_base_slot(bucket) + slot) * self.word_bits as u64;
        MetaSlot {
            block: global_bit / self.block_bits as u64,
            bit_offset: (global_bit % self.block_bits as u64) as u32,
            global_bit,
        }
    }

    /// Metadata blocks transferred for a bucket at the given depth.
    ///
    /// The window width depends only on the depth (bucket capacity), not on
    /// the bucket's alignment, so the number of physical requests per path is
    /// the same for every path; that keeps per-access trace lengths constant.
    pub fn window_blocks_at_depth(&self, depth: u32) -> u64 {
        let cap = if depth == self.height { self.m } else { self.z };
        let width = cap * self.word_bits as u64;
        1 + (width - 1).div_ceil(self.block_bits as u64)
    }

    /// Fixed transfer window `[first_block, first_block + n)` covering one
    /// bucket's metadata.
    pub fn bucket_window(&self, bucket: u64) -> (u64, u64) {
        let (start, _) = self.bucket_bit_range(bucket);
        let depth = crate::params::tree::depth_of(bucket);
        (start / self.block_bits as u64, self.window_blocks_at_depth(depth))
    }

    /// Metadata blocks transferred for one root-to-leaf path scan.
    pub fn path_window_blocks(&self) -> u64 {
        (0..=self.height)
            .map(|d| self.window_blocks_at_depth(d))
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::Construction;

    fn small_params() -> TreeParams {
        // Z=3, L=2, M=5, N=16, B=64: 29 slots of 7 bits = 203 bits.
        TreeParams::manual(Construction::SuccinctOne, 16, 64, 3, 2, 5)
            .unwrap()
            .params
    }

    #[test]
    fn encode_is_width_exact() {
        let p = TreeParams::manual(Construction::SuccinctOne, 1 << 20, 1 << 10, 3, 15, 112)
            .unwrap()
            .params;
        assert_eq!(p.meta_word_bits(), 36);
        let w = encode_meta(BlockMeta::Real { addr: 0, pos: 0 }, 0, &p);
        assert_eq!(w, 1); // type bit set, everything else zero
        assert!(encode_meta(
            BlockMeta::Real {
                addr: p.n_blocks - 1,
                pos: p.leaves() - 1
            },
            0,
            &p
        ) < 1u64 << 36);
    }

    #[test]
    fn dummy_decodes_regardless_of_filler() {
        let p = small_params();
        for filler in [0u64, u64::MAX, 0x5555] {
            let w = encode_meta(BlockMeta::Dummy, filler, &p);
            assert_eq!(w & 1, 0);
            assert_eq!(decode_meta(w, &p), BlockMeta::Dummy);
        }
    }

    #[test]
    fn layout_matches_direct_arithmetic() {
        let p = small_params();
        let layout = MetaLayout::new(&p);
        assert_eq!(layout.total_slots, 3 * 3 + 5 * 4);
        assert_eq!(layout.word_bits, 1 + 4 + 2);
        assert_eq!(layout.total_bits, 203);
        assert_eq!(layout.packed_blocks, 4);
        let origin = layout.locate(0, 0);
        assert_eq!((origin.block, origin.bit_offset), (0, 0));
        // Last slot ends exactly at total_bits: no gap.
        let last = layout.locate(6, 4);
        assert_eq!(last.global_bit + layout.word_bits as u64, layout.total_bits);
    }

    #[test]
    fn slot_intervals_tile_the_bitstring() {
        let p = small_params();
        let layout = MetaLayout::new(&p);
        let mut expected = 0u64;
        for bucket in 0..p.bucket_count() {
            for slot in 0..layout.bucket_cap(bucket) {
                assert_eq!(layout.locate(bucket, slot).global_bit, expected);
                expected += layout.word_bits as u64;
            }
        }
        assert_eq!(expected, layout.total_bits);
    }

    #[test]
    fn windows_cover_their_bucket() {
        let p = small_params();
        let layout = MetaLayout::new(&p);
        for bucket in 0..p.bucket_count() {
            let (start, end) = layout.bucket_bit_range(bucket);
            let (first, n) = layout.bucket_window(bucket);
            assert!(first * 64 <= start);
            assert!((first + n) * 64 >= end);
            assert!(first + n <= layout.region_blocks);
        }
    }

    #[test]
    fn bit_io_roundtrip() {
        let mut buf = vec![0u8; 24];
        write_bits(&mut buf, 3, 17, 0x1_abcd & ((1 << 17) - 1));
        write_bits(&mut buf, 20, 36, 0xf_1234_5678);
        write_bits(&mut buf, 56, 64, u64::MAX - 5);
        assert_eq!(read_bits(&buf, 3, 17), 0x1_abcd & ((1 << 17) - 1));
        assert_eq!(read_bits(&buf, 20, 36), 0xf_1234_5678);
        assert_eq!(read_bits(&buf, 56, 64), u64::MAX - 5);
        // Overwrite clears the old field.
        write_bits(&mut buf, 20, 36, 7);
        assert_eq!(read_bits(&buf, 20, 36), 7);
        assert_eq!(read_bits(&buf, 3, 17), 0x1_abcd & ((1 << 17) - 1));
    }
}
