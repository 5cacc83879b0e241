//! Bucket-granular storage shared by the tree constructions: data slots plus
//! the packed metadata region, with fixed-size transfer windows.

use crate::error::OramError;
use crate::meta::{read_bits, write_bits, MetaLayout};
use crate::params::{tree, TreeParams};
use crate::store::{PhysicalStore, Region, RegionClass};

/// The two regions of one tree instance and the scratch needed to move
/// bucket metadata through block-granular storage.
#[derive(Debug)]
pub struct TreeStorage {
    pub params: TreeParams,
    pub layout: MetaLayout,
    data: Region,
    meta: Region,
    window_buf: Vec<u8>,
}

impl TreeStorage {
    /// Allocates the data tree and metadata regions. `top` selects the
    /// accounting class (tree under test vs. sub-ORAM storage).
    pub fn alloc(store: &mut PhysicalStore, params: TreeParams, top: bool) -> Self {
        let layout = MetaLayout::new(&params);
        let (dc, mc) = if top {
            (RegionClass::TopData, RegionClass::TopMeta)
        } else {
            (RegionClass::SubData, RegionClass::SubMeta)
        };
        let data = store.alloc_region(dc, params.data_tree_blocks());
        let meta = store.alloc_region(mc, layout.region_blocks);
        let max_window = (0..=params.height)
            .map(|d| layout.window_blocks_at_depth(d))
            .max()
            .unwrap() as usize;
        TreeStorage {
            params,
            layout,
            data,
            meta,
            window_buf: vec![0u8; max_window * params.block_bytes()],
        }
    }

    /// Region-relative index of a data slot; slot numbering coincides with
    /// the metadata slot numbering.
    pub fn data_index(&self, bucket: u64, slot: u64) -> u64 {
        self.layout.bucket_base_slot(bucket) + slot
    }

    pub fn read_slot(
        &self,
        store: &mut PhysicalStore,
        bucket: u64,
        slot: u64,
        buf: &mut [u8],
    ) -> Result<(), OramError> {
        store.read(&self.data, self.data_index(bucket, slot), buf)?;
        Ok(())
    }

    pub fn write_slot(
        &self,
        store: &mut PhysicalStore,
        bucket: u64,
        slot: u64,
        buf: &[u8],
    ) -> Result<(), OramError> {
        store.write(&self.data, self.data_index(bucket, slot), buf)?;
        Ok(())
    }

    /// Reads a bucket's metadata words through its fixed transfer window.
    pub fn read_bucket_meta(
        &mut self,
        store: &mut PhysicalStore,
        bucket: u64,
        words: &mut Vec<u64>,
    ) -> Result<(), OramError> {
        let (first, nblocks) = self.layout.bucket_window(bucket);
        let bb = self.params.block_bytes();
        for i in 0..nblocks {
            store.read(
                &self.meta,
                first + i,
                &mut self.window_buf[i as usize * bb..(i as usize + 1) * bb],
            )?;
        }
        let (start_bit, _) = self.layout.bucket_bit_range(bucket);
        let rel = start_bit - first * self.params.block_bits as u64;
        let cap = self.layout.bucket_cap(bucket);
        let w = self.layout.word_bits;
        words.clear();
        for slot in 0..cap {
            words.push(read_bits(
                &self.window_buf[..nblocks as usize * bb],
                rel + slot * w as u64,
                w,
            ));
        }
        Ok(())
    }

    /// Writes a bucket's metadata words back. The window is re-read first:
    /// neighbouring buckets share boundary blocks, so a metadata write is
    /// physically a read-modify-write of whole blocks.
    pub fn write_bucket_meta(
        &mut self,
        store: &mut PhysicalStore,
        bucket: u64,
        words: &[u64],
    ) -> Result<(), OramError> {
        let (first, nblocks) = self.layout.bucket_window(bucket);
        let bb = self.params.block_bytes();
        for i in 0..nblocks {
            store.read(
                &self.meta,
                first + i,
                &mut self.window_buf[i as usize * bb..(i as usize + 1) * bb],
            )?;
        }
        let (start_bit, _) = self.layout.bucket_bit_range(bucket);
        let rel = start_bit - first * self.params.block_bits as u64;
        let w = self.layout.word_bits;
        debug_assert_eq!(words.len() as u64, self.layout.bucket_cap(bucket));
        for (slot, word) in words.iter().enumerate() {
            write_bits(
                &mut self.window_buf[..nblocks as usize * bb],
                rel + slot as u64 * w as u64,
                w,
                *word,
            );
        }
        for i in 0..nblocks {
            store.write(
                &self.meta,
                first + i,
                &self.window_buf[i as usize * bb..(i as usize + 1) * bb],
            )?;
        }
        Ok(())
    }

    /// Off-trace metadata decode of one bucket, for audits and snapshots.
    pub fn peek_bucket_meta(&self, store: &PhysicalStore, bucket: u64) -> Vec<u64> {
        let (start_bit, _) = self.layout.bucket_bit_range(bucket);
        let cap = self.layout.bucket_cap(bucket);
        let w = self.layout.word_bits;
        let bb = self.params.block_bytes();
        let bytes = store.peek_region(&self.meta);
        (0..cap)
            .map(|slot| read_bits(&bytes[..self.meta.len as usize * bb], start_bit + slot * w as u64, w))
            .collect()
    }

    /// Off-trace payload read of one data slot, for audits and snapshots.
    pub fn peek_slot(&self, store: &PhysicalStore, bucket: u64, slot: u64) -> Vec<u8> {
        let bb = self.params.block_bytes();
        let idx = self.data_index(bucket, slot) as usize;
        store.peek_region(&self.data)[idx * bb..(idx + 1) * bb].to_vec()
    }

    /// Buckets on the path to `leaf`, root first.
    pub fn path_buckets(&self, leaf: u64) -> impl Iterator<Item = (u32, u64)> + '_ {
        let h = self.params.height;
        (0..=h).map(move |depth| (depth, tree::node_on_path(leaf, depth, h)))
    }

    pub fn data_region(&self) -> &Region {
        &self.data
    }

    pub fn meta_region(&self) -> &Region {
        &self.meta
    }
}
