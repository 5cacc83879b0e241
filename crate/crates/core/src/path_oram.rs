//! Uniform-bucket tree ORAM with eviction on the accessed path and a
//! recursive position map.
//!
//! This is the sub-ORAM the succinct constructions outsource their tables
//! to, and the baseline they are compared against. Every access reads and
//! rewrites exactly one root-to-leaf path of the top tree (plus the
//! recursive map accesses), so the data-block cost is `2 * Z * (L+1)`
//! transfers per access.

use rand::rngs::SmallRng;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::error::OramError;
use crate::meta::{decode_meta, encode_meta, read_bits, write_bits, BlockMeta};
use crate::params::{tree, TreeParams};
use crate::payload::BlockPayload;
use crate::stash::Stash;
use crate::store::PhysicalStore;
use crate::tree_io::TreeStorage;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    Read,
    Write,
}

/// How the position map is held.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapMode {
    /// Whole map in user memory (test mode; recursion cost is excluded from
    /// the comparison-table figures anyway).
    InMemory,
    /// Packed label table outsourced to a child instance, recursing until
    /// the table fits in a single user-held block.
    Recursive,
}

#[derive(Debug, Clone)]
pub struct PathOramConfig {
    pub n_blocks: u64,
    pub block_bits: u32,
    pub z: u32,
    /// Tree height; defaults to `ceil(lg N)`.
    pub height: Option<u32>,
    pub map_mode: MapMode,
    pub seed: u64,
}

impl PathOramConfig {
    pub fn new(n_blocks: u64, block_bits: u32, seed: u64) -> Self {
        PathOramConfig {
            n_blocks,
            block_bits,
            z: 5,
            height: None,
            map_mode: MapMode::InMemory,
            seed,
        }
    }
}

/// In-place update applied to the accessed block while it is in the stash.
pub enum Update<'a> {
    None,
    Set(&'a [u8]),
    Rmw(&'a mut dyn FnMut(&mut [u8])),
}

#[derive(Debug)]
enum PosBackend {
    Mem(Vec<u64>),
    /// Terminal packed table occupying a single user-held block.
    Packed { block: Vec<u8>, entry_bits: u32 },
    Oram {
        child: Box<PathOram>,
        fanout: u64,
        entry_bits: u32,
    },
}

#[derive(Debug)]
pub struct PathOram {
    params: TreeParams,
    tree: TreeStorage,
    stash: Stash,
    map: PosBackend,
    label_rng: ChaCha12Rng,
    filler_rng: SmallRng,
    accesses: u64,
    leaf_log: Option<Vec<u64>>,
    // scratch
    slot_buf: Vec<u8>,
    words: Vec<u64>,
}

pub(crate) fn child_seed(seed: u64) -> u64 {
    // splitmix64 step; keeps nested instances on unrelated streams.
    let mut z = seed.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl PathOram {
    /// Allocates tree storage and the position-map chain. `top` marks the
    /// regions as the tree under test; sub-ORAM levels always allocate as
    /// table storage.
    pub fn setup(
        store: &mut PhysicalStore,
        config: &PathOramConfig,
        top: bool,
    ) -> Result<Self, OramError> {
        let derived = TreeParams::path_oram(
            config.n_blocks,
            config.block_bits,
            config.z,
            config.height,
        )?;
        let params = derived.params;
        let tree = TreeStorage::alloc(store, params, top);

        let entry_bits = params.label_width;
        let map = match config.map_mode {
            MapMode::InMemory => PosBackend::Mem(vec![0; params.n_blocks as usize]),
            MapMode::Recursive => {
                let fanout = (params.block_bits / entry_bits).max(1) as u64;
                let table_blocks = params.n_blocks.div_ceil(fanout);
                if table_blocks <= 1 {
                    PosBackend::Packed {
                        block: vec![0u8; params.block_bytes()],
                        entry_bits,
                    }
                } else {
                    let child_cfg = PathOramConfig {
                        n_blocks: table_blocks,
                        block_bits: config.block_bits,
                        z: config.z,
                        height: None,
                        map_mode: MapMode::Recursive,
                        seed: child_seed(config.seed),
                    };
                    PosBackend::Oram {
                        child: Box::new(PathOram::setup(store, &child_cfg, false)?),
                        fanout,
                        entry_bits,
                    }
                }
            }
        };

        let mut label_rng = ChaCha12Rng::seed_from_u64(config.seed);
        label_rng.set_stream(0);
        Ok(PathOram {
            slot_buf: vec![0u8; params.block_bytes()],
            words: Vec::with_capacity(params.leaf_cap as usize),
            params,
            tree,
            stash: Stash::new(),
            map,
            label_rng,
            filler_rng: SmallRng::seed_from_u64(child_seed(config.seed ^ 0xf111)),
            accesses: 0,
            leaf_log: None,
        })
    }

    /// Record the leaf each access reads (the adversary-visible path
    /// choice), for the statistical tests.
    pub fn enable_leaf_log(&mut self) {
        self.leaf_log = Some(Vec::new());
    }

    pub fn take_leaf_log(&mut self) -> Vec<u64> {
        self.leaf_log.replace(Vec::new()).unwrap_or_default()
    }

    pub fn params(&self) -> &TreeParams {
        &self.params
    }

    pub fn stash_size(&self) -> usize {
        self.stash.len()
    }

    pub fn access_count(&self) -> u64 {
        self.accesses
    }

    fn draw_label(&mut self) -> u64 {
        self.label_rng.next_u64() & (self.params.leaves() - 1)
    }

    /// Initializes all `N` logical blocks. Labels are drawn uniformly;
    /// blocks are placed directly at the deepest free bucket on their path,
    /// anything that does not fit stays in the stash.
    pub fn init(
        &mut self,
        store: &mut PhysicalStore,
        payloads: &[BlockPayload],
    ) -> Result<(), OramError> {
        let n = self.params.n_blocks;
        if payloads.len() as u64 != n {
            return Err(OramError::InitLength {
                got: payloads.len(),
                want: n as usize,
            });
        }
        let bb = self.params.block_bytes();
        for p in payloads {
            if p.as_bytes().len() != bb {
                return Err(OramError::PayloadSize {
                    got: p.as_bytes().len(),
                    want: bb,
                });
            }
        }

        let labels: Vec<u64> = (0..n).map(|_| self.draw_label()).collect();
        self.set_map_bulk(store, &labels)?;

        let assignment = place_greedy(&self.params, &labels, |_| {});
        self.write_full_tree(store, &assignment, payloads)?;
        for (addr, &pos) in labels.iter().enumerate() {
            if assignment.placed[addr] == u64::MAX {
                self.stash
                    .insert(pos, addr as u64, payloads[addr].as_bytes().to_vec());
            }
        }
        Ok(())
    }

    fn set_map_bulk(&mut self, store: &mut PhysicalStore, labels: &[u64]) -> Result<(), OramError> {
        match &mut self.map {
            PosBackend::Mem(v) => {
                v.copy_from_slice(labels);
                Ok(())
            }
            PosBackend::Packed { block, entry_bits } => {
                for (i, &l) in labels.iter().enumerate() {
                    write_bits(block, i as u64 * *entry_bits as u64, *entry_bits, l);
                }
                Ok(())
            }
            PosBackend::Oram {
                child,
                fanout,
                entry_bits,
            } => {
                let bb = child.params.block_bytes();
                let blocks = child.params.n_blocks as usize;
                let mut packed = vec![BlockPayload::zero(child.params.block_bits); blocks];
                for (i, &l) in labels.iter().enumerate() {
                    let b = i as u64 / *fanout;
                    let slot = i as u64 % *fanout;
                    write_bits(
                        &mut packed[b as usize].as_bytes_mut()[..bb],
                        slot * *entry_bits as u64,
                        *entry_bits,
                        l,
                    );
                }
                child.init(store, &packed)
            }
        }
    }

    fn map_replace(
        &mut self,
        store: &mut PhysicalStore,
        addr: u64,
        new_label: u64,
    ) -> Result<u64, OramError> {
        match &mut self.map {
            PosBackend::Mem(v) => Ok(std::mem::replace(&mut v[addr as usize], new_label)),
            PosBackend::Packed { block, entry_bits } => {
                let off = addr * *entry_bits as u64;
                let old = read_bits(block, off, *entry_bits);
                write_bits(block, off, *entry_bits, new_label);
                Ok(old)
            }
            PosBackend::Oram {
                child,
                fanout,
                entry_bits,
            } => {
                let (blk, slot) = (addr / *fanout, addr % *fanout);
                let eb = *entry_bits;
                let mut old = 0u64;
                let mut f = |bytes: &mut [u8]| {
                    let off = slot * eb as u64;
                    old = read_bits(bytes, off, eb);
                    write_bits(bytes, off, eb, new_label);
                };
                child.access_update(store, blk, Update::Rmw(&mut f))?;
                Ok(old)
            }
        }
    }

    /// One logical access: replaces the block's label with a fresh uniform
    /// draw, reads the old label's path, updates the block in the stash and
    /// greedily rewrites the same path. Returns the pre-update value.
    pub fn access(
        &mut self,
        store: &mut PhysicalStore,
        addr: u64,
        op: Op,
        new_val: Option<&BlockPayload>,
    ) -> Result<BlockPayload, OramError> {
        let update = match op {
            Op::Read => Update::None,
            Op::Write => {
                let v = new_val.ok_or(OramError::PayloadSize {
                    got: 0,
                    want: self.params.block_bytes(),
                })?;
                Update::Set(v.as_bytes())
            }
        };
        let old = self.access_update(store, addr, update)?;
        store.mark_epoch();
        Ok(BlockPayload::from_bytes(self.params.block_bits, old))
    }

    pub(crate) fn access_update(
        &mut self,
        store: &mut PhysicalStore,
        addr: u64,
        update: Update<'_>,
    ) -> Result<Vec<u8>, OramError> {
        let n = self.params.n_blocks;
        if addr >= n {
            return Err(OramError::AddressOutOfRange {
                addr,
                n_blocks: n,
            });
        }
        self.accesses += 1;
        let new_label = self.draw_label();
        let old_label = self.map_replace(store, addr, new_label)?;
        if let Some(log) = &mut self.leaf_log {
            log.push(old_label);
        }

        // Read the whole path into the stash.
        let height = self.params.height;
        let mut words = std::mem::take(&mut self.words);
        let mut buf = std::mem::take(&mut self.slot_buf);
        for depth in 0..=height {
            let bucket = tree::node_on_path(old_label, depth, height);
            self.tree.read_bucket_meta(store, bucket, &mut words)?;
            for slot in 0..words.len() as u64 {
                self.tree.read_slot(store, bucket, slot, &mut buf)?;
                if let BlockMeta::Real { addr: a, pos } = decode_meta(words[slot as usize], &self.params)
                {
                    self.stash.insert(pos, a, buf.clone());
                }
            }
        }

        let mut value = self
            .stash
            .remove(old_label, addr)
            .ok_or_else(|| OramError::Integrity(format!("block {addr} missing from path and stash")))?;
        let ret = value.clone();
        match update {
            Update::None => {}
            Update::Set(v) => {
                if v.len() != value.len() {
                    return Err(OramError::PayloadSize {
                        got: v.len(),
                        want: value.len(),
                    });
                }
                value.copy_from_slice(v);
            }
            Update::Rmw(f) => f(&mut value),
        }
        self.stash.insert(new_label, addr, value);

        // Greedy write-back, leaf to root: deepest placement, smallest
        // address first among the eligible.
        for depth in (0..=height).rev() {
            let bucket = tree::node_on_path(old_label, depth, height);
            let cap = self.params.cap_at_depth(depth) as usize;
            let mut keys = self.stash.eligible_keys(old_label, depth, height);
            keys.sort_by_key(|&(_, a)| a);
            words.clear();
            for slot in 0..cap as u64 {
                if let Some(&(pos, a)) = keys.get(slot as usize) {
                    let payload = self.stash.remove(pos, a).unwrap();
                    self.tree.write_slot(store, bucket, slot, &payload)?;
                    words.push(encode_meta(
                        BlockMeta::Real { addr: a, pos },
                        0,
                        &self.params,
                    ));
                } else {
                    self.filler_rng.fill_bytes(&mut buf);
                    mask_payload_tail(&mut buf, self.params.block_bits);
                    self.tree.write_slot(store, bucket, slot, &buf)?;
                    words.push(encode_meta(
                        BlockMeta::Dummy,
                        self.filler_rng.next_u64(),
                        &self.params,
                    ));
                }
            }
            self.tree.write_bucket_meta(store, bucket, &words)?;
        }

        self.words = words;
        self.slot_buf = buf;
        Ok(ret)
    }

    fn write_full_tree(
        &mut self,
        store: &mut PhysicalStore,
        assignment: &Placement,
        payloads: &[BlockPayload],
    ) -> Result<(), OramError> {
        let mut words = Vec::new();
        let mut buf = vec![0u8; self.params.block_bytes()];
        for bucket in 0..self.params.bucket_count() {
            let depth = tree::depth_of(bucket);
            let cap = self.params.cap_at_depth(depth) as usize;
            let residents = &assignment.buckets[bucket as usize];
            words.clear();
            for slot in 0..cap as u64 {
                if let Some(&(addr, pos)) = residents.get(slot as usize) {
                    self.tree
                        .write_slot(store, bucket, slot, payloads[addr as usize].as_bytes())?;
                    words.push(encode_meta(BlockMeta::Real { addr, pos }, 0, &self.params));
                } else {
                    self.filler_rng.fill_bytes(&mut buf);
                    mask_payload_tail(&mut buf, self.params.block_bits);
                    self.tree.write_slot(store, bucket, slot, &buf)?;
                    words.push(encode_meta(
                        BlockMeta::Dummy,
                        self.filler_rng.next_u64(),
                        &self.params,
                    ));
                }
            }
            self.tree.write_bucket_meta(store, bucket, &words)?;
        }
        Ok(())
    }

    /// Off-trace decode of all real blocks in the tree: `(bucket, addr,
    /// pos)` triples. For audits and tests.
    pub fn peek_tree_blocks(&self, store: &PhysicalStore) -> Vec<(u64, u64, u64)> {
        let mut out = Vec::new();
        for bucket in 0..self.params.bucket_count() {
            for word in self.tree.peek_bucket_meta(store, bucket) {
                if let BlockMeta::Real { addr, pos } = decode_meta(word, &self.params) {
                    out.push((bucket, addr, pos));
                }
            }
        }
        out
    }

    /// Off-trace position lookup (walks the recursive map without touching
    /// the trace).
    pub fn peek_position(&self, store: &PhysicalStore, addr: u64) -> u64 {
        match &self.map {
            PosBackend::Mem(v) => v[addr as usize],
            PosBackend::Packed { block, entry_bits } => {
                read_bits(block, addr * *entry_bits as u64, *entry_bits)
            }
            PosBackend::Oram {
                child,
                fanout,
                entry_bits,
            } => {
                let bytes = child
                    .peek_logical(store, addr / *fanout)
                    .expect("map block present");
                read_bits(&bytes, (addr % *fanout) * *entry_bits as u64, *entry_bits)
            }
        }
    }

    /// Off-trace logical block lookup by full scan of tree and stash.
    pub fn peek_logical(&self, store: &PhysicalStore, addr: u64) -> Option<Vec<u8>> {
        for bucket in 0..self.params.bucket_count() {
            let words = self.tree.peek_bucket_meta(store, bucket);
            for (slot, word) in words.iter().enumerate() {
                if let BlockMeta::Real { addr: a, .. } = decode_meta(*word, &self.params) {
                    if a == addr {
                        return Some(self.tree.peek_slot(store, bucket, slot as u64));
                    }
                }
            }
        }
        self.stash
            .iter()
            .find(|e| e.addr == addr)
            .map(|e| e.payload)
    }

    /// Full-state audit: every real block lies on its label's path, each
    /// address appears exactly once, and tree + stash hold all N blocks.
    pub fn audit(&self, store: &PhysicalStore) -> Result<(), String> {
        let height = self.params.height;
        let mut seen = vec![false; self.params.n_blocks as usize];
        for (bucket, addr, pos) in self.peek_tree_blocks(store) {
            if !tree::on_path(bucket, pos, height) {
                return Err(format!("block {addr} in bucket {bucket} off path P({pos})"));
            }
            if std::mem::replace(&mut seen[addr as usize], true) {
                return Err(format!("block {addr} duplicated"));
            }
            if self.peek_position(store, addr) != pos {
                return Err(format!("block {addr} label mismatch vs position map"));
            }
        }
        for e in self.stash.iter() {
            if std::mem::replace(&mut seen[e.addr as usize], true) {
                return Err(format!("block {} duplicated in stash", e.addr));
            }
            if self.peek_position(store, e.addr) != e.pos {
                return Err(format!("stash block {} label mismatch", e.addr));
            }
        }
        if let Some(missing) = seen.iter().position(|&s| !s) {
            return Err(format!("block {missing} missing from tree and stash"));
        }
        Ok(())
    }
}

/// Where each block landed during direct placement. `placed[addr]` is the
/// bucket index or `u64::MAX` for stash overflow.
pub(crate) struct Placement {
    pub buckets: Vec<Vec<(u64, u64)>>,
    pub placed: Vec<u64>,
}

/// Greedy deepest placement of blocks on their label paths, in address
/// order. `on_leaf_overflow` is invoked for every block that does not fit in
/// its leaf bucket (simulation hooks count these).
pub(crate) fn place_greedy(
    params: &TreeParams,
    labels: &[u64],
    mut on_leaf_overflow: impl FnMut(u64),
) -> Placement {
    let height = params.height;
    let mut buckets: Vec<Vec<(u64, u64)>> = vec![Vec::new(); params.bucket_count() as usize];
    let mut placed = vec![u64::MAX; labels.len()];
    for (addr, &pos) in labels.iter().enumerate() {
        let mut depth = height as i64;
        while depth >= 0 {
            let bucket = tree::node_on_path(pos, depth as u32, height);
            let cap = params.cap_at_depth(depth as u32) as usize;
            if buckets[bucket as usize].len() < cap {
                buckets[bucket as usize].push((addr as u64, pos));
                placed[addr] = bucket;
                break;
            }
            if depth == height as i64 {
                on_leaf_overflow(addr as u64);
            }
            depth -= 1;
        }
    }
    Placement { buckets, placed }
}

pub(crate) fn mask_payload_tail(buf: &mut [u8], bits: u32) {
    let rem = bits % 8;
    if rem != 0 {
        if let Some(last) = buf.last_mut() {
            *last &= (1u8 << rem) - 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::TraceMode;

    fn setup_inited(
        n: u64,
        bits: u32,
        z: u32,
        mode: MapMode,
        seed: u64,
    ) -> (PhysicalStore, PathOram) {
        let mut store = PhysicalStore::with_trace_mode(bits, TraceMode::CountersOnly);
        let cfg = PathOramConfig {
            n_blocks: n,
            block_bits: bits,
            z,
            height: None,
            map_mode: mode,
            seed,
        };
        let mut oram = PathOram::setup(&mut store, &cfg, true).unwrap();
        let payloads: Vec<BlockPayload> = (0..n).map(|a| BlockPayload::from_u64(bits, a ^ 0xabc)).collect();
        oram.init(&mut store, &payloads).unwrap();
        (store, oram)
    }

    #[test]
    fn init_then_scan_reads_initials() {
        let (mut store, mut oram) = setup_inited(256, 64, 5, MapMode::InMemory, 1);
        for a in 0..256u64 {
            let v = oram.access(&mut store, a, Op::Read, None).unwrap();
            assert_eq!(v.to_u64(), a ^ 0xabc);
        }
        oram.audit(&store).unwrap();
    }

    #[test]
    fn write_then_read_roundtrip() {
        let (mut store, mut oram) = setup_inited(128, 64, 5, MapMode::InMemory, 2);
        let v = BlockPayload::from_u64(64, 999);
        oram.access(&mut store, 17, Op::Write, Some(&v)).unwrap();
        let got = oram.access(&mut store, 17, Op::Read, None).unwrap();
        assert_eq!(got, v);
    }

    #[test]
    fn recursive_map_matches_reference() {
        let (mut store, mut oram) = setup_inited(1 << 10, 256, 5, MapMode::Recursive, 3);
        let mut reference: Vec<u64> = (0..1u64 << 10).map(|a| a ^ 0xabc).collect();
        let mut rng = SmallRng::seed_from_u64(99);
        for _ in 0..3000 {
            let a = rng.next_u64() % (1 << 10);
            if rng.next_u64() % 2 == 0 {
                let v = BlockPayload::from_u64(256, rng.next_u64());
                let old = oram.access(&mut store, a, Op::Write, Some(&v)).unwrap();
                assert_eq!(old.to_u64(), reference[a as usize]);
                reference[a as usize] = v.to_u64();
            } else {
                let got = oram.access(&mut store, a, Op::Read, None).unwrap();
                assert_eq!(got.to_u64(), reference[a as usize]);
            }
        }
        oram.audit(&store).unwrap();
    }

    #[test]
    fn bandwidth_is_two_z_l_plus_one() {
        let (mut store, mut oram) = setup_inited(1 << 10, 64, 5, MapMode::InMemory, 4);
        store.reset_accounting();
        let before = store.counters();
        oram.access(&mut store, 5, Op::Read, None).unwrap();
        let after = store.counters();
        // Z=5, L=10: 2 * 5 * 11 = 110 data transfers, reads == writes.
        assert_eq!(after.top_data() - before.top_data(), 110);
    }

    #[test]
    fn init_places_everything_at_default_height() {
        let (store, oram) = setup_inited(1 << 12, 64, 5, MapMode::InMemory, 5);
        assert_eq!(oram.stash_size(), 0);
        assert_eq!(oram.peek_tree_blocks(&store).len(), 1 << 12);
    }
}
