//! The succinct constructions: tall leaf buckets with bit-reversal eviction,
//! in a one-label and a two-choice variant.
//!
//! Both share the same subroutines. `ReadPath` scans a full root-to-leaf
//! path (transfer count identical on hit and miss) and blanks the target's
//! metadata; `EvictPath` drains the path `P(BitReversal(G mod 2^L))` into
//! the stash and repacks it greedily leaf to root, bumping `G`. The
//! two-choice variant reads both labels' paths and steers each block's new
//! primary label to the less loaded of two fresh draws, tracked exactly by a
//! per-leaf counter table.

use rand::rngs::SmallRng;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::error::OramError;
use crate::meta::{decode_meta, encode_meta, BlockMeta};
use crate::params::{bit_reversal, ceil_log2, tree, Construction, TreeParams};
use crate::path_oram::{child_seed, mask_payload_tail, place_greedy};
use crate::payload::BlockPayload;
use crate::stash::Stash;
use crate::store::PhysicalStore;
use crate::tables::{Table, TableMode};
use crate::tree_io::TreeStorage;

pub use crate::path_oram::Op;

/// Per-access observations used by the security tester: the leaves whose
/// paths `ReadPath` scanned and the leaf each `EvictPath` targeted.
#[derive(Debug, Default, Clone)]
pub struct AccessLog {
    pub read_leaves: Vec<u64>,
    pub evict_leaves: Vec<u64>,
}

/// Table accesses issued by the most recent logical access.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct TableCosts {
    pub position: u64,
    pub counter: u64,
}

#[derive(Debug)]
pub struct SuccinctOram {
    params: TreeParams,
    tree: TreeStorage,
    stash: Stash,
    /// Eviction counter; the next eviction path is `BitReversal(G mod 2^L)`.
    g: u64,
    pos_table: Table,
    ctr_table: Option<Table>,
    label_rng: ChaCha12Rng,
    filler_rng: SmallRng,
    log: Option<AccessLog>,
    last_costs: TableCosts,
    accesses: u64,
    // scratch
    slot_buf: Vec<u8>,
    words: Vec<u64>,
    initialized: bool,
    init_overflow: bool,
}

impl SuccinctOram {
    /// Allocates tree and table storage for the given parameters. The
    /// counter table exists only for the two-choice construction.
    pub fn setup(
        store: &mut PhysicalStore,
        params: TreeParams,
        table_mode: TableMode,
        seed: u64,
    ) -> Result<Self, OramError> {
        assert!(
            params.construction != Construction::PathOram,
            "use PathOram for the uniform-bucket construction"
        );
        let tree = TreeStorage::alloc(store, params, true);
        let two_choice = params.construction == Construction::SuccinctTwo;
        let label_bits = params.label_width;
        let pos_entry_bits = if two_choice { 2 * label_bits } else { label_bits };
        let pos_table = Table::new(
            store,
            params.n_blocks,
            pos_entry_bits,
            table_mode,
            5,
            child_seed(seed ^ 0x705),
        )?;
        let ctr_table = if two_choice {
            // ceil(lg(N+1)) bits so a counter can hold N itself.
            let ctr_bits = ceil_log2(params.n_blocks + 1);
            Some(Table::new(
                store,
                params.leaves(),
                ctr_bits,
                table_mode,
                5,
                child_seed(seed ^ 0xc72),
            )?)
        } else {
            None
        };
        let mut label_rng = ChaCha12Rng::seed_from_u64(seed);
        label_rng.set_stream(0);
        Ok(SuccinctOram {
            slot_buf: vec![0u8; params.block_bytes()],
            words: Vec::with_capacity(params.leaf_cap as usize),
            params,
            tree,
            stash: Stash::new(),
            g: 0,
            pos_table,
            ctr_table,
            label_rng,
            filler_rng: SmallRng::seed_from_u64(child_seed(seed ^ 0xd0_11)),
            log: None,
            last_costs: TableCosts::default(),
            accesses: 0,
            initialized: false,
            init_overflow: false,
        })
    }

    pub fn params(&self) -> &TreeParams {
        &self.params
    }

    pub fn stash_size(&self) -> usize {
        self.stash.len()
    }

    pub fn eviction_counter(&self) -> u64 {
        self.g
    }

    pub fn access_count(&self) -> u64 {
        self.accesses
    }

    /// Table accesses issued by the most recent `access`.
    pub fn last_table_costs(&self) -> TableCosts {
        self.last_costs
    }

    pub fn enable_logging(&mut self) {
        self.log = Some(AccessLog::default());
    }

    pub fn take_log(&mut self) -> AccessLog {
        self.log.replace(AccessLog::default()).unwrap_or_default()
    }

    fn draw_label(&mut self) -> u64 {
        self.label_rng.next_u64() & (self.params.leaves() - 1)
    }

    /// Loads all `N` payloads. Labels are drawn per construction (uniform,
    /// or two-choice with counter updates); blocks are placed at the deepest
    /// free bucket on their primary label's path. If direct placement
    /// overflows, leftovers go through the stash and extra eviction sweeps;
    /// `G` is reset afterwards so the eviction schedule seen by logical
    /// accesses always starts at zero.
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

        let two_choice = self.params.construction == Construction::SuccinctTwo;
        let leaves = self.params.leaves();
        let mut primary = Vec::with_capacity(n as usize);
        let mut pos_values = Vec::with_capacity(n as usize);
        let mut counts = vec![0u64; if two_choice { leaves as usize } else { 0 }];
        for _ in 0..n {
            if two_choice {
                let l1 = self.draw_label();
                let l2 = self.draw_label();
                let p = if counts[l1 as usize] <= counts[l2 as usize] {
                    l1
                } else {
                    l2
                };
                counts[p as usize] += 1;
                primary.push(p);
                pos_values.push(l1 | (l2 << self.params.label_width));
            } else {
                let l = self.draw_label();
                primary.push(l);
                pos_values.push(l);
            }
        }
        self.pos_table.init_from(store, &pos_values)?;
        if let Some(ctr) = &mut self.ctr_table {
            ctr.init_from(store, &counts)?;
        }

        let assignment = place_greedy(&self.params, &primary, |_| {});
        self.write_full_tree(store, &assignment, payloads)?;
        let mut overflow = 0u64;
        for (addr, &pos) in primary.iter().enumerate() {
            if assignment.placed[addr] == u64::MAX {
                self.stash
                    .insert(pos, addr as u64, payloads[addr].as_bytes().to_vec());
                overflow += 1;
            }
        }
        if overflow > 0 {
            // Fall back to eviction sweeps, then restart the schedule so the
            // eviction-leaf sequence seen by logical accesses is independent
            // of how initialization went.
            self.init_overflow = true;
            for _ in 0..leaves {
                if self.stash.is_empty() {
                    break;
                }
                self.evict_path(store)?;
            }
            self.g = 0;
        }
        self.initialized = true;
        Ok(())
    }

    /// Did initialization have to fall back to stash insertion and eviction
    /// sweeps? The oracle pairing requires this to be false.
    pub fn init_overflowed(&self) -> bool {
        self.init_overflow
    }

    fn write_full_tree(
        &mut self,
        store: &mut PhysicalStore,
        assignment: &crate::path_oram::Placement,
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

    /// One logical access. Returns the pre-update value.
    pub fn access(
        &mut self,
        store: &mut PhysicalStore,
        addr: u64,
        op: Op,
        new_val: Option<&BlockPayload>,
    ) -> Result<BlockPayload, OramError> {
        if addr >= self.params.n_blocks {
            return Err(OramError::AddressOutOfRange {
                addr,
                n_blocks: self.params.n_blocks,
            });
        }
        let new_bytes = match (op, new_val) {
            (Op::Write, Some(v)) => {
                if v.as_bytes().len() != self.params.block_bytes() {
                    return Err(OramError::PayloadSize {
                        got: v.as_bytes().len(),
                        want: self.params.block_bytes(),
                    });
                }
                Some(v.as_bytes())
            }
            (Op::Write, None) => {
                return Err(OramError::PayloadSize {
                    got: 0,
                    want: self.params.block_bytes(),
                })
            }
            (Op::Read, _) => None,
        };
        self.accesses += 1;
        self.last_costs = TableCosts::default();
        let ret = match self.params.construction {
            Construction::SuccinctOne => self.access_t1(store, addr, new_bytes)?,
            Construction::SuccinctTwo => self.access_t2(store, addr, new_bytes)?,
            Construction::PathOram => unreachable!(),
        };
        store.mark_epoch();
        Ok(BlockPayload::from_bytes(self.params.block_bits, ret))
    }

    fn access_t1(
        &mut self,
        store: &mut PhysicalStore,
        addr: u64,
        new_bytes: Option<&[u8]>,
    ) -> Result<Vec<u8>, OramError> {
        let new_label = self.draw_label();
        let pos_before = self.pos_table.accesses();
        let old_label = self.pos_table.replace(store, addr, new_label)?;
        self.last_costs.position = self.pos_table.accesses() - pos_before;

        let found = self.read_path(store, old_label, addr)?;
        let mut value = match found {
            Some(v) => v,
            None => self.stash.remove(old_label, addr).ok_or_else(|| {
                OramError::Integrity(format!("block {addr} missing from path and stash"))
            })?,
        };
        let ret = value.clone();
        if let Some(nb) = new_bytes {
            value.copy_from_slice(nb);
        }
        self.stash.insert(new_label, addr, value);
        self.evict_path(store)?;
        Ok(ret)
    }

    fn access_t2(
        &mut self,
        store: &mut PhysicalStore,
        addr: u64,
        new_bytes: Option<&[u8]>,
    ) -> Result<Vec<u8>, OramError> {
        let lw = self.params.label_width;
        let new1 = self.draw_label();
        let new2 = self.draw_label();
        let pos_before = self.pos_table.accesses();
        let packed_old = self
            .pos_table
            .replace(store, addr, new1 | (new2 << lw))?;
        self.last_costs.position = self.pos_table.accesses() - pos_before;
        let old1 = packed_old & ((1u64 << lw) - 1);
        let old2 = packed_old >> lw;

        let v1 = self.read_path(store, old1, addr)?;
        let v2 = self.read_path(store, old2, addr)?;
        let (mut value, old_primary) = match (v1, v2) {
            (Some(v), _) => (v, old1),
            (None, Some(v)) => (v, old2),
            (None, None) => {
                let (pos, v) = self
                    .stash
                    .remove_by_candidates(addr, &[old1, old2])
                    .ok_or_else(|| {
                        OramError::Integrity(format!("block {addr} missing from paths and stash"))
                    })?;
                (v, pos)
            }
        };

        // Counter updates in listed order: decrement the old primary first,
        // then read both candidates (the decrement is visible if the old
        // primary is itself a candidate), then bump the argmin. Ties take
        // the first draw.
        let ctr = self.ctr_table.as_mut().expect("two-choice has counters");
        let ctr_before = ctr.accesses();
        let before_dec = ctr.update(store, old_primary, |c| c.saturating_sub(1))?;
        if before_dec == 0 {
            return Err(OramError::Integrity(format!(
                "counter for primary label {old_primary} already zero"
            )));
        }
        let (c1, c2) = ctr.get_pair(store, new1, new2)?;
        let (new_primary, cmin) = if c1 <= c2 { (new1, c1) } else { (new2, c2) };
        ctr.set(store, new_primary, cmin + 1)?;
        self.last_costs.counter = ctr.accesses() - ctr_before;

        let ret = value.clone();
        if let Some(nb) = new_bytes {
            value.copy_from_slice(nb);
        }
        self.stash.insert(new_primary, addr, value);
        self.evict_path(store)?;
        Ok(ret)
    }

    /// Scans the whole path to `leaf`, transferring every data block and
    /// metadata word on it. If a real block `(addr, leaf)` sits on the path
    /// its payload is returned and its slot metadata blanked to dummy.
    pub fn read_path(
        &mut self,
        store: &mut PhysicalStore,
        leaf: u64,
        addr: u64,
    ) -> Result<Option<Vec<u8>>, OramError> {
        if let Some(log) = &mut self.log {
            log.read_leaves.push(leaf);
        }
        let height = self.params.height;
        let mut words = std::mem::take(&mut self.words);
        let mut buf = std::mem::take(&mut self.slot_buf);
        let mut found = None;
        for depth in 0..=height {
            let bucket = tree::node_on_path(leaf, depth, height);
            self.tree.read_bucket_meta(store, bucket, &mut words)?;
            for slot in 0..words.len() as u64 {
                self.tree.read_slot(store, bucket, slot, &mut buf)?;
                if decode_meta(words[slot as usize], &self.params)
                    == (BlockMeta::Real { addr, pos: leaf })
                {
                    found = Some(buf.clone());
                    words[slot as usize] = encode_meta(
                        BlockMeta::Dummy,
                        self.filler_rng.next_u64(),
                        &self.params,
                    );
                }
            }
            self.tree.write_bucket_meta(store, bucket, &words)?;
        }
        self.words = words;
        self.slot_buf = buf;
        Ok(found)
    }

    /// Drains the scheduled path into the stash (root to leaf), then repacks
    /// it greedily leaf to root and advances `G`.
    pub fn evict_path(&mut self, store: &mut PhysicalStore) -> Result<(), OramError> {
        let height = self.params.height;
        let leaf = bit_reversal(self.g % self.params.leaves(), height);
        self.g += 1;
        if let Some(log) = &mut self.log {
            log.evict_leaves.push(leaf);
        }

        let mut words = std::mem::take(&mut self.words);
        let mut buf = std::mem::take(&mut self.slot_buf);
        for depth in 0..=height {
            let bucket = tree::node_on_path(leaf, depth, height);
            self.tree.read_bucket_meta(store, bucket, &mut words)?;
            for slot in 0..words.len() as u64 {
                self.tree.read_slot(store, bucket, slot, &mut buf)?;
                if let BlockMeta::Real { addr, pos } =
                    decode_meta(words[slot as usize], &self.params)
                {
                    self.stash.insert(pos, addr, buf.clone());
                    words[slot as usize] = encode_meta(
                        BlockMeta::Dummy,
                        self.filler_rng.next_u64(),
                        &self.params,
                    );
                }
            }
            self.tree.write_bucket_meta(store, bucket, &words)?;
        }
        self.words = words;
        self.slot_buf = buf;

        for depth in (0..=height).rev() {
            self.write_bucket(store, leaf, depth)?;
        }
        Ok(())
    }

    /// Moves up to one bucket's worth of stash blocks whose labels share the
    /// bucket's path prefix into the bucket, filling the rest with dummies
    /// and rewriting every slot's metadata.
    pub fn write_bucket(
        &mut self,
        store: &mut PhysicalStore,
        leaf: u64,
        depth: u32,
    ) -> Result<(), OramError> {
        let height = self.params.height;
        let bucket = tree::node_on_path(leaf, depth, height);
        let cap = self.params.cap_at_depth(depth) as u64;
        let mut words = std::mem::take(&mut self.words);
        let mut buf = std::mem::take(&mut self.slot_buf);
        words.clear();
        for slot in 0..cap {
            match self.stash.pop_first_in_prefix(leaf, depth, height) {
                Some(entry) => {
                    self.tree.write_slot(store, bucket, slot, &entry.payload)?;
                    words.push(encode_meta(
                        BlockMeta::Real {
                            addr: entry.addr,
                            pos: entry.pos,
                        },
                        0,
                        &self.params,
                    ));
                }
                None => {
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
        }
        self.tree.write_bucket_meta(store, bucket, &words)?;
        self.words = words;
        self.slot_buf = buf;
        Ok(())
    }

    /// Off-trace decode of one bucket: `(slot, addr, pos)` per real block.
    pub fn peek_bucket(&self, store: &PhysicalStore, bucket: u64) -> Vec<(u64, u64, u64)> {
        self.tree
            .peek_bucket_meta(store, bucket)
            .into_iter()
            .enumerate()
            .filter_map(|(slot, word)| match decode_meta(word, &self.params) {
                BlockMeta::Real { addr, pos } => Some((slot as u64, addr, pos)),
                BlockMeta::Dummy => None,
            })
            .collect()
    }

    /// Off-trace decode of all real tree blocks as `(bucket, addr, pos)`.
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

    pub fn peek_slot_payload(&self, store: &PhysicalStore, bucket: u64, slot: u64) -> Vec<u8> {
        self.tree.peek_slot(store, bucket, slot)
    }

    /// Off-trace position-table entry: the label for the one-label
    /// construction, the packed pair for the two-choice one.
    pub fn peek_position_entry(&self, store: &PhysicalStore, addr: u64) -> u64 {
        self.pos_table.peek(store, addr)
    }

    pub fn peek_position_pair(&self, store: &PhysicalStore, addr: u64) -> (u64, u64) {
        let packed = self.pos_table.peek(store, addr);
        let lw = self.params.label_width;
        (packed & ((1u64 << lw) - 1), packed >> lw)
    }

    pub fn peek_counter(&self, store: &PhysicalStore, leaf: u64) -> u64 {
        self.ctr_table
            .as_ref()
            .expect("two-choice has counters")
            .peek(store, leaf)
    }

    pub fn stash_entries(&self) -> Vec<crate::stash::StashEntry> {
        self.stash.iter().collect()
    }

    pub fn tables_outsourced(&self) -> bool {
        self.pos_table.is_outsourced()
    }
}
