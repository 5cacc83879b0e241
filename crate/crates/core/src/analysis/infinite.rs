//! The unbounded-bucket oracle and its greedy post-processor.
//!
//! `InfiniteOram` evolves the same construction with every bucket capacity
//! set to infinity, on the same label tape as a bounded twin. Its state,
//! pushed through the post-processor (which walks buckets in reverse
//! breadth-first order and moves up every block the bounded run keeps in a
//! proper ancestor), must equal the bounded state exactly — an exact, not
//! statistical, equivalence used as a correctness oracle for the eviction
//! logic. The same unbounded state drives the subtree-usage machinery of the
//! stash analysis.

use std::collections::BTreeMap;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::error::OramError;
use crate::params::{bit_reversal, tree, Construction, TreeParams};
use crate::payload::BlockPayload;
use crate::snapshot::TreeSnapshot;
use crate::store::{PhysicalStore, TraceMode};
use crate::succinct::{Op, SuccinctOram};
use crate::tables::TableMode;

/// Unbounded-bucket model of a succinct instance. Holds block identities
/// `(addr, pos)` per bucket plus the logical payloads; there is no physical
/// layout to model since buckets have no capacity.
#[derive(Debug)]
pub struct InfiniteOram {
    params: TreeParams,
    g: u64,
    buckets: Vec<Vec<(u64, u64)>>,
    stash: BTreeMap<(u64, u64), ()>,
    positions: Vec<u64>,
    counters: Option<Vec<u64>>,
    payloads: Vec<Vec<u8>>,
    label_rng: ChaCha12Rng,
}

impl InfiniteOram {
    pub fn new(params: TreeParams, seed: u64) -> Self {
        let two_choice = params.construction == Construction::SuccinctTwo;
        let mut label_rng = ChaCha12Rng::seed_from_u64(seed);
        label_rng.set_stream(0);
        InfiniteOram {
            buckets: vec![Vec::new(); params.bucket_count() as usize],
            stash: BTreeMap::new(),
            positions: vec![0; params.n_blocks as usize],
            counters: two_choice.then(|| vec![0; params.leaves() as usize]),
            payloads: vec![Vec::new(); params.n_blocks as usize],
            params,
            g: 0,
            label_rng,
        }
    }

    pub fn params(&self) -> &TreeParams {
        &self.params
    }

    fn draw_label(&mut self) -> u64 {
        self.label_rng.next_u64() & (self.params.leaves() - 1)
    }

    /// Mirrors the bounded initialization draw-for-draw; every block lands
    /// in its primary label's leaf (the deepest bucket, always free here).
    pub fn init(&mut self, payloads: &[BlockPayload]) {
        assert_eq!(payloads.len() as u64, self.params.n_blocks);
        let height = self.params.height;
        let lw = self.params.label_width;
        for addr in 0..self.params.n_blocks {
            let primary = match &mut self.counters {
                None => {
                    let l = self.label_rng.next_u64() & (self.params.leaves() - 1);
                    self.positions[addr as usize] = l;
                    l
                }
                Some(counts) => {
                    let l1 = self.label_rng.next_u64() & (self.params.leaves() - 1);
                    let l2 = self.label_rng.next_u64() & (self.params.leaves() - 1);
                    let p = if counts[l1 as usize] <= counts[l2 as usize] {
                        l1
                    } else {
                        l2
                    };
                    counts[p as usize] += 1;
                    self.positions[addr as usize] = l1 | (l2 << lw);
                    p
                }
            };
            let leaf_bucket = tree::node_on_path(primary, height, height);
            self.buckets[leaf_bucket as usize].push((addr, primary));
            self.payloads[addr as usize] = payloads[addr as usize].as_bytes().to_vec();
        }
    }

    pub fn access(&mut self, addr: u64, op: Op, new_val: Option<&BlockPayload>) {
        match self.params.construction {
            Construction::SuccinctOne => self.access_t1(addr, op, new_val),
            Construction::SuccinctTwo => self.access_t2(addr, op, new_val),
            Construction::PathOram => unreachable!("oracle models the succinct trees"),
        }
    }

    fn access_t1(&mut self, addr: u64, op: Op, new_val: Option<&BlockPayload>) {
        let new_label = self.draw_label();
        let old_label = std::mem::replace(&mut self.positions[addr as usize], new_label);
        if !self.read_path_remove(old_label, addr) {
            let removed = self.stash.remove(&(old_label, addr));
            assert!(removed.is_some(), "oracle: block missing");
        }
        if op == Op::Write {
            self.payloads[addr as usize] = new_val.unwrap().as_bytes().to_vec();
        }
        self.stash.insert((new_label, addr), ());
        self.evict_path();
    }

    fn access_t2(&mut self, addr: u64, op: Op, new_val: Option<&BlockPayload>) {
        let lw = self.params.label_width;
        let new1 = self.draw_label();
        let new2 = self.draw_label();
        let packed_old =
            std::mem::replace(&mut self.positions[addr as usize], new1 | (new2 << lw));
        let old1 = packed_old & ((1u64 << lw) - 1);
        let old2 = packed_old >> lw;

        let old_primary = if self.read_path_remove(old1, addr) {
            old1
        } else if self.read_path_remove(old2, addr) {
            old2
        } else if self.stash.remove(&(old1, addr)).is_some() {
            old1
        } else {
            let removed = self.stash.remove(&(old2, addr));
            assert!(removed.is_some(), "oracle: block missing");
            old2
        };

        let counts = self.counters.as_mut().unwrap();
        counts[old_primary as usize] -= 1;
        let (c1, c2) = (counts[new1 as usize], counts[new2 as usize]);
        let new_primary = if c1 <= c2 { new1 } else { new2 };
        counts[new_primary as usize] = c1.min(c2) + 1;

        if op == Op::Write {
            self.payloads[addr as usize] = new_val.unwrap().as_bytes().to_vec();
        }
        self.stash.insert((new_primary, addr), ());
        self.evict_path();
    }

    /// Removes `(addr, leaf)` from a bucket on `P(leaf)` if present.
    fn read_path_remove(&mut self, leaf: u64, addr: u64) -> bool {
        let height = self.params.height;
        for depth in 0..=height {
            let bucket = tree::node_on_path(leaf, depth, height) as usize;
            if let Some(i) = self.buckets[bucket]
                .iter()
                .position(|&(a, p)| a == addr && p == leaf)
            {
                self.buckets[bucket].swap_remove(i);
                return true;
            }
        }
        false
    }

    fn evict_path(&mut self) {
        let height = self.params.height;
        let leaf = bit_reversal(self.g % self.params.leaves(), height);
        self.g += 1;
        for depth in 0..=height {
            let bucket = tree::node_on_path(leaf, depth, height) as usize;
            for (addr, pos) in std::mem::take(&mut self.buckets[bucket]) {
                self.stash.insert((pos, addr), ());
            }
        }
        // Unbounded write-back: at each depth, every eligible stash block
        // moves in; the root takes whatever is left, so the stash empties.
        for depth in (0..=height).rev() {
            let bucket = tree::node_on_path(leaf, depth, height) as usize;
            let span = height - depth;
            let lo = (leaf >> span) << span;
            let hi = lo + (1u64 << span);
            let keys: Vec<(u64, u64)> = self
                .stash
                .range((lo, 0)..(hi, 0))
                .map(|(k, _)| *k)
                .collect();
            for (pos, addr) in keys {
                self.stash.remove(&(pos, addr));
                self.buckets[bucket].push((addr, pos));
            }
        }
        debug_assert!(self.stash.is_empty());
    }

    pub fn bucket_loads(&self) -> Vec<u64> {
        self.buckets.iter().map(|b| b.len() as u64).collect()
    }

    pub fn eviction_counter(&self) -> u64 {
        self.g
    }

    pub fn buckets(&self) -> &[Vec<(u64, u64)>] {
        &self.buckets
    }

    pub fn payload_of(&self, addr: u64) -> &[u8] {
        &self.payloads[addr as usize]
    }
}

/// Blocks (`X`) and bounded capacity (`C`) of a root-containing subtree,
/// given as breadth-first bucket indices.
pub fn subtree_usage(inf: &InfiniteOram, subtree: &[u64]) -> Result<(u64, u64), String> {
    let params = inf.params();
    let count = params.bucket_count();
    let mut present = vec![false; count as usize];
    for &b in subtree {
        if b >= count {
            return Err(format!("bucket {b} out of range"));
        }
        if std::mem::replace(&mut present[b as usize], true) {
            return Err(format!("bucket {b} listed twice"));
        }
    }
    if !present.first().copied().unwrap_or(false) {
        return Err("subtree must contain the root".into());
    }
    for &b in subtree {
        if b != 0 && !present[tree::parent(b) as usize] {
            return Err(format!("bucket {b} disconnected from the root"));
        }
    }
    let mut x = 0;
    let mut c = 0;
    for &b in subtree {
        x += inf.buckets()[b as usize].len() as u64;
        c += params.cap_at_depth(tree::depth_of(b)) as u64;
    }
    Ok((x, c))
}

/// `max_T (X(T) - C(T))` over all root-containing subtrees, by dynamic
/// programming: a child subtree is attached iff its own best excess is
/// positive. The bounded stash occupancy after post-processing exceeds `R`
/// iff this maximum does.
pub fn max_subtree_excess(inf: &InfiniteOram) -> i64 {
    let params = inf.params();
    let count = params.bucket_count() as usize;
    let mut best = vec![0i64; count];
    for b in (0..count).rev() {
        let cap = params.cap_at_depth(tree::depth_of(b as u64)) as i64;
        let mut v = inf.buckets()[b].len() as i64 - cap;
        let (l, r) = (2 * b + 1, 2 * b + 2);
        if r < count {
            v += best[l].max(0) + best[r].max(0);
        }
        best[b] = v;
    }
    best[0]
}

/// Outcome of one paired run.
#[derive(Debug, Clone)]
pub struct OracleVerdict {
    pub equal: bool,
    pub post_errors: Vec<String>,
    pub diff: Option<String>,
}

impl OracleVerdict {
    pub fn passed(&self) -> bool {
        self.equal && self.post_errors.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct OracleConfig {
    pub params: TreeParams,
    pub seed: u64,
    /// Negative control: run the unbounded twin on a different label tape;
    /// the verdict is then expected to be false.
    pub desync: bool,
}

/// Runs the bounded construction and its unbounded twin on one workload and
/// compares the post-processed unbounded state against the bounded state.
pub fn run_oracle_pair(
    cfg: &OracleConfig,
    workload: &[(u64, Op, Option<BlockPayload>)],
) -> Result<OracleVerdict, OramError> {
    assert!(
        cfg.params.n_blocks <= (1 << 12),
        "oracle configs are capped at N = 2^12 so full states stay comparable"
    );
    let params = cfg.params;
    let mut store = PhysicalStore::with_trace_mode(params.block_bits, TraceMode::CountersOnly);
    let mut bounded = SuccinctOram::setup(&mut store, params, TableMode::InMemory, cfg.seed)?;
    let payloads: Vec<BlockPayload> = (0..params.n_blocks)
        .map(|a| BlockPayload::from_u64(params.block_bits, a))
        .collect();
    bounded.init(&mut store, &payloads)?;
    if bounded.init_overflowed() {
        return Err(OramError::Integrity(
            "oracle requires overflow-free initialization; choose a larger M".into(),
        ));
    }

    let inf_seed = if cfg.desync { cfg.seed ^ 0x5eed } else { cfg.seed };
    let mut inf = InfiniteOram::new(params, inf_seed);
    inf.init(&payloads);

    for (addr, op, val) in workload {
        bounded.access(&mut store, *addr, *op, val.as_ref())?;
        inf.access(*addr, *op, val.as_ref());
    }

    let snapshot = TreeSnapshot::capture(&bounded, &store, true);
    Ok(compare_post_processed(&inf, &snapshot))
}

/// Applies the post-processor to the unbounded state and compares it with
/// the bounded snapshot, bucket by bucket plus stash, including payloads.
pub fn compare_post_processed(inf: &InfiniteOram, s_z: &TreeSnapshot) -> OracleVerdict {
    let params = *inf.params();
    let node_total = params.bucket_count();

    // Heap location of each address in the bounded state: heap index of its
    // bucket, 0 for the stash.
    let loc = crate::snapshot::location_map(s_z);
    let heap_of = |addr: u64| -> u64 {
        let (bucket, _) = loc[addr as usize];
        if bucket == u64::MAX {
            0
        } else {
            bucket + 1
        }
    };

    // b[i] for heap i in [0, 2^(L+1)); b[0] is the stash.
    let mut b: Vec<Vec<(u64, u64)>> = Vec::with_capacity(node_total as usize + 1);
    b.push(Vec::new());
    for bucket in 0..node_total {
        b.push(inf.buckets()[bucket as usize].clone());
    }

    let mut errors = Vec::new();
    for i in (1..=node_total).rev() {
        let entries = std::mem::take(&mut b[i as usize]);
        let mut kept = Vec::new();
        let mut moved = 0u64;
        for (addr, pos) in entries {
            let zi = heap_of(addr);
            if zi == i {
                kept.push((addr, pos));
            } else if is_proper_ancestor(zi, i) {
                b[(i >> 1) as usize].push((addr, pos));
                moved += 1;
            } else {
                errors.push(format!(
                    "block {addr}: bounded holds it at heap {zi}, not an ancestor of {i}"
                ));
                kept.push((addr, pos));
            }
        }
        let depth = i.ilog2();
        let cap = params.cap_at_depth(depth) as u64;
        if moved > 0 && (kept.len() as u64) < cap {
            errors.push(format!(
                "bucket heap {i} left with {} < capacity {cap} blocks after moving {moved} up",
                kept.len()
            ));
        }
        b[i as usize] = kept;
    }

    // Compare bucket multisets, stash and payloads.
    let mut diff = None;
    'outer: {
        for bucket in 0..node_total {
            let mut ours: Vec<(u64, u64)> = b[(bucket + 1) as usize].clone();
            ours.sort_unstable();
            let mut theirs: Vec<(u64, u64)> = s_z.buckets[bucket as usize]
                .iter()
                .filter_map(|s| match s.meta {
                    crate::meta::BlockMeta::Real { addr, pos } => Some((addr, pos)),
                    crate::meta::BlockMeta::Dummy => None,
                })
                .collect();
            theirs.sort_unstable();
            if ours != theirs {
                diff = Some(format!(
                    "bucket {bucket} (depth {}): post-processed {ours:?} vs bounded {theirs:?}",
                    tree::depth_of(bucket)
                ));
                break 'outer;
            }
        }
        let mut ours: Vec<(u64, u64)> = b[0].iter().map(|&(a, p)| (p, a)).collect();
        ours.sort_unstable();
        let mut theirs: Vec<(u64, u64)> = s_z.stash.iter().map(|e| (e.pos, e.addr)).collect();
        theirs.sort_unstable();
        if ours != theirs {
            diff = Some(format!("stash: post-processed {ours:?} vs bounded {theirs:?}"));
            break 'outer;
        }
        for (bucket, slots) in s_z.buckets.iter().enumerate() {
            for s in slots {
                if let crate::meta::BlockMeta::Real { addr, .. } = s.meta {
                    if s.payload.as_deref() != Some(inf.payload_of(addr)) {
                        diff = Some(format!("block {addr} payload mismatch in bucket {bucket}"));
                        break 'outer;
                    }
                }
            }
        }
        for e in &s_z.stash {
            if e.payload.as_slice() != inf.payload_of(e.addr) {
                diff = Some(format!("stash block {} payload mismatch", e.addr));
                break 'outer;
            }
        }
        debug_assert_eq!(inf.eviction_counter(), s_z.eviction_counter);
    }

    OracleVerdict {
        equal: diff.is_none(),
        post_errors: errors,
        diff,
    }
}

// Is heap index `anc` a proper ancestor of heap index `i`? The stash (0)
// counts as an ancestor of everything.
fn is_proper_ancestor(anc: u64, i: u64) -> bool {
    if anc == 0 {
        return true;
    }
    let da = anc.ilog2();
    let di = i.ilog2();
    da < di && (i >> (di - da)) == anc
}
