//! Position and counter tables, either user-held or outsourced.
//!
//! Outsourced tables pack `floor(B / entry_bits)` entries per block and
//! store the packed blocks in a sub-ORAM; every table operation then costs
//! whole sub-ORAM accesses. A read is an access like any other (the
//! sub-ORAM does not distinguish them physically).

use crate::error::OramError;
use crate::meta::{read_bits, write_bits};
use crate::path_oram::{child_seed, MapMode, PathOram, PathOramConfig, Update};
use crate::payload::BlockPayload;
use crate::store::PhysicalStore;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableMode {
    InMemory,
    Outsourced,
}

#[derive(Debug)]
enum Backend {
    Mem(Vec<u64>),
    Oram { sub: PathOram, fanout: u64 },
}

/// A flat array of fixed-width entries.
#[derive(Debug)]
pub struct Table {
    entries: u64,
    entry_bits: u32,
    backend: Backend,
    accesses: u64,
}

impl Table {
    /// Builds the table. Outsourced tables that fit in a single packed block
    /// degrade to user memory, mirroring the recursion cutoff.
    pub fn new(
        store: &mut PhysicalStore,
        entries: u64,
        entry_bits: u32,
        mode: TableMode,
        sub_z: u32,
        seed: u64,
    ) -> Result<Self, OramError> {
        let backend = match mode {
            TableMode::InMemory => Backend::Mem(vec![0; entries as usize]),
            TableMode::Outsourced => {
                let fanout = (store.block_bits() / entry_bits).max(1) as u64;
                let blocks = entries.div_ceil(fanout);
                if blocks <= 1 {
                    Backend::Mem(vec![0; entries as usize])
                } else {
                    let cfg = PathOramConfig {
                        n_blocks: blocks,
                        block_bits: store.block_bits(),
                        z: sub_z,
                        height: None,
                        map_mode: MapMode::Recursive,
                        seed: child_seed(seed),
                    };
                    Backend::Oram {
                        sub: PathOram::setup(store, &cfg, false)?,
                        fanout,
                    }
                }
            }
        };
        Ok(Table {
            entries,
            entry_bits,
            backend,
            accesses: 0,
        })
    }

    pub fn len(&self) -> u64 {
        self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries == 0
    }

    pub fn entry_bits(&self) -> u32 {
        self.entry_bits
    }

    /// Sub-ORAM accesses issued so far (zero for in-memory tables).
    pub fn accesses(&self) -> u64 {
        self.accesses
    }

    pub fn is_outsourced(&self) -> bool {
        matches!(self.backend, Backend::Oram { .. })
    }

    /// Bulk initialization from plain values.
    pub fn init_from(&mut self, store: &mut PhysicalStore, values: &[u64]) -> Result<(), OramError> {
        assert_eq!(values.len() as u64, self.entries);
        match &mut self.backend {
            Backend::Mem(v) => {
                v.copy_from_slice(values);
                Ok(())
            }
            Backend::Oram { sub, fanout } => {
                let bb = sub.params().block_bytes();
                let bits = sub.params().block_bits;
                let mut packed = vec![BlockPayload::zero(bits); sub.params().n_blocks as usize];
                for (i, &val) in values.iter().enumerate() {
                    let b = i as u64 / *fanout;
                    let s = i as u64 % *fanout;
                    write_bits(
                        &mut packed[b as usize].as_bytes_mut()[..bb],
                        s * self.entry_bits as u64,
                        self.entry_bits,
                        val,
                    );
                }
                sub.init(store, &packed)
            }
        }
    }

    /// Read-modify-write of one entry in a single table access; returns the
    /// old value.
    pub fn update(
        &mut self,
        store: &mut PhysicalStore,
        index: u64,
        f: impl FnOnce(u64) -> u64,
    ) -> Result<u64, OramError> {
        debug_assert!(index < self.entries);
        match &mut self.backend {
            Backend::Mem(v) => {
                let old = v[index as usize];
                v[index as usize] = f(old);
                Ok(old)
            }
            Backend::Oram { sub, fanout } => {
                self.accesses += 1;
                let (blk, slot) = (index / *fanout, index % *fanout);
                let eb = self.entry_bits;
                let mut old = 0u64;
                let mut f = Some(f);
                let mut rmw = |bytes: &mut [u8]| {
                    let off = slot * eb as u64;
                    old = read_bits(bytes, off, eb);
                    write_bits(bytes, off, eb, (f.take().unwrap())(old));
                };
                sub.access_update(store, blk, Update::Rmw(&mut rmw))?;
                Ok(old)
            }
        }
    }

    /// Replaces one entry; returns the old value. One table access.
    pub fn replace(&mut self, store: &mut PhysicalStore, index: u64, value: u64) -> Result<u64, OramError> {
        self.update(store, index, |_| value)
    }

    /// Sets one entry. One table access.
    pub fn set(&mut self, store: &mut PhysicalStore, index: u64, value: u64) -> Result<(), OramError> {
        self.replace(store, index, value).map(|_| ())
    }

    /// Reads one entry. One table access.
    pub fn get(&mut self, store: &mut PhysicalStore, index: u64) -> Result<u64, OramError> {
        self.update(store, index, |v| v)
    }

    /// Reads two entries, batching them into a single access when both land
    /// in the same packed block.
    pub fn get_pair(
        &mut self,
        store: &mut PhysicalStore,
        i: u64,
        j: u64,
    ) -> Result<(u64, u64), OramError> {
        match &mut self.backend {
            Backend::Mem(v) => Ok((v[i as usize], v[j as usize])),
            Backend::Oram { sub, fanout } => {
                let (bi, bj) = (i / *fanout, j / *fanout);
                let eb = self.entry_bits;
                if bi == bj {
                    self.accesses += 1;
                    let (si, sj) = (i % *fanout, j % *fanout);
                    let mut out = (0u64, 0u64);
                    let mut rmw = |bytes: &mut [u8]| {
                        out = (
                            read_bits(bytes, si * eb as u64, eb),
                            read_bits(bytes, sj * eb as u64, eb),
                        );
                    };
                    sub.access_update(store, bi, Update::Rmw(&mut rmw))?;
                    Ok(out)
                } else {
                    Ok((self.get(store, i)?, self.get(store, j)?))
                }
            }
        }
    }

    /// The number of accesses a `get_pair` will cost before issuing it.
    pub fn pair_access_cost(&self, i: u64, j: u64) -> u64 {
        match &self.backend {
            Backend::Mem(_) => 0,
            Backend::Oram { fanout, .. } => {
                if i / *fanout == j / *fanout {
                    1
                } else {
                    2
                }
            }
        }
    }

    /// Off-trace read, for audits.
    pub fn peek(&self, store: &PhysicalStore, index: u64) -> u64 {
        match &self.backend {
            Backend::Mem(v) => v[index as usize],
            Backend::Oram { sub, fanout } => {
                let bytes = sub
                    .peek_logical(store, index / *fanout)
                    .expect("table block present");
                read_bits(&bytes, (index % *fanout) * self.entry_bits as u64, self.entry_bits)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::TraceMode;

    fn mk(mode: TableMode, entries: u64, entry_bits: u32) -> (PhysicalStore, Table) {
        let mut store = PhysicalStore::with_trace_mode(256, TraceMode::CountersOnly);
        let t = Table::new(&mut store, entries, entry_bits, mode, 5, 11).unwrap();
        (store, t)
    }

    #[test]
    fn roundtrip_through_suboram() {
        let (mut store, mut t) = mk(TableMode::Outsourced, 4096, 12);
        assert!(t.is_outsourced());
        let values: Vec<u64> = (0..4096).map(|i| (i * 7) % 4096).collect();
        t.init_from(&mut store, &values).unwrap();
        for i in [0u64, 1, 17, 4095] {
            assert_eq!(t.get(&mut store, i).unwrap(), (i * 7) % 4096);
        }
        assert_eq!(t.replace(&mut store, 17, 99).unwrap(), 17 * 7);
        assert_eq!(t.get(&mut store, 17).unwrap(), 99);
    }

    #[test]
    fn pair_batches_within_one_block() {
        let (mut store, mut t) = mk(TableMode::Outsourced, 4096, 12);
        t.init_from(&mut store, &(0..4096).collect::<Vec<_>>()).unwrap();
        // fanout = 256/12 = 21 entries per block
        let before = t.accesses();
        assert_eq!(t.get_pair(&mut store, 3, 10).unwrap(), (3, 10));
        assert_eq!(t.accesses() - before, 1);
        let before = t.accesses();
        assert_eq!(t.get_pair(&mut store, 3, 100).unwrap(), (3, 100));
        assert_eq!(t.accesses() - before, 2);
    }

    #[test]
    fn memory_mode_counts_nothing() {
        let (mut store, mut t) = mk(TableMode::InMemory, 64, 10);
        t.init_from(&mut store, &vec![5; 64]).unwrap();
        t.get(&mut store, 3).unwrap();
        assert_eq!(t.accesses(), 0);
        assert_eq!(store.counters().total(), 0);
    }
}
