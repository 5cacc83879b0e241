//! Simulated block server: a flat physical block array with trace recording,
//! per-class transfer counters and an optional encryption layer.
//!
//! Every read of an address returns the payload of the most recent write to
//! it, and every operation is recorded (full trace or counters only), so
//! trace length always equals `reads + writes`. Regions carve the flat array
//! into data tree / metadata tree / outsourced-table areas purely for
//! accounting; physical addresses are global.

use std::io::Write as IoWrite;

use serde::{Deserialize, Serialize};

use crate::crypto::CellCipher;
use crate::error::StoreError;

/// Direction of one physical request.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Dir {
    Read,
    Write,
}

/// One physical access, the unit of the adversary's view.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub dir: Dir,
    pub addr: u64,
}

/// What a region stores, for bandwidth accounting. `Top*` is the tree under
/// test; `Sub*` is sub-ORAM (outsourced table) storage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegionClass {
    TopData,
    TopMeta,
    SubData,
    SubMeta,
}

impl RegionClass {
    pub const ALL: [RegionClass; 4] = [
        RegionClass::TopData,
        RegionClass::TopMeta,
        RegionClass::SubData,
        RegionClass::SubMeta,
    ];

    fn idx(self) -> usize {
        match self {
            RegionClass::TopData => 0,
            RegionClass::TopMeta => 1,
            RegionClass::SubData => 2,
            RegionClass::SubMeta => 3,
        }
    }
}

/// A contiguous range of physical blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Region {
    pub start: u64,
    pub len: u64,
    pub class: RegionClass,
}

/// Whether to keep the full ordered trace or only counters. Epoch marks are
/// kept either way.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TraceMode {
    Full,
    #[default]
    CountersOnly,
}

/// Transfer counters, split by direction and region class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    pub reads: u64,
    pub writes: u64,
    pub reads_by_class: [u64; 4],
    pub writes_by_class: [u64; 4],
}

impl Counters {
    pub fn total(&self) -> u64 {
        self.reads + self.writes
    }

    /// Data-block transfers against the top-level tree, the Table-2
    /// bandwidth figure.
    pub fn top_data(&self) -> u64 {
        self.reads_by_class[0] + self.writes_by_class[0]
    }

    pub fn class_total(&self, class: RegionClass) -> u64 {
        self.reads_by_class[class.idx()] + self.writes_by_class[class.idx()]
    }
}

/// The simulated server.
#[derive(Debug)]
pub struct PhysicalStore {
    block_bits: u32,
    block_bytes: usize,
    cells: Vec<u8>,
    regions: Vec<Region>,
    trace_mode: TraceMode,
    trace: Vec<TraceEntry>,
    /// Counter values (`reads + writes`) at each logical-access boundary.
    epoch_marks: Vec<u64>,
    counters: Counters,
    cipher: Option<CellCipher>,
}

impl PhysicalStore {
    pub fn new(block_bits: u32) -> Self {
        PhysicalStore {
            block_bits,
            block_bytes: (block_bits as usize).div_ceil(8),
            cells: Vec::new(),
            regions: Vec::new(),
            trace_mode: TraceMode::default(),
            trace: Vec::new(),
            epoch_marks: Vec::new(),
            counters: Counters::default(),
            cipher: None,
        }
    }

    pub fn with_trace_mode(block_bits: u32, mode: TraceMode) -> Self {
        let mut s = Self::new(block_bits);
        s.trace_mode = mode;
        s
    }

    /// Installs a keyed stream cipher; blocks are sealed on write and opened
    /// on read from then on. Off by default: the traces, not the payload
    /// bytes, are the adversary view under test.
    pub fn set_cipher(&mut self, cipher: CellCipher) {
        self.cipher = Some(cipher);
    }

    pub fn block_bits(&self) -> u32 {
        self.block_bits
    }

    pub fn block_bytes(&self) -> usize {
        self.block_bytes
    }

    pub fn capacity_blocks(&self) -> u64 {
        (self.cells.len() / self.block_bytes) as u64
    }

    pub fn allocated_bits(&self) -> u64 {
        self.capacity_blocks() * self.block_bits as u64
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn allocated_bits_by_class(&self, class: RegionClass) -> u64 {
        self.regions
            .iter()
            .filter(|r| r.class == class)
            .map(|r| r.len * self.block_bits as u64)
            .sum()
    }

    /// Appends `blocks` zeroed cells and returns the region handle.
    pub fn alloc_region(&mut self, class: RegionClass, blocks: u64) -> Region {
        let start = self.capacity_blocks();
        self.cells
            .resize(self.cells.len() + blocks as usize * self.block_bytes, 0);
        let region = Region {
            start,
            len: blocks,
            class,
        };
        self.regions.push(region);
        region
    }

    fn class_of(&self, addr: u64) -> RegionClass {
        // Regions are allocated in address order.
        match self
            .regions
            .binary_search_by(|r| {
                if addr < r.start {
                    std::cmp::Ordering::Greater
                } else if addr >= r.start + r.len {
                    std::cmp::Ordering::Less
                } else {
                    std::cmp::Ordering::Equal
                }
            }) {
            Ok(i) => self.regions[i].class,
            Err(_) => RegionClass::TopData,
        }
    }

    fn record(&mut self, dir: Dir, addr: u64) {
        let class = self.class_of(addr).idx();
        match dir {
            Dir::Read => {
                self.counters.reads += 1;
                self.counters.reads_by_class[class] += 1;
            }
            Dir::Write => {
                self.counters.writes += 1;
                self.counters.writes_by_class[class] += 1;
            }
        }
        if matches!(self.trace_mode, TraceMode::Full) {
            self.trace.push(TraceEntry { dir, addr });
        }
    }

    /// Reads the block at a global physical address into `buf`.
    pub fn read_abs(&mut self, addr: u64, buf: &mut [u8]) -> Result<(), StoreError> {
        let cap = self.capacity_blocks();
        if addr >= cap {
            return Err(StoreError::OutOfRange {
                addr,
                capacity: cap,
            });
        }
        if buf.len() != self.block_bytes {
            return Err(StoreError::PayloadSize {
                got: buf.len(),
                want: self.block_bytes,
            });
        }
        self.record(Dir::Read, addr);
        let off = addr as usize * self.block_bytes;
        buf.copy_from_slice(&self.cells[off..off + self.block_bytes]);
        if let Some(cipher) = &self.cipher {
            cipher.open_in_place(addr, buf);
        }
        Ok(())
    }

    /// Writes `buf` as the block at a global physical address.
    pub fn write_abs(&mut self, addr: u64, buf: &[u8]) -> Result<(), StoreError> {
        let cap = self.capacity_blocks();
        if addr >= cap {
            return Err(StoreError::OutOfRange {
                addr,
                capacity: cap,
            });
        }
        if buf.len() != self.block_bytes {
            return Err(StoreError::PayloadSize {
                got: buf.len(),
                want: self.block_bytes,
            });
        }
        self.record(Dir::Write, addr);
        let off = addr as usize * self.block_bytes;
        let cells = &mut self.cells[off..off + self.block_bytes];
        cells.copy_from_slice(buf);
        if let Some(cipher) = &mut self.cipher {
            cipher.seal_in_place(addr, cells);
        }
        Ok(())
    }

    pub fn read(&mut self, region: &Region, index: u64, buf: &mut [u8]) -> Result<(), StoreError> {
        if index >= region.len {
            return Err(StoreError::RegionIndexOutOfRange {
                index,
                len: region.len,
            });
        }
        self.read_abs(region.start + index, buf)
    }

    pub fn write(&mut self, region: &Region, index: u64, buf: &[u8]) -> Result<(), StoreError> {
        if index >= region.len {
            return Err(StoreError::RegionIndexOutOfRange {
                index,
                len: region.len,
            });
        }
        self.write_abs(region.start + index, buf)
    }

    /// Raw bytes of a region, off the record: no trace entry, no counter.
    /// Audits and state snapshots use this so inspection does not perturb
    /// the measured access pattern. Returns stored (possibly sealed) bytes.
    pub fn peek_region(&self, region: &Region) -> &[u8] {
        let a = region.start as usize * self.block_bytes;
        let b = (region.start + region.len) as usize * self.block_bytes;
        &self.cells[a..b]
    }

    /// Marks a logical-access boundary in the trace.
    pub fn mark_epoch(&mut self) {
        self.epoch_marks.push(self.counters.total());
    }

    pub fn counters(&self) -> Counters {
        self.counters
    }

    pub fn trace(&self) -> &[TraceEntry] {
        &self.trace
    }

    pub fn epoch_marks(&self) -> &[u64] {
        &self.epoch_marks
    }

    /// Drops recorded history (counters, trace, epochs). Used after bulk
    /// initialization so experiments measure steady-state accesses only.
    pub fn reset_accounting(&mut self) {
        self.counters = Counters::default();
        self.trace.clear();
        self.epoch_marks.clear();
    }

    /// Writes the trace as CSV rows `epoch,direction,addr`.
    pub fn export_trace_csv<W: IoWrite>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "epoch,direction,addr")?;
        let mut epoch = 0usize;
        for (i, e) in self.trace.iter().enumerate() {
            while epoch < self.epoch_marks.len() && self.epoch_marks[epoch] <= i as u64 {
                epoch += 1;
            }
            let dir = match e.dir {
                Dir::Read => "r",
                Dir::Write => "w",
            };
            writeln!(w, "{epoch},{dir},{}", e.addr)?;
        }
        Ok(())
    }

    /// Writes the trace as JSON lines.
    pub fn export_trace_jsonl<W: IoWrite>(&self, mut w: W) -> std::io::Result<()> {
        let mut epoch = 0usize;
        for (i, e) in self.trace.iter().enumerate() {
            while epoch < self.epoch_marks.len() && self.epoch_marks[epoch] <= i as u64 {
                epoch += 1;
            }
            let dir = match e.dir {
                Dir::Read => "read",
                Dir::Write => "write",
            };
            writeln!(
                w,
                "{{\"epoch\":{epoch},\"direction\":\"{dir}\",\"addr\":{}}}",
                e.addr
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn full_store(bits: u32) -> PhysicalStore {
        PhysicalStore::with_trace_mode(bits, TraceMode::Full)
    }

    #[test]
    fn read_your_writes() {
        let mut s = full_store(64);
        let r = s.alloc_region(RegionClass::TopData, 8);
        s.write(&r, 5, &7u64.to_le_bytes()).unwrap();
        let mut buf = [0u8; 8];
        s.read(&r, 5, &mut buf).unwrap();
        assert_eq!(u64::from_le_bytes(buf), 7);
        // Overwrite wins.
        s.write(&r, 5, &9u64.to_le_bytes()).unwrap();
        s.read(&r, 5, &mut buf).unwrap();
        assert_eq!(u64::from_le_bytes(buf), 9);
    }

    #[test]
    fn fresh_cells_read_zero() {
        let mut s = full_store(64);
        let r = s.alloc_region(RegionClass::TopData, 2);
        let mut buf = [0xffu8; 8];
        s.read(&r, 0, &mut buf).unwrap();
        assert_eq!(buf, [0u8; 8]);
    }

    #[test]
    fn trace_records_everything_in_order() {
        let mut s = full_store(64);
        let r = s.alloc_region(RegionClass::TopData, 4);
        let mut buf = [0u8; 8];
        for i in 0..100 {
            s.read(&r, i % 4, &mut buf).unwrap();
        }
        s.write(&r, 1, &buf).unwrap();
        assert_eq!(s.counters().reads, 100);
        assert_eq!(s.counters().writes, 1);
        assert_eq!(s.trace().len(), 101);
        assert!(s.trace()[..100].iter().all(|e| e.dir == Dir::Read));
        assert_eq!(s.trace()[100].dir, Dir::Write);
        assert_eq!(s.counters().total(), s.trace().len() as u64);
    }

    #[test]
    fn out_of_range_rejected() {
        let mut s = full_store(64);
        let r = s.alloc_region(RegionClass::TopData, 4);
        let mut buf = [0u8; 8];
        assert!(matches!(
            s.read(&r, 4, &mut buf),
            Err(StoreError::RegionIndexOutOfRange { .. })
        ));
        assert!(matches!(
            s.read_abs(100, &mut buf),
            Err(StoreError::OutOfRange { .. })
        ));
    }

    #[test]
    fn counters_split_by_class() {
        let mut s = full_store(64);
        let d = s.alloc_region(RegionClass::TopData, 2);
        let m = s.alloc_region(RegionClass::TopMeta, 2);
        let t = s.alloc_region(RegionClass::SubData, 2);
        let mut buf = [0u8; 8];
        s.read(&d, 0, &mut buf).unwrap();
        s.write(&d, 0, &buf).unwrap();
        s.read(&m, 1, &mut buf).unwrap();
        s.write(&t, 1, &buf).unwrap();
        let c = s.counters();
        assert_eq!(c.top_data(), 2);
        assert_eq!(c.class_total(RegionClass::TopMeta), 1);
        assert_eq!(c.class_total(RegionClass::SubData), 1);
        assert_eq!(c.total(), 4);
    }

    #[test]
    fn epochs_bracket_the_trace() {
        let mut s = full_store(64);
        let r = s.alloc_region(RegionClass::TopData, 2);
        let mut buf = [0u8; 8];
        s.read(&r, 0, &mut buf).unwrap();
        s.mark_epoch();
        s.read(&r, 1, &mut buf).unwrap();
        s.read(&r, 1, &mut buf).unwrap();
        s.mark_epoch();
        assert_eq!(s.epoch_marks(), &[1, 3]);
    }
}
