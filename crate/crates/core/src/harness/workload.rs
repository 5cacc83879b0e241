//! Workload generators.

use std::io::BufRead;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

/// The logical address streams the harness can drive. A scan issues
/// addresses `0..N-1` in order (wrapping when longer than `N`), the standard
/// stash-maximizing workload; the single-address hammer is its opposite
/// extreme.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum WorkloadKind {
    Scan,
    UniformRandom,
    SingleAddress(u64),
    Trace(Vec<u64>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Workload {
    pub kind: WorkloadKind,
    pub len: u64,
    pub seed: u64,
}

impl Workload {
    pub fn scan(len: u64) -> Self {
        Workload {
            kind: WorkloadKind::Scan,
            len,
            seed: 0,
        }
    }

    pub fn uniform(len: u64, seed: u64) -> Self {
        Workload {
            kind: WorkloadKind::UniformRandom,
            len,
            seed,
        }
    }

    pub fn single(addr: u64, len: u64) -> Self {
        Workload {
            kind: WorkloadKind::SingleAddress(addr),
            len,
            seed: 0,
        }
    }

    /// Materializes the address stream for a database of `n_blocks`.
    pub fn addresses(&self, n_blocks: u64) -> Vec<u64> {
        match &self.kind {
            WorkloadKind::Scan => (0..self.len).map(|i| i % n_blocks).collect(),
            WorkloadKind::UniformRandom => {
                let mut rng = ChaCha12Rng::seed_from_u64(self.seed);
                rng.set_stream(7);
                (0..self.len).map(|_| rng.gen_range(0..n_blocks)).collect()
            }
            WorkloadKind::SingleAddress(a) => vec![*a % n_blocks; self.len as usize],
            WorkloadKind::Trace(addrs) => addrs
                .iter()
                .cycle()
                .take(self.len as usize)
                .map(|a| a % n_blocks)
                .collect(),
        }
    }
}

/// Parses a trace file: one address per line, `#` comments and blank lines
/// ignored.
pub fn load_trace_file(path: &Path) -> std::io::Result<Vec<u64>> {
    let file = std::fs::File::open(path)?;
    let mut addrs = Vec::new();
    for line in std::io::BufReader::new(file).lines() {
        let line = line?;
        let line = line.split('#').next().unwrap_or("").trim().to_string();
        if line.is_empty() {
            continue;
        }
        let addr = line.parse::<u64>().map_err(|e| {
            std::io::Error::new(
                std::io::ErrorKind::InvalidData,
                format!("bad address {line:?}: {e}"),
            )
        })?;
        addrs.push(addr);
    }
    Ok(addrs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scan_wraps_in_order() {
        let w = Workload::scan(10);
        assert_eq!(w.addresses(4), vec![0, 1, 2, 3, 0, 1, 2, 3, 0, 1]);
    }

    #[test]
    fn uniform_is_seeded() {
        let a = Workload::uniform(100, 3).addresses(1 << 10);
        let b = Workload::uniform(100, 3).addresses(1 << 10);
        assert_eq!(a, b);
        assert!(a.iter().all(|&x| x < (1 << 10)));
    }
}
