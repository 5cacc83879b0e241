//! Statistical security tester.
//!
//! Runs two workloads of equal length across many seeds and checks what the
//! security argument predicts about the observable access pattern: per-access
//! trace lengths are workload-independent, eviction-leaf sequences are the
//! fixed bit-reversal schedule, read-path leaves are uniform, and the two
//! workloads' leaf histograms are indistinguishable.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::OramError;
use crate::params::TreeParams;
use crate::payload::BlockPayload;
use crate::store::{PhysicalStore, TraceMode};
use crate::succinct::{Op, SuccinctOram};
use crate::tables::TableMode;

use super::stats::{chi_square_two_sample, chi_square_uniform, ChiSquareOutcome};

#[derive(Debug, Clone)]
pub struct SecurityConfig {
    pub params: TreeParams,
    pub table_mode: TableMode,
    pub samples: u64,
    pub base_seed: u64,
    /// Per-test significance level before Bonferroni correction.
    pub alpha: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SecurityReport {
    pub samples: u64,
    pub workload_len: usize,
    pub alpha: f64,
    /// Number of simultaneous p-value tests the Bonferroni correction
    /// divides alpha by.
    pub bonferroni_k: u32,
    /// Raw uniformity p-values of read-path leaves, one per workload.
    pub read_leaf_uniformity: Vec<ChiSquareOutcome>,
    /// Raw two-sample homogeneity p-value between the workloads' read-leaf
    /// histograms.
    pub two_sample: ChiSquareOutcome,
    pub trace_lengths_equal: bool,
    pub eviction_sequences_equal: bool,
    pub pass: bool,
}

struct RunObservation {
    read_hist: Vec<u64>,
    evict_seq: Vec<u64>,
    trace_len: u64,
}

fn run_one(
    params: TreeParams,
    table_mode: TableMode,
    seed: u64,
    addrs: &[u64],
) -> Result<RunObservation, OramError> {
    let mut store = PhysicalStore::with_trace_mode(params.block_bits, TraceMode::CountersOnly);
    let mut oram = SuccinctOram::setup(&mut store, params, table_mode, seed)?;
    let payloads: Vec<BlockPayload> = (0..params.n_blocks)
        .map(|a| BlockPayload::from_u64(params.block_bits, a))
        .collect();
    oram.init(&mut store, &payloads)?;
    store.reset_accounting();
    oram.enable_logging();
    for &a in addrs {
        oram.access(&mut store, a, Op::Read, None)?;
    }
    let log = oram.take_log();
    let mut read_hist = vec![0u64; params.leaves() as usize];
    for leaf in &log.read_leaves {
        read_hist[*leaf as usize] += 1;
    }
    Ok(RunObservation {
        read_hist,
        evict_seq: log.evict_leaves,
        trace_len: store.counters().total(),
    })
}

/// Runs both workloads over `samples` seeds and aggregates the checks.
/// Workloads must have equal length.
pub fn security_test(
    cfg: &SecurityConfig,
    workload_a: &[u64],
    workload_b: &[u64],
) -> Result<SecurityReport, OramError> {
    assert_eq!(
        workload_a.len(),
        workload_b.len(),
        "security comparison needs equal-length workloads"
    );
    let params = cfg.params;
    let leaves = params.leaves() as usize;

    let observe = |addrs: &[u64]| -> Result<(Vec<u64>, Vec<Vec<u64>>, Vec<u64>), OramError> {
        let runs: Result<Vec<RunObservation>, OramError> = (0..cfg.samples)
            .into_par_iter()
            .map(|i| run_one(params, cfg.table_mode, cfg.base_seed + i, addrs))
            .collect();
        let runs = runs?;
        let mut hist = vec![0u64; leaves];
        let mut evicts = Vec::with_capacity(runs.len());
        let mut lens = Vec::with_capacity(runs.len());
        for r in runs {
            for (h, c) in hist.iter_mut().zip(&r.read_hist) {
                *h += c;
            }
            evicts.push(r.evict_seq);
            lens.push(r.trace_len);
        }
        Ok((hist, evicts, lens))
    };

    let (hist_a, evicts_a, lens_a) = observe(workload_a)?;
    let (hist_b, evicts_b, lens_b) = observe(workload_b)?;

    let trace_lengths_equal = lens_a
        .iter()
        .chain(&lens_b)
        .all(|&l| l == lens_a[0]);
    // The eviction schedule depends only on G, so every run of equal length
    // must produce the identical sequence.
    let eviction_sequences_equal = evicts_a
        .iter()
        .chain(&evicts_b)
        .all(|seq| seq == &evicts_a[0]);

    let uniformity = vec![chi_square_uniform(&hist_a), chi_square_uniform(&hist_b)];
    let two_sample = chi_square_two_sample(&hist_a, &hist_b);

    let bonferroni_k = 3;
    let threshold = cfg.alpha / bonferroni_k as f64;
    let pass = trace_lengths_equal
        && eviction_sequences_equal
        && uniformity.iter().all(|o| o.p_value > threshold)
        && two_sample.p_value > threshold;

    Ok(SecurityReport {
        samples: cfg.samples,
        workload_len: workload_a.len(),
        alpha: cfg.alpha,
        bonferroni_k,
        read_leaf_uniformity: uniformity,
        two_sample,
        trace_lengths_equal,
        eviction_sequences_equal,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::derive_params_t1;

    #[test]
    fn identical_workloads_pass() {
        let params = derive_params_t1(1 << 10, 64, 16, 2.0).unwrap().params;
        let cfg = SecurityConfig {
            params,
            table_mode: TableMode::InMemory,
            samples: 8,
            base_seed: 100,
            alpha: 0.01,
        };
        let w: Vec<u64> = (0..200u64).map(|i| i % (1 << 10)).collect();
        let report = security_test(&cfg, &w, &w).unwrap();
        assert!(report.pass, "{report:?}");
    }
}
