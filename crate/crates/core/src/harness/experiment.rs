//! Seeded experiment execution: workloads against any of the three
//! constructions, with stash trajectories, bandwidth accounting and space
//! reports per repetition.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::OramError;
use crate::params::{Construction, TreeParams};
use crate::path_oram::{MapMode, PathOram, PathOramConfig};
use crate::payload::BlockPayload;
use crate::space::{closed_form_report, SpaceMode, SpaceReport};
use crate::store::{PhysicalStore, TraceMode};
use crate::succinct::{Op, SuccinctOram};
use crate::tables::TableMode;

use super::workload::Workload;

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub params: TreeParams,
    pub table_mode: TableMode,
    pub workload: Workload,
    /// Repetitions; repetition `i` seeds its instance with `base_seed + i`.
    pub reps: u32,
    pub base_seed: u64,
    /// Stash is sampled every `epoch_len` accesses (and at the end);
    /// defaults to one scan length `N`.
    pub epoch_len: Option<u64>,
    /// Echoed into results; aggressive parameter sets carry no stash-size
    /// guarantee and are labeled as such.
    pub label: String,
    pub aggressive: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub rep: u32,
    pub seed: u64,
    pub label: String,
    /// `"no security guarantee"` marker for aggressive parameter sets.
    pub security_note: Option<String>,
    pub params: TreeParams,
    pub accesses: u64,
    /// Data-block transfers per access against the top tree; constant per
    /// configuration, asserted during the run.
    pub bandwidth_data_blocks: u64,
    /// All physical transfers per access (metadata and tables included).
    pub bandwidth_total_blocks: u64,
    pub per_epoch_stash: Vec<u64>,
    pub max_stash: u64,
    pub final_stash: u64,
    pub space: SpaceReport,
    pub wall_ms: u64,
}

/// One driveable instance of any construction.
pub enum Instance {
    Path(PathOram),
    Succinct(SuccinctOram),
}

impl Instance {
    pub fn build(
        store: &mut PhysicalStore,
        params: TreeParams,
        table_mode: TableMode,
        seed: u64,
    ) -> Result<Instance, OramError> {
        match params.construction {
            Construction::PathOram => {
                let cfg = PathOramConfig {
                    n_blocks: params.n_blocks,
                    block_bits: params.block_bits,
                    z: params.bucket_cap,
                    height: Some(params.height),
                    map_mode: match table_mode {
                        TableMode::InMemory => MapMode::InMemory,
                        TableMode::Outsourced => MapMode::Recursive,
                    },
                    seed,
                };
                Ok(Instance::Path(PathOram::setup(store, &cfg, true)?))
            }
            _ => Ok(Instance::Succinct(SuccinctOram::setup(
                store, params, table_mode, seed,
            )?)),
        }
    }

    pub fn init(
        &mut self,
        store: &mut PhysicalStore,
        payloads: &[BlockPayload],
    ) -> Result<(), OramError> {
        match self {
            Instance::Path(o) => o.init(store, payloads),
            Instance::Succinct(o) => o.init(store, payloads),
        }
    }

    pub fn access(
        &mut self,
        store: &mut PhysicalStore,
        addr: u64,
        op: Op,
        val: Option<&BlockPayload>,
    ) -> Result<BlockPayload, OramError> {
        match self {
            Instance::Path(o) => o.access(store, addr, op, val),
            Instance::Succinct(o) => o.access(store, addr, op, val),
        }
    }

    pub fn stash_size(&self) -> usize {
        match self {
            Instance::Path(o) => o.stash_size(),
            Instance::Succinct(o) => o.stash_size(),
        }
    }
}

/// Runs one repetition; the store starts counting after initialization.
pub fn run_single(cfg: &ExperimentConfig, rep: u32) -> Result<ExperimentResult, OramError> {
    let seed = cfg.base_seed + rep as u64;
    let params = cfg.params;
    let start = Instant::now();
    let mut store = PhysicalStore::with_trace_mode(params.block_bits, TraceMode::CountersOnly);
    let mut inst = Instance::build(&mut store, params, cfg.table_mode, seed)?;
    let payloads: Vec<BlockPayload> = (0..params.n_blocks)
        .map(|a| BlockPayload::from_u64(params.block_bits, a))
        .collect();
    inst.init(&mut store, &payloads)?;
    store.reset_accounting();

    let addrs = cfg.workload.addresses(params.n_blocks);
    let epoch_len = cfg.epoch_len.unwrap_or(params.n_blocks).max(1);
    let mut per_epoch_stash = Vec::new();
    let mut max_stash = 0u64;
    let mut data_per_access = None;
    let mut prev_data = 0u64;

    for (i, &a) in addrs.iter().enumerate() {
        inst.access(&mut store, a, Op::Read, None)?;
        let data_now = store.counters().top_data();
        let delta = data_now - prev_data;
        prev_data = data_now;
        match data_per_access {
            None => data_per_access = Some(delta),
            Some(d) => {
                if d != delta {
                    return Err(OramError::Integrity(format!(
                        "data-block transfers vary across accesses: {d} then {delta}"
                    )));
                }
            }
        }
        let stash = inst.stash_size() as u64;
        max_stash = max_stash.max(stash);
        if (i as u64 + 1) % epoch_len == 0 {
            per_epoch_stash.push(stash);
        }
    }
    if addrs.len() as u64 % epoch_len != 0 {
        per_epoch_stash.push(inst.stash_size() as u64);
    }

    let accesses = addrs.len() as u64;
    let counters = store.counters();
    Ok(ExperimentResult {
        rep,
        seed,
        label: cfg.label.clone(),
        security_note: cfg
            .aggressive
            .then(|| "no security guarantee".to_string()),
        params,
        accesses,
        bandwidth_data_blocks: data_per_access.unwrap_or(0),
        bandwidth_total_blocks: counters.total().checked_div(accesses).unwrap_or(0),
        per_epoch_stash,
        max_stash,
        final_stash: inst.stash_size() as u64,
        space: closed_form_report(&params, SpaceMode::Table2),
        wall_ms: start.elapsed().as_millis() as u64,
    })
}

/// Runs all repetitions, fanning out across threads; results are ordered by
/// repetition index.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ExperimentResult>, OramError> {
    (0..cfg.reps)
        .into_par_iter()
        .map(|rep| run_single(cfg, rep))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::derive_params_t1;

    #[test]
    fn reproducible_and_constant_bandwidth() {
        let params = derive_params_t1(1 << 10, 64, 16, 2.0).unwrap().params;
        let cfg = ExperimentConfig {
            params,
            table_mode: TableMode::InMemory,
            workload: Workload::scan(2048),
            reps: 2,
            base_seed: 9,
            epoch_len: Some(1024),
            label: "test".into(),
            aggressive: false,
        };
        let results = run_experiment(&cfg).unwrap();
        assert_eq!(results.len(), 2);
        // 3 * (Z*L + M) with Z=3, L=6, M from the derivation.
        let expected = params.bandwidth_blocks();
        assert!(results.iter().all(|r| r.bandwidth_data_blocks == expected));
        assert_eq!(results[0].per_epoch_stash.len(), 2);

        let again = run_experiment(&cfg).unwrap();
        assert_eq!(results[0].max_stash, again[0].max_stash);
        assert_eq!(results[0].per_epoch_stash, again[0].per_epoch_stash);
    }
}
