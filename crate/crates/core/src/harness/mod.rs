//! Experiment orchestration: workload generators, the comparison-table
//! reproduction, seeded repetition running and result records.

pub mod config;
pub mod experiment;
pub mod table2;
pub mod workload;

pub use experiment::{run_experiment, run_single, ExperimentConfig, ExperimentResult, Instance};
pub use table2::{check_table2, rescale_analog, table2_rows, AnalogRow, Table2Check};
pub use workload::{load_trace_file, Workload, WorkloadKind};
