//! Executable analysis machinery: balls-into-bins simulators, the
//! unbounded-bucket oracle with its greedy post-processor, and the
//! statistical security tester.

pub mod bins;
pub mod infinite;
pub mod security;
pub mod stats;

pub use bins::{run_bins, BinsExperiment};
pub use infinite::{max_subtree_excess, run_oracle_pair, subtree_usage, InfiniteOram, OracleConfig, OracleVerdict};
pub use security::{security_test, SecurityConfig, SecurityReport};
pub use stats::{chi_square_two_sample, chi_square_uniform, ChiSquareOutcome};
