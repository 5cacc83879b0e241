//! Tree-based oblivious-RAM simulators over a simulated block server.
//!
//! The crate provides three constructions sharing one bucket-tree toolkit:
//!
//! * [`path_oram::PathOram`] — the classic uniform-bucket tree ORAM with a
//!   recursive position map, used standalone as a baseline and as the backing
//!   store for outsourced tables;
//! * [`succinct::SuccinctOram`] with [`params::Construction::SuccinctOne`] —
//!   tall leaf buckets sized so the whole tree is `n + o(n)` bits;
//! * [`succinct::SuccinctOram`] with [`params::Construction::SuccinctTwo`] —
//!   the two-choice variant that assigns each block the less loaded of two
//!   candidate leaves, tracked by a counter table.
//!
//! Everything runs against [`store::PhysicalStore`], a flat block array that
//! records physical access traces, counts transfers per region class and
//! accounts server space, so correctness, obliviousness, stash-size and
//! bandwidth claims can be tested at desk scale. The [`analysis`] module holds
//! the experiment machinery: balls-into-bins simulators, the unbounded-bucket
//! oracle with its greedy post-processor, and the statistical security tester.

pub mod analysis;
pub mod crypto;
pub mod error;
pub mod harness;
pub mod meta;
pub mod params;
pub mod path_oram;
pub mod payload;
pub mod snapshot;
pub mod space;
pub mod stash;
pub mod store;
pub mod succinct;
pub mod tables;
pub mod tree_io;

pub use error::{OramError, ParamError, StoreError};
pub use params::{bit_reversal, Construction, TreeParams};
pub use payload::BlockPayload;
pub use store::PhysicalStore;
