//! Error types shared across the crate.

use thiserror::Error;

/// Rejected parameter derivations and invalid tree shapes.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("block count must be at least {min}, got {got}")]
    TooFewBlocks { got: u64, min: u64 },

    #[error("shrink factor f = {f} must satisfy N/f >= {min} (N = {n_blocks})")]
    BadShrinkFactor { n_blocks: u64, f: u64, min: u64 },

    #[error("{name} must be finite and non-negative, got {value}")]
    BadSlack { name: &'static str, value: f64 },

    #[error("degenerate tree: height {height} gives 2^{height} leaves for {n_blocks} blocks")]
    DegenerateTree { height: u32, n_blocks: u64 },

    #[error(
        "block size {block_bits} bits is below 3*ceil(lg n) = {min_bits} for an n = {n_bits} bit database"
    )]
    BlockTooSmall {
        block_bits: u32,
        min_bits: u32,
        n_bits: u64,
    },

    #[error("bucket capacities must be positive (Z = {z}, M = {m})")]
    ZeroCapacity { z: u32, m: u32 },

    #[error("uniform-bucket construction requires M = Z, got M = {m}, Z = {z}")]
    NonUniformBuckets { m: u32, z: u32 },

    #[error("tree holds {tree_blocks} blocks total, fewer than the {n_blocks} stored blocks")]
    TreeTooSmall { tree_blocks: u64, n_blocks: u64 },

    #[error(
        "metadata word of {word_bits} bits (1 + {addr_width} + {label_width}) exceeds 64 bits"
    )]
    MetaWordTooWide {
        word_bits: u32,
        addr_width: u32,
        label_width: u32,
    },
}

/// Errors from the simulated block server.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StoreError {
    #[error("physical address {addr} out of range (capacity {capacity} blocks)")]
    OutOfRange { addr: u64, capacity: u64 },

    #[error("region-relative index {index} out of range (region length {len} blocks)")]
    RegionIndexOutOfRange { index: u64, len: u64 },

    #[error("payload of {got} bytes does not match the {want}-byte block size")]
    PayloadSize { got: usize, want: usize },
}

/// Errors from ORAM instances.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum OramError {
    #[error(transparent)]
    Params(#[from] ParamError),

    #[error(transparent)]
    Store(#[from] StoreError),

    #[error("logical address {addr} out of range (N = {n_blocks})")]
    AddressOutOfRange { addr: u64, n_blocks: u64 },

    #[error("payload of {got} bytes does not match the {want}-byte block size")]
    PayloadSize { got: usize, want: usize },

    #[error("initial payload count {got} does not match N = {want}")]
    InitLength { got: usize, want: usize },

    /// A state invariant failed; the instance is unusable afterwards.
    #[error("integrity violation: {0}")]
    Integrity(String),
}
