//! Tree shape parameters, parameter derivation and bit-reversal scheduling.
//!
//! A tree instance is described by [`TreeParams`]: `N` blocks of `B` bits
//! stored in a complete binary tree with `2^L` leaves, internal buckets of `Z`
//! blocks and leaf buckets of `M` blocks. The uniform-bucket baseline has
//! `M = Z`. Buckets are numbered in breadth-first order with the root at
//! index 0, so the depth-`i` bucket on the path to leaf `l` is addressed by
//! the `i` most-significant bits of `l`.

use serde::{Deserialize, Serialize};

use crate::error::ParamError;

/// Which of the three constructions a parameter set belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Construction {
    /// Uniform buckets, eviction on the accessed path.
    PathOram,
    /// Tall leaf buckets, one position label, bit-reversal eviction.
    SuccinctOne,
    /// Tall leaf buckets, two position labels with counter-table argmin.
    SuccinctTwo,
}

impl Construction {
    /// Default internal bucket capacity: 3 and 4 for the succinct trees,
    /// 5 for the uniform baseline in rigorous mode.
    pub fn default_z(self) -> u32 {
        match self {
            Construction::PathOram => 5,
            Construction::SuccinctOne => 3,
            Construction::SuccinctTwo => 4,
        }
    }

    /// Data blocks moved per logical access, as a multiple of the
    /// root-to-leaf block count `Z*L + M`.
    pub fn path_multiplier(self) -> u64 {
        match self {
            // Read the whole path, write it back.
            Construction::PathOram => 2,
            // ReadPath + EvictPath (read + write).
            Construction::SuccinctOne => 3,
            // Two ReadPaths + EvictPath (read + write).
            Construction::SuccinctTwo => 4,
        }
    }
}

/// All derived shape constants for one ORAM instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeParams {
    pub construction: Construction,
    /// Database size in bits, `N * B`.
    pub n_bits: u64,
    /// Block size in bits.
    pub block_bits: u32,
    /// Stored block count `N`.
    pub n_blocks: u64,
    /// Tree height `L`; the tree has `2^L` leaves and `L+1` levels.
    pub height: u32,
    /// Leaf bucket capacity `M` in blocks.
    pub leaf_cap: u32,
    /// Internal bucket capacity `Z` in blocks.
    pub bucket_cap: u32,
    /// `ceil(lg N)` bits for a block address.
    pub addr_width: u32,
    /// `L` bits for a position label.
    pub label_width: u32,
}

/// Non-fatal conditions noticed while deriving or validating parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ParamWarning {
    /// Slack term is zero; the tail bound behind the leaf sizing is void.
    ZeroSlack,
    /// Total leaf capacity `M * 2^L` is below `N`: leaves cannot hold the
    /// mean load and the internal buckets must absorb the excess.
    /// Aggressive table settings do this deliberately.
    LeafBelowMean { leaf_total: u64, n_blocks: u64 },
}

impl std::fmt::Display for ParamWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ParamWarning::ZeroSlack => {
                write!(f, "slack term is zero; leaf overflow bound does not apply")
            }
            ParamWarning::LeafBelowMean {
                leaf_total,
                n_blocks,
            } => write!(
                f,
                "leaf capacity {leaf_total} below N = {n_blocks}; no overflow guarantee (aggressive setting)"
            ),
        }
    }
}

/// A validated parameter set together with any warnings raised on the way.
#[derive(Debug, Clone)]
pub struct Derived {
    pub params: TreeParams,
    pub warnings: Vec<ParamWarning>,
}

/// Smallest `w` with `2^w >= x`; 0 for `x <= 1`.
pub fn ceil_log2(x: u64) -> u32 {
    x.next_power_of_two().trailing_zeros()
}

fn check_slack(name: &'static str, value: f64) -> Result<(), ParamError> {
    if !value.is_finite() || value < 0.0 {
        return Err(ParamError::BadSlack { name, value });
    }
    Ok(())
}

/// Height from the shrink factor: `L = ceil(lg(N / f))`. Heights below
/// `min_height` (a single-leaf tree, or `lg L = 0` for the two-choice
/// shape) are degenerate and rejected.
fn shrink_height(n_blocks: u64, f: u64, min_height: u32) -> Result<u32, ParamError> {
    if f == 0 {
        return Err(ParamError::BadShrinkFactor {
            n_blocks,
            f,
            min: 1,
        });
    }
    let height = ceil_log2(n_blocks.div_ceil(f));
    if height < min_height {
        return Err(ParamError::DegenerateTree { height, n_blocks });
    }
    Ok(height)
}

impl TreeParams {
    /// Builds and validates a parameter set from explicit `Z`, `L`, `M`.
    ///
    /// Manual parameters skip the mean-load requirement on leaves (the
    /// aggressive settings violate it on purpose); a
    /// [`ParamWarning::LeafBelowMean`] is raised instead. The tree as a whole
    /// must still be able to hold all `N` blocks.
    pub fn manual(
        construction: Construction,
        n_blocks: u64,
        block_bits: u32,
        z: u32,
        height: u32,
        m: u32,
    ) -> Result<Derived, ParamError> {
        if n_blocks < 2 {
            return Err(ParamError::TooFewBlocks {
                got: n_blocks,
                min: 2,
            });
        }
        if z == 0 || m == 0 {
            return Err(ParamError::ZeroCapacity { z, m });
        }
        if construction == Construction::PathOram && m != z {
            return Err(ParamError::NonUniformBuckets { m, z });
        }
        if height == 0 || (height as u64) >= 63 || (1u64 << height) > n_blocks {
            return Err(ParamError::DegenerateTree {
                height,
                n_blocks,
            });
        }

        let n_bits = n_blocks
            .checked_mul(block_bits as u64)
            .ok_or(ParamError::TooFewBlocks {
                got: n_blocks,
                min: 2,
            })?;
        let min_bits = 3 * ceil_log2(n_bits);
        if block_bits < min_bits {
            return Err(ParamError::BlockTooSmall {
                block_bits,
                min_bits,
                n_bits,
            });
        }

        let addr_width = ceil_log2(n_blocks);
        let label_width = height;
        let word_bits = 1 + addr_width + label_width;
        if word_bits > 64 {
            return Err(ParamError::MetaWordTooWide {
                word_bits,
                addr_width,
                label_width,
            });
        }

        let params = TreeParams {
            construction,
            n_bits,
            block_bits,
            n_blocks,
            height,
            leaf_cap: m,
            bucket_cap: z,
            addr_width,
            label_width,
        };

        let tree_blocks = params.data_tree_blocks();
        if tree_blocks < n_blocks {
            return Err(ParamError::TreeTooSmall {
                tree_blocks,
                n_blocks,
            });
        }

        let mut warnings = Vec::new();
        let leaf_total = (m as u64) << height;
        if leaf_total < n_blocks {
            warnings.push(ParamWarning::LeafBelowMean {
                leaf_total,
                n_blocks,
            });
        }
        Ok(Derived { params, warnings })
    }

    /// Uniform-bucket baseline parameters: `M = Z` and, unless overridden,
    /// a tree with `2^ceil(lg N)` leaves.
    pub fn path_oram(
        n_blocks: u64,
        block_bits: u32,
        z: u32,
        height: Option<u32>,
    ) -> Result<Derived, ParamError> {
        let height = height.unwrap_or_else(|| ceil_log2(n_blocks));
        // A uniform tree with 2^ceil(lg N) leaves always has 2^L <= padded N,
        // but explicit heights may exceed lg N; allow one extra doubling and
        // reject anything beyond, mirroring the manual() degeneracy check.
        if height == 0 || (height as u64) >= 63 || (1u64 << height) > n_blocks.next_power_of_two()
        {
            return Err(ParamError::DegenerateTree { height, n_blocks });
        }
        let mut derived = Self::manual_unchecked_height(
            Construction::PathOram,
            n_blocks,
            block_bits,
            z,
            height,
            z,
        )?;
        derived
            .warnings
            .retain(|w| !matches!(w, ParamWarning::ZeroSlack));
        Ok(derived)
    }

    // manual() but with the 2^L <= N check relaxed to 2^L <= next_pow2(N),
    // which the padded uniform tree needs when N is not a power of two.
    fn manual_unchecked_height(
        construction: Construction,
        n_blocks: u64,
        block_bits: u32,
        z: u32,
        height: u32,
        m: u32,
    ) -> Result<Derived, ParamError> {
        let padded = n_blocks.next_power_of_two();
        Self::manual(construction, padded, block_bits, z, height, m).map(|mut d| {
            d.params.n_blocks = n_blocks;
            d.params.n_bits = n_blocks * block_bits as u64;
            d.params.addr_width = ceil_log2(n_blocks);
            d
        })
    }

    /// Number of leaves, `2^L`.
    pub fn leaves(&self) -> u64 {
        1u64 << self.height
    }

    /// Number of buckets, `2^(L+1) - 1`.
    pub fn bucket_count(&self) -> u64 {
        (1u64 << (self.height + 1)) - 1
    }

    /// Number of internal buckets, `2^L - 1`.
    pub fn internal_count(&self) -> u64 {
        (1u64 << self.height) - 1
    }

    /// Total data-tree capacity in blocks, `Z(2^L - 1) + M 2^L`.
    pub fn data_tree_blocks(&self) -> u64 {
        self.bucket_cap as u64 * self.internal_count() + self.leaf_cap as u64 * self.leaves()
    }

    /// Blocks on one root-to-leaf path, `Z*L + M`.
    pub fn path_blocks(&self) -> u64 {
        self.bucket_cap as u64 * self.height as u64 + self.leaf_cap as u64
    }

    /// Data-block transfers per logical access against this tree
    /// (metadata and table traffic excluded).
    pub fn bandwidth_blocks(&self) -> u64 {
        self.construction.path_multiplier() * self.path_blocks()
    }

    /// Metadata word width in bits, `1 + ceil(lg N) + L`.
    pub fn meta_word_bits(&self) -> u32 {
        1 + self.addr_width + self.label_width
    }

    /// Block size in bytes (blocks of `B` bits are stored in `ceil(B/8)`
    /// bytes with the unused top bits zero).
    pub fn block_bytes(&self) -> usize {
        (self.block_bits as usize).div_ceil(8)
    }

    /// Bucket capacity at a given depth.
    pub fn cap_at_depth(&self, depth: u32) -> u32 {
        if depth == self.height {
            self.leaf_cap
        } else {
            self.bucket_cap
        }
    }
}

/// Theorem-1 shape: `L = ceil(lg(N/f))`, `M = ceil(N/2^L + g*sqrt(N*L/2^L))`,
/// `Z` defaulting to 3.
///
/// The square root is evaluated in floating point before the ceiling, so `M`
/// may differ by one from an exact-real computation; `M` only sets capacity
/// headroom, never addressing.
pub fn derive_params_t1(
    n_blocks: u64,
    block_bits: u32,
    f: u64,
    g: f64,
) -> Result<Derived, ParamError> {
    if n_blocks < 2 {
        return Err(ParamError::TooFewBlocks {
            got: n_blocks,
            min: 2,
        });
    }
    check_slack("g", g)?;
    let height = shrink_height(n_blocks, f, 1)?;
    let leaves = (1u64 << height) as f64;
    let mean = n_blocks as f64 / leaves;
    let slack = g * (n_blocks as f64 * height as f64 / leaves).sqrt();
    let m = (mean + slack).ceil() as u32;
    let mut derived = TreeParams::manual(
        Construction::SuccinctOne,
        n_blocks,
        block_bits,
        Construction::SuccinctOne.default_z(),
        height,
        m,
    )?;
    if g == 0.0 {
        derived.warnings.push(ParamWarning::ZeroSlack);
    }
    Ok(derived)
}

/// Theorem-2 shape: `L = ceil(lg(N/f))`, `M = ceil(N/2^L + (1+eps)*lg L)`,
/// `Z` defaulting to 4. Requires `N/f >= 4` so that `lg L` is positive.
///
/// `eps = 0` is accepted with a [`ParamWarning::ZeroSlack`]: the positivity
/// requirement only feeds the asymptotic tail bound.
pub fn derive_params_t2(
    n_blocks: u64,
    block_bits: u32,
    f: u64,
    eps: f64,
) -> Result<Derived, ParamError> {
    if n_blocks < 4 {
        return Err(ParamError::TooFewBlocks {
            got: n_blocks,
            min: 4,
        });
    }
    check_slack("eps", eps)?;
    let height = shrink_height(n_blocks, f, 2)?;
    let leaves = (1u64 << height) as f64;
    let mean = n_blocks as f64 / leaves;
    let m = (mean + (1.0 + eps) * (height as f64).log2()).ceil() as u32;
    let mut derived = TreeParams::manual(
        Construction::SuccinctTwo,
        n_blocks,
        block_bits,
        Construction::SuccinctTwo.default_z(),
        height,
        m,
    )?;
    if eps == 0.0 {
        derived.warnings.push(ParamWarning::ZeroSlack);
    }
    Ok(derived)
}

/// Reverses the low `width` bits of `x`.
///
/// Driving evictions by `bit_reversal(G mod 2^L)` sweeps the leaves so that
/// each depth-`i` node is on the eviction path exactly once per `2^i`
/// consecutive accesses.
pub fn bit_reversal(x: u64, width: u32) -> u64 {
    debug_assert!(width <= 64);
    debug_assert!(width == 64 || x < (1u64 << width));
    if width == 0 {
        return 0;
    }
    x.reverse_bits() >> (64 - width)
}

/// Breadth-first bucket indexing: root is 0, children of `b` are `2b+1` and
/// `2b+2`, leaves occupy `[2^L - 1, 2^(L+1) - 1)`.
pub mod tree {
    /// Index of the depth-`i` bucket on the path to leaf `leaf` (top `i` bits
    /// of the label select the node).
    pub fn node_on_path(leaf: u64, depth: u32, height: u32) -> u64 {
        debug_assert!(depth <= height);
        ((1u64 << depth) - 1) + (leaf >> (height - depth))
    }

    pub fn parent(bucket: u64) -> u64 {
        debug_assert!(bucket > 0);
        (bucket - 1) / 2
    }

    pub fn depth_of(bucket: u64) -> u32 {
        (bucket + 1).ilog2()
    }

    pub fn is_leaf(bucket: u64, height: u32) -> bool {
        bucket >= (1u64 << height) - 1
    }

    /// Rank of a leaf bucket among the leaves (equals its label).
    pub fn leaf_rank(bucket: u64, height: u32) -> u64 {
        debug_assert!(is_leaf(bucket, height));
        bucket - ((1u64 << height) - 1)
    }

    /// Do two labels agree on their top `depth` bits?
    pub fn share_prefix(a: u64, b: u64, depth: u32, height: u32) -> bool {
        debug_assert!(depth <= height);
        if depth == 0 {
            return true;
        }
        (a >> (height - depth)) == (b >> (height - depth))
    }

    /// Is `bucket` an ancestor-or-self of the leaf with label `leaf`?
    pub fn on_path(bucket: u64, leaf: u64, height: u32) -> bool {
        let depth = depth_of(bucket);
        depth <= height && node_on_path(leaf, depth, height) == bucket
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn t1_shape_matches_direct_arithmetic() {
        // N=2^20, f=64, g=2: L = 14, M = ceil(64 + 2*sqrt(2^20*14/2^14)) = 124.
        let d = derive_params_t1(1 << 20, 1 << 10, 64, 2.0).unwrap();
        assert_eq!(d.params.height, 14);
        assert_eq!(d.params.leaf_cap, 124);
        assert_eq!(d.params.bucket_cap, 3);
        assert_eq!(d.params.addr_width, 20);
        assert!(d.warnings.is_empty());
    }

    #[test]
    fn t1_table_override_accepted() {
        // The rigorous Theorem-1 table row: Z=3, L=15, M=112.
        let d =
            TreeParams::manual(Construction::SuccinctOne, 1 << 20, 1 << 10, 3, 15, 112).unwrap();
        assert_eq!(d.params.path_blocks(), 3 * 15 + 112);
        assert!(d.warnings.is_empty());
    }

    #[test]
    fn t1_degenerate_single_leaf_rejected() {
        // N=2^4, f=16 gives L=0.
        let err = derive_params_t1(1 << 4, 64, 16, 0.0).unwrap_err();
        assert!(matches!(err, ParamError::DegenerateTree { height: 0, .. }));
    }

    #[test]
    fn t2_shape_matches_direct_arithmetic() {
        // N=2^20, f=16, eps=1: L = 16, M = ceil(16 + 2*lg 16) = 24.
        let d = derive_params_t2(1 << 20, 1 << 10, 16, 1.0).unwrap();
        assert_eq!(d.params.height, 16);
        assert_eq!(d.params.leaf_cap, 24);
        assert_eq!(d.params.bucket_cap, 4);
    }

    #[test]
    fn t2_table_override_warns_leaf_below_mean() {
        // The aggressive Theorem-2 table row: Z=3, L=16, M=14 with mean leaf
        // load 16; the tree still holds all N blocks.
        let d =
            TreeParams::manual(Construction::SuccinctTwo, 1 << 20, 1 << 10, 3, 16, 14).unwrap();
        assert!(d
            .warnings
            .iter()
            .any(|w| matches!(w, ParamWarning::LeafBelowMean { .. })));
        assert!(d.params.data_tree_blocks() >= 1 << 20);
    }

    #[test]
    fn t2_zero_eps_warns() {
        let d = derive_params_t2(1 << 20, 1 << 10, 16, 0.0).unwrap();
        assert!(d.warnings.contains(&ParamWarning::ZeroSlack));
        assert_eq!(d.params.leaf_cap, 20); // ceil(16 + lg 16)
    }

    #[test]
    fn bit_reversal_three_bit_cycle() {
        let got: Vec<u64> = (0..8).map(|x| bit_reversal(x, 3)).collect();
        assert_eq!(got, vec![0, 4, 2, 6, 1, 5, 3, 7]);
    }

    #[test]
    fn bit_reversal_fixed_point_and_involution() {
        assert_eq!(bit_reversal(0, 17), 0);
        for x in [1u64, 37, 512, 1023] {
            assert_eq!(bit_reversal(bit_reversal(x, 10), 10), x);
        }
    }

    #[test]
    fn geometry_roundtrips() {
        let height = 4;
        for leaf in 0..(1u64 << height) {
            let mut prev = None;
            for depth in 0..=height {
                let b = tree::node_on_path(leaf, depth, height);
                assert_eq!(tree::depth_of(b), depth);
                assert!(tree::on_path(b, leaf, height));
                if let Some(p) = prev {
                    assert_eq!(tree::parent(b), p);
                }
                prev = Some(b);
            }
            let leaf_bucket = tree::node_on_path(leaf, height, height);
            assert!(tree::is_leaf(leaf_bucket, height));
            assert_eq!(tree::leaf_rank(leaf_bucket, height), leaf);
        }
    }

    #[test]
    fn block_too_small_rejected() {
        // N=2^16 at B=64: 3*ceil(lg n) = 3*22 = 66 > 64.
        let err = TreeParams::manual(Construction::SuccinctOne, 1 << 16, 64, 3, 10, 70)
            .unwrap_err();
        assert!(matches!(err, ParamError::BlockTooSmall { .. }));
    }

    #[test]
    fn path_oram_default_height() {
        let d = TreeParams::path_oram(1 << 20, 1 << 10, 5, None).unwrap();
        assert_eq!(d.params.height, 20);
        assert_eq!(d.params.leaf_cap, 5);
        // Matches the uniform-tree space identity Z(2^(L+1) - 1).
        assert_eq!(d.params.data_tree_blocks(), 5 * ((1u64 << 21) - 1));
    }
}
