//! Closed-form reproduction of the concrete-parameter comparison table.
//!
//! Pure arithmetic, no simulation: for each non-Ring row, the data-tree
//! overhead and the per-access data-block transfer count our accounting
//! produces, next to the published figure. Ring-technique rows (the ones
//! with A and S parameters) are out of scope.

use serde::{Deserialize, Serialize};

use crate::params::{Construction, TreeParams};
use crate::space::{closed_form_report, SpaceMode};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Table2Row {
    pub name: &'static str,
    pub construction: Construction,
    pub rigorous: bool,
    pub z: u32,
    pub height: u32,
    /// Leaf capacity; uniform-bucket rows take `M = Z`.
    pub m: Option<u32>,
    pub paper_extra_over_n: f64,
    pub paper_bandwidth: u64,
    pub paper_stash: Option<u32>,
}

pub fn table2_rows() -> Vec<Table2Row> {
    vec![
        Table2Row {
            name: "path-oram (rigorous)",
            construction: Construction::PathOram,
            rigorous: true,
            z: 5,
            height: 20,
            m: None,
            paper_extra_over_n: 9.0,
            paper_bandwidth: 210,
            paper_stash: Some(114),
        },
        Table2Row {
            name: "theorem-1 (rigorous)",
            construction: Construction::SuccinctOne,
            rigorous: true,
            z: 3,
            height: 15,
            m: Some(112),
            paper_extra_over_n: 2.59,
            paper_bandwidth: 471,
            paper_stash: Some(32),
        },
        Table2Row {
            name: "path-oram (aggressive)",
            construction: Construction::PathOram,
            rigorous: false,
            z: 4,
            height: 19,
            m: None,
            paper_extra_over_n: 3.0,
            paper_bandwidth: 160,
            paper_stash: None,
        },
        Table2Row {
            name: "theorem-1 (aggressive)",
            construction: Construction::SuccinctOne,
            rigorous: false,
            z: 4,
            height: 15,
            m: Some(36),
            paper_extra_over_n: 0.25,
            paper_bandwidth: 288,
            paper_stash: None,
        },
        Table2Row {
            name: "theorem-2 (aggressive)",
            construction: Construction::SuccinctTwo,
            rigorous: false,
            z: 3,
            height: 16,
            m: Some(14),
            paper_extra_over_n: 0.0625,
            paper_bandwidth: 248,
            paper_stash: None,
        },
    ]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Table2Check {
    pub name: String,
    pub z: u32,
    pub height: u32,
    pub m: u32,
    pub ours_extra_over_n: f64,
    pub paper_extra_over_n: f64,
    pub extra_match: bool,
    pub ours_bandwidth: u64,
    pub paper_bandwidth: u64,
    pub bandwidth_match: bool,
    pub paper_stash: Option<u32>,
}

impl Table2Check {
    pub fn matches(&self) -> bool {
        self.extra_match && self.bandwidth_match
    }
}

/// Evaluates every row at the given database shape. Matching against the
/// published figures is meaningful at the table's own `N = 2^20`,
/// `B = 2^10`; extra-space matches use a 1% tolerance (the table rounds),
/// bandwidth must be exact.
pub fn check_table2(n_blocks: u64, block_bits: u32) -> Vec<Table2Check> {
    table2_rows()
        .into_iter()
        .map(|row| {
            let m = row.m.unwrap_or(row.z);
            let params = row_params(&row, n_blocks, block_bits);
            let report = closed_form_report(&params, SpaceMode::Table2);
            let ours_extra = report.extra_blocks_over_n;
            let ours_bw = params.bandwidth_blocks();
            Table2Check {
                name: row.name.to_string(),
                z: row.z,
                height: row.height,
                m,
                ours_extra_over_n: ours_extra,
                paper_extra_over_n: row.paper_extra_over_n,
                extra_match: (ours_extra - row.paper_extra_over_n).abs()
                    / row.paper_extra_over_n
                    <= 0.01,
                ours_bandwidth: ours_bw,
                paper_bandwidth: row.paper_bandwidth,
                bandwidth_match: ours_bw == row.paper_bandwidth,
                paper_stash: row.paper_stash,
            }
        })
        .collect()
}

fn row_params(row: &Table2Row, n_blocks: u64, block_bits: u32) -> TreeParams {
    match row.construction {
        Construction::PathOram => {
            TreeParams::path_oram(n_blocks, block_bits, row.z, Some(row.height))
                .expect("table row parameters are valid")
                .params
        }
        c => TreeParams::manual(c, n_blocks, block_bits, row.z, row.height, row.m.unwrap())
            .expect("table row parameters are valid")
            .params,
    }
}

/// Aggressive-row analogs at reduced scale: re-derives `M` from the row's
/// implied `(f, g)` or `(f, eps)` so the shape scales with `N`. Returns the
/// parameters and a human-readable account of the mapping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AnalogRow {
    T1Rigorous,
    T1Aggressive,
    T2Aggressive,
}

pub fn rescale_analog(
    row: AnalogRow,
    n_blocks: u64,
    block_bits: u32,
) -> Result<(TreeParams, String), crate::error::ParamError> {
    // Implied by the published rows at N = 2^20: f = N / 2^L, and the slack
    // coefficient that reproduces the row's M through the construction's own
    // M formula.
    let (construction, z, f, note): (Construction, u32, u64, &str) = match row {
        AnalogRow::T1Rigorous => (Construction::SuccinctOne, 3, 32, "g from M=112 at N=2^20"),
        AnalogRow::T1Aggressive => (Construction::SuccinctOne, 4, 32, "g from M=36 at N=2^20"),
        AnalogRow::T2Aggressive => (
            Construction::SuccinctTwo,
            3,
            16,
            "(1+eps) from M=14 at N=2^20",
        ),
    };
    let height = {
        let ratio = n_blocks.div_ceil(f);
        crate::params::ceil_log2(ratio)
    };
    let leaves = (1u64 << height) as f64;
    let mean = n_blocks as f64 / leaves;
    let m = match row {
        AnalogRow::T1Rigorous | AnalogRow::T1Aggressive => {
            let paper_m = if row == AnalogRow::T1Rigorous { 112.0 } else { 36.0 };
            let paper_mean = (1u64 << 20) as f64 / (1u64 << 15) as f64;
            let paper_slack_base = ((1u64 << 20) as f64 * 15.0 / (1u64 << 15) as f64).sqrt();
            let g = (paper_m - paper_mean) / paper_slack_base;
            (mean + g * (n_blocks as f64 * height as f64 / leaves).sqrt()).ceil() as u32
        }
        AnalogRow::T2Aggressive => {
            let paper_mean = (1u64 << 20) as f64 / (1u64 << 16) as f64;
            let one_plus_eps = (14.0 - paper_mean) / 16f64.log2();
            (mean + one_plus_eps * (height as f64).log2()).ceil() as u32
        }
    };
    let derived = TreeParams::manual(construction, n_blocks, block_bits, z, height, m)?;
    let mapping = format!(
        "analog {:?}: f={f}, {note}; at N={n_blocks}: L={height}, M={m} (aggressive rows carry no security guarantee)",
        row
    );
    Ok((derived.params, mapping))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_rows_match_at_table_scale() {
        let checks = check_table2(1 << 20, 1 << 10);
        assert_eq!(checks.len(), 5);
        for c in &checks {
            assert!(c.matches(), "{c:?}");
        }
    }

    #[test]
    fn analog_rescaling_reproduces_rows_at_table_scale() {
        let (p, _) = rescale_analog(AnalogRow::T1Aggressive, 1 << 20, 1 << 10).unwrap();
        assert_eq!((p.bucket_cap, p.height, p.leaf_cap), (4, 15, 36));
        let (p, _) = rescale_analog(AnalogRow::T2Aggressive, 1 << 20, 1 << 10).unwrap();
        assert_eq!((p.bucket_cap, p.height, p.leaf_cap), (3, 16, 14));
        let (p, _) = rescale_analog(AnalogRow::T1Rigorous, 1 << 20, 1 << 10).unwrap();
        assert_eq!((p.bucket_cap, p.height, p.leaf_cap), (3, 15, 112));
    }

    #[test]
    fn analog_rescaling_at_reduced_scale() {
        let (p, mapping) = rescale_analog(AnalogRow::T1Aggressive, 1 << 16, 1 << 10).unwrap();
        assert_eq!(p.height, 11);
        assert!(mapping.contains("no security guarantee"));
        let (p, _) = rescale_analog(AnalogRow::T2Aggressive, 1 << 16, 1 << 10).unwrap();
        assert_eq!(p.height, 12);
    }
}
