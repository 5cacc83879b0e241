//! Chi-square tests used by the security harness.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ChiSquareOutcome {
    pub statistic: f64,
    pub df: u64,
    pub p_value: f64,
}

fn p_from(stat: f64, df: u64) -> f64 {
    if df == 0 {
        return 1.0;
    }
    let dist = ChiSquared::new(df as f64).expect("positive df");
    (1.0 - dist.cdf(stat)).clamp(0.0, 1.0)
}

/// Goodness of fit of a histogram against the uniform distribution over its
/// bins.
pub fn chi_square_uniform(hist: &[u64]) -> ChiSquareOutcome {
    let n: u64 = hist.iter().sum();
    let k = hist.len() as f64;
    let expected = n as f64 / k;
    let stat: f64 = hist
        .iter()
        .map(|&o| {
            let d = o as f64 - expected;
            d * d / expected
        })
        .sum();
    ChiSquareOutcome {
        statistic: stat,
        df: hist.len() as u64 - 1,
        p_value: p_from(stat, hist.len() as u64 - 1),
    }
}

/// Two-sample homogeneity test: do two histograms over the same bins come
/// from one distribution? Bins empty in both samples are dropped from the
/// degrees of freedom.
pub fn chi_square_two_sample(a: &[u64], b: &[u64]) -> ChiSquareOutcome {
    assert_eq!(a.len(), b.len());
    let ta: u64 = a.iter().sum();
    let tb: u64 = b.iter().sum();
    let grand = (ta + tb) as f64;
    let mut stat = 0.0;
    let mut used_bins = 0u64;
    for (&oa, &ob) in a.iter().zip(b) {
        let col = (oa + ob) as f64;
        if col == 0.0 {
            continue;
        }
        used_bins += 1;
        let ea = col * ta as f64 / grand;
        let eb = col * tb as f64 / grand;
        stat += (oa as f64 - ea).powi(2) / ea + (ob as f64 - eb).powi(2) / eb;
    }
    let df = used_bins.saturating_sub(1);
    ChiSquareOutcome {
        statistic: stat,
        df,
        p_value: p_from(stat, df),
    }
}
