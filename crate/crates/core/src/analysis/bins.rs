//! Balls-into-bins simulation, one and two choices.
//!
//! The one-choice game models the leaf loads behind the Theorem-1 leaf
//! sizing; the two-choice game models the counter-table evolution of the
//! two-choice construction (same tie-break: the first draw wins).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BinsExperiment {
    pub bins: u64,
    pub balls: u64,
    pub choices: u8,
    pub seed: u64,
    pub max_load: u64,
    /// `max_load - balls/bins`.
    pub gap: f64,
    #[serde(skip)]
    pub loads: Vec<u64>,
}

/// Throws `balls` into `bins`. `choices` must be 1 or 2; with two choices
/// each ball lands in the less loaded of two independent uniform draws,
/// ties taking the first draw.
pub fn run_bins(bins: u64, balls: u64, choices: u8, seed: u64) -> BinsExperiment {
    assert!(bins >= 1 && balls >= 1);
    assert!(choices == 1 || choices == 2);
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut loads = vec![0u64; bins as usize];
    for _ in 0..balls {
        let target = if choices == 1 {
            rng.gen_range(0..bins)
        } else {
            let a = rng.gen_range(0..bins);
            let b = rng.gen_range(0..bins);
            if loads[a as usize] <= loads[b as usize] {
                a
            } else {
                b
            }
        };
        loads[target as usize] += 1;
    }
    let max_load = *loads.iter().max().unwrap();
    BinsExperiment {
        bins,
        balls,
        choices,
        seed,
        max_load,
        gap: max_load as f64 - balls as f64 / bins as f64,
        loads,
    }
}
