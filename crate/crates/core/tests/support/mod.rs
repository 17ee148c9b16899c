#![allow(dead_code)]

pub mod oracles;

use kpcast_core::rng::SplitMix64;
use kpcast_core::{FusedDataset, Timestamp};

pub fn dataset(rows: &[Vec<f64>], ys: &[f64]) -> FusedDataset {
    let p = rows.first().map_or(0, Vec::len);
    let names = (0..p).map(|j| format!("x{j}")).collect();
    let values = rows.iter().flatten().copied().collect();
    let times = (0..ys.len())
        .map(|i| Timestamp::from_minutes(180 * i as i64))
        .collect();
    FusedDataset::new(names, values, ys.to_vec(), times).unwrap()
}

/// Small regression problem with a mix of continuous and heavily tied
/// columns, and either continuous or integer targets in [0, 9].
pub fn random_problem(rng: &mut SplitMix64, max_n: usize, max_p: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let n = 2 + rng.below(max_n - 1);
    let p = 1 + rng.below(max_p);
    let tied: Vec<bool> = (0..p).map(|_| rng.bernoulli(0.4)).collect();
    let integer_targets = rng.bernoulli(0.3);
    let rows = (0..n)
        .map(|_| {
            tied.iter()
                .map(|&t| if t { rng.below(4) as f64 } else { rng.uniform(-5.0, 5.0) })
                .collect()
        })
        .collect();
    let ys = (0..n)
        .map(|_| if integer_targets { rng.below(10) as f64 } else { rng.uniform(0.0, 9.0) })
        .collect();
    (rows, ys)
}
