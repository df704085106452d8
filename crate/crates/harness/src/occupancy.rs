//! Load factor reached when a filter sized `b = 2^(k+7)` takes
//! `N = 500 * 2^k` distinct elements.

use ccf_sync::{Ccf, CcfParams, Element};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::csv_out::Sig6;
use crate::gen::distinct_u32;
use crate::grid_seed;

/// Published occupancy for `N = 500 * 2^k`, `k = 1..=12`.
const REFERENCE: [f64; 12] = [
    0.96387, 0.96631, 0.96875, 0.96683, 0.97004, 0.96992, 0.96905, 0.96946, 0.96913, 0.96938,
    0.96916, 0.96926,
];

pub fn reference_occupancy(k: u32) -> Option<f64> {
    REFERENCE.get((k as usize).checked_sub(1)?).copied()
}

#[derive(Debug, Clone, Serialize)]
pub struct OccupancyRow {
    pub k: u32,
    pub elements: usize,
    pub buckets: u32,
    pub fingerprint_bits: u8,
    pub repetitions: usize,
    pub occupancy: Sig6,
    pub occupancy_min: Sig6,
    pub occupancy_max: Sig6,
    pub insert_failures: Sig6,
    pub reference_occupancy: Option<Sig6>,
}

/// One fill: returns (occupancy, failed inserts).
pub fn fill(params: CcfParams, elements: usize, seed: u64) -> (f64, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut filter = Ccf::new(params).expect("valid parameters");
    let mut failures = 0;
    for v in distinct_u32(&mut rng, elements) {
        if !filter
            .insert(&Element::from_u32(v), 1)
            .expect("count in range")
        {
            failures += 1;
        }
    }
    (filter.occupancy(), failures)
}

pub fn run_occupancy(cfg: &ExperimentConfig) -> Vec<OccupancyRow> {
    cfg.occupancy_k
        .par_iter()
        .map(|&k| {
            let elements = 500usize << k;
            let f = (k + 7) as u8;
            let params = CcfParams::new(1 << (k + 7), f)
                .with_slots(cfg.slots_per_bucket)
                .with_counter_bits(cfg.counter_bits);
            let runs: Vec<(f64, usize)> = (0..cfg.repetitions)
                .into_par_iter()
                .map(|r| {
                    let seed = grid_seed(cfg.seed, "occupancy", u64::from(k), r as u64);
                    fill(params.with_seed(seed), elements, seed)
                })
                .collect();
            let n = runs.len() as f64;
            let occ = runs.iter().map(|r| r.0);
            OccupancyRow {
                k,
                elements,
                buckets: params.buckets,
                fingerprint_bits: f,
                repetitions: runs.len(),
                occupancy: Sig6(occ.clone().sum::<f64>() / n),
                occupancy_min: Sig6(occ.clone().fold(f64::INFINITY, f64::min)),
                occupancy_max: Sig6(occ.fold(0.0, f64::max)),
                insert_failures: Sig6(runs.iter().map(|r| r.1 as f64).sum::<f64>() / n),
                reference_occupancy: reference_occupancy(k).map(Sig6),
            }
        })
        .collect()
}
