//! Fingerprint-tuple collisions and membership false positives, measured
//! next to the analytic predictions.

use std::collections::HashSet;

use ccf_sync::theory::{ccf_fpr_bound, ccf_fpr_marginal, expected_collisions};
use ccf_sync::{Ccf, CcfParams, CollisionDetector, Element};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::csv_out::Sig6;
use crate::gen::{absent_u32, distinct_u32};
use crate::grid_seed;

/// Membership measurements load the filter to this fraction of its slots.
pub const MEMBERSHIP_LOAD: f64 = 0.95;

#[derive(Debug, Clone, Serialize)]
pub struct FprRow {
    /// `collisions` or `membership`.
    pub kind: &'static str,
    pub buckets: u32,
    pub fingerprint_bits: u8,
    pub slots_per_bucket: u8,
    pub elements: usize,
    pub repetitions: usize,
    /// Mean collided elements, or the observed false positive rate.
    pub measured: Sig6,
    /// Expected collided elements, or the per-query rate at this load.
    pub theory: Sig6,
    /// Worst-case rate of a full filter (membership rows only).
    pub theory_bound: Option<Sig6>,
    pub occupancy: Option<Sig6>,
    pub probes: Option<usize>,
}

/// Collided elements among `n` elements' candidate tuples.
pub fn count_collisions(params: &CcfParams, n: usize, seed: u64) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut det = CollisionDetector::new();
    for v in distinct_u32(&mut rng, n) {
        det.observe(&params.candidates(&Element::from_u32(v)));
    }
    det.collided_elements()
}

pub struct Membership {
    pub occupancy: f64,
    pub false_positives: usize,
    pub probes: usize,
}

/// Loads a filter to `MEMBERSHIP_LOAD`, then probes absent elements.
pub fn measure_membership(params: CcfParams, probes: usize, seed: u64) -> Membership {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = (params.slot_count() as f64 * MEMBERSHIP_LOAD) as usize;
    let present = distinct_u32(&mut rng, n);
    let mut filter = Ccf::new(params).expect("valid parameters");
    for &v in &present {
        filter
            .insert(&Element::from_u32(v), 1)
            .expect("count in range");
    }
    let exclude: HashSet<u32> = present.into_iter().collect();
    let false_positives = absent_u32(&mut rng, probes, &exclude)
        .into_iter()
        .filter(|&v| filter.query(&Element::from_u32(v)) > 0)
        .count();
    Membership {
        occupancy: filter.occupancy(),
        false_positives,
        probes,
    }
}

fn params(cfg: &ExperimentConfig, b_exp: u32, f: u8) -> CcfParams {
    CcfParams::new(1 << b_exp, f)
        .with_slots(cfg.slots_per_bucket)
        .with_counter_bits(cfg.counter_bits)
}

pub fn run_collisions(cfg: &ExperimentConfig) -> Vec<FprRow> {
    let grid: Vec<(u32, u8)> = cfg
        .collision_bucket_exponents
        .iter()
        .flat_map(|&b| cfg.collision_fingerprint_bits.iter().map(move |&f| (b, f)))
        .collect();
    grid.par_iter()
        .enumerate()
        .map(|(i, &(b_exp, f))| {
            let p = params(cfg, b_exp, f);
            let n = p.slot_count();
            let total: usize = (0..cfg.repetitions)
                .into_par_iter()
                .map(|r| {
                    let seed = grid_seed(cfg.seed, "collisions", i as u64, r as u64);
                    count_collisions(&p.with_seed(seed), n, seed)
                })
                .sum();
            FprRow {
                kind: "collisions",
                buckets: p.buckets,
                fingerprint_bits: f,
                slots_per_bucket: p.slots_per_bucket,
                elements: n,
                repetitions: cfg.repetitions,
                measured: Sig6(total as f64 / cfg.repetitions as f64),
                theory: Sig6(expected_collisions::<f64>(
                    u64::from(p.buckets),
                    u32::from(p.slots_per_bucket),
                    u32::from(f),
                )),
                theory_bound: None,
                occupancy: None,
                probes: None,
            }
        })
        .collect()
}

pub fn run_membership(cfg: &ExperimentConfig) -> Vec<FprRow> {
    let grid: Vec<(u32, u8)> = cfg
        .fpr_bucket_exponents
        .iter()
        .flat_map(|&b| cfg.fpr_fingerprint_bits.iter().map(move |&f| (b, f)))
        .collect();
    grid.par_iter()
        .enumerate()
        .map(|(i, &(b_exp, f))| {
            let p = params(cfg, b_exp, f);
            let runs: Vec<Membership> = (0..cfg.repetitions)
                .into_par_iter()
                .map(|r| {
                    let seed = grid_seed(cfg.seed, "membership", i as u64, r as u64);
                    measure_membership(p.with_seed(seed), cfg.probes, seed)
                })
                .collect();
            let probes: usize = runs.iter().map(|m| m.probes).sum();
            let hits: usize = runs.iter().map(|m| m.false_positives).sum();
            let occupancy = runs.iter().map(|m| m.occupancy).sum::<f64>() / runs.len() as f64;
            let stored = (occupancy * p.slot_count() as f64).round() as u64;
            FprRow {
                kind: "membership",
                buckets: p.buckets,
                fingerprint_bits: f,
                slots_per_bucket: p.slots_per_bucket,
                elements: (p.slot_count() as f64 * MEMBERSHIP_LOAD) as usize,
                repetitions: runs.len(),
                measured: Sig6(hits as f64 / probes.max(1) as f64),
                // a probe is one more element against `stored` residents
                theory: Sig6(
                    ccf_fpr_marginal::<f64>(u64::from(p.buckets), u32::from(f), stored + 1)
                        .unwrap_or(1.0),
                ),
                theory_bound: Some(Sig6(ccf_fpr_bound::<f64>(
                    u32::from(p.slots_per_bucket),
                    u32::from(f),
                ))),
                occupancy: Some(Sig6(occupancy)),
                probes: Some(probes),
            }
        })
        .collect()
}

/// Collision rows followed by membership rows.
pub fn run_fpr(cfg: &ExperimentConfig) -> Vec<FprRow> {
    let mut rows = run_collisions(cfg);
    rows.extend(run_membership(cfg));
    rows
}
