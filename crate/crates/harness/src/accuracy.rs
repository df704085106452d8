//! Post-synchronization accuracy across filter sizes and methods.

use ccf_sync::cbf::optimal_k;
use ccf_sync::sync::{synchronize, Method, SyncConfig, SyncReport};
use ccf_sync::{CbfParams, CcfParams};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{AccuracySweep, ExperimentConfig, Overlap};
use crate::csv_out::Sig6;
use crate::gen::{gen_pair, MultisetPair};
use crate::grid_seed;

#[derive(Debug, Clone, Serialize)]
pub struct AccuracyRow {
    pub sweep: &'static str,
    pub method: &'static str,
    pub n_distinct: usize,
    pub buckets: Option<u32>,
    /// For CBF rows in the fingerprint sweep: the CCF length whose bits
    /// the CBF was matched to.
    pub fingerprint_bits: Option<u8>,
    pub cbf_counters: Option<u32>,
    pub cbf_hashes: Option<u8>,
    pub filter_bits: u64,
    pub bits_per_element: Sig6,
    pub repetitions: usize,
    pub alpha_mean: Sig6,
    pub alpha_min: Sig6,
    pub alpha_max: Sig6,
    pub alpha_vs_union_mean: Sig6,
    pub bytes_filter_mean: Sig6,
    pub bytes_diff_mean: Sig6,
    pub bytes_wire_mean: Sig6,
    pub misclassified_mean: Sig6,
    pub insert_failures_mean: Sig6,
}

/// One grid point before seeding.
#[derive(Debug, Clone, Copy)]
pub struct Point {
    pub sweep: AccuracySweep,
    pub method: Method,
    pub fingerprint_bits: Option<u8>,
    pub sync: SyncConfig,
}

impl Point {
    fn seeded(&self, seed: u64) -> SyncConfig {
        match self.sync {
            SyncConfig::Query(p) => SyncConfig::Query(p.with_seed(seed)),
            SyncConfig::Decode(p) => SyncConfig::Decode(p.with_seed(seed)),
            SyncConfig::Cbf(p) => SyncConfig::Cbf(p.with_seed(seed)),
        }
    }
}

pub fn ccf_params(cfg: &ExperimentConfig, n: usize, f: u8) -> CcfParams {
    CcfParams::for_capacity(n, cfg.slots_per_bucket, f).with_counter_bits(cfg.counter_bits)
}

/// CBF with `counters`, and the hash count that is optimal for `n`.
pub fn cbf_params(cfg: &ExperimentConfig, counters: u64, n: usize) -> CbfParams {
    let counters = counters.clamp(1, u64::from(u32::MAX));
    let k = optimal_k(counters, n as u64).clamp(1, 32) as u8;
    CbfParams::new(counters as u32, k, cfg.cbf_counter_bits)
}

/// CBF using the same number of bits as `ccf`.
pub fn matched_cbf(cfg: &ExperimentConfig, ccf: &CcfParams, n: usize) -> CbfParams {
    let c = u64::from(cfg.cbf_counter_bits);
    cbf_params(cfg, ccf.total_bits().div_ceil(c), n)
}

fn point(sweep: AccuracySweep, method: Method, f: Option<u8>, sync: SyncConfig) -> Point {
    Point {
        sweep,
        method,
        fingerprint_bits: f,
        sync,
    }
}

/// The grid for one sweep and method over root-set size `n`.
pub fn grid(cfg: &ExperimentConfig, sweep: AccuracySweep, method: Method, n: usize) -> Vec<Point> {
    let ccf_or_cbf = |f: u8| {
        let p = ccf_params(cfg, n, f);
        let sync = match method {
            Method::Cbf => SyncConfig::Cbf(matched_cbf(cfg, &p, n)),
            m => SyncConfig::new_ccf(m, p).expect("ccf method"),
        };
        point(sweep, method, Some(f), sync)
    };
    match sweep {
        AccuracySweep::FingerprintBits => cfg
            .fingerprint_bits
            .iter()
            .map(|&f| ccf_or_cbf(f))
            .collect(),
        // f = log2 b keeps the expected collision count constant across sizes
        AccuracySweep::Size => {
            let b = ccf_params(cfg, n, 1).buckets;
            vec![ccf_or_cbf(b.trailing_zeros() as u8)]
        }
        AccuracySweep::BitsPerElement => match method {
            Method::Cbf => cfg
                .cbf_counters_per_element
                .iter()
                .map(|&cpe| {
                    let m = (cpe * n as f64).round() as u64;
                    point(sweep, method, None, SyncConfig::Cbf(cbf_params(cfg, m, n)))
                })
                .collect(),
            _ => cfg
                .bpe_fingerprint_bits
                .iter()
                .map(|&f| ccf_or_cbf(f))
                .collect(),
        },
    }
}

fn workloads(cfg: &ExperimentConfig, overlap: &Overlap, tag: u64) -> Vec<MultisetPair> {
    (0..cfg.repetitions)
        .into_par_iter()
        .map(|r| {
            let seed = grid_seed(cfg.seed, "workload", tag, r as u64);
            gen_pair(overlap, cfg.multiplicity, cfg.max_multiplicity, seed)
        })
        .collect()
}

/// Synchronizes every workload at one point.
pub fn measure(cfg: &ExperimentConfig, p: &Point, pairs: &[MultisetPair]) -> Vec<SyncReport> {
    pairs
        .par_iter()
        .enumerate()
        .map(|(r, pair)| {
            let seed = grid_seed(cfg.seed, "filter", 0, r as u64);
            synchronize(&pair.a, &pair.b, &p.seeded(seed))
                .expect("in-process sync")
                .report
        })
        .collect()
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

pub fn summarize(p: &Point, n: usize, reports: &[SyncReport]) -> AccuracyRow {
    let (buckets, cbf_counters, cbf_hashes) = match p.sync {
        SyncConfig::Query(c) | SyncConfig::Decode(c) => (Some(c.buckets), None, None),
        SyncConfig::Cbf(c) => (None, Some(c.counters), Some(c.hashes)),
    };
    let alphas = || reports.iter().map(|r| r.alpha);
    let both = |v: [usize; 2]| (v[0] + v[1]) as f64 / 2.0;
    AccuracyRow {
        sweep: p.sweep.name(),
        method: p.method.name(),
        n_distinct: n,
        buckets,
        fingerprint_bits: p.fingerprint_bits,
        cbf_counters,
        cbf_hashes,
        filter_bits: p.sync.filter_bits(),
        bits_per_element: Sig6(p.sync.filter_bits() as f64 / n as f64),
        repetitions: reports.len(),
        alpha_mean: Sig6(mean(alphas())),
        alpha_min: Sig6(alphas().fold(f64::INFINITY, f64::min)),
        alpha_max: Sig6(alphas().fold(f64::NEG_INFINITY, f64::max)),
        alpha_vs_union_mean: Sig6(mean(
            reports
                .iter()
                .map(|r| (r.alpha_vs_union[0] + r.alpha_vs_union[1]) / 2.0),
        )),
        bytes_filter_mean: Sig6(mean(reports.iter().map(|r| both(r.bytes_filter)))),
        bytes_diff_mean: Sig6(mean(reports.iter().map(|r| both(r.bytes_diff)))),
        bytes_wire_mean: Sig6(mean(reports.iter().map(|r| both(r.bytes_wire)))),
        misclassified_mean: Sig6(mean(reports.iter().map(|r| both(r.misclassified)))),
        insert_failures_mean: Sig6(mean(reports.iter().map(|r| both(r.insert_failures)))),
    }
}

/// Rows for one method over every configured sweep.
pub fn run_accuracy(cfg: &ExperimentConfig, method: Method) -> Vec<AccuracyRow> {
    run_methods(cfg, &[method])
}

/// Rows for several methods; workloads are shared across methods so their
/// rows compare like with like.
pub fn run_methods(cfg: &ExperimentConfig, methods: &[Method]) -> Vec<AccuracyRow> {
    let mut rows = Vec::new();
    for &sweep in &cfg.accuracy_sweeps {
        let cases: Vec<(usize, Overlap)> = match sweep {
            AccuracySweep::Size => cfg.sizes.iter().map(|&n| (n, Overlap::mixed(n))).collect(),
            _ => vec![(cfg.overlap.distinct_a(), cfg.overlap)],
        };
        for (n, overlap) in cases {
            let pairs = workloads(cfg, &overlap, n as u64);
            for &method in methods {
                for p in grid(cfg, sweep, method, n) {
                    rows.push(summarize(&p, n, &measure(cfg, &p, &pairs)));
                }
            }
        }
    }
    rows
}

/// Smallest bits per element among `rows` reaching `alpha`, if any.
pub fn bpe_to_reach(rows: &[AccuracyRow], alpha: f64) -> Option<f64> {
    rows.iter()
        .filter(|r| r.alpha_mean.0 >= alpha)
        .map(|r| r.bits_per_element.0)
        .min_by(f64::total_cmp)
}
