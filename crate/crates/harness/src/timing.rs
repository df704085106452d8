//! Per-operation wall-clock cost and table accesses for both filters.
//!
//! Each measurement runs once to warm up, then `repetitions` times; the
//! median is reported. Absolute numbers depend on the machine.

use std::time::{Duration, Instant};

use ccf_sync::sync::{diff_cbf, diff_decode, diff_query};
use ccf_sync::{Cbf, Ccf, Multiset};
use serde::Serialize;

use crate::accuracy::{ccf_params, matched_cbf};
use crate::config::{ExperimentConfig, Overlap};
use crate::csv_out::Sig6;
use crate::gen::gen_pair;
use crate::grid_seed;

#[derive(Debug, Clone, Serialize)]
pub struct TimingRow {
    pub structure: &'static str,
    pub operation: &'static str,
    pub elements: usize,
    pub repetitions: usize,
    pub median_ms: Sig6,
    pub ns_per_element: Sig6,
    /// Slots (CCF) or counters (CBF) read per element by lookups.
    pub accesses_per_element: Option<Sig6>,
}

fn median(mut xs: Vec<Duration>) -> Duration {
    xs.sort();
    xs[xs.len() / 2]
}

/// Runs `setup` then times `op` on its output, `reps + 1` times.
fn time<S, T>(reps: usize, mut setup: impl FnMut() -> S, mut op: impl FnMut(S) -> T) -> Duration {
    let mut runs = Vec::with_capacity(reps);
    for i in 0..=reps {
        let input = setup();
        let start = Instant::now();
        std::hint::black_box(op(input));
        if i > 0 {
            runs.push(start.elapsed());
        }
    }
    median(runs)
}

fn build_ccf(ms: &Multiset, p: ccf_sync::CcfParams) -> Ccf {
    let mut f = Ccf::new(p).expect("valid parameters");
    for (x, m) in ms.iter() {
        let _ = f.insert(x, m);
    }
    f
}

fn build_cbf(ms: &Multiset, p: ccf_sync::CbfParams) -> Cbf {
    let mut f = Cbf::new(p).expect("valid parameters");
    for (x, m) in ms.iter() {
        let _ = f.insert(x, m);
    }
    f
}

pub fn run_timing(cfg: &ExperimentConfig) -> Vec<TimingRow> {
    let reps = cfg.repetitions;
    let mut rows = Vec::new();
    for (i, &n) in cfg.timing_sizes.iter().enumerate() {
        let seed = grid_seed(cfg.seed, "timing", i as u64, 0);
        let pair = gen_pair(
            &Overlap::mixed(n),
            cfg.multiplicity,
            cfg.max_multiplicity,
            seed,
        );
        let (a, b) = (&pair.a, &pair.b);
        let cp = ccf_params(cfg, n, cfg.timing_fingerprint_bits).with_seed(seed);
        let bp = matched_cbf(cfg, &cp, n).with_seed(seed);
        let (ccf_a, ccf_b) = (build_ccf(a, cp), build_ccf(b, cp));
        let cbf_b = build_cbf(b, bp);
        let k = f64::from(bp.hashes);

        let ccf_accesses = a
            .iter()
            .map(|(x, _)| ccf_b.probe(x).slots_examined)
            .sum::<usize>() as f64
            / n as f64;
        let decode_visits = diff_decode(a, &ccf_a, &ccf_b)
            .expect("shared parameters")
            .1
            .slots_visited as f64
            / n as f64;

        let mut row = |structure, operation, d: Duration, accesses: Option<f64>| {
            rows.push(TimingRow {
                structure,
                operation,
                elements: n,
                repetitions: reps,
                median_ms: Sig6(d.as_secs_f64() * 1e3),
                ns_per_element: Sig6(d.as_nanos() as f64 / n as f64),
                accesses_per_element: accesses.map(Sig6),
            })
        };

        row(
            "ccf",
            "insert",
            time(reps, || (), |_| build_ccf(a, cp)),
            None,
        );
        row(
            "cbf",
            "insert",
            time(reps, || (), |_| build_cbf(a, bp)),
            None,
        );
        row(
            "ccf",
            "query",
            time(
                reps,
                || (),
                |_| a.iter().map(|(x, _)| ccf_b.query(x)).sum::<u32>(),
            ),
            Some(ccf_accesses),
        );
        row(
            "cbf",
            "query",
            time(
                reps,
                || (),
                |_| a.iter().map(|(x, _)| cbf_b.query(x)).sum::<u32>(),
            ),
            Some(k),
        );
        row(
            "ccf",
            "delete",
            time(
                reps,
                || ccf_a.clone(),
                |mut f| a.iter().filter(|(x, _)| f.delete(x)).count(),
            ),
            None,
        );
        row(
            "cbf",
            "delete",
            time(
                reps,
                || build_cbf(a, bp),
                |mut f| a.iter().filter(|(x, m)| f.delete(x, *m).is_ok()).count(),
            ),
            Some(k),
        );
        row(
            "ccf",
            "diff_query",
            time(reps, || (), |_| diff_query(a, &ccf_b)),
            Some(ccf_accesses),
        );
        row(
            "ccf",
            "diff_decode",
            time(reps, || (), |_| diff_decode(a, &ccf_a, &ccf_b)),
            Some(decode_visits),
        );
        row(
            "cbf",
            "diff_cbf",
            time(reps, || (), |_| diff_cbf(a, &cbf_b)),
            Some(k),
        );
    }
    rows
}
