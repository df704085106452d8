//! Workload generation: random 32-bit elements with controlled overlap.

use std::collections::HashSet;

use ccf_sync::sync::{ground_truth, DiffResult};
use ccf_sync::{Element, Multiset};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{ConfigError, ExperimentConfig, MultiplicityMode, Overlap};

#[derive(Debug, Clone)]
pub struct MultisetPair {
    pub a: Multiset,
    pub b: Multiset,
    /// `ground_truth(a, b)`: what A must send and replicate.
    pub truth_a: DiffResult,
    pub truth_b: DiffResult,
}

/// `n` distinct 32-bit values, in draw order.
pub fn distinct_u32(rng: &mut impl Rng, n: usize) -> Vec<u32> {
    let mut seen = HashSet::with_capacity(n);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let v = rng.gen::<u32>();
        if seen.insert(v) {
            out.push(v);
        }
    }
    out
}

/// Distinct 32-bit values that avoid `exclude`.
pub fn absent_u32(rng: &mut impl Rng, n: usize, exclude: &HashSet<u32>) -> Vec<u32> {
    let mut seen = HashSet::with_capacity(n);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let v = rng.gen::<u32>();
        if !exclude.contains(&v) && seen.insert(v) {
            out.push(v);
        }
    }
    out
}

fn draw(rng: &mut impl Rng, mode: MultiplicityMode, max: u32) -> u32 {
    match mode {
        MultiplicityMode::Uniform => rng.gen_range(1..=max),
        MultiplicityMode::Fixed(m) => m,
    }
}

/// A multiplicity in `[1, max]` other than `m`.
fn draw_other(rng: &mut impl Rng, m: u32, max: u32) -> u32 {
    let v = rng.gen_range(1..max);
    if v >= m {
        v + 1
    } else {
        v
    }
}

/// Generates the pair described by `cfg.overlap` from `seed`.
pub fn gen_multiset_pair(cfg: &ExperimentConfig, seed: u64) -> Result<MultisetPair, ConfigError> {
    cfg.validate()?;
    Ok(gen_pair(
        &cfg.overlap,
        cfg.multiplicity,
        cfg.max_multiplicity,
        seed,
    ))
}

pub fn gen_pair(overlap: &Overlap, mode: MultiplicityMode, max: u32, seed: u64) -> MultisetPair {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = distinct_u32(&mut rng, overlap.total_distinct());
    values.shuffle(&mut rng);
    let mut values = values.into_iter().map(Element::from_u32);

    let mut a = Multiset::new();
    let mut b = Multiset::new();
    let add = |ms: &mut Multiset, x: Element, m: u32| {
        ms.add(x, m).expect("fresh element within range");
    };
    for x in values.by_ref().take(overlap.n_common) {
        let m = draw(&mut rng, mode, max);
        add(&mut a, x.clone(), m);
        add(&mut b, x, m);
    }
    for x in values.by_ref().take(overlap.n_multdiff) {
        let m = draw(&mut rng, mode, max);
        let other = draw_other(&mut rng, m, max);
        let (ma, mb) = if rng.gen() { (m, other) } else { (other, m) };
        add(&mut a, x.clone(), ma);
        add(&mut b, x, mb);
    }
    for x in values.by_ref().take(overlap.n_unique_a) {
        add(&mut a, x, draw(&mut rng, mode, max));
    }
    for x in values.by_ref().take(overlap.n_unique_b) {
        add(&mut b, x, draw(&mut rng, mode, max));
    }
    MultisetPair {
        truth_a: ground_truth(&a, &b),
        truth_b: ground_truth(&b, &a),
        a,
        b,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> Overlap {
        Overlap {
            n_common: 2,
            n_multdiff: 1,
            n_unique_a: 1,
            n_unique_b: 1,
        }
    }

    #[test]
    fn common_only_has_empty_truth() {
        let o = Overlap {
            n_common: 50,
            n_multdiff: 0,
            n_unique_a: 0,
            n_unique_b: 0,
        };
        let p = gen_pair(&o, MultiplicityMode::Uniform, 255, 3);
        assert!(p.truth_a.is_empty() && p.truth_b.is_empty());
        assert_eq!(p.a, p.b);
    }

    #[test]
    fn truth_matches_hand_enumeration() {
        let p = gen_pair(&small(), MultiplicityMode::Uniform, 255, 9);
        assert_eq!(p.a.root_len(), 4);
        assert_eq!(p.b.root_len(), 4);
        // enumerate every element of the union by hand
        let mut sends = [0, 0];
        let mut replicas = [0, 0];
        let union: std::collections::BTreeSet<_> = p.a.root_set().chain(p.b.root_set()).collect();
        assert_eq!(union.len(), 5);
        for x in union {
            let (ma, mb) = (p.a.multiplicity(x), p.b.multiplicity(x));
            if ma > 0 && mb == 0 && p.truth_a.transmit.contains(&(x.clone(), ma)) {
                sends[0] += 1;
            }
            if mb > 0 && ma == 0 && p.truth_b.transmit.contains(&(x.clone(), mb)) {
                sends[1] += 1;
            }
            if ma > 0 && mb > ma && p.truth_a.replicate.contains(&(x.clone(), mb - ma)) {
                replicas[0] += 1;
            }
            if mb > 0 && ma > mb && p.truth_b.replicate.contains(&(x.clone(), ma - mb)) {
                replicas[1] += 1;
            }
        }
        assert_eq!(sends, [1, 1]);
        assert_eq!(replicas[0] + replicas[1], 1);
        assert_eq!(
            p.truth_a.transmit.len() + p.truth_a.replicate.len(),
            1 + replicas[0]
        );
        assert_eq!(
            p.truth_b.transmit.len() + p.truth_b.replicate.len(),
            1 + replicas[1]
        );
    }

    #[test]
    fn same_seed_same_pair() {
        let o = Overlap::mixed(1000);
        let p = gen_pair(&o, MultiplicityMode::Uniform, 255, 5);
        let q = gen_pair(&o, MultiplicityMode::Uniform, 255, 5);
        assert_eq!((&p.a, &p.b), (&q.a, &q.b));
        let r = gen_pair(&o, MultiplicityMode::Uniform, 255, 6);
        assert_ne!(q.a, r.a);
    }

    #[test]
    fn fixed_mode_and_multdiff() {
        let o = Overlap {
            n_common: 10,
            n_multdiff: 10,
            n_unique_a: 0,
            n_unique_b: 0,
        };
        let p = gen_pair(&o, MultiplicityMode::Fixed(10), 255, 1);
        let differing =
            p.a.iter()
                .filter(|(x, m)| p.b.multiplicity(x) != *m)
                .count();
        assert_eq!(differing, 10);
        assert!(p
            .a
            .iter()
            .chain(p.b.iter())
            .all(|(_, m)| (1..=255).contains(&m)));
        assert!(p.a.iter().filter(|(_, m)| *m == 10).count() >= 10);
    }

    #[test]
    fn impossible_spec_is_a_config_error() {
        let mut cfg = ExperimentConfig {
            max_multiplicity: 1,
            ..ExperimentConfig::default()
        };
        assert!(gen_multiset_pair(&cfg, 1).is_err());
        cfg.max_multiplicity = 255;
        cfg.overlap.n_unique_a = 1 << 33;
        assert!(gen_multiset_pair(&cfg, 1).is_err());
    }
}
