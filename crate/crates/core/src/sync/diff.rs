//! Difference identification at one host.
//!
//! Given the local multiset and the peer's filter, split the local root set
//! into elements the peer lacks entirely (`transmit`, sent with their
//! multiplicity) and elements the peer holds more replicas of (`replicate`,
//! grown locally by the delta). Everything else needs no action here.

use thiserror::Error;

use crate::cbf::Cbf;
use crate::ccf::Ccf;
use crate::multiset::{Element, Multiset};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DiffError {
    #[error("local and remote filters use different parameters")]
    ParamMismatch,
}

/// One host's view of the difference.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DiffResult {
    /// Elements absent from the peer, with the local multiplicity.
    pub transmit: Vec<(Element, u32)>,
    /// Elements the peer holds more of, with `m_remote - m_local`.
    pub replicate: Vec<(Element, u32)>,
}

impl DiffResult {
    pub fn is_empty(&self) -> bool {
        self.transmit.is_empty() && self.replicate.is_empty()
    }

    /// Entries present in exactly one of `self` and `other`, counting an
    /// entry with a different multiplicity as two.
    pub fn mismatches(&self, other: &DiffResult) -> usize {
        sorted_sym(&self.transmit, &other.transmit) + sorted_sym(&self.replicate, &other.replicate)
    }
}

fn sorted_sym(a: &[(Element, u32)], b: &[(Element, u32)]) -> usize {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_unstable();
    b.sort_unstable();
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Equal => {
                i += 1;
                j += 1;
            }
            std::cmp::Ordering::Less => {
                n += 1;
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                n += 1;
                j += 1;
            }
        }
    }
    n + (a.len() - i) + (b.len() - j)
}

/// Work done by a difference computation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DiffStats {
    pub filter_queries: usize,
    /// Non-empty local slots visited in the elimination pass.
    pub slots_visited: usize,
}

/// Exact classification from both multisets; the reference every
/// filter-based method is measured against.
pub fn ground_truth(local: &Multiset, remote: &Multiset) -> DiffResult {
    classify(local, |x| remote.multiplicity(x))
}

fn classify(local: &Multiset, mut remote_count: impl FnMut(&Element) -> u32) -> DiffResult {
    let mut out = DiffResult::default();
    for (x, m) in local.iter() {
        match remote_count(x) {
            0 => out.transmit.push((x.clone(), m)),
            r if r > m => out.replicate.push((x.clone(), r - m)),
            _ => {}
        }
    }
    out
}

/// Query-based identification: look every local element up in the peer's
/// counting cuckoo filter.
pub fn diff_query(local: &Multiset, remote: &Ccf) -> (DiffResult, DiffStats) {
    let mut queries = 0;
    let diff = classify(local, |x| {
        queries += 1;
        remote.query(x)
    });
    (
        diff,
        DiffStats {
            filter_queries: queries,
            slots_visited: 0,
        },
    )
}

/// Same classification against a counting Bloom filter, whose min-counter
/// estimate can only overstate the peer's multiplicity.
pub fn diff_cbf(local: &Multiset, remote: &Cbf) -> (DiffResult, DiffStats) {
    let mut queries = 0;
    let diff = classify(local, |x| {
        queries += 1;
        remote.query(x)
    });
    (
        diff,
        DiffStats {
            filter_queries: queries,
            slots_visited: 0,
        },
    )
}

/// Per-slot flag bits over a working copy of the local filter. Set means
/// the slot now holds a replica delta; clear means the peer lacks it.
#[derive(Debug, Clone)]
pub struct DecodeOverlay {
    flags: Vec<bool>,
}

impl DecodeOverlay {
    fn new(slots: usize) -> Self {
        DecodeOverlay {
            flags: vec![false; slots],
        }
    }

    pub fn get(&self, index: usize) -> bool {
        self.flags[index]
    }
}

/// Decoding-based identification.
///
/// Pass one eliminates common entries from a working copy of `local_ccf`:
/// each non-empty slot's fingerprint is searched in the matching two buckets
/// of `remote`. Found with a larger remote count, the slot is flagged and its
/// counter becomes the difference; found otherwise, the slot is cleared; not
/// found, it stays unflagged. Pass two walks the local root set and reads
/// each element's surviving slot, matched by fingerprint within its own
/// candidate buckets.
///
/// The caller's filters are not modified.
pub fn diff_decode(
    local: &Multiset,
    local_ccf: &Ccf,
    remote: &Ccf,
) -> Result<(DiffResult, DiffStats), DiffError> {
    if local_ccf.params() != remote.params() {
        return Err(DiffError::ParamMismatch);
    }
    let params = *local_ccf.params();
    let w = usize::from(params.slots_per_bucket);
    let mut work = local_ccf.clone();
    let mut overlay = DecodeOverlay::new(work.capacity());
    let mut stats = DiffStats::default();

    for bucket in 0..params.buckets as usize {
        for j in 0..w {
            let slot = work.bucket(bucket)[j];
            if slot.is_empty() {
                continue;
            }
            stats.slots_visited += 1;
            let alt = params.alt_bucket(bucket, slot.fingerprint);
            let found = std::iter::once(bucket)
                .chain((alt != bucket).then_some(alt))
                .find_map(|b| {
                    remote
                        .find_in_bucket(b, slot.fingerprint)
                        .map(|k| remote.bucket(b)[k].counter)
                });
            match found {
                Some(remote_count) if remote_count > slot.counter => {
                    overlay.flags[bucket * w + j] = true;
                    work.set_counter(bucket, j, remote_count - slot.counter);
                }
                Some(_) => {
                    work.clear_slot(bucket, j);
                }
                None => overlay.flags[bucket * w + j] = false,
            }
        }
    }

    let mut out = DiffResult::default();
    for (x, m) in local.iter() {
        let probe = work.probe(x);
        let Some((bucket, j)) = probe.location else {
            continue;
        };
        if overlay.get(bucket * w + j) {
            out.replicate.push((x.clone(), probe.count));
        } else {
            out.transmit.push((x.clone(), m));
        }
    }
    Ok((out, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cbf::CbfParams;
    use crate::ccf::{CcfParams, CollisionDetector};

    fn e(s: &str) -> Element {
        Element::new(s.as_bytes()).unwrap()
    }

    fn ms(pairs: &[(&str, u32)]) -> Multiset {
        pairs.iter().map(|&(s, m)| (e(s), m)).collect()
    }

    fn build(ms: &Multiset, p: CcfParams) -> Ccf {
        let mut f = Ccf::new(p).unwrap();
        for (x, m) in ms.iter() {
            assert!(f.insert(x, m).unwrap());
        }
        f
    }

    /// A seed under which the given elements have pairwise distinct tuples.
    fn collision_free_params(elements: &[&str]) -> CcfParams {
        (0..)
            .map(|s| CcfParams::new(64, 16).with_seed(s))
            .find(|p| {
                let mut det = CollisionDetector::new();
                elements.iter().for_each(|x| {
                    det.observe(&p.candidates(&e(x)));
                });
                det.is_collision_free()
            })
            .unwrap()
    }

    #[test]
    fn truth_example() {
        let a = ms(&[("x", 2), ("y", 1)]);
        let b = ms(&[("x", 5), ("z", 2)]);
        let t = ground_truth(&a, &b);
        assert_eq!(t.transmit, vec![(e("y"), 1)]);
        assert_eq!(t.replicate, vec![(e("x"), 3)]);
        let t = ground_truth(&b, &a);
        assert_eq!(t.transmit, vec![(e("z"), 2)]);
        assert!(t.replicate.is_empty());
    }

    #[test]
    fn query_method_examples() {
        let p = collision_free_params(&["x", "y", "z"]);
        let a = ms(&[("x", 2), ("y", 1)]);
        let b = ms(&[("x", 5), ("z", 2)]);
        let (same, _) = diff_query(&a, &build(&a, p));
        assert!(same.is_empty());
        let (d, stats) = diff_query(&a, &build(&b, p));
        assert_eq!(d, ground_truth(&a, &b));
        assert_eq!(stats.filter_queries, a.root_len());
        let (d, _) = diff_query(&ms(&[("x", 3)]), &Ccf::new(p).unwrap());
        assert_eq!(d.transmit, vec![(e("x"), 3)]);
        assert!(d.replicate.is_empty());
    }

    #[test]
    fn decode_method_examples() {
        let p = collision_free_params(&["x", "y", "z"]);
        let a = ms(&[("x", 2), ("y", 1)]);
        let b = ms(&[("x", 5), ("z", 2)]);
        let (fa, fb) = (build(&a, p), build(&b, p));
        let (d, stats) = diff_decode(&a, &fa, &fb).unwrap();
        assert_eq!(d, ground_truth(&a, &b));
        assert_eq!(d, diff_query(&a, &fb).0);
        assert_eq!(stats.slots_visited, fa.len());
        let (same, _) = diff_decode(&a, &fa, &fa).unwrap();
        assert!(same.is_empty());
        // Input filters untouched.
        assert_eq!(fa, build(&a, p));
    }

    #[test]
    fn decode_clears_equal_counts() {
        let p = collision_free_params(&["x"]);
        let a = ms(&[("x", 2)]);
        let fa = build(&a, p);
        let (d, stats) = diff_decode(&a, &fa, &build(&a, p)).unwrap();
        assert!(d.is_empty());
        assert_eq!(stats.slots_visited, 1);
    }

    #[test]
    fn decode_rejects_mismatched_params() {
        let a = ms(&[("x", 2)]);
        let fa = build(&a, CcfParams::new(64, 16).with_seed(1));
        let fb = build(&a, CcfParams::new(64, 16).with_seed(2));
        assert_eq!(
            diff_decode(&a, &fa, &fb).unwrap_err(),
            DiffError::ParamMismatch
        );
    }

    #[test]
    fn cbf_method_examples() {
        let cp = CbfParams::new(4096, 4, 16).with_seed(3);
        let a = ms(&[("x", 2), ("y", 1)]);
        let mut fa = Cbf::new(cp).unwrap();
        for (x, m) in a.iter() {
            fa.insert(x, m).unwrap();
        }
        assert!(diff_cbf(&a, &fa).0.is_empty());
        let (d, _) = diff_cbf(&ms(&[("x", 3)]), &Cbf::new(cp).unwrap());
        assert_eq!(d.transmit, vec![(e("x"), 3)]);
    }

    #[test]
    fn cbf_overestimate_turns_transmit_into_replicate() {
        // m=1: every element shares the single counter, so a remote holding
        // anything makes a locally unique element look present.
        let cp = CbfParams::new(1, 1, 16);
        let mut remote = Cbf::new(cp).unwrap();
        remote.insert(&e("z"), 5).unwrap();
        let a = ms(&[("y", 1)]);
        let (d, _) = diff_cbf(&a, &remote);
        assert!(d.transmit.is_empty());
        assert_eq!(d.replicate, vec![(e("y"), 4)]);
        assert_eq!(d.mismatches(&ground_truth(&a, &ms(&[("z", 5)]))), 2);
    }

    #[test]
    fn mismatch_counting() {
        let a = DiffResult {
            transmit: vec![(e("a"), 1), (e("b"), 2)],
            replicate: vec![(e("c"), 1)],
        };
        let b = DiffResult {
            transmit: vec![(e("a"), 1), (e("b"), 3)],
            replicate: vec![],
        };
        assert_eq!(a.mismatches(&b), 3);
        assert_eq!(a.mismatches(&a), 0);
        let big: Vec<_> = (0..100).map(|v| (Element::from_u32(v), 1)).collect();
        let x = DiffResult {
            transmit: big.clone(),
            replicate: vec![],
        };
        let y = DiffResult {
            transmit: big[1..].to_vec(),
            replicate: vec![],
        };
        assert_eq!(x.mismatches(&y), 1);
    }
}
