//! Multisets of opaque byte-string elements.

use std::collections::btree_map::{self, BTreeMap};
use std::fmt;

use thiserror::Error;

use crate::scalar::{ratio_or_one, Scalar};

/// Longest element accepted, in bytes.
pub const MAX_ELEMENT_LEN: usize = 1024;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MultisetError {
    #[error("element length {0} outside 1..={MAX_ELEMENT_LEN}")]
    ElementLength(usize),
    #[error("multiplicity of {0} overflows u32")]
    MultiplicityOverflow(Element),
    #[error("replica delta for {0}, which is not present locally")]
    Inconsistency(Element),
    #[error("fixture line {line}: {reason}")]
    Fixture { line: usize, reason: String },
}

/// A multiset element: a non-empty byte string compared byte-wise.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Element(Box<[u8]>);

impl Element {
    pub fn new(bytes: impl Into<Vec<u8>>) -> Result<Self, MultisetError> {
        let bytes = bytes.into();
        if bytes.is_empty() || bytes.len() > MAX_ELEMENT_LEN {
            return Err(MultisetError::ElementLength(bytes.len()));
        }
        Ok(Element(bytes.into_boxed_slice()))
    }

    /// A 32-bit integer element, big-endian.
    pub fn from_u32(v: u32) -> Self {
        Element(Box::new(v.to_be_bytes()))
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl AsRef<[u8]> for Element {
    fn as_ref(&self) -> &[u8] {
        &self.0
    }
}

impl fmt::Debug for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Element({})", hex::encode(&self.0))
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&hex::encode(&self.0))
    }
}

/// Element-to-multiplicity map. Entries never hold multiplicity zero.
///
/// Iteration is in element byte order, so everything derived from a multiset
/// (filters, difference lists, fixtures) is deterministic.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Multiset {
    entries: BTreeMap<Element, u32>,
    cardinality: u64,
}

impl Multiset {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `k` replicas of `x`. Adding zero replicas is a no-op.
    pub fn add(&mut self, x: Element, k: u32) -> Result<(), MultisetError> {
        if k == 0 {
            return Ok(());
        }
        match self.entries.entry(x) {
            btree_map::Entry::Vacant(v) => {
                v.insert(k);
            }
            btree_map::Entry::Occupied(mut o) => {
                let sum = o
                    .get()
                    .checked_add(k)
                    .ok_or_else(|| MultisetError::MultiplicityOverflow(o.key().clone()))?;
                *o.get_mut() = sum;
            }
        }
        self.cardinality += u64::from(k);
        Ok(())
    }

    /// Removes up to `k` replicas of `x`, returning how many were removed.
    pub fn remove(&mut self, x: &Element, k: u32) -> u32 {
        let Some(m) = self.entries.get_mut(x) else {
            return 0;
        };
        let removed = k.min(*m);
        *m -= removed;
        if *m == 0 {
            self.entries.remove(x);
        }
        self.cardinality -= u64::from(removed);
        removed
    }

    pub fn multiplicity(&self, x: &Element) -> u32 {
        self.entries.get(x).copied().unwrap_or(0)
    }

    pub fn contains(&self, x: &Element) -> bool {
        self.entries.contains_key(x)
    }

    /// Sum of all multiplicities.
    pub fn cardinality(&self) -> u64 {
        self.cardinality
    }

    /// Number of distinct elements.
    pub fn root_len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// The distinct elements, in byte order.
    pub fn root_set(&self) -> impl Iterator<Item = &Element> + '_ {
        self.entries.keys()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Element, u32)> + '_ {
        self.entries.iter().map(|(x, &m)| (x, m))
    }

    /// Per-element maximum; the state both hosts converge to.
    pub fn union_max(&self, other: &Multiset) -> Multiset {
        let mut out = self.clone();
        for (x, m) in other.iter() {
            let cur = out.multiplicity(x);
            if m > cur {
                // Cannot overflow: m fits in u32 and replaces the smaller value.
                out.add(x.clone(), m - cur).expect("max fits in u32");
            }
        }
        out
    }

    /// Per-element minimum.
    pub fn intersection_min(&self, other: &Multiset) -> Multiset {
        let (small, large) = if self.root_len() <= other.root_len() {
            (self, other)
        } else {
            (other, self)
        };
        small
            .iter()
            .filter_map(|(x, m)| {
                let n = large.multiplicity(x);
                (n > 0).then(|| (x.clone(), m.min(n)))
            })
            .collect()
    }

    /// Synchronization accuracy: `sum(min) / sum(max)` over both multisets.
    ///
    /// Two empty multisets are already in sync and score one.
    pub fn accuracy<T: Scalar>(&self, other: &Multiset) -> T {
        let mut min_sum: u128 = 0;
        let mut max_sum: u128 = 0;
        for (x, m) in self.iter() {
            let n = other.multiplicity(x);
            min_sum += u128::from(m.min(n));
            max_sum += u128::from(m.max(n));
        }
        for (x, n) in other.iter() {
            if !self.contains(x) {
                max_sum += u128::from(n);
            }
        }
        ratio_or_one(min_sum, max_sum)
    }

    /// Applies the outcome of a difference computation: every `received`
    /// entry is added with its multiplicity, and every `replicas` entry grows
    /// an element already held locally by its delta.
    ///
    /// A replica delta for an absent element means the peer's filter produced
    /// a false match upstream; the multiset is left untouched in that case.
    pub fn apply_diff(
        &mut self,
        received: &[(Element, u32)],
        replicas: &[(Element, u32)],
    ) -> Result<(), MultisetError> {
        if let Some((x, _)) = replicas.iter().find(|(x, _)| !self.contains(x)) {
            return Err(MultisetError::Inconsistency(x.clone()));
        }
        let mut next = self.clone();
        for (x, k) in received.iter().chain(replicas) {
            next.add(x.clone(), *k)?;
        }
        *self = next;
        Ok(())
    }

    /// Text fixture: one `hex(element)\tmultiplicity` line per entry, in
    /// element byte order.
    pub fn to_fixture(&self) -> String {
        let mut out = String::new();
        for (x, m) in self.iter() {
            out.push_str(&hex::encode(x.as_bytes()));
            out.push('\t');
            out.push_str(&m.to_string());
            out.push('\n');
        }
        out
    }

    /// Parses [`Multiset::to_fixture`] output. Blank lines are skipped;
    /// repeated elements accumulate.
    pub fn from_fixture(text: &str) -> Result<Multiset, MultisetError> {
        let mut ms = Multiset::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let bad = |reason: String| MultisetError::Fixture {
                line: line_no,
                reason,
            };
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() {
                continue;
            }
            let (elem, mult) = line
                .split_once('\t')
                .ok_or_else(|| bad("missing tab separator".into()))?;
            let bytes = hex::decode(elem).map_err(|e| bad(e.to_string()))?;
            let m: u32 = mult.trim().parse().map_err(|e| bad(format!("{e}")))?;
            if m == 0 {
                return Err(bad("multiplicity must be at least 1".into()));
            }
            let x = Element::new(bytes).map_err(|e| bad(e.to_string()))?;
            ms.add(x, m)?;
        }
        Ok(ms)
    }
}

impl FromIterator<(Element, u32)> for Multiset {
    /// Panics if a multiplicity sum overflows `u32`.
    fn from_iter<I: IntoIterator<Item = (Element, u32)>>(iter: I) -> Self {
        let mut ms = Multiset::new();
        for (x, k) in iter {
            ms.add(x, k).expect("multiplicity overflow");
        }
        ms
    }
}

impl<'a> IntoIterator for &'a Multiset {
    type Item = (&'a Element, &'a u32);
    type IntoIter = btree_map::Iter<'a, Element, u32>;

    fn into_iter(self) -> Self::IntoIter {
        self.entries.iter()
    }
}
