//! Counting cuckoo filter.
//!
//! `b` buckets of `w` slots; each slot holds an `f`-bit fingerprint and a
//! `c`-bit counter recording the multiplicity of the element it stands for.
//! An element may live in one of two buckets, `h1 = hash(x) mod b` and
//! `h2 = h1 ^ (hash(fp) mod b)`. Because the alternate is derived from the
//! fingerprint alone, a resident entry can be relocated without its key.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::codec::{byte_width, put_uint, DecodeError, Reader};
use crate::hash::{derive_seed, digest, mix64};
use crate::multiset::Element;

pub const MAGIC: &[u8; 4] = b"CCF1";
pub const FORMAT_VERSION: u8 = 1;
/// Serialized header length in bytes.
pub const HEADER_LEN: usize = 24;

pub const DEFAULT_SLOTS: u8 = 4;
pub const DEFAULT_COUNTER_BITS: u8 = 8;

const STREAM_ALT: u64 = 1;
const STREAM_EVICT: u64 = 2;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CcfError {
    #[error("invalid filter parameters: {0}")]
    InvalidParams(String),
    #[error("count {count} outside counter range 1..={max}")]
    CountRange { count: u32, max: u32 },
    #[error("counter overflow: {existing} + {added} exceeds {max}")]
    CounterOverflow { existing: u32, added: u32, max: u32 },
}

/// Filter geometry, hashing seed, and relocation budget.
///
/// Two filters are comparable (by fingerprint and bucket) only when their
/// parameters are identical.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CcfParams {
    /// Bucket count; a power of two so XOR-derived alternates stay in range.
    pub buckets: u32,
    pub slots_per_bucket: u8,
    pub fingerprint_bits: u8,
    pub counter_bits: u8,
    /// Relocations attempted before an insert gives up.
    pub max_kicks: u32,
    pub seed: u64,
}

impl CcfParams {
    /// `buckets` is rounded up to a power of two (minimum 2). Slots default
    /// to 4, counters to 8 bits, and `max_kicks` to the bucket count.
    pub fn new(buckets: u32, fingerprint_bits: u8) -> Self {
        let buckets = buckets
            .max(2)
            .checked_next_power_of_two()
            .unwrap_or(1 << 31);
        CcfParams {
            buckets,
            slots_per_bucket: DEFAULT_SLOTS,
            fingerprint_bits,
            counter_bits: DEFAULT_COUNTER_BITS,
            max_kicks: buckets,
            seed: 0,
        }
    }

    /// Smallest power-of-two bucket count whose slots cover `items`.
    pub fn for_capacity(items: usize, slots_per_bucket: u8, fingerprint_bits: u8) -> Self {
        let w = usize::from(slots_per_bucket.max(1));
        let buckets = u32::try_from(items.div_ceil(w)).unwrap_or(u32::MAX);
        CcfParams {
            slots_per_bucket,
            ..CcfParams::new(buckets, fingerprint_bits)
        }
    }

    pub fn with_slots(mut self, w: u8) -> Self {
        self.slots_per_bucket = w;
        self
    }

    pub fn with_counter_bits(mut self, c: u8) -> Self {
        self.counter_bits = c;
        self
    }

    pub fn with_max_kicks(mut self, max_kicks: u32) -> Self {
        self.max_kicks = max_kicks;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), CcfError> {
        let bad = |m: String| Err(CcfError::InvalidParams(m));
        if self.buckets < 2 || !self.buckets.is_power_of_two() {
            return bad(format!(
                "bucket count {} must be a power of two >= 2",
                self.buckets
            ));
        }
        if self.slots_per_bucket == 0 {
            return bad("slots per bucket must be >= 1".into());
        }
        if !(1..=32).contains(&self.fingerprint_bits) {
            return bad(format!(
                "fingerprint bits {} outside 1..=32",
                self.fingerprint_bits
            ));
        }
        if !(1..=32).contains(&self.counter_bits) {
            return bad(format!("counter bits {} outside 1..=32", self.counter_bits));
        }
        if self.max_kicks == 0 {
            return bad("max_kicks must be >= 1".into());
        }
        Ok(())
    }

    pub fn slot_count(&self) -> usize {
        self.buckets as usize * usize::from(self.slots_per_bucket)
    }

    pub fn max_count(&self) -> u32 {
        low_mask(self.counter_bits)
    }

    pub fn max_fingerprint(&self) -> u32 {
        low_mask(self.fingerprint_bits)
    }

    /// Bits per slot as stored in memory: fingerprint plus counter.
    pub fn slot_bits(&self) -> u32 {
        u32::from(self.fingerprint_bits) + u32::from(self.counter_bits)
    }

    /// Total filter bits, `b * w * (f + c)`.
    pub fn total_bits(&self) -> u64 {
        self.slot_count() as u64 * u64::from(self.slot_bits())
    }

    /// Encoded length of a filter with these parameters.
    pub fn serialized_len(&self) -> usize {
        HEADER_LEN
            + self.slot_count()
                * (byte_width(self.fingerprint_bits) + byte_width(self.counter_bits))
    }

    /// The fingerprint of `x`, never the empty sentinel 0.
    pub fn fingerprint_of(&self, x: &Element) -> u32 {
        self.candidates(x).fingerprint
    }

    pub fn candidates(&self, x: &Element) -> Candidates {
        let d = digest(x.as_bytes(), self.seed);
        let primary = (d as usize) & self.bucket_mask();
        let mut fingerprint = ((d >> 32) as u32) & self.max_fingerprint();
        if fingerprint == 0 {
            fingerprint = 1;
        }
        Candidates {
            primary,
            alternate: self.alt_bucket(primary, fingerprint),
            fingerprint,
        }
    }

    /// The partner of bucket `i` for an entry with fingerprint `fp`. An
    /// involution: applying it twice returns `i`.
    #[inline]
    pub fn alt_bucket(&self, i: usize, fp: u32) -> usize {
        i ^ self.fingerprint_offset(fp)
    }

    /// `hash(fp) mod b`; a re-hash of the fingerprint value, not the value
    /// itself, so alternates spread over the whole table.
    #[inline]
    pub fn fingerprint_offset(&self, fp: u32) -> usize {
        let h = mix64(u64::from(fp) ^ derive_seed(self.seed, STREAM_ALT));
        (h as usize) & self.bucket_mask()
    }

    #[inline]
    fn bucket_mask(&self) -> usize {
        self.buckets as usize - 1
    }
}

#[inline]
fn low_mask(bits: u8) -> u32 {
    if bits >= 32 {
        u32::MAX
    } else {
        (1u32 << bits) - 1
    }
}

/// An element's two candidate buckets and its fingerprint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Candidates {
    pub primary: usize,
    pub alternate: usize,
    pub fingerprint: u32,
}

impl Candidates {
    /// Order-free identity of the (bucket pair, fingerprint) tuple. Two
    /// elements with the same key are indistinguishable to the filter.
    pub fn tuple_key(&self) -> (usize, usize, u32) {
        let (lo, hi) = if self.primary <= self.alternate {
            (self.primary, self.alternate)
        } else {
            (self.alternate, self.primary)
        };
        (lo, hi, self.fingerprint)
    }

    fn buckets(&self) -> impl Iterator<Item = usize> {
        let second = (self.alternate != self.primary).then_some(self.alternate);
        std::iter::once(self.primary).chain(second)
    }
}

/// A filter slot. Fingerprint 0 marks an empty slot, whose counter is 0 too.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct Slot {
    pub fingerprint: u32,
    pub counter: u32,
}

impl Slot {
    pub const EMPTY: Slot = Slot {
        fingerprint: 0,
        counter: 0,
    };

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.fingerprint == 0
    }
}

/// Where a lookup found a fingerprint, and how much of the table it read.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Probe {
    pub count: u32,
    /// `(bucket, slot)` of the first matching slot.
    pub location: Option<(usize, usize)>,
    pub buckets_examined: usize,
    pub slots_examined: usize,
}

/// Counting cuckoo filter.
///
/// Not internally synchronized: mutation needs `&mut self`, and any number of
/// readers may share `&Ccf` between threads.
#[derive(Debug, Clone)]
pub struct Ccf {
    params: CcfParams,
    slots: Vec<Slot>,
    stored: usize,
    rng: ChaCha8Rng,
}

impl PartialEq for Ccf {
    fn eq(&self, other: &Self) -> bool {
        self.params == other.params && self.slots == other.slots
    }
}

impl Eq for Ccf {}

impl Ccf {
    pub fn new(params: CcfParams) -> Result<Self, CcfError> {
        params.validate()?;
        Ok(Ccf {
            params,
            slots: vec![Slot::EMPTY; params.slot_count()],
            stored: 0,
            rng: ChaCha8Rng::seed_from_u64(derive_seed(params.seed, STREAM_EVICT)),
        })
    }

    pub fn params(&self) -> &CcfParams {
        &self.params
    }

    /// Occupied slots.
    pub fn len(&self) -> usize {
        self.stored
    }

    pub fn is_empty(&self) -> bool {
        self.stored == 0
    }

    pub fn capacity(&self) -> usize {
        self.slots.len()
    }

    /// Fraction of slots holding an entry.
    pub fn occupancy(&self) -> f64 {
        self.stored as f64 / self.slots.len() as f64
    }

    pub fn bucket(&self, i: usize) -> &[Slot] {
        let w = self.w();
        &self.slots[i * w..(i + 1) * w]
    }

    /// All slots in bucket-major order.
    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    pub fn candidates(&self, x: &Element) -> Candidates {
        self.params.candidates(x)
    }

    #[inline]
    fn w(&self) -> usize {
        usize::from(self.params.slots_per_bucket)
    }

    /// Scans `bucket` for `fp`, returning the slot index within the bucket.
    pub fn find_in_bucket(&self, bucket: usize, fp: u32) -> Option<usize> {
        self.bucket(bucket).iter().position(|s| s.fingerprint == fp)
    }

    /// Looks `c` up: bucket `primary` slots in order, then `alternate`.
    pub fn probe_candidates(&self, c: &Candidates) -> Probe {
        let w = self.w();
        let mut probe = Probe {
            count: 0,
            location: None,
            buckets_examined: 0,
            slots_examined: 0,
        };
        for bucket in c.buckets() {
            probe.buckets_examined += 1;
            for (j, slot) in self.bucket(bucket).iter().enumerate() {
                probe.slots_examined += 1;
                if slot.fingerprint == c.fingerprint {
                    probe.count = slot.counter;
                    probe.location = Some((bucket, j));
                    return probe;
                }
            }
        }
        debug_assert!(probe.slots_examined <= 2 * w);
        probe
    }

    pub fn probe(&self, x: &Element) -> Probe {
        self.probe_candidates(&self.candidates(x))
    }

    /// Stored multiplicity of `x`, or 0 when its fingerprint is in neither
    /// candidate bucket.
    pub fn query(&self, x: &Element) -> u32 {
        self.probe(x).count
    }

    /// Records `count` replicas of `x`.
    ///
    /// Returns `Ok(false)` when the relocation budget runs out; the filter is
    /// then full and is left exactly as it was before the call. If `x`'s
    /// fingerprint already sits in one of its buckets the counters are summed.
    pub fn insert(&mut self, x: &Element, count: u32) -> Result<bool, CcfError> {
        let c = self.candidates(x);
        self.insert_candidates(&c, count)
    }

    pub fn insert_candidates(&mut self, c: &Candidates, count: u32) -> Result<bool, CcfError> {
        let max = self.params.max_count();
        if count == 0 || count > max {
            return Err(CcfError::CountRange { count, max });
        }
        let w = self.w();

        if let Some((bucket, j)) = self.probe_candidates(c).location {
            let slot = &mut self.slots[bucket * w + j];
            let sum = u64::from(slot.counter) + u64::from(count);
            if sum > u64::from(max) {
                return Err(CcfError::CounterOverflow {
                    existing: slot.counter,
                    added: count,
                    max,
                });
            }
            slot.counter = sum as u32;
            return Ok(true);
        }

        let entry = Slot {
            fingerprint: c.fingerprint,
            counter: count,
        };
        if let Some(idx) = c.buckets().find_map(|b| self.empty_slot(b)) {
            self.slots[idx] = entry;
            self.stored += 1;
            return Ok(true);
        }

        // Both buckets full: evict a random resident of either and walk its
        // relocation chain. Every overwrite is logged so a failed walk can be
        // rolled back.
        let pick = self.rng.gen_range(0..2 * w);
        let mut bucket = if pick < w { c.primary } else { c.alternate };
        let mut idx = bucket * w + pick % w;
        let mut log = Vec::with_capacity(16);
        log.push((idx, self.slots[idx]));
        let mut victim = std::mem::replace(&mut self.slots[idx], entry);

        for _ in 0..self.params.max_kicks {
            bucket = self.params.alt_bucket(bucket, victim.fingerprint);
            if let Some(free) = self.empty_slot(bucket) {
                self.slots[free] = victim;
                self.stored += 1;
                return Ok(true);
            }
            idx = bucket * w + self.rng.gen_range(0..w);
            log.push((idx, self.slots[idx]));
            victim = std::mem::replace(&mut self.slots[idx], victim);
        }

        for (idx, prev) in log.into_iter().rev() {
            self.slots[idx] = prev;
        }
        Ok(false)
    }

    /// Clears the slot holding `x`'s fingerprint, dropping all its replicas.
    /// Returns false if the fingerprint is in neither candidate bucket.
    pub fn delete(&mut self, x: &Element) -> bool {
        match self.probe(x).location {
            Some((bucket, j)) => {
                let w = self.w();
                self.slots[bucket * w + j] = Slot::EMPTY;
                self.stored -= 1;
                true
            }
            None => false,
        }
    }

    /// Empties slot `j` of `bucket`. Returns false if it was already empty.
    pub fn clear_slot(&mut self, bucket: usize, j: usize) -> bool {
        let idx = bucket * self.w() + j;
        if self.slots[idx].is_empty() {
            return false;
        }
        self.slots[idx] = Slot::EMPTY;
        self.stored -= 1;
        true
    }

    /// Overwrites the counter of a non-empty slot.
    pub(crate) fn set_counter(&mut self, bucket: usize, j: usize, counter: u32) {
        let idx = bucket * self.w() + j;
        debug_assert!(!self.slots[idx].is_empty() && counter > 0);
        self.slots[idx].counter = counter;
    }

    fn empty_slot(&self, bucket: usize) -> Option<usize> {
        let w = self.w();
        self.bucket(bucket)
            .iter()
            .position(Slot::is_empty)
            .map(|j| bucket * w + j)
    }

    /// Big-endian encoding: header, then every slot in bucket-major order as
    /// `ceil(f/8)` fingerprint bytes followed by `ceil(c/8)` counter bytes.
    pub fn to_bytes(&self) -> Vec<u8> {
        let p = &self.params;
        let mut out = Vec::with_capacity(p.serialized_len());
        write_header(p, &mut out);
        let (fw, cw) = (byte_width(p.fingerprint_bits), byte_width(p.counter_bits));
        for s in &self.slots {
            put_uint(&mut out, s.fingerprint, fw);
            put_uint(&mut out, s.counter, cw);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Ccf, DecodeError> {
        let mut r = Reader::new(bytes);
        let params = read_header(&mut r)?;
        let mut ccf = Ccf::new(params).map_err(|e| DecodeError::InvalidParams(e.to_string()))?;
        let (fw, cw) = (
            byte_width(params.fingerprint_bits),
            byte_width(params.counter_bits),
        );
        let (max_fp, max_count) = (params.max_fingerprint(), params.max_count());
        for index in 0..ccf.slots.len() {
            let fingerprint = r.uint(fw)?;
            let counter = r.uint(cw)?;
            let valid = fingerprint <= max_fp
                && counter <= max_count
                && (fingerprint == 0) == (counter == 0);
            if !valid {
                return Err(DecodeError::InvalidSlot { index });
            }
            if fingerprint != 0 {
                ccf.stored += 1;
            }
            ccf.slots[index] = Slot {
                fingerprint,
                counter,
            };
        }
        r.finish()?;
        Ok(ccf)
    }
}

/// The 24-byte header alone; also the parameter blob exchanged in handshakes.
pub fn write_header(p: &CcfParams, out: &mut Vec<u8>) {
    out.extend_from_slice(MAGIC);
    out.push(FORMAT_VERSION);
    out.extend_from_slice(&p.buckets.to_be_bytes());
    out.push(p.slots_per_bucket);
    out.push(p.fingerprint_bits);
    out.push(p.counter_bits);
    out.extend_from_slice(&p.max_kicks.to_be_bytes());
    out.extend_from_slice(&p.seed.to_be_bytes());
}

pub(crate) fn read_header(r: &mut Reader<'_>) -> Result<CcfParams, DecodeError> {
    r.magic(MAGIC)?;
    let version = r.u8()?;
    if version != FORMAT_VERSION {
        return Err(DecodeError::UnsupportedVersion(version));
    }
    let buckets = r.u32()?;
    let params = CcfParams {
        buckets,
        slots_per_bucket: r.u8()?,
        fingerprint_bits: r.u8()?,
        counter_bits: r.u8()?,
        max_kicks: r.u32()?,
        seed: r.u64()?,
    };
    if !buckets.is_power_of_two() {
        return Err(DecodeError::NotPowerOfTwo(buckets));
    }
    params
        .validate()
        .map_err(|e| DecodeError::InvalidParams(e.to_string()))?;
    Ok(params)
}

pub fn params_from_header(bytes: &[u8]) -> Result<CcfParams, DecodeError> {
    let mut r = Reader::new(bytes);
    let p = read_header(&mut r)?;
    r.finish()?;
    Ok(p)
}

/// Counts elements whose (bucket pair, fingerprint) tuple is shared with at
/// least one other observed element.
#[derive(Debug, Default, Clone)]
pub struct CollisionDetector {
    groups: HashMap<(usize, usize, u32), u32>,
    collided: usize,
    pairs: usize,
}

impl CollisionDetector {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records one distinct element. Returns true if its tuple was seen before.
    pub fn observe(&mut self, c: &Candidates) -> bool {
        let n = self.groups.entry(c.tuple_key()).or_insert(0);
        *n += 1;
        match *n {
            1 => false,
            2 => {
                self.collided += 2;
                self.pairs += 1;
                true
            }
            k => {
                self.collided += 1;
                self.pairs += (k - 1) as usize;
                true
            }
        }
    }

    /// Elements that share their tuple with some other element.
    pub fn collided_elements(&self) -> usize {
        self.collided
    }

    /// Unordered element pairs sharing a tuple.
    pub fn colliding_pairs(&self) -> usize {
        self.pairs
    }

    pub fn is_collision_free(&self) -> bool {
        self.collided == 0
    }
}
