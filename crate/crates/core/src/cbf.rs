//! Counting Bloom filter baseline.
//!
//! `m` counters addressed by `k` double-hashed indices
//! `h_i(x) = (g1(x) + i * g2(x)) mod m`. Multiplicity is estimated by the
//! smallest of the `k` counters, which can overestimate but never
//! underestimates.

use thiserror::Error;

use crate::codec::{byte_width, put_uint, DecodeError, Reader};
use crate::hash::digest;
use crate::multiset::Element;
use crate::scalar::Scalar;

pub const MAGIC: &[u8; 4] = b"CBF1";
pub const FORMAT_VERSION: u8 = 1;
/// Serialized header length in bytes.
pub const HEADER_LEN: usize = 27;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CbfError {
    #[error("invalid filter parameters: {0}")]
    InvalidParams(String),
    #[error("counter {index} would overflow")]
    Overflow { index: usize },
    #[error("counter {index} would drop below zero")]
    Underflow { index: usize },
    #[error("filters were built with different parameters")]
    ParamMismatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CbfParams {
    pub counters: u32,
    pub hashes: u8,
    pub counter_bits: u8,
    pub seeds: [u64; 2],
}

impl CbfParams {
    pub fn new(counters: u32, hashes: u8, counter_bits: u8) -> Self {
        CbfParams {
            counters,
            hashes,
            counter_bits,
            seeds: [0x5eed_0001, 0x5eed_0002],
        }
    }

    /// Derives both seeds from one.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seeds = [
            crate::hash::derive_seed(seed, 0xcbf1),
            crate::hash::derive_seed(seed, 0xcbf2),
        ];
        self
    }

    pub fn validate(&self) -> Result<(), CbfError> {
        let bad = |m: String| Err(CbfError::InvalidParams(m));
        if self.counters == 0 {
            return bad("counter count must be >= 1".into());
        }
        if !(1..=32).contains(&self.hashes) {
            return bad(format!("hash count {} outside 1..=32", self.hashes));
        }
        if !(8..=32).contains(&self.counter_bits) {
            return bad(format!("counter bits {} outside 8..=32", self.counter_bits));
        }
        Ok(())
    }

    pub fn max_count(&self) -> u32 {
        if self.counter_bits >= 32 {
            u32::MAX
        } else {
            (1u32 << self.counter_bits) - 1
        }
    }

    pub fn total_bits(&self) -> u64 {
        u64::from(self.counters) * u64::from(self.counter_bits)
    }

    pub fn serialized_len(&self) -> usize {
        HEADER_LEN + self.counters as usize * byte_width(self.counter_bits)
    }

    /// `(g1(x) mod m, g2(x) mod m)`; `g2` is forced odd before reduction so
    /// the stride is never zero for even `m`.
    fn bases(&self, x: &Element) -> (u64, u64) {
        let m = u64::from(self.counters);
        let g1 = digest(x.as_bytes(), self.seeds[0]);
        let g2 = digest(x.as_bytes(), self.seeds[1]) | 1;
        (g1 % m, g2 % m)
    }

    /// Counter position of the `i`-th hash of `x`.
    pub fn index(&self, x: &Element, i: u8) -> usize {
        let (g1, g2) = self.bases(x);
        ((g1 + u64::from(i) * g2) % u64::from(self.counters)) as usize
    }

    pub fn indices(&self, x: &Element) -> impl Iterator<Item = usize> {
        let (g1, g2) = self.bases(x);
        let m = u64::from(self.counters);
        (0..u64::from(self.hashes)).map(move |i| ((g1 + i * g2) % m) as usize)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cbf {
    params: CbfParams,
    counters: Vec<u32>,
}

impl Cbf {
    pub fn new(params: CbfParams) -> Result<Self, CbfError> {
        params.validate()?;
        Ok(Cbf {
            params,
            counters: vec![0; params.counters as usize],
        })
    }

    pub fn params(&self) -> &CbfParams {
        &self.params
    }

    pub fn counters(&self) -> &[u32] {
        &self.counters
    }

    /// Adds `count` at all `k` positions of `x`, or changes nothing and
    /// reports the first counter that would overflow.
    pub fn insert(&mut self, x: &Element, count: u32) -> Result<(), CbfError> {
        let max = self.params.max_count();
        let idx: Vec<usize> = self.params.indices(x).collect();
        // Indices may repeat for small m; check against accumulated totals.
        let mut pending: Vec<(usize, u64)> = Vec::with_capacity(idx.len());
        for &i in &idx {
            match pending.iter_mut().find(|(j, _)| *j == i) {
                Some((_, add)) => *add += u64::from(count),
                None => pending.push((i, u64::from(count))),
            }
        }
        if let Some(&(index, _)) = pending
            .iter()
            .find(|&&(i, add)| u64::from(self.counters[i]) + add > u64::from(max))
        {
            return Err(CbfError::Overflow { index });
        }
        for i in idx {
            self.counters[i] += count;
        }
        Ok(())
    }

    /// Inverse of [`Cbf::insert`].
    pub fn delete(&mut self, x: &Element, count: u32) -> Result<(), CbfError> {
        let idx: Vec<usize> = self.params.indices(x).collect();
        let mut pending: Vec<(usize, u64)> = Vec::with_capacity(idx.len());
        for &i in &idx {
            match pending.iter_mut().find(|(j, _)| *j == i) {
                Some((_, sub)) => *sub += u64::from(count),
                None => pending.push((i, u64::from(count))),
            }
        }
        if let Some(&(index, _)) = pending
            .iter()
            .find(|&&(i, sub)| u64::from(self.counters[i]) < sub)
        {
            return Err(CbfError::Underflow { index });
        }
        for i in idx {
            self.counters[i] -= count;
        }
        Ok(())
    }

    /// Minimum over the `k` counters of `x`.
    pub fn query(&self, x: &Element) -> u32 {
        self.params
            .indices(x)
            .map(|i| self.counters[i])
            .min()
            .unwrap_or(0)
    }

    /// Per-position difference `self - other`, floored at zero.
    pub fn subtract(&self, other: &Cbf) -> Result<Cbf, CbfError> {
        if self.params != other.params {
            return Err(CbfError::ParamMismatch);
        }
        Ok(Cbf {
            params: self.params,
            counters: self
                .counters
                .iter()
                .zip(&other.counters)
                .map(|(a, b)| a.saturating_sub(*b))
                .collect(),
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let p = &self.params;
        let mut out = Vec::with_capacity(p.serialized_len());
        write_header(p, &mut out);
        let width = byte_width(p.counter_bits);
        for &c in &self.counters {
            put_uint(&mut out, c, width);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Cbf, DecodeError> {
        let mut r = Reader::new(bytes);
        let params = read_header(&mut r)?;
        let width = byte_width(params.counter_bits);
        let max = params.max_count();
        let mut counters = Vec::with_capacity(params.counters as usize);
        for index in 0..params.counters as usize {
            let c = r.uint(width)?;
            if c > max {
                return Err(DecodeError::InvalidSlot { index });
            }
            counters.push(c);
        }
        r.finish()?;
        Ok(Cbf { params, counters })
    }
}

/// Magic, version, `m` u32, `k` u8, `c` u8, two u64 seeds.
pub fn write_header(p: &CbfParams, out: &mut Vec<u8>) {
    out.extend_from_slice(MAGIC);
    out.push(FORMAT_VERSION);
    out.extend_from_slice(&p.counters.to_be_bytes());
    out.push(p.hashes);
    out.push(p.counter_bits);
    out.extend_from_slice(&p.seeds[0].to_be_bytes());
    out.extend_from_slice(&p.seeds[1].to_be_bytes());
}

pub(crate) fn read_header(r: &mut Reader<'_>) -> Result<CbfParams, DecodeError> {
    r.magic(MAGIC)?;
    let version = r.u8()?;
    if version != FORMAT_VERSION {
        return Err(DecodeError::UnsupportedVersion(version));
    }
    let params = CbfParams {
        counters: r.u32()?,
        hashes: r.u8()?,
        counter_bits: r.u8()?,
        seeds: [r.u64()?, r.u64()?],
    };
    params
        .validate()
        .map_err(|e| DecodeError::InvalidParams(e.to_string()))?;
    Ok(params)
}

pub fn params_from_header(bytes: &[u8]) -> Result<CbfParams, DecodeError> {
    let mut r = Reader::new(bytes);
    let p = read_header(&mut r)?;
    r.finish()?;
    Ok(p)
}

/// Hash count minimizing the false positive rate, `round((m / n) ln 2)`,
/// at least 1.
pub fn optimal_k(m: u64, n: u64) -> u32 {
    let k = (m as f64 / n.max(1) as f64) * std::f64::consts::LN_2;
    (k.round() as u32).max(1)
}

/// Classic estimate `(1 - e^(-kn/m))^k`.
pub fn theoretical_fpr<T: Scalar + num_traits::Float>(m: u64, n: u64, k: u32) -> T {
    let m = T::from(m).unwrap();
    let n = T::from(n).unwrap();
    let k = T::from(k).unwrap();
    (T::one() - (-(k * n) / m).exp()).powf(k)
}
