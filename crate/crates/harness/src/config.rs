//! Experiment configuration and its flat `key = value` file format.

use std::fmt;
use std::str::FromStr;

use ccf_sync::sync::Method;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("unknown key {0:?}")]
    UnknownKey(String),
    #[error("{key}: {reason}")]
    Value { key: String, reason: String },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MultiplicityMode {
    /// Uniform on `[1, max_multiplicity]`.
    Uniform,
    /// Every element gets the same multiplicity.
    Fixed(u32),
}

impl FromStr for MultiplicityMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once(':') {
            None if s == "uniform" => Ok(MultiplicityMode::Uniform),
            Some(("fixed", n)) => n
                .parse()
                .ok()
                .filter(|&n| n > 0)
                .map(MultiplicityMode::Fixed)
                .ok_or_else(|| format!("bad fixed multiplicity {n:?}")),
            _ => Err(format!("expected `uniform` or `fixed:<n>`, got {s:?}")),
        }
    }
}

impl fmt::Display for MultiplicityMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MultiplicityMode::Uniform => f.write_str("uniform"),
            MultiplicityMode::Fixed(n) => write!(f, "fixed:{n}"),
        }
    }
}

/// How the two generated multisets relate, in distinct elements.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Overlap {
    /// Shared with equal multiplicity.
    pub n_common: usize,
    /// Shared with different multiplicities.
    pub n_multdiff: usize,
    pub n_unique_a: usize,
    pub n_unique_b: usize,
}

impl Overlap {
    /// An eighth common, an eighth with differing multiplicities, the rest
    /// unique to each side.
    pub fn mixed(n_distinct: usize) -> Self {
        let shared = n_distinct / 8;
        let unique = n_distinct - 2 * shared;
        Overlap {
            n_common: shared,
            n_multdiff: shared,
            n_unique_a: unique,
            n_unique_b: unique,
        }
    }

    pub fn distinct_a(&self) -> usize {
        self.n_common + self.n_multdiff + self.n_unique_a
    }

    pub fn distinct_b(&self) -> usize {
        self.n_common + self.n_multdiff + self.n_unique_b
    }

    pub fn total_distinct(&self) -> usize {
        self.n_common + self.n_multdiff + self.n_unique_a + self.n_unique_b
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AccuracySweep {
    /// Fingerprint length at a bucket count sized for `n_distinct`.
    FingerprintBits,
    /// Root-set size, with buckets sized to it and `f = log2 b`.
    Size,
    /// Bits per element, all methods.
    BitsPerElement,
}

impl FromStr for AccuracySweep {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "f" | "fingerprint_bits" => Ok(AccuracySweep::FingerprintBits),
            "size" => Ok(AccuracySweep::Size),
            "bpe" => Ok(AccuracySweep::BitsPerElement),
            _ => Err(format!("unknown sweep {s:?}")),
        }
    }
}

impl AccuracySweep {
    pub fn name(self) -> &'static str {
        match self {
            AccuracySweep::FingerprintBits => "fingerprint_bits",
            AccuracySweep::Size => "size",
            AccuracySweep::BitsPerElement => "bpe",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Root-set size per side; sets the default overlap.
    pub n_distinct: usize,
    pub overlap: Overlap,
    pub max_multiplicity: u32,
    pub multiplicity: MultiplicityMode,
    pub slots_per_bucket: u8,
    pub counter_bits: u8,
    pub cbf_counter_bits: u8,
    pub seed: u64,
    pub repetitions: usize,

    pub occupancy_k: Vec<u32>,

    pub fpr_bucket_exponents: Vec<u32>,
    pub fpr_fingerprint_bits: Vec<u8>,
    /// Absent-element probes per membership measurement.
    pub probes: usize,
    pub collision_bucket_exponents: Vec<u32>,
    pub collision_fingerprint_bits: Vec<u8>,

    pub accuracy_sweeps: Vec<AccuracySweep>,
    pub methods: Vec<Method>,
    pub fingerprint_bits: Vec<u8>,
    pub sizes: Vec<usize>,
    pub bpe_fingerprint_bits: Vec<u8>,
    pub cbf_counters_per_element: Vec<f64>,

    pub timing_sizes: Vec<usize>,
    pub timing_fingerprint_bits: u8,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let n_distinct = 64_000;
        ExperimentConfig {
            n_distinct,
            overlap: Overlap::mixed(n_distinct),
            max_multiplicity: 255,
            multiplicity: MultiplicityMode::Uniform,
            slots_per_bucket: 4,
            counter_bits: 8,
            cbf_counter_bits: 16,
            seed: 1,
            repetitions: 10,
            occupancy_k: (1..=8).collect(),
            fpr_bucket_exponents: vec![10],
            fpr_fingerprint_bits: vec![8, 9, 10, 11, 12],
            probes: 100_000,
            collision_bucket_exponents: (8..=14).collect(),
            collision_fingerprint_bits: vec![8, 10, 12, 14],
            accuracy_sweeps: vec![
                AccuracySweep::FingerprintBits,
                AccuracySweep::Size,
                AccuracySweep::BitsPerElement,
            ],
            methods: vec![Method::Query, Method::Decode, Method::Cbf],
            fingerprint_bits: (7..=17).collect(),
            sizes: (1..=8).map(|k| 500 << k).collect(),
            bpe_fingerprint_bits: (2..=20).collect(),
            cbf_counters_per_element: vec![
                1.0, 1.5, 2.0, 3.0, 4.0, 6.0, 8.0, 10.0, 12.0, 16.0, 20.0, 24.0, 28.0,
            ],
            timing_sizes: vec![10_000, 20_000, 40_000, 80_000],
            timing_fingerprint_bits: 12,
        }
    }
}

fn parse_list<T: FromStr>(v: &str) -> Result<Vec<T>, String>
where
    T::Err: fmt::Display,
{
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|e| format!("{s:?}: {e}")))
        .collect()
}

/// A list of integers where `lo..hi` expands to the inclusive range.
fn parse_int_list<T>(v: &str) -> Result<Vec<T>, String>
where
    T: FromStr + TryFrom<u64>,
    T::Err: fmt::Display,
{
    let mut out = Vec::new();
    for item in v.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        match item.split_once("..") {
            Some((lo, hi)) => {
                let lo: u64 = lo.trim().parse().map_err(|e| format!("{lo:?}: {e}"))?;
                let hi: u64 = hi.trim().parse().map_err(|e| format!("{hi:?}: {e}"))?;
                if lo > hi {
                    return Err(format!("empty range {item:?}"));
                }
                for x in lo..=hi {
                    out.push(T::try_from(x).map_err(|_| format!("{x} out of range"))?);
                }
            }
            None => out.push(item.parse().map_err(|e| format!("{item:?}: {e}"))?),
        }
    }
    Ok(out)
}

fn parse_one<T: FromStr>(v: &str) -> Result<T, String>
where
    T::Err: fmt::Display,
{
    v.parse().map_err(|e| format!("{v:?}: {e}"))
}

impl ExperimentConfig {
    /// Applies one setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let v = value.trim();
        let res = match key {
            "n_distinct" => parse_one(v).map(|n| {
                self.n_distinct = n;
                self.overlap = Overlap::mixed(n);
            }),
            "n_common" => parse_one(v).map(|n| self.overlap.n_common = n),
            "n_multdiff" => parse_one(v).map(|n| self.overlap.n_multdiff = n),
            "n_unique_a" => parse_one(v).map(|n| self.overlap.n_unique_a = n),
            "n_unique_b" => parse_one(v).map(|n| self.overlap.n_unique_b = n),
            "max_multiplicity" => parse_one(v).map(|n| self.max_multiplicity = n),
            "multiplicity" => parse_one(v).map(|m| self.multiplicity = m),
            "slots_per_bucket" => parse_one(v).map(|n| self.slots_per_bucket = n),
            "counter_bits" => parse_one(v).map(|n| self.counter_bits = n),
            "cbf_counter_bits" => parse_one(v).map(|n| self.cbf_counter_bits = n),
            "seed" => parse_one(v).map(|n| self.seed = n),
            "repetitions" => parse_one(v).map(|n| self.repetitions = n),
            "occupancy_k" => parse_int_list(v).map(|l| self.occupancy_k = l),
            "fpr_bucket_exponents" => parse_int_list(v).map(|l| self.fpr_bucket_exponents = l),
            "fpr_fingerprint_bits" => parse_int_list(v).map(|l| self.fpr_fingerprint_bits = l),
            "probes" => parse_one(v).map(|n| self.probes = n),
            "collision_bucket_exponents" => {
                parse_int_list(v).map(|l| self.collision_bucket_exponents = l)
            }
            "collision_fingerprint_bits" => {
                parse_int_list(v).map(|l| self.collision_fingerprint_bits = l)
            }
            "accuracy_sweeps" => parse_list(v).map(|l| self.accuracy_sweeps = l),
            "methods" => parse_list(v).map(|l| self.methods = l),
            "fingerprint_bits" => parse_int_list(v).map(|l| self.fingerprint_bits = l),
            "sizes" => parse_int_list(v).map(|l| self.sizes = l),
            "bpe_fingerprint_bits" => parse_int_list(v).map(|l| self.bpe_fingerprint_bits = l),
            "cbf_counters_per_element" => parse_list(v).map(|l| self.cbf_counters_per_element = l),
            "timing_sizes" => parse_int_list(v).map(|l| self.timing_sizes = l),
            "timing_fingerprint_bits" => parse_one(v).map(|n| self.timing_fingerprint_bits = n),
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        };
        res.map_err(|reason| ConfigError::Value {
            key: key.to_string(),
            reason,
        })
    }

    /// Parses `key = value` lines over the defaults. Blank lines and lines
    /// starting with `#` are skipped. `n_distinct` resets the overlap, so
    /// overlap keys override it only when they come later.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = ExperimentConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: i + 1,
                reason: "expected key = value".into(),
            })?;
            cfg.set(k.trim(), v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |msg: String| Err(ConfigError::Invalid(msg));
        if self.max_multiplicity == 0 {
            return bad("max_multiplicity must be at least 1".into());
        }
        if !(1..=32).contains(&self.counter_bits) {
            return bad(format!("counter_bits {} outside 1..=32", self.counter_bits));
        }
        let counter_max = (1u64 << self.counter_bits) - 1;
        if u64::from(self.max_multiplicity) > counter_max {
            return bad(format!(
                "max_multiplicity {} exceeds {}-bit counters",
                self.max_multiplicity, self.counter_bits
            ));
        }
        if let MultiplicityMode::Fixed(m) = self.multiplicity {
            if m > self.max_multiplicity {
                return bad(format!("fixed multiplicity {m} exceeds max_multiplicity"));
            }
        }
        if self.overlap.n_multdiff > 0 && self.max_multiplicity < 2 {
            return bad("differing multiplicities need max_multiplicity >= 2".into());
        }
        if self.overlap.total_distinct() as u64 > 1 << 32 {
            return bad("overlap needs more than 2^32 distinct elements".into());
        }
        if self.repetitions == 0 {
            return bad("repetitions must be at least 1".into());
        }
        if self.slots_per_bucket == 0 {
            return bad("slots_per_bucket must be at least 1".into());
        }
        Ok(())
    }
}
