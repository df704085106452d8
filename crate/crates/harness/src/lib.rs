//! Experiment runner for counting-cuckoo-filter synchronization: workload
//! generation, occupancy, false positives, accuracy, timing, and a live
//! two-process sync over TCP.

pub mod accuracy;
pub mod config;
pub mod csv_out;
pub mod fpr;
pub mod gen;
pub mod net;
pub mod occupancy;
pub mod timing;

pub use accuracy::{run_accuracy, run_methods, AccuracyRow};
pub use config::{ConfigError, ExperimentConfig, MultiplicityMode, Overlap};
pub use fpr::{run_fpr, FprRow};
pub use gen::{gen_multiset_pair, MultisetPair};
pub use occupancy::{run_occupancy, OccupancyRow};
pub use timing::{run_timing, TimingRow};

use ccf_sync::hash::{derive_seed, digest};

/// Seed for one repetition of one grid point. Every point owns its stream,
/// so results do not depend on scheduling.
pub fn grid_seed(seed: u64, experiment: &str, point: u64, rep: u64) -> u64 {
    derive_seed(derive_seed(digest(experiment.as_bytes(), seed), point), rep)
}
