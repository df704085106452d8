//! Two-host multiset reconciliation over filters.

pub mod diff;
pub mod session;
pub mod transport;
pub mod wire;

pub use diff::{diff_cbf, diff_decode, diff_query, ground_truth, DiffError, DiffResult, DiffStats};
pub use session::{
    run_host, synchronize, synchronize_over, ByteCounts, HostOutcome, LocalFilter, Role,
    SyncConfig, SyncError, SyncReport, SyncRun,
};
pub use transport::{channel_pair, ChannelTransport, StreamTransport, Transport};
pub use wire::{Frame, Method, WireError};
