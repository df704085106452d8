//! The two-round synchronization session.
//!
//! Round one swaps filters, round two swaps the elements each host found
//! missing at its peer. Replica deltas are applied locally and never sent.
//! Every exchange is ordered: the initiator writes first and the responder
//! reads first, so neither side blocks on a full socket buffer.

use thiserror::Error;

use super::diff::{
    diff_cbf, diff_decode, diff_query, ground_truth, DiffError, DiffResult, DiffStats,
};
use super::transport::{channel_pair, Transport};
use super::wire::{diff_payload_len, Frame, Method, WireError, PROTOCOL_VERSION};
use crate::cbf::{self, Cbf, CbfParams};
use crate::ccf::{self, Ccf, CcfParams};
use crate::codec::DecodeError;
use crate::multiset::{Multiset, MultisetError};

#[derive(Debug, Error)]
pub enum SyncError {
    #[error("transport: {0}")]
    Wire(#[from] WireError),
    #[error("peer filter: {0}")]
    Filter(#[from] DecodeError),
    #[error("handshake mismatch: {0}")]
    HandshakeMismatch(String),
    #[error("peer aborted: {0}")]
    Remote(String),
    #[error("protocol violation: {0}")]
    Protocol(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Diff(#[from] DiffError),
    #[error(transparent)]
    Multiset(#[from] MultisetError),
}

/// Method plus the filter parameters both hosts must share.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SyncConfig {
    Query(CcfParams),
    Decode(CcfParams),
    Cbf(CbfParams),
}

impl SyncConfig {
    pub fn new_ccf(method: Method, params: CcfParams) -> Result<Self, SyncError> {
        match method {
            Method::Query => Ok(SyncConfig::Query(params)),
            Method::Decode => Ok(SyncConfig::Decode(params)),
            Method::Cbf => Err(SyncError::Config("cbf method needs CBF parameters".into())),
        }
    }

    pub fn method(&self) -> Method {
        match self {
            SyncConfig::Query(_) => Method::Query,
            SyncConfig::Decode(_) => Method::Decode,
            SyncConfig::Cbf(_) => Method::Cbf,
        }
    }

    /// Filter header bytes; carried in HELLO so peers can compare settings.
    pub fn params_blob(&self) -> Vec<u8> {
        let mut out = Vec::new();
        match self {
            SyncConfig::Query(p) | SyncConfig::Decode(p) => ccf::write_header(p, &mut out),
            SyncConfig::Cbf(p) => cbf::write_header(p, &mut out),
        }
        out
    }

    pub fn hello(&self) -> Frame {
        Frame::Hello {
            version: PROTOCOL_VERSION,
            method: self.method().code(),
            params: self.params_blob(),
        }
    }

    pub fn validate(&self) -> Result<(), SyncError> {
        match self {
            SyncConfig::Query(p) | SyncConfig::Decode(p) => {
                p.validate().map_err(|e| SyncError::Config(e.to_string()))
            }
            SyncConfig::Cbf(p) => p.validate().map_err(|e| SyncError::Config(e.to_string())),
        }
    }

    /// Filter size in bits.
    pub fn filter_bits(&self) -> u64 {
        match self {
            SyncConfig::Query(p) | SyncConfig::Decode(p) => p.total_bits(),
            SyncConfig::Cbf(p) => p.total_bits(),
        }
    }

    /// Encoded FILTER payload length.
    pub fn filter_len(&self) -> usize {
        match self {
            SyncConfig::Query(p) | SyncConfig::Decode(p) => p.serialized_len(),
            SyncConfig::Cbf(p) => p.serialized_len(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    /// Writes first in every exchange.
    Initiator,
    Responder,
}

/// A host's filter over its own multiset.
#[derive(Debug, Clone)]
pub enum LocalFilter {
    Ccf(Box<Ccf>),
    Cbf(Cbf),
}

impl LocalFilter {
    /// Builds the filter, returning it with the number of elements that
    /// could not be represented (filter full or counter overflow).
    pub fn build(local: &Multiset, cfg: &SyncConfig) -> Result<(LocalFilter, usize), SyncError> {
        let mut failures = 0;
        match cfg {
            SyncConfig::Query(p) | SyncConfig::Decode(p) => {
                let mut f = Ccf::new(*p).map_err(|e| SyncError::Config(e.to_string()))?;
                for (x, m) in local.iter() {
                    if !matches!(f.insert(x, m), Ok(true)) {
                        failures += 1;
                    }
                }
                Ok((LocalFilter::Ccf(Box::new(f)), failures))
            }
            SyncConfig::Cbf(p) => {
                let mut f = Cbf::new(*p).map_err(|e| SyncError::Config(e.to_string()))?;
                for (x, m) in local.iter() {
                    if f.insert(x, m).is_err() {
                        failures += 1;
                    }
                }
                Ok((LocalFilter::Cbf(f), failures))
            }
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        match self {
            LocalFilter::Ccf(f) => f.to_bytes(),
            LocalFilter::Cbf(f) => f.to_bytes(),
        }
    }

    fn query(&self, x: &crate::multiset::Element) -> u32 {
        match self {
            LocalFilter::Ccf(f) => f.query(x),
            LocalFilter::Cbf(f) => f.query(x),
        }
    }
}

/// Byte counts seen by one host. Filter and diff figures are payload
/// lengths; wire figures include frame headers.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ByteCounts {
    pub filter_sent: usize,
    pub filter_received: usize,
    pub diff_sent: usize,
    pub diff_received: usize,
    pub wire_sent: usize,
    pub wire_received: usize,
}

#[derive(Debug, Clone)]
pub struct HostOutcome {
    pub multiset: Multiset,
    pub diff: DiffResult,
    pub stats: DiffStats,
    pub bytes: ByteCounts,
    /// Entries received from the peer.
    pub received: usize,
    pub insert_failures: usize,
    /// Replica deltas dropped because the element was not held locally.
    pub inconsistencies: usize,
    /// Pre-sync accuracy estimated from the peer's filter; sent in DONE.
    pub estimated_alpha: f64,
    /// The peer's DONE value.
    pub peer_estimated_alpha: f64,
}

struct Link<T> {
    transport: T,
    role: Role,
    bytes: ByteCounts,
}

impl<T: Transport> Link<T> {
    fn send(&mut self, frame: &Frame) -> Result<(), SyncError> {
        self.bytes.wire_sent += self.transport.send(frame)?;
        Ok(())
    }

    fn recv(&mut self) -> Result<Frame, SyncError> {
        let (frame, n) = self.transport.recv()?;
        self.bytes.wire_received += n;
        match frame {
            Frame::Error(msg) => Err(SyncError::Remote(msg)),
            f => Ok(f),
        }
    }

    /// Best-effort ERROR frame before giving up.
    fn abort(&mut self, err: SyncError) -> SyncError {
        if !matches!(err, SyncError::Remote(_) | SyncError::Wire(_)) {
            let _ = self.send(&Frame::Error(err.to_string()));
        }
        err
    }

    fn exchange(&mut self, frame: &Frame) -> Result<Frame, SyncError> {
        match self.role {
            Role::Initiator => {
                self.send(frame)?;
                self.recv()
            }
            Role::Responder => {
                let got = self.recv()?;
                self.send(frame)?;
                Ok(got)
            }
        }
    }

    fn handshake(&mut self, cfg: &SyncConfig) -> Result<(), SyncError> {
        let ours = cfg.hello();
        let check = |theirs: &Frame| -> Result<(), SyncError> {
            let Frame::Hello {
                version,
                method,
                params,
            } = theirs
            else {
                return Err(SyncError::Protocol("expected HELLO".into()));
            };
            if *version != PROTOCOL_VERSION {
                return Err(SyncError::HandshakeMismatch(format!(
                    "protocol version {version} != {PROTOCOL_VERSION}"
                )));
            }
            if *method != cfg.method().code() {
                return Err(SyncError::HandshakeMismatch(format!(
                    "method {method} != {}",
                    cfg.method().code()
                )));
            }
            if *params != cfg.params_blob() {
                return Err(SyncError::HandshakeMismatch(
                    "filter parameters differ".into(),
                ));
            }
            Ok(())
        };
        match self.role {
            Role::Initiator => {
                self.send(&ours)?;
                let theirs = self.recv()?;
                check(&theirs)
            }
            Role::Responder => {
                let theirs = self.recv()?;
                check(&theirs)?;
                self.send(&ours)
            }
        }
    }
}

/// Runs one host's side of a session over `transport`.
pub fn run_host<T: Transport>(
    local: &Multiset,
    cfg: &SyncConfig,
    role: Role,
    transport: T,
) -> Result<HostOutcome, SyncError> {
    let mut link = Link {
        transport,
        role,
        bytes: ByteCounts::default(),
    };
    match session(local, cfg, &mut link) {
        Ok(out) => Ok(out),
        Err(e) => Err(link.abort(e)),
    }
}

fn session<T: Transport>(
    local: &Multiset,
    cfg: &SyncConfig,
    link: &mut Link<T>,
) -> Result<HostOutcome, SyncError> {
    cfg.validate()?;
    link.handshake(cfg)?;

    let (filter, insert_failures) = LocalFilter::build(local, cfg)?;
    let ours = filter.to_bytes();
    link.bytes.filter_sent = ours.len();
    let Frame::Filter(theirs) = link.exchange(&Frame::Filter(ours))? else {
        return Err(SyncError::Protocol("expected FILTER".into()));
    };
    link.bytes.filter_received = theirs.len();

    let (remote, (diff, stats)) = match (cfg, &filter) {
        (SyncConfig::Query(p), _) => {
            let remote = decode_ccf(&theirs, p)?;
            let d = diff_query(local, &remote);
            (LocalFilter::Ccf(Box::new(remote)), d)
        }
        (SyncConfig::Decode(p), LocalFilter::Ccf(own)) => {
            let remote = decode_ccf(&theirs, p)?;
            let d = diff_decode(local, own, &remote)?;
            (LocalFilter::Ccf(Box::new(remote)), d)
        }
        (SyncConfig::Cbf(p), _) => {
            let remote = Cbf::from_bytes(&theirs)?;
            if remote.params() != p {
                return Err(SyncError::HandshakeMismatch(
                    "peer filter parameters differ".into(),
                ));
            }
            let d = diff_cbf(local, &remote);
            (LocalFilter::Cbf(remote), d)
        }
        (SyncConfig::Decode(_), LocalFilter::Cbf(_)) => unreachable!("decode builds a CCF"),
    };

    link.bytes.diff_sent = diff_payload_len(&diff.transmit);
    let Frame::Diff(received) = link.exchange(&Frame::Diff(diff.transmit.clone()))? else {
        return Err(SyncError::Protocol("expected DIFF".into()));
    };
    link.bytes.diff_received = diff_payload_len(&received);

    let estimated_alpha = estimate_alpha(local, &remote, &received);

    let mut multiset = local.clone();
    let mut inconsistencies = 0;
    if let Err(MultisetError::Inconsistency(_)) = multiset.apply_diff(&received, &diff.replicate) {
        let held: Vec<_> = diff
            .replicate
            .iter()
            .filter(|(x, _)| multiset.contains(x))
            .cloned()
            .collect();
        inconsistencies = diff.replicate.len() - held.len();
        multiset.apply_diff(&received, &held)?;
    }

    let Frame::Done {
        alpha: peer_estimated_alpha,
    } = link.exchange(&Frame::Done {
        alpha: estimated_alpha,
    })?
    else {
        return Err(SyncError::Protocol("expected DONE".into()));
    };

    Ok(HostOutcome {
        multiset,
        received: received.len(),
        diff,
        stats,
        bytes: link.bytes,
        insert_failures,
        inconsistencies,
        estimated_alpha,
        peer_estimated_alpha,
    })
}

fn decode_ccf(bytes: &[u8], expected: &CcfParams) -> Result<Ccf, SyncError> {
    let remote = Ccf::from_bytes(bytes)?;
    if remote.params() != expected {
        return Err(SyncError::HandshakeMismatch(
            "peer filter parameters differ".into(),
        ));
    }
    Ok(remote)
}

/// Pre-sync accuracy as one host can see it: local multiplicities against
/// the peer filter's answers, plus the peer's transmitted elements.
fn estimate_alpha(
    local: &Multiset,
    remote: &LocalFilter,
    received: &[(crate::multiset::Element, u32)],
) -> f64 {
    let (mut min_sum, mut max_sum) = (0u64, 0u64);
    for (x, m) in local.iter() {
        let q = remote.query(x);
        min_sum += u64::from(m.min(q));
        max_sum += u64::from(m.max(q));
    }
    max_sum += received.iter().map(|(_, m)| u64::from(*m)).sum::<u64>();
    if max_sum == 0 {
        1.0
    } else {
        min_sum as f64 / max_sum as f64
    }
}

/// Per-host figures are indexed `[host A, host B]`; byte figures count what
/// that host sent.
#[derive(Debug, Clone, PartialEq)]
pub struct SyncReport {
    /// Accuracy between the two final multisets.
    pub alpha: f64,
    /// Accuracy of each final multiset against the exact union.
    pub alpha_vs_union: [f64; 2],
    pub bytes_filter: [usize; 2],
    pub bytes_diff: [usize; 2],
    pub bytes_wire: [usize; 2],
    pub transmitted: [usize; 2],
    /// Difference entries that disagree with the exact classification.
    pub misclassified: [usize; 2],
    /// Transmitted elements the peer already held.
    pub spurious_transmits: [usize; 2],
    pub insert_failures: [usize; 2],
    pub inconsistencies: [usize; 2],
    pub stats: [DiffStats; 2],
}

#[derive(Debug, Clone)]
pub struct SyncRun {
    pub host_a: Multiset,
    pub host_b: Multiset,
    pub diffs: [DiffResult; 2],
    pub report: SyncReport,
}

/// Synchronizes two in-process hosts over a channel pair.
pub fn synchronize(a: &Multiset, b: &Multiset, cfg: &SyncConfig) -> Result<SyncRun, SyncError> {
    let (ta, tb) = channel_pair();
    synchronize_over(a, b, cfg, ta, tb)
}

/// Synchronizes two hosts over a connected pair of transports; `a` initiates.
pub fn synchronize_over<TA, TB>(
    a: &Multiset,
    b: &Multiset,
    cfg: &SyncConfig,
    ta: TA,
    tb: TB,
) -> Result<SyncRun, SyncError>
where
    TA: Transport,
    TB: Transport + Send,
{
    let (out_a, out_b) = std::thread::scope(|s| {
        let hb = s.spawn(|| run_host(b, cfg, Role::Responder, tb));
        let out_a = run_host(a, cfg, Role::Initiator, ta);
        (out_a, hb.join().expect("responder panicked"))
    });
    let (out_a, out_b) = (out_a?, out_b?);

    let truth = [ground_truth(a, b), ground_truth(b, a)];
    let union = a.union_max(b);
    let outs = [&out_a, &out_b];
    let peers = [b, a];
    let spurious = |i: usize| {
        outs[i]
            .diff
            .transmit
            .iter()
            .filter(|(x, _)| peers[i].contains(x))
            .count()
    };
    let report = SyncReport {
        alpha: out_a.multiset.accuracy(&out_b.multiset),
        alpha_vs_union: [
            out_a.multiset.accuracy(&union),
            out_b.multiset.accuracy(&union),
        ],
        bytes_filter: [out_a.bytes.filter_sent, out_b.bytes.filter_sent],
        bytes_diff: [out_a.bytes.diff_sent, out_b.bytes.diff_sent],
        bytes_wire: [out_a.bytes.wire_sent, out_b.bytes.wire_sent],
        transmitted: [out_a.diff.transmit.len(), out_b.diff.transmit.len()],
        misclassified: [
            out_a.diff.mismatches(&truth[0]),
            out_b.diff.mismatches(&truth[1]),
        ],
        spurious_transmits: [spurious(0), spurious(1)],
        insert_failures: [out_a.insert_failures, out_b.insert_failures],
        inconsistencies: [out_a.inconsistencies, out_b.inconsistencies],
        stats: [out_a.stats, out_b.stats],
    };
    Ok(SyncRun {
        host_a: out_a.multiset,
        host_b: out_b.multiset,
        diffs: [out_a.diff, out_b.diff],
        report,
    })
}
