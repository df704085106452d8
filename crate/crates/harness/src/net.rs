//! One host of a live sync session over TCP.

use std::io::Write;
use std::net::{TcpListener, TcpStream, ToSocketAddrs};
use std::thread;
use std::time::{Duration, Instant};

use anyhow::{Context, Result};
use ccf_sync::sync::{run_host, HostOutcome, Role, StreamTransport, SyncConfig};
use ccf_sync::Multiset;
use serde::Serialize;

use crate::csv_out::Sig6;

#[derive(Debug, Clone, Serialize)]
pub struct HostReport {
    pub role: &'static str,
    pub method: &'static str,
    /// Serialized filter size the configuration implies.
    pub filter_len: usize,
    pub bytes_filter_sent: usize,
    pub bytes_filter_received: usize,
    pub bytes_diff_sent: usize,
    pub bytes_diff_received: usize,
    pub bytes_wire_sent: usize,
    pub bytes_wire_received: usize,
    pub transmitted: usize,
    pub received: usize,
    pub replicated: usize,
    pub insert_failures: usize,
    pub inconsistencies: usize,
    pub estimated_alpha: Sig6,
    pub peer_estimated_alpha: Sig6,
    pub final_distinct: usize,
    pub final_cardinality: u64,
}

impl HostReport {
    pub fn new(role: Role, cfg: &SyncConfig, out: &HostOutcome) -> Self {
        HostReport {
            role: match role {
                Role::Initiator => "initiator",
                Role::Responder => "responder",
            },
            method: cfg.method().name(),
            filter_len: cfg.filter_len(),
            bytes_filter_sent: out.bytes.filter_sent,
            bytes_filter_received: out.bytes.filter_received,
            bytes_diff_sent: out.bytes.diff_sent,
            bytes_diff_received: out.bytes.diff_received,
            bytes_wire_sent: out.bytes.wire_sent,
            bytes_wire_received: out.bytes.wire_received,
            transmitted: out.diff.transmit.len(),
            received: out.received,
            replicated: out.diff.replicate.len(),
            insert_failures: out.insert_failures,
            inconsistencies: out.inconsistencies,
            estimated_alpha: Sig6(out.estimated_alpha),
            peer_estimated_alpha: Sig6(out.peer_estimated_alpha),
            final_distinct: out.multiset.root_len(),
            final_cardinality: out.multiset.cardinality(),
        }
    }
}

/// Accepts one peer and runs the responder side. `on_bound` sees the bound
/// address before the accept, which matters when binding port 0.
pub fn listen(
    addr: &str,
    local: &Multiset,
    cfg: &SyncConfig,
    on_bound: impl FnOnce(std::net::SocketAddr) -> Result<()>,
) -> Result<HostOutcome> {
    let listener = TcpListener::bind(addr).with_context(|| format!("binding {addr}"))?;
    on_bound(listener.local_addr()?)?;
    let (stream, _) = listener.accept().context("accepting peer")?;
    let transport = StreamTransport::tcp(stream)?;
    Ok(run_host(local, cfg, Role::Responder, transport)?)
}

/// Connects, retrying until `patience` runs out, and runs the initiator side.
pub fn connect(
    addr: &str,
    local: &Multiset,
    cfg: &SyncConfig,
    patience: Duration,
) -> Result<HostOutcome> {
    let target = addr
        .to_socket_addrs()
        .with_context(|| format!("resolving {addr}"))?
        .next()
        .with_context(|| format!("{addr} resolved to nothing"))?;
    let deadline = Instant::now() + patience;
    let stream = loop {
        match TcpStream::connect(target) {
            Ok(s) => break s,
            Err(_) if Instant::now() < deadline => {
                thread::sleep(Duration::from_millis(50));
            }
            Err(e) => return Err(e).with_context(|| format!("connecting to {addr}")),
        }
    };
    let transport = StreamTransport::tcp(stream)?;
    Ok(run_host(local, cfg, Role::Initiator, transport)?)
}

pub fn announce(addr: std::net::SocketAddr) -> Result<()> {
    let mut out = std::io::stdout().lock();
    writeln!(out, "listening on {addr}")?;
    out.flush()?;
    Ok(())
}
