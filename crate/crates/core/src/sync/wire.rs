//! Length-prefixed frames: `type u8 | length u32 | payload`, big-endian.

use std::io::{self, Read, Write};

use crate::codec::{DecodeError, Reader};
use crate::multiset::Element;

pub const PROTOCOL_VERSION: u8 = 1;
/// `type` plus `length`.
pub const FRAME_OVERHEAD: usize = 5;
/// Frames larger than this are rejected before allocation.
pub const MAX_FRAME_LEN: u32 = 1 << 30;

pub const TYPE_HELLO: u8 = 0x01;
pub const TYPE_FILTER: u8 = 0x02;
pub const TYPE_DIFF: u8 = 0x03;
pub const TYPE_DONE: u8 = 0x04;
pub const TYPE_ERROR: u8 = 0x7F;

/// How a host identifies differences; also selects the filter type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Query = 1,
    Decode = 2,
    Cbf = 3,
}

impl Method {
    pub fn from_code(code: u8) -> Option<Method> {
        match code {
            1 => Some(Method::Query),
            2 => Some(Method::Decode),
            3 => Some(Method::Cbf),
            _ => None,
        }
    }

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::Query => "ccf-query",
            Method::Decode => "ccf-decode",
            Method::Cbf => "cbf",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ccf-query" | "query" => Ok(Method::Query),
            "ccf-decode" | "decode" => Ok(Method::Decode),
            "cbf" => Ok(Method::Cbf),
            other => Err(format!("unknown method {other:?}")),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Frame {
    Hello {
        version: u8,
        method: u8,
        params: Vec<u8>,
    },
    Filter(Vec<u8>),
    Diff(Vec<(Element, u32)>),
    Done {
        alpha: f64,
    },
    Error(String),
}

#[derive(Debug, thiserror::Error)]
pub enum WireError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("unknown frame type {0:#04x}")]
    UnknownType(u8),
    #[error("frame length {0} exceeds limit")]
    TooLarge(u32),
    #[error("malformed payload: {0}")]
    Payload(#[from] DecodeError),
    #[error("malformed payload: {0}")]
    Invalid(String),
}

impl Frame {
    pub fn type_code(&self) -> u8 {
        match self {
            Frame::Hello { .. } => TYPE_HELLO,
            Frame::Filter(_) => TYPE_FILTER,
            Frame::Diff(_) => TYPE_DIFF,
            Frame::Done { .. } => TYPE_DONE,
            Frame::Error(_) => TYPE_ERROR,
        }
    }

    pub fn payload(&self) -> Vec<u8> {
        match self {
            Frame::Hello {
                version,
                method,
                params,
            } => {
                let mut out = Vec::with_capacity(2 + params.len());
                out.push(*version);
                out.push(*method);
                out.extend_from_slice(params);
                out
            }
            Frame::Filter(bytes) => bytes.clone(),
            Frame::Diff(entries) => encode_diff(entries),
            Frame::Done { alpha } => alpha.to_be_bytes().to_vec(),
            Frame::Error(msg) => msg.as_bytes().to_vec(),
        }
    }

    /// Full encoded frame.
    pub fn encode(&self) -> Vec<u8> {
        let payload = self.payload();
        let mut out = Vec::with_capacity(FRAME_OVERHEAD + payload.len());
        out.push(self.type_code());
        out.extend_from_slice(&(payload.len() as u32).to_be_bytes());
        out.extend_from_slice(&payload);
        out
    }

    pub fn decode_payload(type_code: u8, payload: &[u8]) -> Result<Frame, WireError> {
        let mut r = Reader::new(payload);
        let frame = match type_code {
            TYPE_HELLO => {
                let version = r.u8()?;
                let method = r.u8()?;
                let params = r.take(r.remaining())?.to_vec();
                Frame::Hello {
                    version,
                    method,
                    params,
                }
            }
            TYPE_FILTER => Frame::Filter(r.take(r.remaining())?.to_vec()),
            TYPE_DIFF => {
                let n = r.u32()? as usize;
                // Each entry needs at least 7 bytes.
                if n > r.remaining() / 7 {
                    return Err(WireError::Invalid(format!("{n} entries cannot fit")));
                }
                let mut entries = Vec::with_capacity(n);
                for _ in 0..n {
                    let len = usize::from(r.u16()?);
                    let bytes = r.take(len)?;
                    let mult = r.u32()?;
                    let x = Element::new(bytes).map_err(|e| WireError::Invalid(e.to_string()))?;
                    if mult == 0 {
                        return Err(WireError::Invalid("zero multiplicity".into()));
                    }
                    entries.push((x, mult));
                }
                Frame::Diff(entries)
            }
            TYPE_DONE => Frame::Done {
                alpha: f64::from_bits(r.u64()?),
            },
            TYPE_ERROR => Frame::Error(
                String::from_utf8(r.take(r.remaining())?.to_vec())
                    .map_err(|e| WireError::Invalid(e.to_string()))?,
            ),
            other => return Err(WireError::UnknownType(other)),
        };
        r.finish()?;
        Ok(frame)
    }

    /// Decodes one complete frame from `bytes`.
    pub fn decode(bytes: &[u8]) -> Result<Frame, WireError> {
        let mut r = Reader::new(bytes);
        let type_code = r.u8()?;
        let len = r.u32()?;
        let payload = r.take(len as usize)?;
        r.finish()?;
        Frame::decode_payload(type_code, payload)
    }
}

/// DIFF payload: entry count u32, then per entry element length u16,
/// element bytes, multiplicity u32.
pub fn encode_diff(entries: &[(Element, u32)]) -> Vec<u8> {
    let mut out = Vec::with_capacity(diff_payload_len(entries));
    out.extend_from_slice(&(entries.len() as u32).to_be_bytes());
    for (x, m) in entries {
        out.extend_from_slice(&(x.len() as u16).to_be_bytes());
        out.extend_from_slice(x.as_bytes());
        out.extend_from_slice(&m.to_be_bytes());
    }
    out
}

pub fn diff_payload_len(entries: &[(Element, u32)]) -> usize {
    4 + entries.iter().map(|(x, _)| 2 + x.len() + 4).sum::<usize>()
}

/// Writes one frame, returning the bytes written.
pub fn write_frame<W: Write>(w: &mut W, frame: &Frame) -> Result<usize, WireError> {
    let bytes = frame.encode();
    w.write_all(&bytes)?;
    w.flush()?;
    Ok(bytes.len())
}

/// Reads one frame, returning it with the bytes consumed.
pub fn read_frame<R: Read>(r: &mut R) -> Result<(Frame, usize), WireError> {
    let mut head = [0u8; FRAME_OVERHEAD];
    r.read_exact(&mut head)?;
    let type_code = head[0];
    let len = u32::from_be_bytes(head[1..].try_into().unwrap());
    if len > MAX_FRAME_LEN {
        return Err(WireError::TooLarge(len));
    }
    let mut payload = vec![0u8; len as usize];
    r.read_exact(&mut payload)?;
    let frame = Frame::decode_payload(type_code, &payload)?;
    Ok((frame, FRAME_OVERHEAD + len as usize))
}
