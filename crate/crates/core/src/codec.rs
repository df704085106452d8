//! Big-endian encoding helpers shared by the filter and wire formats.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecodeError {
    #[error("bad magic {0:?}")]
    BadMagic([u8; 4]),
    #[error("unsupported version {0}")]
    UnsupportedVersion(u8),
    #[error("truncated: need {needed} more bytes at offset {offset}")]
    Truncated { offset: usize, needed: usize },
    #[error("bucket count {0} is not a power of two")]
    NotPowerOfTwo(u32),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("slot {index} is malformed")]
    InvalidSlot { index: usize },
    #[error("{0} trailing bytes")]
    TrailingBytes(usize),
}

pub(crate) struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8], DecodeError> {
        let rest = self.buf.len() - self.pos;
        if rest < n {
            return Err(DecodeError::Truncated {
                offset: self.pos,
                needed: n - rest,
            });
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub fn u8(&mut self) -> Result<u8, DecodeError> {
        Ok(self.take(1)?[0])
    }

    pub fn u16(&mut self) -> Result<u16, DecodeError> {
        Ok(u16::from_be_bytes(self.take(2)?.try_into().unwrap()))
    }

    pub fn u32(&mut self) -> Result<u32, DecodeError> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64, DecodeError> {
        Ok(u64::from_be_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn magic(&mut self, expected: &[u8; 4]) -> Result<(), DecodeError> {
        let got: [u8; 4] = self.take(4)?.try_into().unwrap();
        if &got != expected {
            return Err(DecodeError::BadMagic(got));
        }
        Ok(())
    }

    /// Big-endian unsigned integer of `width` bytes (at most 4).
    pub fn uint(&mut self, width: usize) -> Result<u32, DecodeError> {
        Ok(self
            .take(width)?
            .iter()
            .fold(0u32, |acc, &b| (acc << 8) | u32::from(b)))
    }

    pub fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub fn finish(self) -> Result<(), DecodeError> {
        match self.remaining() {
            0 => Ok(()),
            n => Err(DecodeError::TrailingBytes(n)),
        }
    }
}

/// Appends the low `width` bytes of `v`, big-endian.
pub(crate) fn put_uint(out: &mut Vec<u8>, v: u32, width: usize) {
    out.extend_from_slice(&v.to_be_bytes()[4 - width..]);
}

/// Bytes needed to hold `bits` bits.
#[inline]
pub(crate) fn byte_width(bits: u8) -> usize {
    usize::from(bits).div_ceil(8)
}
