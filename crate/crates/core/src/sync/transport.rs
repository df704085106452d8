//! Frame transports: an in-process channel pair and any byte stream.

use std::io::{Read, Write};
use std::net::TcpStream;
use std::sync::mpsc::{self, Receiver, Sender};

use super::wire::{read_frame, write_frame, Frame, WireError};

/// Moves whole frames between two hosts. Both methods return the number of
/// encoded bytes that crossed the transport.
pub trait Transport {
    fn send(&mut self, frame: &Frame) -> Result<usize, WireError>;
    fn recv(&mut self) -> Result<(Frame, usize), WireError>;
}

impl<T: Transport + ?Sized> Transport for &mut T {
    fn send(&mut self, frame: &Frame) -> Result<usize, WireError> {
        (**self).send(frame)
    }

    fn recv(&mut self) -> Result<(Frame, usize), WireError> {
        (**self).recv()
    }
}

/// One end of an in-memory link. Frames travel encoded, so byte counts
/// match what a socket would carry.
#[derive(Debug)]
pub struct ChannelTransport {
    tx: Sender<Vec<u8>>,
    rx: Receiver<Vec<u8>>,
}

/// Two connected ends.
pub fn channel_pair() -> (ChannelTransport, ChannelTransport) {
    let (a_tx, b_rx) = mpsc::channel();
    let (b_tx, a_rx) = mpsc::channel();
    (
        ChannelTransport { tx: a_tx, rx: a_rx },
        ChannelTransport { tx: b_tx, rx: b_rx },
    )
}

fn disconnected() -> WireError {
    WireError::Io(std::io::Error::new(
        std::io::ErrorKind::BrokenPipe,
        "peer hung up",
    ))
}

impl Transport for ChannelTransport {
    fn send(&mut self, frame: &Frame) -> Result<usize, WireError> {
        let bytes = frame.encode();
        let n = bytes.len();
        self.tx.send(bytes).map_err(|_| disconnected())?;
        Ok(n)
    }

    fn recv(&mut self) -> Result<(Frame, usize), WireError> {
        let bytes = self.rx.recv().map_err(|_| disconnected())?;
        let n = bytes.len();
        Ok((Frame::decode(&bytes)?, n))
    }
}

/// Frames over a byte stream such as a [`TcpStream`].
#[derive(Debug)]
pub struct StreamTransport<S> {
    stream: S,
}

impl<S: Read + Write> StreamTransport<S> {
    pub fn new(stream: S) -> Self {
        StreamTransport { stream }
    }

    pub fn into_inner(self) -> S {
        self.stream
    }
}

impl StreamTransport<TcpStream> {
    pub fn tcp(stream: TcpStream) -> std::io::Result<Self> {
        stream.set_nodelay(true)?;
        Ok(StreamTransport::new(stream))
    }
}

impl<S: Read + Write> Transport for StreamTransport<S> {
    fn send(&mut self, frame: &Frame) -> Result<usize, WireError> {
        write_frame(&mut self.stream, frame)
    }

    fn recv(&mut self) -> Result<(Frame, usize), WireError> {
        read_frame(&mut self.stream)
    }
}
