//! Length-prefixed typed frames and the channels that carry them.
//!
//! ```text
//! len: u32 LE | type: u8 | session: u64 LE | payload
//! ```
//!
//! `len` counts every byte after itself (`1 + 8 + payload.len()`). Multi-byte integers are
//! little-endian; bit vectors are a `u32` bit count followed by the bits packed LSB-first.

use std::io::{self, BufReader, BufWriter, Read, Write};
use std::net::TcpStream;
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::time::Duration;

use thiserror::Error;

/// Largest accepted frame body.
pub const MAX_FRAME: u32 = 64 << 20;
const HEADER: usize = 4 + 1 + 8;

macro_rules! msg_types {
    ($($name:ident = $code:literal,)*) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
        #[repr(u8)]
        pub enum MsgType {
            $($name = $code,)*
        }

        impl MsgType {
            pub fn from_u8(b: u8) -> Option<MsgType> {
                match b {
                    $($code => Some(MsgType::$name),)*
                    _ => None,
                }
            }
        }
    };
}

msg_types! {
    Hello = 0x01,
    Config = 0x02,
    CfgAck = 0x03,
    OtS1 = 0x10,
    OtR1 = 0x11,
    OtS2 = 0x12,
    TripleBlock = 0x20,
    InputShare = 0x21,
    OpenBatch = 0x22,
    MacCheck = 0x23,
    OutputShare = 0x24,
    TrackBegin = 0x25,
    TripleRequest = 0x26,
    ZkInit = 0x30,
    ZkCot = 0x31,
    ZkTriples = 0x32,
    ZkOpenBatch = 0x33,
    ZkFinal = 0x34,
    ZkVerdict = 0x35,
    BoundsUpdate = 0x40,
    BoundsAck = 0x41,
    Alert = 0x50,
    Error = 0x7F,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub kind: MsgType,
    pub session: u64,
    pub payload: Vec<u8>,
}

impl Frame {
    pub fn new(kind: MsgType, session: u64, payload: Vec<u8>) -> Self {
        Self { kind, session, payload }
    }

    /// Bytes this frame occupies on the wire.
    pub fn wire_len(&self) -> usize {
        HEADER + self.payload.len()
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.wire_len());
        out.extend_from_slice(&((1 + 8 + self.payload.len()) as u32).to_le_bytes());
        out.push(self.kind as u8);
        out.extend_from_slice(&self.session.to_le_bytes());
        out.extend_from_slice(&self.payload);
        out
    }

    /// Decodes exactly one frame occupying all of `bytes`.
    pub fn decode(bytes: &[u8]) -> Result<Frame, NetError> {
        let mut r = bytes;
        let f = read_frame(&mut r)?;
        if !r.is_empty() {
            return Err(NetError::Malformed("trailing bytes after frame".into()));
        }
        Ok(f)
    }

    /// An `ERROR` frame with a numeric code and a reason.
    pub fn error(session: u64, code: u16, reason: &str) -> Frame {
        let mut w = Writer::new();
        w.u16(code);
        w.str(reason);
        Frame::new(MsgType::Error, session, w.finish())
    }
}

fn read_frame(r: &mut impl Read) -> Result<Frame, NetError> {
    let mut len = [0u8; 4];
    match r.read_exact(&mut len) {
        Ok(()) => {}
        Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => return Err(NetError::Closed),
        Err(e) => return Err(e.into()),
    }
    let len = u32::from_le_bytes(len);
    if len < 9 {
        return Err(NetError::Malformed(format!("frame length {len} shorter than header")));
    }
    if len > MAX_FRAME {
        return Err(NetError::TooLarge(len));
    }
    let mut body = vec![0u8; len as usize];
    r.read_exact(&mut body).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => NetError::Malformed("truncated frame".into()),
        _ => e.into(),
    })?;
    let kind = MsgType::from_u8(body[0]).ok_or(NetError::UnknownType(body[0]))?;
    let session = u64::from_le_bytes(body[1..9].try_into().unwrap());
    body.drain(..9);
    Ok(Frame { kind, session, payload: body })
}

#[derive(Debug, Error)]
pub enum NetError {
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
    #[error("peer closed the connection")]
    Closed,
    #[error("timed out waiting for peer")]
    Timeout,
    #[error("unknown message type 0x{0:02x}")]
    UnknownType(u8),
    #[error("frame of {0} bytes exceeds limit")]
    TooLarge(u32),
    #[error("malformed message: {0}")]
    Malformed(String),
    #[error("expected {expected:?}, got {got:?}")]
    Unexpected { expected: MsgType, got: MsgType },
    #[error("frame for session {got}, expected {expected}")]
    WrongSession { expected: u64, got: u64 },
    #[error("peer error {code}: {reason}")]
    Peer { code: u16, reason: String },
}

/// A bidirectional, ordered frame transport with byte accounting.
pub trait Channel: Send {
    fn send(&mut self, frame: &Frame) -> Result<(), NetError>;
    fn recv(&mut self) -> Result<Frame, NetError>;
    /// Total frame bytes written, headers included.
    fn bytes_sent(&self) -> u64;
    fn bytes_received(&self) -> u64;

    /// Receives the next frame and insists on its type and session. `ERROR` frames surface as
    /// [`NetError::Peer`].
    fn expect(&mut self, kind: MsgType, session: u64) -> Result<Vec<u8>, NetError> {
        let f = self.recv()?;
        if f.kind == MsgType::Error && kind != MsgType::Error {
            let mut r = Reader::new(&f.payload);
            let code = r.u16().unwrap_or(0);
            let reason = r.string().unwrap_or_default();
            return Err(NetError::Peer { code, reason });
        }
        if f.kind != kind {
            return Err(NetError::Unexpected { expected: kind, got: f.kind });
        }
        if f.session != session {
            return Err(NetError::WrongSession { expected: session, got: f.session });
        }
        Ok(f.payload)
    }

    fn send_msg(&mut self, kind: MsgType, session: u64, payload: Vec<u8>) -> Result<(), NetError> {
        self.send(&Frame::new(kind, session, payload))
    }
}

impl<C: Channel + ?Sized> Channel for &mut C {
    fn send(&mut self, frame: &Frame) -> Result<(), NetError> {
        (**self).send(frame)
    }
    fn recv(&mut self) -> Result<Frame, NetError> {
        (**self).recv()
    }
    fn bytes_sent(&self) -> u64 {
        (**self).bytes_sent()
    }
    fn bytes_received(&self) -> u64 {
        (**self).bytes_received()
    }
}

impl<C: Channel + ?Sized> Channel for Box<C> {
    fn send(&mut self, frame: &Frame) -> Result<(), NetError> {
        (**self).send(frame)
    }
    fn recv(&mut self) -> Result<Frame, NetError> {
        (**self).recv()
    }
    fn bytes_sent(&self) -> u64 {
        (**self).bytes_sent()
    }
    fn bytes_received(&self) -> u64 {
        (**self).bytes_received()
    }
}

/// Frames over a TCP stream. Every `send` is flushed.
pub struct TcpChannel {
    reader: BufReader<TcpStream>,
    writer: BufWriter<TcpStream>,
    sent: u64,
    received: u64,
}

impl TcpChannel {
    pub fn new(stream: TcpStream) -> io::Result<Self> {
        stream.set_nodelay(true)?;
        let reader = BufReader::with_capacity(1 << 16, stream.try_clone()?);
        let writer = BufWriter::with_capacity(1 << 16, stream);
        Ok(Self { reader, writer, sent: 0, received: 0 })
    }

    pub fn connect(addr: &str) -> io::Result<Self> {
        Self::new(TcpStream::connect(addr)?)
    }

    pub fn set_read_timeout(&self, t: Option<Duration>) -> io::Result<()> {
        self.reader.get_ref().set_read_timeout(t)
    }

    pub fn peer_addr(&self) -> io::Result<std::net::SocketAddr> {
        self.reader.get_ref().peer_addr()
    }

    pub fn shutdown(&self) {
        let _ = self.reader.get_ref().shutdown(std::net::Shutdown::Both);
    }
}

impl Channel for TcpChannel {
    fn send(&mut self, frame: &Frame) -> Result<(), NetError> {
        let n = (1 + 8 + frame.payload.len()) as u32;
        self.writer.write_all(&n.to_le_bytes())?;
        self.writer.write_all(&[frame.kind as u8])?;
        self.writer.write_all(&frame.session.to_le_bytes())?;
        self.writer.write_all(&frame.payload)?;
        self.writer.flush()?;
        self.sent += frame.wire_len() as u64;
        Ok(())
    }

    fn recv(&mut self) -> Result<Frame, NetError> {
        let f = read_frame(&mut self.reader).map_err(|e| match e {
            NetError::Io(io) if matches!(io.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => {
                NetError::Timeout
            }
            other => other,
        })?;
        self.received += f.wire_len() as u64;
        Ok(f)
    }

    fn bytes_sent(&self) -> u64 {
        self.sent
    }

    fn bytes_received(&self) -> u64 {
        self.received
    }
}

/// In-process channel endpoint. Frames are encoded and decoded exactly as on TCP.
pub struct MemChannel {
    tx: Sender<Vec<u8>>,
    rx: Receiver<Vec<u8>>,
    timeout: Option<Duration>,
    sent: u64,
    received: u64,
}

/// Two connected in-memory endpoints.
pub fn mem_pair() -> (MemChannel, MemChannel) {
    let (tx_a, rx_b) = mpsc::channel();
    let (tx_b, rx_a) = mpsc::channel();
    let end = |tx, rx| MemChannel { tx, rx, timeout: None, sent: 0, received: 0 };
    (end(tx_a, rx_a), end(tx_b, rx_b))
}

impl MemChannel {
    pub fn set_timeout(&mut self, t: Option<Duration>) {
        self.timeout = t;
    }
}

impl Channel for MemChannel {
    fn send(&mut self, frame: &Frame) -> Result<(), NetError> {
        let bytes = frame.encode();
        self.sent += bytes.len() as u64;
        self.tx.send(bytes).map_err(|_| NetError::Closed)
    }

    fn recv(&mut self) -> Result<Frame, NetError> {
        let bytes = match self.timeout {
            None => self.rx.recv().map_err(|_| NetError::Closed)?,
            Some(t) => self.rx.recv_timeout(t).map_err(|e| match e {
                RecvTimeoutError::Timeout => NetError::Timeout,
                RecvTimeoutError::Disconnected => NetError::Closed,
            })?,
        };
        self.received += bytes.len() as u64;
        Frame::decode(&bytes)
    }

    fn bytes_sent(&self) -> u64 {
        self.sent
    }

    fn bytes_received(&self) -> u64 {
        self.received
    }
}

/// Packs bits LSB-first into bytes.
pub fn pack_bits(bits: &[bool]) -> Vec<u8> {
    let mut out = vec![0u8; bits.len().div_ceil(8)];
    for (i, &b) in bits.iter().enumerate() {
        out[i / 8] |= (b as u8) << (i % 8);
    }
    out
}

/// Inverse of [`pack_bits`]; rejects wrong lengths and nonzero padding.
pub fn unpack_bits(bytes: &[u8], n: usize) -> Result<Vec<bool>, NetError> {
    if bytes.len() != n.div_ceil(8) {
        return Err(NetError::Malformed(format!("{} bytes cannot hold exactly {n} bits", bytes.len())));
    }
    if n % 8 != 0 && bytes[n / 8] >> (n % 8) != 0 {
        return Err(NetError::Malformed("nonzero padding bits".into()));
    }
    Ok((0..n).map(|i| (bytes[i / 8] >> (i % 8)) & 1 == 1).collect())
}

/// Payload serializer.
#[derive(Default)]
pub struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn u8(&mut self, v: u8) -> &mut Self {
        self.buf.push(v);
        self
    }

    pub fn u16(&mut self, v: u16) -> &mut Self {
        self.buf.extend_from_slice(&v.to_le_bytes());
        self
    }

    pub fn u32(&mut self, v: u32) -> &mut Self {
        self.buf.extend_from_slice(&v.to_le_bytes());
        self
    }

    pub fn u64(&mut self, v: u64) -> &mut Self {
        self.buf.extend_from_slice(&v.to_le_bytes());
        self
    }

    pub fn u128(&mut self, v: u128) -> &mut Self {
        self.buf.extend_from_slice(&v.to_le_bytes());
        self
    }

    pub fn raw(&mut self, bytes: &[u8]) -> &mut Self {
        self.buf.extend_from_slice(bytes);
        self
    }

    /// `u32` length then the bytes.
    pub fn bytes(&mut self, bytes: &[u8]) -> &mut Self {
        self.u32(bytes.len() as u32);
        self.raw(bytes)
    }

    /// `u16` length then the bytes.
    pub fn short_bytes(&mut self, bytes: &[u8]) -> &mut Self {
        self.u16(bytes.len() as u16);
        self.raw(bytes)
    }

    pub fn str(&mut self, s: &str) -> &mut Self {
        self.bytes(s.as_bytes())
    }

    /// `u32` bit count then the packed bits.
    pub fn bits(&mut self, bits: &[bool]) -> &mut Self {
        self.u32(bits.len() as u32);
        let packed = pack_bits(bits);
        self.raw(&packed)
    }

    pub fn u128s(&mut self, vals: &[u128]) -> &mut Self {
        self.u32(vals.len() as u32);
        for &v in vals {
            self.u128(v);
        }
        self
    }

    pub fn len(&self) -> usize {
        self.buf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }

    pub fn finish(&mut self) -> Vec<u8> {
        std::mem::take(&mut self.buf)
    }
}

/// Payload deserializer; every read is bounds-checked.
pub struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Self { buf }
    }

    pub fn raw(&mut self, n: usize) -> Result<&'a [u8], NetError> {
        if self.buf.len() < n {
            return Err(NetError::Malformed(format!("need {n} bytes, {} left", self.buf.len())));
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], NetError> {
        Ok(self.raw(N)?.try_into().unwrap())
    }

    pub fn u8(&mut self) -> Result<u8, NetError> {
        Ok(self.array::<1>()?[0])
    }

    pub fn u16(&mut self) -> Result<u16, NetError> {
        Ok(u16::from_le_bytes(self.array()?))
    }

    pub fn u32(&mut self) -> Result<u32, NetError> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    pub fn u64(&mut self) -> Result<u64, NetError> {
        Ok(u64::from_le_bytes(self.array()?))
    }

    pub fn u128(&mut self) -> Result<u128, NetError> {
        Ok(u128::from_le_bytes(self.array()?))
    }

    pub fn bytes(&mut self) -> Result<&'a [u8], NetError> {
        let n = self.u32()? as usize;
        self.raw(n)
    }

    pub fn short_bytes(&mut self) -> Result<&'a [u8], NetError> {
        let n = self.u16()? as usize;
        self.raw(n)
    }

    pub fn string(&mut self) -> Result<String, NetError> {
        String::from_utf8(self.bytes()?.to_vec()).map_err(|_| NetError::Malformed("invalid utf-8".into()))
    }

    pub fn bits(&mut self) -> Result<Vec<bool>, NetError> {
        let n = self.u32()? as usize;
        let packed = self.raw(n.div_ceil(8))?;
        unpack_bits(packed, n)
    }

    /// Bits with a required count.
    pub fn bits_exact(&mut self, n: usize) -> Result<Vec<bool>, NetError> {
        let bits = self.bits()?;
        if bits.len() != n {
            return Err(NetError::Malformed(format!("expected {n} bits, got {}", bits.len())));
        }
        Ok(bits)
    }

    pub fn u128s(&mut self) -> Result<Vec<u128>, NetError> {
        let n = self.u32()? as usize;
        if n > self.buf.len() / 16 {
            return Err(NetError::Malformed(format!("{n} values overrun payload")));
        }
        (0..n).map(|_| self.u128()).collect()
    }

    pub fn remaining(&self) -> usize {
        self.buf.len()
    }

    /// Fails if any bytes are left unread.
    pub fn finish(self) -> Result<(), NetError> {
        if self.buf.is_empty() {
            Ok(())
        } else {
            Err(NetError::Malformed(format!("{} trailing bytes", self.buf.len())))
        }
    }
}
