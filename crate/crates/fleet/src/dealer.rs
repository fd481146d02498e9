//! The preprocessing dealer.
//!
//! Both parties of a round ask for their half under the same `(session, round, kind)` key. The
//! first request generates the material and parks the other half; the second collects it. Each
//! half is handed out exactly once.

use std::collections::HashMap;
use std::io;
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use privnav::net::{Channel, Frame, MsgType, NetError, Reader, TcpChannel, Writer};
use privnav::smpc::{deal, EngineMode, Party, Preprocessing};
use privnav::zkrange::{decode_prover_triples, decode_verifier_material, deal_zk, encode_prover_triples, encode_verifier_material, ProverTriple, VerifierMaterial};
use rand::thread_rng;

use crate::{codes, FleetError};

/// Parked halves older than this are dropped.
const PARK_TTL: Duration = Duration::from_secs(300);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Kind {
    Tracking,
    Proof,
}

/// A request for one party's preprocessing. For proofs `Party1` is the verifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TripleRequest {
    pub session: u64,
    pub round: u64,
    pub kind: Kind,
    pub role: Party,
    pub mode: EngineMode,
    pub triples: u32,
    pub masks: u32,
}

impl TripleRequest {
    pub fn encode(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.u64(self.session)
            .u64(self.round)
            .u8(matches!(self.kind, Kind::Proof) as u8)
            .u8(if self.role == Party::Party1 { 1 } else { 2 })
            .u8(matches!(self.mode, EngineMode::Malicious) as u8)
            .u32(self.triples)
            .u32(self.masks);
        w.finish()
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, NetError> {
        let mut r = Reader::new(bytes);
        let bad = |what: &str| NetError::Malformed(format!("bad {what} byte"));
        let session = r.u64()?;
        let round = r.u64()?;
        let kind = match r.u8()? {
            0 => Kind::Tracking,
            1 => Kind::Proof,
            _ => return Err(bad("kind")),
        };
        let role = match r.u8()? {
            1 => Party::Party1,
            2 => Party::Party2,
            _ => return Err(bad("role")),
        };
        let mode = match r.u8()? {
            0 => EngineMode::SemiHonest,
            1 => EngineMode::Malicious,
            _ => return Err(bad("mode")),
        };
        let (triples, masks) = (r.u32()?, r.u32()?);
        r.finish()?;
        Ok(Self { session, round, kind, role, mode, triples, masks })
    }
}

/// `n` plus 10%, rounded up.
pub fn with_slack(n: usize) -> usize {
    n + n.div_ceil(10)
}

struct Parked {
    shape: (EngineMode, u32, u32),
    role: Party,
    half: Vec<u8>,
    created: Instant,
}

type Key = (u64, u64, Kind);

#[derive(Default)]
struct Book {
    parked: HashMap<Key, Parked>,
    /// Keys whose both halves went out, so a third request cannot mint fresh material.
    done: HashMap<Key, Instant>,
}

impl Book {
    fn expire(&mut self) {
        self.parked.retain(|_, p| p.created.elapsed() < PARK_TTL);
        self.done.retain(|_, t| t.elapsed() < PARK_TTL);
    }
}

/// The dealer's state; usable in-process or behind [`dealer_serve`].
#[derive(Default)]
pub struct DealerHub {
    book: Mutex<Book>,
}

impl DealerHub {
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of halves waiting for their second party.
    pub fn parked(&self) -> usize {
        self.book.lock().unwrap().parked.len()
    }

    fn generate(req: &TripleRequest) -> (Vec<u8>, Vec<u8>) {
        let mut rng = thread_rng();
        match req.kind {
            Kind::Tracking => {
                let (p1, p2) = deal(req.mode, req.triples as usize, req.masks as usize, &mut rng);
                (p1.encode(), p2.encode())
            }
            Kind::Proof => {
                let (prover, verifier) = deal_zk(req.triples as usize, &mut rng);
                (encode_verifier_material(&verifier), encode_prover_triples(&prover))
            }
        }
    }

    /// Returns the requester's half, or `(code, reason)` for an ERROR frame.
    pub fn handle(&self, req: &TripleRequest) -> Result<Vec<u8>, (u16, String)> {
        let key = (req.session, req.round, req.kind);
        let shape = (req.mode, req.triples, req.masks);
        let collect = |g: &mut Book| -> Option<Result<Vec<u8>, (u16, String)>> {
            if g.done.contains_key(&key) {
                return Some(Err((codes::DEALER, "material for this round was already issued".into())));
            }
            let p = g.parked.get(&key)?;
            if p.shape != shape {
                return Some(Err((codes::DEALER, "request does not match the peer's".into())));
            }
            if p.role != req.role {
                return Some(Err((codes::DEALER, "material for this role was already issued".into())));
            }
            let half = g.parked.remove(&key).unwrap().half;
            g.done.insert(key, Instant::now());
            Some(Ok(half))
        };
        {
            let mut g = self.book.lock().unwrap();
            g.expire();
            if let Some(r) = collect(&mut g) {
                return r;
            }
        }
        let (h1, h2) = Self::generate(req);
        let (mine, theirs) = if req.role == Party::Party1 { (h1, h2) } else { (h2, h1) };
        let mut g = self.book.lock().unwrap();
        // The peer may have raced us here; its material wins.
        if let Some(r) = collect(&mut g) {
            return r;
        }
        g.parked.insert(key, Parked { shape, role: req.role.peer(), half: theirs, created: Instant::now() });
        Ok(mine)
    }
}

/// Anything that can answer preprocessing requests.
pub trait TripleSource: Send {
    fn fetch(&mut self, req: &TripleRequest) -> Result<Vec<u8>, FleetError>;
}

impl TripleSource for Arc<DealerHub> {
    fn fetch(&mut self, req: &TripleRequest) -> Result<Vec<u8>, FleetError> {
        self.handle(req).map_err(|(_, reason)| FleetError::Dealer(reason))
    }
}

/// A connection to a remote dealer node.
pub struct DealerClient {
    ch: TcpChannel,
}

impl DealerClient {
    pub fn connect(addr: &str) -> Result<Self, FleetError> {
        let ch = TcpChannel::connect(addr).map_err(|e| FleetError::Dealer(format!("{addr}: {e}")))?;
        ch.set_read_timeout(Some(Duration::from_secs(30)))?;
        Ok(Self { ch })
    }
}

impl TripleSource for DealerClient {
    fn fetch(&mut self, req: &TripleRequest) -> Result<Vec<u8>, FleetError> {
        self.ch.send_msg(MsgType::TripleRequest, req.session, req.encode())?;
        self.ch.expect(MsgType::TripleBlock, req.session).map_err(|e| match e {
            NetError::Peer { reason, .. } => FleetError::Dealer(reason),
            e => e.into(),
        })
    }
}

/// How a node reaches its dealer.
#[derive(Clone)]
pub enum DealerSpec {
    Remote(String),
    Local(Arc<DealerHub>),
}

impl DealerSpec {
    pub fn open(&self) -> Result<Box<dyn TripleSource>, FleetError> {
        Ok(match self {
            DealerSpec::Remote(addr) => Box::new(DealerClient::connect(addr)?),
            DealerSpec::Local(hub) => Box::new(hub.clone()),
        })
    }
}

impl std::fmt::Debug for DealerSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DealerSpec::Remote(a) => write!(f, "Remote({a})"),
            DealerSpec::Local(_) => write!(f, "Local"),
        }
    }
}

pub fn fetch_tracking(
    src: &mut dyn TripleSource,
    session: u64,
    round: u64,
    role: Party,
    mode: EngineMode,
    triples: usize,
    masks: usize,
) -> Result<Preprocessing, FleetError> {
    let req = TripleRequest { session, round, kind: Kind::Tracking, role, mode, triples: triples as u32, masks: masks as u32 };
    Ok(Preprocessing::decode(&src.fetch(&req)?)?)
}

fn proof_request(session: u64, round: u64, role: Party, triples: usize) -> TripleRequest {
    TripleRequest { session, round, kind: Kind::Proof, role, mode: EngineMode::Malicious, triples: triples as u32, masks: 0 }
}

pub fn fetch_prover(src: &mut dyn TripleSource, session: u64, round: u64, triples: usize) -> Result<Vec<ProverTriple>, FleetError> {
    Ok(decode_prover_triples(&src.fetch(&proof_request(session, round, Party::Party2, triples))?)?)
}

pub fn fetch_verifier(src: &mut dyn TripleSource, session: u64, round: u64, triples: usize) -> Result<VerifierMaterial, FleetError> {
    Ok(decode_verifier_material(&src.fetch(&proof_request(session, round, Party::Party1, triples))?)?)
}

/// A running dealer node.
pub struct DealerHandle {
    pub addr: SocketAddr,
    pub hub: Arc<DealerHub>,
    stop: Arc<AtomicBool>,
    thread: Option<JoinHandle<()>>,
}

impl DealerHandle {
    pub fn stop(mut self) {
        self.stop.store(true, Ordering::SeqCst);
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

fn serve_connection(stream: TcpStream, hub: Arc<DealerHub>) -> Result<(), NetError> {
    let mut ch = TcpChannel::new(stream)?;
    loop {
        let frame = match ch.recv() {
            Err(NetError::Closed) => return Ok(()),
            other => other?,
        };
        let reply = match frame.kind {
            MsgType::TripleRequest => match TripleRequest::decode(&frame.payload) {
                Ok(req) => match hub.handle(&req) {
                    Ok(half) => Frame::new(MsgType::TripleBlock, frame.session, half),
                    Err((code, reason)) => Frame::error(frame.session, code, &reason),
                },
                Err(e) => Frame::error(frame.session, codes::PROTOCOL, &e.to_string()),
            },
            other => Frame::error(frame.session, codes::PROTOCOL, &format!("unexpected {other:?}")),
        };
        ch.send(&reply)?;
    }
}

/// Serves dealer requests on `listener` until stopped; one thread per connection.
pub fn dealer_serve(listener: TcpListener, hub: Arc<DealerHub>) -> io::Result<DealerHandle> {
    let addr = listener.local_addr()?;
    listener.set_nonblocking(true)?;
    let stop = Arc::new(AtomicBool::new(false));
    let (stop2, hub2) = (stop.clone(), hub.clone());
    let thread = thread::spawn(move || {
        while !stop2.load(Ordering::SeqCst) {
            match listener.accept() {
                Ok((stream, _)) => {
                    let hub = hub2.clone();
                    let _ = stream.set_nonblocking(false);
                    thread::spawn(move || {
                        let _ = serve_connection(stream, hub);
                    });
                }
                Err(e) if e.kind() == io::ErrorKind::WouldBlock => thread::sleep(Duration::from_millis(20)),
                Err(_) => thread::sleep(Duration::from_millis(20)),
            }
        }
    });
    Ok(DealerHandle { addr, hub, stop, thread: Some(thread) })
}
