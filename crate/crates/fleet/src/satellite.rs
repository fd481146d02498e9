//! The satellite node: one thread per aircraft session, a round scheduler in each, and a
//! line-oriented status endpoint.

use std::collections::BTreeMap;
use std::io::{self, BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use privnav::fixed::{Bounds, FixedPoint};
use privnav::net::{Channel, Frame, MsgType, TcpChannel, Writer};
use privnav::zkrange::Verdict;
use rand::Rng;

use crate::config::{NodeConfig, SessionConfig};
use crate::dealer::{DealerSpec, Kind, TripleSource};
use crate::session::{handshake_satellite, proof_round_satellite, send_bounds, tracking_round_satellite};
use crate::state::{AlertKind, FleetState, RoundStats, SessionStatus, VerdictRecord};
use crate::{codes, FleetError};

const POLL: Duration = Duration::from_millis(20);

#[derive(Debug, Clone)]
pub struct SatelliteConfig {
    pub session: SessionConfig,
    pub position: [FixedPoint; 3],
    pub bounds: BTreeMap<String, Bounds>,
    pub default_bounds: Option<Bounds>,
    pub dealer: DealerSpec,
    /// Consecutive failed rounds before a session is torn down.
    pub max_failures: u32,
    /// How long to wait for an aircraft's next message.
    pub io_timeout: Duration,
    pub echo: bool,
}

impl SatelliteConfig {
    pub fn from_node(cfg: &NodeConfig, dealer: DealerSpec) -> Result<Self, FleetError> {
        let position = cfg.satellite_position.ok_or_else(|| FleetError::Config("satellite_position is required".into()))?;
        Ok(Self {
            session: cfg.session_config(),
            position,
            bounds: cfg.bounds.clone(),
            default_bounds: cfg.default_bounds,
            dealer,
            max_failures: cfg.max_failures.max(1),
            io_timeout: Duration::from_secs(30),
            echo: false,
        })
    }

    fn bounds_for(&self, id: &str) -> Option<Bounds> {
        self.bounds.get(id).copied().or(self.default_bounds)
    }
}

pub struct SatelliteHandle {
    pub addr: SocketAddr,
    pub status_addr: Option<SocketAddr>,
    pub state: Arc<FleetState>,
    stop: Arc<AtomicBool>,
    threads: Arc<Mutex<Vec<JoinHandle<()>>>>,
}

impl SatelliteHandle {
    /// Stops accepting, ends every session at its next round boundary and waits for them.
    pub fn stop(self) -> Arc<FleetState> {
        self.stop.store(true, Ordering::SeqCst);
        loop {
            let next = self.threads.lock().unwrap().pop();
            match next {
                Some(t) => {
                    let _ = t.join();
                }
                None => break,
            }
        }
        self.state
    }

    pub fn stopping(&self) -> bool {
        self.stop.load(Ordering::SeqCst)
    }
}

/// Starts a satellite on `listener`, and a status endpoint on `status` if given.
pub fn satellite_serve(listener: TcpListener, status: Option<TcpListener>, cfg: SatelliteConfig) -> io::Result<SatelliteHandle> {
    let addr = listener.local_addr()?;
    let status_addr = status.as_ref().map(|s| s.local_addr()).transpose()?;
    let state = Arc::new(FleetState::new(cfg.echo));
    let stop = Arc::new(AtomicBool::new(false));
    let threads: Arc<Mutex<Vec<JoinHandle<()>>>> = Arc::default();
    let cfg = Arc::new(cfg);

    listener.set_nonblocking(true)?;
    let (st, sp, th) = (state.clone(), stop.clone(), threads.clone());
    let acceptor = thread::spawn(move || {
        while !sp.load(Ordering::SeqCst) {
            match listener.accept() {
                Ok((stream, _)) => {
                    let (st, sp, cfg) = (st.clone(), sp.clone(), cfg.clone());
                    let t = thread::spawn(move || run_session(stream, &cfg, &st, &sp));
                    th.lock().unwrap().push(t);
                }
                Err(_) => thread::sleep(POLL),
            }
        }
    });
    threads.lock().unwrap().push(acceptor);

    if let Some(status) = status {
        status.set_nonblocking(true)?;
        let (st, sp) = (state.clone(), stop.clone());
        let t = thread::spawn(move || {
            while !sp.load(Ordering::SeqCst) {
                match status.accept() {
                    Ok((stream, _)) => {
                        let st = st.clone();
                        thread::spawn(move || {
                            let _ = serve_status(stream, &st);
                        });
                    }
                    Err(_) => thread::sleep(POLL),
                }
            }
        });
        threads.lock().unwrap().push(t);
    }
    Ok(SatelliteHandle { addr, status_addr, state, stop, threads })
}

fn serve_status(stream: TcpStream, state: &FleetState) -> io::Result<()> {
    stream.set_nonblocking(false)?;
    stream.set_read_timeout(Some(Duration::from_secs(60)))?;
    let mut out = stream.try_clone()?;
    for line in BufReader::new(stream).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        for l in state.query(&line) {
            writeln!(out, "{l}")?;
        }
        writeln!(out, "END")?;
        out.flush()?;
    }
    Ok(())
}

/// Sends one status command to a running endpoint and returns the response lines.
pub fn query_status(addr: &str, command: &str) -> io::Result<Vec<String>> {
    let stream = TcpStream::connect(addr)?;
    stream.set_read_timeout(Some(Duration::from_secs(10)))?;
    let mut w = stream.try_clone()?;
    writeln!(w, "{command}")?;
    let mut lines = Vec::new();
    for line in BufReader::new(stream).lines() {
        let line = line?;
        if line == "END" {
            break;
        }
        lines.push(line);
    }
    Ok(lines)
}

fn run_session(stream: TcpStream, cfg: &SatelliteConfig, state: &FleetState, stop: &AtomicBool) {
    let session: u64 = rand::thread_rng().gen_range(1..u64::MAX);
    let setup = (|| -> Result<(TcpChannel, String), FleetError> {
        stream.set_nonblocking(false)?;
        let mut ch = TcpChannel::new(stream)?;
        ch.set_read_timeout(Some(cfg.io_timeout))?;
        let id = handshake_satellite(&mut ch, session, &cfg.session)?;
        Ok((ch, id))
    })();
    let (mut ch, id) = match setup {
        Ok(x) => x,
        Err(e) => {
            state.log.log(format_args!("session {session:016x} rejected: {e}"));
            return;
        }
    };
    let Some(bounds) = cfg.bounds_for(&id) else {
        let _ = ch.send(&Frame::error(session, codes::NO_BOUNDS, "no bounds configured for this aircraft"));
        state.log.log(format_args!("{id} rejected: no bounds configured"));
        return;
    };
    if let Err(reason) = state.register(&id, session, bounds) {
        let _ = ch.send(&Frame::error(session, codes::DUPLICATE_ID, &reason));
        state.log.log(format_args!("{id} rejected: {reason}"));
        return;
    }
    state.log.log(format_args!("{id} session {session:016x} established"));
    let end = match cfg.dealer.open() {
        Ok(mut dealer) => match send_bounds(&mut ch, session, &bounds) {
            Ok(()) => schedule(&mut ch, session, &id, cfg, state, stop, dealer.as_mut()),
            Err(e) => (SessionStatus::Failed, Some(e)),
        },
        Err(e) => (SessionStatus::Failed, Some(e)),
    };
    let (status, err) = end;
    let last_round = state.get(&id).map_or(0, |r| r.tracking.completed + r.proofs.completed);
    match status {
        SessionStatus::Quarantined => {
            let _ = ch.send(&Frame::error(session, codes::CHEAT, "cheating detected"));
        }
        SessionStatus::Failed => {
            let reason = err.as_ref().map_or_else(|| "failed".to_string(), |e| e.to_string());
            state.alert(&id, AlertKind::Teardown, last_round, reason.clone());
            let _ = ch.send(&Frame::error(session, codes::TEARDOWN, &reason));
        }
        _ => {
            let _ = ch.send(&Frame::error(session, codes::SHUTDOWN, "satellite shutting down"));
        }
    }
    ch.shutdown();
    state.with(&id, |r| r.status = status);
    state.log.log(format_args!("{id} session ended: {}", status.as_str()));
}

/// Sleeps until `due` or until `stop` is raised. Returns false if stopped.
fn sleep_until(due: Instant, stop: &AtomicBool) -> bool {
    loop {
        if stop.load(Ordering::SeqCst) {
            return false;
        }
        let now = Instant::now();
        if now >= due {
            return true;
        }
        thread::sleep((due - now).min(POLL));
    }
}

struct Slot {
    kind: Kind,
    next: Instant,
    interval: Duration,
}

impl Slot {
    /// Advances past the slot just served; counts slots that can no longer finish in time.
    fn advance(&mut self, now: Instant, stats: &mut RoundStats) {
        self.next += self.interval;
        while now > self.next + 2 * self.interval {
            stats.late += 1;
            self.next += self.interval;
        }
    }
}

fn schedule(
    ch: &mut TcpChannel,
    session: u64,
    id: &str,
    cfg: &SatelliteConfig,
    state: &FleetState,
    stop: &AtomicBool,
    dealer: &mut dyn TripleSource,
) -> (SessionStatus, Option<FleetError>) {
    let t0 = Instant::now();
    let mut slots = [
        Slot { kind: Kind::Tracking, next: t0, interval: cfg.session.tracking_interval },
        Slot { kind: Kind::Proof, next: t0, interval: cfg.session.proof_interval },
    ];
    let mut round = 0u64;
    let mut failures = 0u32;
    loop {
        let i = if slots[0].next <= slots[1].next { 0 } else { 1 };
        let due = slots[i].next;
        if !sleep_until(due, stop) {
            return (SessionStatus::Closed, None);
        }
        if let Some(Some(b)) = state.with(id, |r| r.pending_bounds.take()) {
            if let Err(e) = send_bounds(ch, session, &b) {
                return (SessionStatus::Failed, Some(e));
            }
            state.with(id, |r| r.bounds = b);
            state.log.log(format_args!("{id} bounds updated"));
        }
        round += 1;
        let outcome = match slots[i].kind {
            Kind::Tracking => tracking(ch, session, id, round, cfg, state, dealer),
            Kind::Proof => proof(ch, session, id, round, cfg, state, dealer),
        };
        let now = Instant::now();
        let interval = slots[i].interval;
        let kind = slots[i].kind;
        state.with(id, |r| {
            let stats = if kind == Kind::Tracking { &mut r.tracking } else { &mut r.proofs };
            match outcome {
                Outcome::Done => {
                    stats.completed += 1;
                    let latency = now.saturating_duration_since(due);
                    stats.max_latency_ms = stats.max_latency_ms.max(latency.as_millis() as u64);
                    if latency > 2 * interval {
                        stats.late += 1;
                    }
                }
                _ => stats.failed += 1,
            }
            slots[i].advance(now, stats);
        });
        match outcome {
            Outcome::Done => failures = 0,
            Outcome::Failed(e) => {
                failures += 1;
                state.with(id, |r| r.consecutive_failures = failures);
                state.log.log(format_args!("{id} round {round} failed: {e}"));
                if failures >= cfg.max_failures {
                    return (SessionStatus::Failed, Some(FleetError::Aborted(format!("{failures} consecutive failed rounds"))));
                }
            }
            Outcome::Quarantine => return (SessionStatus::Quarantined, None),
            Outcome::Broken(e) => return (SessionStatus::Failed, Some(e)),
        }
    }
}

enum Outcome {
    Done,
    /// The round did not produce a result but the channel is still in step.
    Failed(FleetError),
    Quarantine,
    Broken(FleetError),
}

fn tracking(
    ch: &mut TcpChannel,
    session: u64,
    id: &str,
    round: u64,
    cfg: &SatelliteConfig,
    state: &FleetState,
    dealer: &mut dyn TripleSource,
) -> Outcome {
    match tracking_round_satellite(ch, session, &cfg.session, round, &cfg.position, dealer) {
        Ok(antenna) => {
            let u: Vec<String> = antenna.u.iter().map(|c| c.to_decimal()).collect();
            state.log.log(format_args!("{id} round {round}: u=({})", u.join(", ")));
            state.with(id, |r| r.antenna = Some(antenna));
            if antenna.fault {
                state.alert(id, AlertKind::Fault, round, "degenerate trajectory: zero vector");
                Outcome::Failed(FleetError::Aborted("degenerate trajectory".into()))
            } else {
                Outcome::Done
            }
        }
        Err(e) if e.is_cheat() => {
            state.alert(id, AlertKind::Cheat, round, e.to_string());
            Outcome::Quarantine
        }
        Err(e @ FleetError::Dealer(_)) => Outcome::Failed(e),
        Err(e) => Outcome::Broken(e),
    }
}

fn proof(
    ch: &mut TcpChannel,
    session: u64,
    id: &str,
    round: u64,
    cfg: &SatelliteConfig,
    state: &FleetState,
    dealer: &mut dyn TripleSource,
) -> Outcome {
    let Some(bounds) = state.with(id, |r| r.bounds) else {
        return Outcome::Broken(FleetError::UnknownAircraft(id.into()));
    };
    match proof_round_satellite(ch, session, &cfg.session, round, &bounds, dealer) {
        Ok(out) => {
            let rec = VerdictRecord { verdict: out.verdict, round, at_ms: state.started.elapsed().as_millis() as u64 };
            state.with(id, |r| r.verdicts.push(rec));
            state.log.log(format_args!("{id} round {round}: proof {}", out.verdict.as_str()));
            match out.verdict {
                Verdict::Accepted => Outcome::Done,
                Verdict::RejectedOutOfBounds => {
                    state.alert(id, AlertKind::OutOfBounds, round, "range proof: out of bounds");
                    let mut w = Writer::new();
                    w.str(&format!("round {round}: outside assigned bounds"));
                    match ch.send_msg(MsgType::Alert, session, w.finish()) {
                        Ok(()) => Outcome::Done,
                        Err(e) => Outcome::Broken(e.into()),
                    }
                }
                Verdict::RejectedCheat => {
                    state.alert(id, AlertKind::Cheat, round, "range proof failed its MAC check");
                    Outcome::Quarantine
                }
            }
        }
        Err(e @ FleetError::Dealer(_)) => Outcome::Failed(e),
        Err(e) => Outcome::Broken(e),
    }
}
