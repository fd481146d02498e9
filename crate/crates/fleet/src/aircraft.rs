//! The aircraft node: replays a flight path and answers the satellite's rounds.

use std::collections::BTreeMap;
use std::net::TcpStream;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use privnav::fixed::{position_at, Bounds, PathPoint};
use privnav::net::{Channel, Frame, MsgType, NetError, Reader, TcpChannel};
use privnav::smpc::Tamper;
use privnav::zkrange::{Verdict, ZkTamper};

use crate::config::SessionConfig;
use crate::counting::CountingChannel;
use crate::dealer::{DealerSpec, Kind};
use crate::session::{answer_bounds, decode_begin, handshake_aircraft, proof_round_aircraft, tracking_round_aircraft};
use crate::state::EventLog;
use crate::{codes, FleetError};

/// Deviations for testing the satellite's defences.
#[derive(Debug, Clone, Copy, Default)]
pub struct AircraftOptions {
    pub tamper_tracking: Tamper,
    pub tamper_proof: ZkTamper,
    /// Tampering starts with this round number.
    pub tamper_from_round: u64,
    pub echo: bool,
}

#[derive(Debug, Clone)]
pub struct AircraftConfig {
    pub id: String,
    pub connect: String,
    pub session: SessionConfig,
    pub path: Vec<PathPoint>,
    pub dealer: DealerSpec,
    pub options: AircraftOptions,
}

#[derive(Debug)]
pub enum Ending {
    /// The satellite closed the connection.
    Closed,
    /// Stopped through [`AircraftHandle::kill`].
    Killed,
    Error(FleetError),
}

/// What an aircraft did. It never contains a unit vector: the aircraft is not an output party.
#[derive(Debug)]
pub struct AircraftReport {
    pub id: String,
    pub session: u64,
    pub tracking_rounds: u64,
    pub proof_rounds: u64,
    pub failed_rounds: u64,
    pub verdicts: Vec<(u64, Verdict)>,
    pub alerts: Vec<String>,
    /// Frames received, by message type code.
    pub received: BTreeMap<u8, u64>,
    pub bytes_sent: u64,
    pub bytes_received: u64,
    pub log: Vec<String>,
    pub ending: Ending,
}

#[derive(Default)]
struct Control {
    killed: AtomicBool,
    stream: Mutex<Option<TcpStream>>,
}

pub struct AircraftHandle {
    control: Arc<Control>,
    thread: JoinHandle<AircraftReport>,
}

impl AircraftHandle {
    /// Drops the connection abruptly, as a crashed node would.
    pub fn kill(&self) {
        self.control.killed.store(true, Ordering::SeqCst);
        if let Some(s) = self.control.stream.lock().unwrap().as_ref() {
            let _ = s.shutdown(std::net::Shutdown::Both);
        }
    }

    pub fn join(self) -> AircraftReport {
        self.thread.join().expect("aircraft thread panicked")
    }

    pub fn is_finished(&self) -> bool {
        self.thread.is_finished()
    }
}

pub fn spawn_aircraft(cfg: AircraftConfig) -> AircraftHandle {
    let control = Arc::new(Control::default());
    let c2 = control.clone();
    let thread = thread::spawn(move || run(cfg, &c2));
    AircraftHandle { control, thread }
}

/// Runs an aircraft on the current thread until the satellite hangs up or an error occurs.
pub fn run_aircraft(cfg: AircraftConfig) -> AircraftReport {
    run(cfg, &Control::default())
}

struct Progress {
    session: u64,
    tracking_rounds: u64,
    proof_rounds: u64,
    failed_rounds: u64,
    verdicts: Vec<(u64, Verdict)>,
    alerts: Vec<String>,
}

fn run(cfg: AircraftConfig, control: &Control) -> AircraftReport {
    let log = EventLog::new(cfg.options.echo);
    let mut p = Progress { session: 0, tracking_rounds: 0, proof_rounds: 0, failed_rounds: 0, verdicts: vec![], alerts: vec![] };
    let mut counts = (BTreeMap::new(), 0, 0);
    let ending = match connect(&cfg, control) {
        Ok(ch) => {
            let mut ch = CountingChannel::new(ch);
            let e = serve(&cfg, &mut ch, &log, &mut p);
            counts = (ch.tally(), ch.bytes_sent(), ch.bytes_received());
            e
        }
        Err(e) => Err(e),
    };
    let ending = match ending {
        _ if control.killed.load(Ordering::SeqCst) => Ending::Killed,
        Ok(()) => Ending::Closed,
        Err(e) => {
            log.log(format_args!("{} stopped: {e}", cfg.id));
            Ending::Error(e)
        }
    };
    AircraftReport {
        id: cfg.id,
        session: p.session,
        tracking_rounds: p.tracking_rounds,
        proof_rounds: p.proof_rounds,
        failed_rounds: p.failed_rounds,
        verdicts: p.verdicts,
        alerts: p.alerts,
        received: counts.0,
        bytes_sent: counts.1,
        bytes_received: counts.2,
        log: log.lines(),
        ending,
    }
}

fn connect(cfg: &AircraftConfig, control: &Control) -> Result<TcpChannel, FleetError> {
    if cfg.path.is_empty() {
        return Err(FleetError::Config("flight path is empty".into()));
    }
    let stream = TcpStream::connect(&cfg.connect)?;
    *control.stream.lock().unwrap() = Some(stream.try_clone()?);
    if control.killed.load(Ordering::SeqCst) {
        let _ = stream.shutdown(std::net::Shutdown::Both);
    }
    Ok(TcpChannel::new(stream)?)
}

fn serve<C: Channel>(cfg: &AircraftConfig, ch: &mut C, log: &EventLog, p: &mut Progress) -> Result<(), FleetError> {
    let session = handshake_aircraft(ch, &cfg.id, &cfg.session)?;
    p.session = session;
    log.log(format_args!("{} session {session:016x} established", cfg.id));
    let mut dealer = cfg.dealer.open()?;
    let start = Instant::now();
    let mut bounds: Option<Bounds> = None;
    loop {
        let f = match ch.recv() {
            Err(NetError::Closed) => return Ok(()),
            other => other?,
        };
        if f.session != session {
            ch.send(&Frame::error(session, codes::PROTOCOL, "wrong session id"))?;
            return Err(NetError::WrongSession { expected: session, got: f.session }.into());
        }
        match f.kind {
            MsgType::BoundsUpdate => match answer_bounds(ch, session, &cfg.session, &f.payload)? {
                Some(b) => {
                    bounds = Some(b);
                    log.log(format_args!("{} bounds updated", cfg.id));
                }
                None => log.log(format_args!("{} rejected invalid bounds", cfg.id)),
            },
            MsgType::TrackBegin => {
                let (round, kind) = decode_begin(&f.payload)?;
                let here = position_at(&cfg.path, start.elapsed().as_millis() as u64);
                let tampering = round >= cfg.options.tamper_from_round;
                let result = match kind {
                    Kind::Tracking => {
                        let t = if tampering { cfg.options.tamper_tracking } else { Tamper::None };
                        tracking_round_aircraft(ch, session, &cfg.session, round, &here, dealer.as_mut(), t).map(|()| {
                            p.tracking_rounds += 1;
                            log.log(format_args!("{} round {round}: tracking done", cfg.id));
                        })
                    }
                    Kind::Proof => {
                        let b = bounds.ok_or_else(|| FleetError::Aborted("proof requested before any bounds".into()))?;
                        let t = if tampering { cfg.options.tamper_proof } else { ZkTamper::None };
                        proof_round_aircraft(ch, session, &cfg.session, round, &here, &b, dealer.as_mut(), t).map(|v| {
                            p.proof_rounds += 1;
                            p.verdicts.push((round, v));
                            log.log(format_args!("{} round {round}: proof {}", cfg.id, v.as_str()));
                        })
                    }
                };
                match result {
                    Ok(()) => {}
                    // The round never started, so the channel is still in step.
                    Err(e @ FleetError::Dealer(_)) => {
                        p.failed_rounds += 1;
                        log.log(format_args!("{} round {round} skipped: {e}", cfg.id));
                    }
                    Err(e) => return Err(e),
                }
            }
            MsgType::Alert => {
                let text = Reader::new(&f.payload).string().unwrap_or_default();
                log.log(format_args!("{} alert from satellite: {text}", cfg.id));
                p.alerts.push(text);
            }
            MsgType::Error => {
                let mut r = Reader::new(&f.payload);
                let (code, reason) = (r.u16().unwrap_or(0), r.string().unwrap_or_default());
                if code == codes::SHUTDOWN {
                    log.log(format_args!("{} satellite shut down", cfg.id));
                    return Ok(());
                }
                return Err(NetError::Peer { code, reason }.into());
            }
            other => {
                ch.send(&Frame::error(session, codes::PROTOCOL, &format!("unexpected {other:?}")))?;
                return Err(NetError::Malformed(format!("unexpected {other:?} between rounds")).into());
            }
        }
    }
}

/// Waits up to `timeout` for `cond`, polling.
pub fn wait_until(timeout: Duration, mut cond: impl FnMut() -> bool) -> bool {
    let end = Instant::now() + timeout;
    while Instant::now() < end {
        if cond() {
            return true;
        }
        thread::sleep(Duration::from_millis(10));
    }
    cond()
}
