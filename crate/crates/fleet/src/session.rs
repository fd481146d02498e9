//! Per-connection protocol steps shared by the satellite and aircraft nodes.
//!
//! ```text
//! A → S  HELLO         version, aircraft id               (session 0)
//! S → A  CONFIG        SessionConfig                      (assigns the session id)
//! A → S  CFG_ACK       SHA-256 of the config              or ERROR
//! S → A  BOUNDS_UPDATE six raw values; A → S BOUNDS_ACK with their hash, or ERROR
//! S → A  TRACK_BEGIN   round, kind; A echoes it once its preprocessing is in hand, or ERROR
//!        ... smpc evaluation or zero-knowledge proof ...
//! S → A  ALERT         free text, after an out-of-bounds verdict
//! ```
//!
//! The satellite fetches its preprocessing before `TRACK_BEGIN` and the aircraft before the echo,
//! so a dealer failure on either side leaves the channel at a round boundary.

use privnav::circuit::trajectory_output;
use privnav::fixed::{Bounds, FixedPoint};
use privnav::net::{Channel, Frame, MsgType, NetError, Reader, Writer};
use privnav::par::Parallelism;
use privnav::smpc::{evaluate, EngineMode, EvalOptions, Party, Tamper};
use privnav::zkrange::{prove_range, verify_range, ProverOptions, ProverTriples, Verdict, VerifierOutcome, VerifierTriples, ZkTamper};
use rand::thread_rng;

use crate::config::{bounds_hash, decode_bounds_raw, encode_bounds, SessionConfig, PROTOCOL_VERSION};
use crate::dealer::{fetch_prover, fetch_tracking, fetch_verifier, with_slack, Kind, TripleSource};
use crate::state::AntennaState;
use crate::{codes, FleetError};

fn reject<C: Channel + ?Sized>(ch: &mut C, session: u64, code: u16, reason: String) -> FleetError {
    let _ = ch.send(&Frame::error(session, code, &reason));
    FleetError::Handshake { code, reason }
}

/// Checks a peer's proposal against ours and names the first difference.
pub fn compare_configs(mine: &SessionConfig, theirs: &SessionConfig) -> Result<(), (u16, String)> {
    if mine.version != theirs.version {
        return Err((codes::VERSION_MISMATCH, format!("version {} vs {}", mine.version, theirs.version)));
    }
    if mine.params != theirs.params {
        return Err((codes::CFG_MISMATCH, format!("fixed point {} vs {}", mine.params, theirs.params)));
    }
    if mine.mode != theirs.mode {
        return Err((codes::CFG_MISMATCH, format!("mode {} vs {}", mine.mode.as_str(), theirs.mode.as_str())));
    }
    if (mine.tracking_interval, mine.proof_interval) != (theirs.tracking_interval, theirs.proof_interval) {
        return Err((codes::CFG_MISMATCH, "round intervals differ".into()));
    }
    if (mine.trajectory_hash, mine.range_hash) != (theirs.trajectory_hash, theirs.range_hash) {
        return Err((codes::HASH_MISMATCH, "circuit hashes differ".into()));
    }
    Ok(())
}

/// Aircraft side. Returns the session id the satellite assigned.
pub fn handshake_aircraft<C: Channel + ?Sized>(ch: &mut C, id: &str, mine: &SessionConfig) -> Result<u64, FleetError> {
    let mut w = Writer::new();
    w.u16(PROTOCOL_VERSION).str(id);
    ch.send_msg(MsgType::Hello, 0, w.finish())?;
    let f = ch.recv()?;
    if f.kind == MsgType::Error {
        let mut r = Reader::new(&f.payload);
        return Err(FleetError::Handshake { code: r.u16().unwrap_or(0), reason: r.string().unwrap_or_default() });
    }
    if f.kind != MsgType::Config {
        return Err(NetError::Unexpected { expected: MsgType::Config, got: f.kind }.into());
    }
    let session = f.session;
    let theirs = match SessionConfig::decode(&f.payload) {
        Ok(c) => c,
        Err(e) => return Err(reject(ch, session, codes::PROTOCOL, e.to_string())),
    };
    if let Err((code, reason)) = compare_configs(mine, &theirs) {
        return Err(reject(ch, session, code, reason));
    }
    ch.send_msg(MsgType::CfgAck, session, mine.digest().to_vec())?;
    Ok(session)
}

/// Satellite side. Returns the aircraft's id.
pub fn handshake_satellite<C: Channel + ?Sized>(ch: &mut C, session: u64, mine: &SessionConfig) -> Result<String, FleetError> {
    let hello = ch.expect(MsgType::Hello, 0)?;
    let mut r = Reader::new(&hello);
    let version = r.u16()?;
    let id = r.string()?;
    r.finish()?;
    if version != mine.version {
        return Err(reject(ch, session, codes::VERSION_MISMATCH, format!("version {version} vs {}", mine.version)));
    }
    if id.is_empty() || id.len() > 64 || !id.chars().all(|c| c.is_ascii_graphic()) {
        return Err(reject(ch, session, codes::PROTOCOL, "aircraft id must be 1-64 printable characters".into()));
    }
    ch.send_msg(MsgType::Config, session, mine.encode())?;
    let ack = ch.expect(MsgType::CfgAck, session).map_err(|e| match e {
        NetError::Peer { code, reason } => FleetError::Handshake { code, reason },
        e => e.into(),
    })?;
    if ack != mine.digest() {
        return Err(reject(ch, session, codes::CFG_MISMATCH, "acknowledged a different config".into()));
    }
    Ok(id)
}

/// Satellite side of a bounds change.
pub fn send_bounds<C: Channel + ?Sized>(ch: &mut C, session: u64, bounds: &Bounds) -> Result<(), FleetError> {
    ch.send_msg(MsgType::BoundsUpdate, session, encode_bounds(bounds))?;
    let ack = ch.expect(MsgType::BoundsAck, session)?;
    if ack != bounds_hash(bounds) {
        return Err(FleetError::Aborted("bounds acknowledgement carries the wrong hash".into()));
    }
    Ok(())
}

/// Aircraft side: validates an update, answers it, and returns the new bounds if accepted.
pub fn answer_bounds<C: Channel + ?Sized>(ch: &mut C, session: u64, cfg: &SessionConfig, payload: &[u8]) -> Result<Option<Bounds>, FleetError> {
    let parsed = decode_bounds_raw(payload, cfg.params)
        .map_err(|e| e.to_string())
        .and_then(|v| Bounds::from_array(v).map_err(|e| e.to_string()));
    match parsed {
        Ok(b) => {
            ch.send_msg(MsgType::BoundsAck, session, bounds_hash(&b).to_vec())?;
            Ok(Some(b))
        }
        Err(reason) => {
            ch.send(&Frame::error(session, codes::BOUNDS_INVALID, &reason))?;
            Ok(None)
        }
    }
}

pub fn encode_begin(round: u64, kind: Kind) -> Vec<u8> {
    let mut w = Writer::new();
    w.u64(round).u8(matches!(kind, Kind::Proof) as u8);
    w.finish()
}

pub fn decode_begin(payload: &[u8]) -> Result<(u64, Kind), NetError> {
    let mut r = Reader::new(payload);
    let round = r.u64()?;
    let kind = match r.u8()? {
        0 => Kind::Tracking,
        1 => Kind::Proof,
        k => return Err(NetError::Malformed(format!("round kind {k}"))),
    };
    r.finish()?;
    Ok((round, kind))
}

/// Satellite: announce a round and wait for the aircraft to be ready.
fn begin_round<C: Channel + ?Sized>(ch: &mut C, session: u64, round: u64, kind: Kind) -> Result<(), FleetError> {
    let payload = encode_begin(round, kind);
    ch.send_msg(MsgType::TrackBegin, session, payload.clone())?;
    let echo = ch.expect(MsgType::TrackBegin, session).map_err(|e| match e {
        NetError::Peer { code: codes::DEALER, reason } => FleetError::Dealer(format!("aircraft: {reason}")),
        e => e.into(),
    })?;
    if echo != payload {
        return Err(FleetError::Aborted("aircraft acknowledged a different round".into()));
    }
    Ok(())
}

fn masks_for(mode: EngineMode, n_inputs: usize) -> usize {
    match mode {
        EngineMode::SemiHonest => 0,
        EngineMode::Malicious => n_inputs,
    }
}

/// Satellite side of one tracking round. The satellite is `Party1` and the only output receiver.
pub fn tracking_round_satellite<C: Channel + ?Sized>(
    ch: &mut C,
    session: u64,
    cfg: &SessionConfig,
    round: u64,
    position: &[FixedPoint; 3],
    dealer: &mut dyn TripleSource,
) -> Result<AntennaState, FleetError> {
    let plans = cfg.plans();
    let plan = &plans.trajectory;
    let n_in = plan.circuit().n_input_bits();
    let pre = fetch_tracking(dealer, session, round, Party::Party1, cfg.mode, with_slack(plan.and_count()), masks_for(cfg.mode, n_in))?;
    begin_round(ch, session, round, Kind::Tracking)?;
    let mut inputs: Vec<Option<Vec<bool>>> = position.iter().map(|p| Some(p.to_bits_lsb())).collect();
    inputs.extend([None, None, None]);
    let opts = EvalOptions { par: Parallelism::Sequential, ..EvalOptions::new(cfg.mode) };
    let report = evaluate(ch, session, Party::Party1, plan, &inputs, pre, &opts, &mut thread_rng())?;
    let out = report.outputs.ok_or_else(|| FleetError::Aborted("no output at the receiving party".into()))?;
    Ok(AntennaState::new(trajectory_output(&out, cfg.params), round))
}

/// Aircraft side of a tracking round whose `TRACK_BEGIN` has been received.
#[allow(clippy::too_many_arguments)]
pub fn tracking_round_aircraft<C: Channel + ?Sized>(
    ch: &mut C,
    session: u64,
    cfg: &SessionConfig,
    round: u64,
    position: &[FixedPoint; 3],
    dealer: &mut dyn TripleSource,
    tamper: Tamper,
) -> Result<(), FleetError> {
    let plans = cfg.plans();
    let plan = &plans.trajectory;
    let n_in = plan.circuit().n_input_bits();
    let pre = match fetch_tracking(dealer, session, round, Party::Party2, cfg.mode, with_slack(plan.and_count()), masks_for(cfg.mode, n_in)) {
        Ok(p) => p,
        Err(e) => {
            ch.send(&Frame::error(session, codes::DEALER, &e.to_string()))?;
            return Err(e);
        }
    };
    ch.send_msg(MsgType::TrackBegin, session, encode_begin(round, Kind::Tracking))?;
    let mut inputs: Vec<Option<Vec<bool>>> = vec![None, None, None];
    inputs.extend(position.iter().map(|p| Some(p.to_bits_lsb())));
    let opts = EvalOptions { par: Parallelism::Sequential, tamper, ..EvalOptions::new(cfg.mode) };
    let report = evaluate(ch, session, Party::Party2, plan, &inputs, pre, &opts, &mut thread_rng())?;
    // The aircraft never holds the unit vector.
    debug_assert!(report.outputs.is_none());
    Ok(())
}

/// Satellite (verifier) side of one proof round.
pub fn proof_round_satellite<C: Channel + ?Sized>(
    ch: &mut C,
    session: u64,
    cfg: &SessionConfig,
    round: u64,
    bounds: &Bounds,
    dealer: &mut dyn TripleSource,
) -> Result<VerifierOutcome, FleetError> {
    let plans = cfg.plans();
    let material = fetch_verifier(dealer, session, round, with_slack(plans.range.and_count()))?;
    begin_round(ch, session, round, Kind::Proof)?;
    Ok(verify_range(ch, session, &plans.range, bounds, VerifierTriples::Dealt(material), Parallelism::Sequential, &mut thread_rng())?)
}

/// Aircraft (prover) side of a proof round whose `TRACK_BEGIN` has been received.
#[allow(clippy::too_many_arguments)]
pub fn proof_round_aircraft<C: Channel + ?Sized>(
    ch: &mut C,
    session: u64,
    cfg: &SessionConfig,
    round: u64,
    position: &[FixedPoint; 3],
    bounds: &Bounds,
    dealer: &mut dyn TripleSource,
    tamper: ZkTamper,
) -> Result<Verdict, FleetError> {
    let plans = cfg.plans();
    let triples = match fetch_prover(dealer, session, round, with_slack(plans.range.and_count())) {
        Ok(t) => t,
        Err(e) => {
            ch.send(&Frame::error(session, codes::DEALER, &e.to_string()))?;
            return Err(e);
        }
    };
    ch.send_msg(MsgType::TrackBegin, session, encode_begin(round, Kind::Proof))?;
    let opts = ProverOptions { tamper, par: Parallelism::Sequential };
    Ok(prove_range(ch, session, &plans.range, position, bounds, ProverTriples::Dealt(triples), &opts, &mut thread_rng())?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dealer::DealerHub;
    use privnav::fixed::{encode, trajectory_plain, FpParams};
    use privnav::net::mem_pair;
    use std::sync::Arc;
    use std::thread;
    use std::time::Duration;

    fn cfg(k: u32, mode: EngineMode) -> SessionConfig {
        SessionConfig::new(FpParams::for_bitwidth(k).unwrap(), mode, Duration::from_millis(100), Duration::from_millis(300))
    }

    #[test]
    fn handshake_agrees_on_identical_configs() {
        let c = cfg(16, EngineMode::SemiHonest);
        let (mut a, mut s) = mem_pair();
        let c2 = c.clone();
        let h = thread::spawn(move || handshake_aircraft(&mut a, "AC7", &c2));
        assert_eq!(handshake_satellite(&mut s, 42, &c).unwrap(), "AC7");
        assert_eq!(h.join().unwrap().unwrap(), 42);
    }

    fn mismatch(sat: SessionConfig, air: SessionConfig) -> (FleetError, FleetError) {
        let (mut a, mut s) = mem_pair();
        let h = thread::spawn(move || handshake_aircraft(&mut a, "AC7", &air).unwrap_err());
        let se = handshake_satellite(&mut s, 1, &sat).unwrap_err();
        (se, h.join().unwrap())
    }

    #[test]
    fn differing_bitwidth_is_cfg_mismatch() {
        let (se, ae) = mismatch(cfg(16, EngineMode::SemiHonest), cfg(32, EngineMode::SemiHonest));
        assert!(matches!(ae, FleetError::Handshake { code: codes::CFG_MISMATCH, .. }), "{ae}");
        assert!(matches!(se, FleetError::Handshake { code: codes::CFG_MISMATCH, .. }), "{se}");
        let (_, ae) = mismatch(cfg(16, EngineMode::SemiHonest), cfg(16, EngineMode::Malicious));
        assert!(matches!(ae, FleetError::Handshake { code: codes::CFG_MISMATCH, .. }));
    }

    #[test]
    fn differing_circuit_hash_is_rejected() {
        let mut other = cfg(16, EngineMode::SemiHonest);
        other.range_hash[0] ^= 1;
        let (se, ae) = mismatch(cfg(16, EngineMode::SemiHonest), other);
        assert!(matches!(ae, FleetError::Handshake { code: codes::HASH_MISMATCH, .. }));
        assert!(matches!(se, FleetError::Handshake { code: codes::HASH_MISMATCH, .. }));
    }

    #[test]
    fn bounds_update_and_invalid_bounds() {
        let c = cfg(16, EngineMode::SemiHonest);
        let p = c.params;
        let b = Bounds::cube(encode(-1.0, p).unwrap(), encode(1.0, p).unwrap()).unwrap();
        let (mut a, mut s) = mem_pair();
        let c2 = c.clone();
        let h = thread::spawn(move || {
            let f = a.recv().unwrap();
            let first = answer_bounds(&mut a, 3, &c2, &f.payload).unwrap();
            let f = a.recv().unwrap();
            let second = answer_bounds(&mut a, 3, &c2, &f.payload).unwrap();
            (first, second)
        });
        send_bounds(&mut s, 3, &b).unwrap();
        // Hand-craft min > max, which `Bounds` itself cannot represent.
        let mut v = b.as_array();
        v.swap(0, 1);
        let mut w = Writer::new();
        v.iter().for_each(|x| {
            w.u128(x.bits());
        });
        s.send_msg(MsgType::BoundsUpdate, 3, w.finish()).unwrap();
        let err = s.expect(MsgType::BoundsAck, 3).unwrap_err();
        assert!(matches!(err, NetError::Peer { code: codes::BOUNDS_INVALID, .. }));
        assert_eq!(h.join().unwrap(), (Some(b), None));
    }

    fn aircraft_side(
        mut a: privnav::net::MemChannel,
        c: SessionConfig,
        pos: [FixedPoint; 3],
        bounds: Bounds,
        hub: Arc<DealerHub>,
        tamper: (Tamper, ZkTamper),
    ) -> thread::JoinHandle<Vec<Result<Option<Verdict>, FleetError>>> {
        thread::spawn(move || {
            let mut dealer = hub;
            let mut results = Vec::new();
            while let Ok(f) = a.recv() {
                let (round, kind) = decode_begin(&f.payload).unwrap();
                results.push(match kind {
                    Kind::Tracking => tracking_round_aircraft(&mut a, 5, &c, round, &pos, &mut dealer, tamper.0).map(|_| None),
                    Kind::Proof => proof_round_aircraft(&mut a, 5, &c, round, &pos, &bounds, &mut dealer, tamper.1).map(Some),
                });
            }
            results
        })
    }

    #[test]
    fn rounds_match_the_oracle() {
        for mode in [EngineMode::SemiHonest, EngineMode::Malicious] {
            let c = cfg(16, mode);
            let p = c.params;
            let v = |x: f64| encode(x, p).unwrap();
            let sat = [v(1.0), v(1.0), v(1.0)];
            let air = [v(4.0), v(5.0), v(1.0)];
            let bounds = Bounds::cube(v(0.0), v(10.0)).unwrap();
            let hub = Arc::new(DealerHub::new());
            let (a, mut s) = mem_pair();
            let h = aircraft_side(a, c.clone(), air, bounds, hub.clone(), (Tamper::None, ZkTamper::None));
            let mut dealer = hub.clone();
            let st = tracking_round_satellite(&mut s, 5, &c, 1, &sat, &mut dealer).unwrap();
            assert_eq!(st.u, trajectory_plain(&sat, &air).unwrap());
            assert!(!st.fault);
            let out = proof_round_satellite(&mut s, 5, &c, 2, &bounds, &mut dealer).unwrap();
            assert_eq!(out.verdict, Verdict::Accepted);
            drop(s);
            let r = h.join().unwrap();
            assert!(matches!(r[..], [Ok(None), Ok(Some(Verdict::Accepted))]));
            assert_eq!(hub.parked(), 0);
        }
    }

    #[test]
    fn tampering_aircraft_is_caught() {
        let c = cfg(16, EngineMode::Malicious);
        let p = c.params;
        let v = |x: f64| encode(x, p).unwrap();
        let bounds = Bounds::cube(v(0.0), v(10.0)).unwrap();
        let hub = Arc::new(DealerHub::new());
        let (a, mut s) = mem_pair();
        let h = aircraft_side(a, c.clone(), [v(3.0); 3], bounds, hub.clone(), (Tamper::OpenedBit(17), ZkTamper::OpenedTag(3)));
        let mut dealer = hub.clone();
        let err = tracking_round_satellite(&mut s, 5, &c, 1, &[v(0.0); 3], &mut dealer).unwrap_err();
        assert!(err.is_cheat(), "{err}");
        drop(s);
        h.join().unwrap();

        let (a, mut s) = mem_pair();
        let h = aircraft_side(a, c.clone(), [v(3.0); 3], bounds, hub.clone(), (Tamper::None, ZkTamper::OpenedTag(3)));
        let out = proof_round_satellite(&mut s, 5, &c, 2, &bounds, &mut dealer).unwrap();
        assert_eq!(out.verdict, Verdict::RejectedCheat);
        drop(s);
        h.join().unwrap();
    }

    #[test]
    fn dealer_failure_keeps_the_channel_in_sync() {
        let c = cfg(16, EngineMode::SemiHonest);
        let p = c.params;
        let v = |x: f64| encode(x, p).unwrap();
        let bounds = Bounds::cube(v(0.0), v(10.0)).unwrap();
        let hub = Arc::new(DealerHub::new());
        // Pre-consume the aircraft's half of round 1 so its fetch fails.
        let plans = c.plans();
        let mut spoiler = hub.clone();
        fetch_tracking(&mut spoiler, 5, 1, Party::Party2, c.mode, with_slack(plans.trajectory.and_count()), 0).unwrap();
        let (a, mut s) = mem_pair();
        let h = aircraft_side(a, c.clone(), [v(3.0); 3], bounds, hub.clone(), (Tamper::None, ZkTamper::None));
        let mut dealer = hub.clone();
        assert!(matches!(tracking_round_satellite(&mut s, 5, &c, 1, &[v(0.0); 3], &mut dealer), Err(FleetError::Dealer(_))));
        // The next round on the same channel still works.
        tracking_round_satellite(&mut s, 5, &c, 2, &[v(0.0); 3], &mut dealer).unwrap();
        drop(s);
        let r = h.join().unwrap();
        assert!(r[0].is_err() && r[1].is_ok());
    }
}
