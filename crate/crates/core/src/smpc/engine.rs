//! The layered evaluation loop.
//!
//! Message flow for one evaluation (`→` is Party1 to Party2):
//!
//! * semi-honest inputs: `INPUT_SHARE →` masked Party1 bits, `INPUT_SHARE ←` masked Party2 bits.
//! * malicious inputs: `←` Party2 opens its mask shares on Party1's bits, `→` Party1 opens its
//!   mask shares on Party2's bits and sends `x ⊕ r` for its own, `←` Party2 sends `x ⊕ r`.
//! * one `OPEN_BATCH` exchange per AND layer, Party1 first.
//! * malicious: `MAC_CHECK` exchange carrying the local verdict and transcript digest.
//! * `OUTPUT_SHARE` from the non-receiving party to the receiver.

use rand::{CryptoRng, Rng, RngCore};

use super::{AuthShare, EngineMode, Party, Preprocessing, SmpcError, TriplePool};
use crate::circuit::{GateKind, InputOwner, Plan};
use crate::mac::{self, Opening, Transcript};
use crate::net::{Channel, MsgType, Reader, Writer};
use crate::par::Parallelism;

/// Deliberate deviations for testing detection. Indices count this party's sent items in
/// protocol order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Tamper {
    #[default]
    None,
    /// Flip the i-th opened `d`/`e` share bit.
    OpenedBit(usize),
    /// Flip bit 0 of the MAC tag on the i-th opened share.
    OpenedTag(usize),
    /// Flip the i-th mask share opened during input sharing.
    InputOpening(usize),
    /// Flip the i-th output share bit.
    OutputShare(usize),
    /// Flip bit 0 of the i-th output share's tag.
    OutputTag(usize),
}

#[derive(Debug, Clone)]
pub struct EvalOptions {
    pub mode: EngineMode,
    pub reveal_to: Party,
    pub par: Parallelism,
    pub tamper: Tamper,
    /// Keep the reconstructed `d`/`e` values in the report.
    pub record_opened: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            mode: EngineMode::SemiHonest,
            reveal_to: Party::Party1,
            par: Parallelism::default(),
            tamper: Tamper::None,
            record_opened: false,
        }
    }
}

impl EvalOptions {
    pub fn new(mode: EngineMode) -> Self {
        Self { mode, ..Self::default() }
    }
}

#[derive(Debug, Clone, Default)]
pub struct EvalReport {
    /// Plaintext outputs, present only at the receiving party.
    pub outputs: Option<Vec<Vec<bool>>>,
    pub rounds: usize,
    pub triples_used: usize,
    /// Peer openings covered by the batch MAC check.
    pub openings_checked: usize,
    /// Reconstructed `d`, `e` values, if requested.
    pub opened: Vec<bool>,
}

fn exchange<C: Channel + ?Sized>(
    ch: &mut C,
    role: Party,
    session: u64,
    kind: MsgType,
    payload: Vec<u8>,
    transcript: &mut Transcript,
) -> Result<Vec<u8>, SmpcError> {
    let theirs = match role {
        Party::Party1 => {
            ch.send_msg(kind, session, payload.clone())?;
            ch.expect(kind, session)?
        }
        Party::Party2 => {
            let got = ch.expect(kind, session)?;
            ch.send_msg(kind, session, payload.clone())?;
            got
        }
    };
    let (first, second) = match role {
        Party::Party1 => (&payload, &theirs),
        Party::Party2 => (&theirs, &payload),
    };
    transcript.absorb("p1", first);
    transcript.absorb("p2", second);
    Ok(theirs)
}

fn send_one<C: Channel + ?Sized>(
    ch: &mut C,
    session: u64,
    kind: MsgType,
    payload: Vec<u8>,
    transcript: &mut Transcript,
) -> Result<(), SmpcError> {
    transcript.absorb("msg", &payload);
    ch.send_msg(kind, session, payload)?;
    Ok(())
}

fn recv_one<C: Channel + ?Sized>(
    ch: &mut C,
    session: u64,
    kind: MsgType,
    transcript: &mut Transcript,
) -> Result<Vec<u8>, SmpcError> {
    let payload = ch.expect(kind, session)?;
    transcript.absorb("msg", &payload);
    Ok(payload)
}

/// Writes shares as packed bits followed, in malicious mode, by their tags.
struct ShareWriter<'t> {
    bits: Vec<bool>,
    tags: Vec<u128>,
    tamper_bit: Option<usize>,
    tamper_tag: Option<usize>,
    counter: &'t mut usize,
}

impl ShareWriter<'_> {
    fn push(&mut self, s: AuthShare) {
        let i = *self.counter;
        *self.counter += 1;
        self.bits.push(s.bit ^ (self.tamper_bit == Some(i)));
        self.tags.push(s.tag ^ (self.tamper_tag == Some(i)) as u128);
    }

    fn write(self, w: &mut Writer, mode: EngineMode) {
        w.bits(&self.bits);
        if mode == EngineMode::Malicious {
            for t in self.tags {
                w.u128(t);
            }
        }
    }
}

fn read_shares(r: &mut Reader, n: usize, mode: EngineMode) -> Result<Vec<(bool, u128)>, SmpcError> {
    let bits = r.bits_exact(n)?;
    match mode {
        EngineMode::SemiHonest => Ok(bits.into_iter().map(|b| (b, 0)).collect()),
        EngineMode::Malicious => bits.into_iter().map(|b| Ok((b, r.u128()?))).collect(),
    }
}

struct State<'a> {
    role: Party,
    mode: EngineMode,
    delta: u128,
    session: u64,
    opts: &'a EvalOptions,
    transcript: Transcript,
    openings: Vec<Opening>,
    sent_openings: usize,
    sent_inputs: usize,
}

impl State<'_> {
    fn tamper_open(&self) -> (Option<usize>, Option<usize>) {
        match self.opts.tamper {
            Tamper::OpenedBit(i) => (Some(i), None),
            Tamper::OpenedTag(i) => (None, Some(i)),
            _ => (None, None),
        }
    }

    fn record(&mut self, bit: bool, tag: u128, mine: AuthShare) {
        if self.mode == EngineMode::Malicious {
            self.openings.push(Opening { bit, tag, key: mine.key });
        }
    }
}

/// Runs one party of a two-party evaluation of `plan` and reveals the outputs to
/// `opts.reveal_to`.
///
/// `inputs` has one entry per circuit input group: `Some(bits)` for groups this party owns,
/// `None` for the peer's. Every group must be owned by [`InputOwner::Party1`] or
/// [`InputOwner::Party2`].
#[allow(clippy::too_many_arguments)]
pub fn evaluate<C: Channel + ?Sized, R: RngCore + CryptoRng>(
    ch: &mut C,
    session: u64,
    role: Party,
    plan: &Plan,
    inputs: &[Option<Vec<bool>>],
    pre: Preprocessing,
    opts: &EvalOptions,
    rng: &mut R,
) -> Result<EvalReport, SmpcError> {
    let circuit = plan.circuit();
    let mode = opts.mode;
    if pre.mode != mode {
        return Err(SmpcError::ModeMismatch { expected: mode, got: pre.mode });
    }
    if pre.triples.len() < plan.and_count() {
        return Err(SmpcError::TriplesExhausted { needed: plan.and_count(), available: pre.triples.len() });
    }
    if mode == EngineMode::Malicious && pre.masks.len() < circuit.n_input_bits() {
        return Err(SmpcError::Input(format!(
            "need {} input masks, have {}",
            circuit.n_input_bits(),
            pre.masks.len()
        )));
    }
    if inputs.len() != circuit.inputs().len() {
        return Err(SmpcError::Input(format!("expected {} input groups, got {}", circuit.inputs().len(), inputs.len())));
    }
    // Owner of every input bit, in wire order.
    let mut owners = Vec::with_capacity(circuit.n_input_bits());
    let mut mine = Vec::new();
    for (g, (group, given)) in circuit.inputs().iter().zip(inputs).enumerate() {
        let owner = match group.owner {
            InputOwner::Party1 => Party::Party1,
            InputOwner::Party2 => Party::Party2,
            other => return Err(SmpcError::Input(format!("group {g} has owner {other:?}"))),
        };
        match (owner == role, given) {
            (true, Some(bits)) if bits.len() == group.width => mine.extend_from_slice(bits),
            (true, Some(bits)) => {
                return Err(SmpcError::Input(format!("group {g}: expected {} bits, got {}", group.width, bits.len())))
            }
            (true, None) => return Err(SmpcError::Input(format!("missing own input group {g}"))),
            (false, Some(_)) => return Err(SmpcError::Input(format!("group {g} belongs to the peer"))),
            (false, None) => {}
        }
        owners.extend(std::iter::repeat(owner).take(group.width));
    }

    let mut st = State {
        role,
        mode,
        delta: pre.delta,
        session,
        opts,
        transcript: Transcript::new("privnav-gmw-v1"),
        openings: Vec::new(),
        sent_openings: 0,
        sent_inputs: 0,
    };
    st.transcript.absorb("session", &session.to_le_bytes());

    let mut wires = vec![AuthShare::default(); circuit.n_wires()];
    wires[1] = AuthShare::public(true, role, pre.delta);
    let input_shares = match mode {
        EngineMode::SemiHonest => share_inputs_semi(ch, &mut st, &owners, &mine, rng)?,
        EngineMode::Malicious => share_inputs_malicious(ch, &mut st, &owners, &mine, &pre.masks)?,
    };
    wires[2..2 + input_shares.len()].copy_from_slice(&input_shares);

    let mut pool = TriplePool::new(pre.triples);
    let mut report = EvalReport::default();
    let gates = circuit.gates();
    for (layer, locals) in plan.locals().iter().enumerate() {
        for &gi in locals {
            let g = gates[gi];
            wires[g.out.index()] = match g.kind {
                GateKind::Xor => wires[g.in0.index()].xor(wires[g.in1.index()]),
                GateKind::Not => wires[g.in0.index()].add_public(true, role, st.delta),
                GateKind::And => unreachable!("AND gates are scheduled separately"),
            };
        }
        let Some(ands) = plan.ands().get(layer).filter(|a| !a.is_empty()) else { continue };
        let triples = ands.iter().map(|_| pool.take_next()).collect::<Result<Vec<_>, _>>()?;
        let mut masked = Vec::with_capacity(2 * ands.len());
        let (tb, tt) = st.tamper_open();
        let mut sw =
            ShareWriter { bits: Vec::new(), tags: Vec::new(), tamper_bit: tb, tamper_tag: tt, counter: &mut st.sent_openings };
        for (&gi, t) in ands.iter().zip(&triples) {
            let g = gates[gi];
            let d = wires[g.in0.index()].xor(t.a);
            let e = wires[g.in1.index()].xor(t.b);
            sw.push(d);
            sw.push(e);
            masked.push(d);
            masked.push(e);
        }
        let mut w = Writer::new();
        sw.write(&mut w, mode);
        let theirs = exchange(ch, role, session, MsgType::OpenBatch, w.finish(), &mut st.transcript)?;
        let mut r = Reader::new(&theirs);
        let peer = read_shares(&mut r, masked.len(), mode)?;
        r.finish()?;
        for (j, (&gi, t)) in ands.iter().zip(&triples).enumerate() {
            let (pd, pe) = (peer[2 * j], peer[2 * j + 1]);
            st.record(pd.0, pd.1, masked[2 * j]);
            st.record(pe.0, pe.1, masked[2 * j + 1]);
            let d = masked[2 * j].bit ^ pd.0;
            let e = masked[2 * j + 1].bit ^ pe.0;
            if opts.record_opened {
                report.opened.push(d);
                report.opened.push(e);
            }
            let z = t.c.xor(t.b.times(d)).xor(t.a.times(e)).add_public(d & e, role, st.delta);
            wires[gates[gi].out.index()] = z;
        }
        report.rounds += 1;
    }
    report.triples_used = pool.consumed();

    if mode == EngineMode::Malicious {
        mac_check(ch, &mut st)?;
        report.openings_checked = st.openings.len();
    }

    let outputs: Vec<AuthShare> = circuit.output_wires().map(|w| wires[w]).collect();
    if role == opts.reveal_to {
        let payload = recv_one(ch, session, MsgType::OutputShare, &mut st.transcript)?;
        let mut r = Reader::new(&payload);
        let peer = read_shares(&mut r, outputs.len(), mode)?;
        r.finish()?;
        if mode == EngineMode::Malicious
            && !outputs.iter().zip(&peer).all(|(m, p)| Opening { bit: p.0, tag: p.1, key: m.key }.is_valid(st.delta))
        {
            return Err(SmpcError::CheatDetected("output share failed MAC verification".into()));
        }
        let bits: Vec<bool> = outputs.iter().zip(&peer).map(|(m, p)| m.bit ^ p.0).collect();
        let mut grouped = Vec::new();
        let mut at = 0;
        for &w in circuit.output_widths() {
            grouped.push(bits[at..at + w].to_vec());
            at += w;
        }
        report.outputs = Some(grouped);
    } else {
        let (tb, tt) = match opts.tamper {
            Tamper::OutputShare(i) => (Some(i), None),
            Tamper::OutputTag(i) => (None, Some(i)),
            _ => (None, None),
        };
        let mut counter = 0;
        let mut sw = ShareWriter { bits: Vec::new(), tags: Vec::new(), tamper_bit: tb, tamper_tag: tt, counter: &mut counter };
        outputs.iter().for_each(|&s| sw.push(s));
        let mut w = Writer::new();
        sw.write(&mut w, mode);
        send_one(ch, session, MsgType::OutputShare, w.finish(), &mut st.transcript)?;
    }
    Ok(report)
}

fn share_inputs_semi<C: Channel + ?Sized, R: RngCore + CryptoRng>(
    ch: &mut C,
    st: &mut State,
    owners: &[Party],
    mine: &[bool],
    rng: &mut R,
) -> Result<Vec<AuthShare>, SmpcError> {
    let masks: Vec<bool> = mine.iter().map(|_| rng.gen()).collect();
    let masked: Vec<bool> = mine.iter().zip(&masks).map(|(x, r)| x ^ r).collect();
    let n_peer = owners.iter().filter(|&&o| o != st.role).count();
    let mut w = Writer::new();
    w.bits(&masked);
    let payload = w.finish();
    let theirs = match st.role {
        Party::Party1 => {
            send_one(ch, st.session, MsgType::InputShare, payload, &mut st.transcript)?;
            recv_one(ch, st.session, MsgType::InputShare, &mut st.transcript)?
        }
        Party::Party2 => {
            let got = recv_one(ch, st.session, MsgType::InputShare, &mut st.transcript)?;
            send_one(ch, st.session, MsgType::InputShare, payload, &mut st.transcript)?;
            got
        }
    };
    let mut r = Reader::new(&theirs);
    let peer_masked = r.bits_exact(n_peer)?;
    r.finish()?;
    let (mut own_it, mut peer_it) = (masks.into_iter(), peer_masked.into_iter());
    Ok(owners
        .iter()
        .map(|&o| {
            let bit = if o == st.role { own_it.next() } else { peer_it.next() };
            AuthShare { bit: bit.expect("counts checked"), tag: 0, key: 0 }
        })
        .collect())
}

fn share_inputs_malicious<C: Channel + ?Sized>(
    ch: &mut C,
    st: &mut State,
    owners: &[Party],
    mine: &[bool],
    masks: &[AuthShare],
) -> Result<Vec<AuthShare>, SmpcError> {
    let masks = &masks[..owners.len()];
    let role = st.role;
    let session = st.session;
    let tamper = match st.opts.tamper {
        Tamper::InputOpening(i) => Some(i),
        _ => None,
    };

    // Opens my mask shares on the peer's input bits.
    let open_for_peer = |st: &mut State, w: &mut Writer| {
        let mut sw = ShareWriter { bits: Vec::new(), tags: Vec::new(), tamper_bit: tamper, tamper_tag: None, counter: &mut st.sent_inputs };
        owners.iter().zip(masks).filter(|(&o, _)| o != role).for_each(|(_, &m)| sw.push(m));
        sw.write(w, EngineMode::Malicious);
    };
    // Reads the peer's openings of its mask shares on my bits and returns `x ^ r` for them.
    let read_openings = |st: &mut State, r: &mut Reader| -> Result<Vec<bool>, SmpcError> {
        let n_mine = mine.len();
        let peer = read_shares(r, n_mine, EngineMode::Malicious)?;
        let my_masks = owners.iter().zip(masks).filter(|(&o, _)| o == role).map(|(_, m)| *m);
        Ok(my_masks
            .zip(peer)
            .zip(mine)
            .map(|((m, (pb, pt)), &x)| {
                st.record(pb, pt, m);
                x ^ m.bit ^ pb
            })
            .collect())
    };

    let (mine_masked, peer_masked): (Vec<bool>, Vec<bool>) = match role {
        Party::Party1 => {
            let m1 = recv_one(ch, session, MsgType::InputShare, &mut st.transcript)?;
            let mut r = Reader::new(&m1);
            let masked = read_openings(st, &mut r)?;
            r.finish()?;
            let mut w = Writer::new();
            open_for_peer(st, &mut w);
            w.bits(&masked);
            send_one(ch, session, MsgType::InputShare, w.finish(), &mut st.transcript)?;
            let m3 = recv_one(ch, session, MsgType::InputShare, &mut st.transcript)?;
            let mut r = Reader::new(&m3);
            let n_peer = owners.len() - mine.len();
            let peer_masked = r.bits_exact(n_peer)?;
            r.finish()?;
            (masked, peer_masked)
        }
        Party::Party2 => {
            let mut w = Writer::new();
            open_for_peer(st, &mut w);
            send_one(ch, session, MsgType::InputShare, w.finish(), &mut st.transcript)?;
            let m2 = recv_one(ch, session, MsgType::InputShare, &mut st.transcript)?;
            let mut r = Reader::new(&m2);
            let masked = read_openings(st, &mut r)?;
            let n_peer = owners.len() - mine.len();
            let peer_masked = r.bits_exact(n_peer)?;
            r.finish()?;
            let mut w = Writer::new();
            w.bits(&masked);
            send_one(ch, session, MsgType::InputShare, w.finish(), &mut st.transcript)?;
            (masked, peer_masked)
        }
    };
    let (mut own_it, mut peer_it) = (mine_masked.into_iter(), peer_masked.into_iter());
    Ok(owners
        .iter()
        .zip(masks)
        .map(|(&o, &m)| {
            let delta_pub = if o == role { own_it.next() } else { peer_it.next() };
            m.add_public(delta_pub.expect("counts checked"), role, st.delta)
        })
        .collect())
}

fn mac_check<C: Channel + ?Sized>(ch: &mut C, st: &mut State) -> Result<(), SmpcError> {
    let seed = st.transcript.challenge_seed("smpc-mac-check");
    let ok = mac::batch_verify(&st.openings, st.delta, seed, st.opts.par);
    let digest = st.transcript.digest();
    let mut w = Writer::new();
    w.u8(ok as u8).raw(&digest);
    let mut scratch = Transcript::new("unused");
    let theirs = exchange(ch, st.role, st.session, MsgType::MacCheck, w.finish(), &mut scratch)?;
    let mut r = Reader::new(&theirs);
    let peer_ok = r.u8()?;
    let peer_digest = r.raw(32)?;
    r.finish()?;
    if !ok {
        return Err(SmpcError::CheatDetected("peer openings failed the batch MAC check".into()));
    }
    if peer_ok != 1 {
        return Err(SmpcError::CheatDetected("peer rejected the batch MAC check".into()));
    }
    if peer_digest != digest {
        return Err(SmpcError::CheatDetected("transcripts diverge".into()));
    }
    st.transcript.absorb("mac-check", &theirs);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{build_range_check, optimize, trajectory_inputs, trajectory_output, Builder, Circuit};
    use crate::fixed::{self, encode, Bounds, FpParams};
    use crate::net::mem_pair;
    use crate::smpc::{deal, gen_triples_ot};
    use rand::thread_rng;
    use std::sync::Arc;
    use std::thread;

    type Both = (Result<EvalReport, SmpcError>, Result<EvalReport, SmpcError>);

    fn run_both(plan: Arc<Plan>, ins1: Vec<Option<Vec<bool>>>, ins2: Vec<Option<Vec<bool>>>, o1: EvalOptions, o2: EvalOptions) -> Both {
        let slack = plan.and_count() + 3;
        let (p1, p2) = deal(o1.mode, slack, plan.circuit().n_input_bits(), &mut thread_rng());
        let (mut c1, mut c2) = mem_pair();
        let plan2 = plan.clone();
        let h = thread::spawn(move || evaluate(&mut c2, 5, Party::Party2, &plan2, &ins2, p2, &o2, &mut thread_rng()));
        let r1 = evaluate(&mut c1, 5, Party::Party1, &plan, &ins1, p1, &o1, &mut thread_rng());
        drop(c1);
        (r1, h.join().unwrap())
    }

    fn split_inputs(c: &Circuit, all: &[Vec<bool>]) -> (Vec<Option<Vec<bool>>>, Vec<Option<Vec<bool>>>) {
        let pick = |who| {
            c.inputs().iter().zip(all).map(|(g, b)| (g.owner == who).then(|| b.clone())).collect()
        };
        (pick(InputOwner::Party1), pick(InputOwner::Party2))
    }

    fn single_and() -> Arc<Plan> {
        let mut b = Builder::new();
        let x = b.input(InputOwner::Party1, 1);
        let y = b.input(InputOwner::Party2, 1);
        let z = b.and(x[0], y[0]);
        Arc::new(Plan::new(b.finish(&[vec![z]])))
    }

    #[test]
    fn and_gate_truth_table_both_modes() {
        let plan = single_and();
        for mode in [EngineMode::SemiHonest, EngineMode::Malicious] {
            for x in [false, true] {
                for y in [false, true] {
                    for _ in 0..8 {
                        let (r1, r2) =
                            run_both(plan.clone(), vec![Some(vec![x]), None], vec![None, Some(vec![y])], EvalOptions::new(mode), EvalOptions::new(mode));
                        assert_eq!(r1.unwrap().outputs.unwrap(), vec![vec![x & y]]);
                        assert!(r2.unwrap().outputs.is_none());
                    }
                }
            }
        }
    }

    #[test]
    fn zero_triple_gives_zero() {
        let plan = single_and();
        let (mut p1, mut p2) = deal(EngineMode::SemiHonest, 1, 0, &mut thread_rng());
        p1.triples[0] = Default::default();
        p2.triples[0] = Default::default();
        let (mut c1, mut c2) = mem_pair();
        let plan2 = plan.clone();
        let h = thread::spawn(move || {
            evaluate(&mut c2, 1, Party::Party2, &plan2, &[None, Some(vec![false])], p2, &EvalOptions::default(), &mut thread_rng())
        });
        let r1 = evaluate(&mut c1, 1, Party::Party1, &plan, &[Some(vec![false]), None], p1, &EvalOptions::default(), &mut thread_rng());
        h.join().unwrap().unwrap();
        assert_eq!(r1.unwrap().outputs.unwrap(), vec![vec![false]]);
    }

    #[test]
    fn identity_and_xor_only_circuits() {
        let mut b = Builder::new();
        let x = b.input(InputOwner::Party1, 4);
        let y = b.input(InputOwner::Party2, 4);
        let n = b.not(y[0]);
        let s: Vec<_> = x.iter().zip(&y).map(|(&a, &c)| b.xor(a, c)).collect();
        let plan = Arc::new(Plan::new(b.finish(&[x.clone(), s, vec![n]])));
        assert_eq!(plan.and_count(), 0);
        for mode in [EngineMode::SemiHonest, EngineMode::Malicious] {
            let xv = vec![true, false, true, true];
            let yv = vec![true, true, false, false];
            let (r1, r2) = run_both(plan.clone(), vec![Some(xv.clone()), None], vec![None, Some(yv.clone())], EvalOptions::new(mode), EvalOptions::new(mode));
            r2.unwrap();
            let out = r1.unwrap().outputs.unwrap();
            assert_eq!(out[0], xv);
            assert_eq!(out[1], vec![false, true, true, true]);
            assert_eq!(out[2], vec![false]);
        }
    }

    #[test]
    fn trajectory_k16_matches_oracle() {
        let p = FpParams::new(16, 8).unwrap();
        let plan = Arc::new(Plan::new(optimize(&crate::circuit::build_trajectory(p))));
        let mut rng = thread_rng();
        let lim = 60.0;
        for i in 0..20 {
            let mode = if i % 2 == 0 { EngineMode::SemiHonest } else { EngineMode::Malicious };
            let pt = |rng: &mut rand::rngs::ThreadRng| [0; 3].map(|_| encode(rng.gen_range(-lim..lim), p).unwrap());
            let (sat, air) = (pt(&mut rng), pt(&mut rng));
            let (i1, i2) = split_inputs(plan.circuit(), &trajectory_inputs(&sat, &air));
            let (r1, r2) = run_both(plan.clone(), i1, i2, EvalOptions::new(mode), EvalOptions::new(mode));
            r2.unwrap();
            let got = trajectory_output(&r1.unwrap().outputs.unwrap(), p);
            match fixed::trajectory_plain(&sat, &air) {
                Ok(expect) => assert_eq!(got, expect),
                Err(_) => assert!(got.iter().all(|u| u.bits() == 0)),
            }
        }
    }

    #[test]
    fn range_check_k16_matches_oracle() {
        let p = FpParams::new(16, 4).unwrap();
        let c = optimize(&build_range_check(p));
        let owners: Vec<InputOwner> =
            c.inputs().iter().map(|g| if g.owner == InputOwner::Witness { InputOwner::Party2 } else { InputOwner::Party1 }).collect();
        let plan = Arc::new(Plan::new(c.with_owners(&owners).unwrap()));
        let v = |x: f64| encode(x, p).unwrap();
        let bounds = Bounds::cube(v(0.0), v(10.0)).unwrap();
        for (loc, expect) in [([5.0, 5.0, 5.0], true), ([5.0, 5.0, 11.0], false), ([10.0, 0.0, 10.0], true)] {
            let loc = loc.map(v);
            assert_eq!(fixed::in_bounds_plain(&loc, &bounds).unwrap(), expect);
            let all = crate::circuit::range_check_inputs(&loc, &bounds);
            let (i1, i2) = split_inputs(plan.circuit(), &all);
            let (r1, _) = run_both(plan.clone(), i1, i2, EvalOptions::new(EngineMode::Malicious), EvalOptions::new(EngineMode::Malicious));
            assert_eq!(r1.unwrap().outputs.unwrap(), vec![vec![expect]]);
        }
    }

    fn random_adder_inputs(k: usize) -> (Vec<Option<Vec<bool>>>, Vec<Option<Vec<bool>>>, Vec<bool>) {
        let mut rng = thread_rng();
        let a: Vec<bool> = (0..k).map(|_| rng.gen()).collect();
        let b: Vec<bool> = (0..k).map(|_| rng.gen()).collect();
        let expect = crate::circuit::build_adder(k).evaluate(&[a.clone(), b.clone()]).unwrap().remove(0);
        (vec![Some(a), None], vec![None, Some(b)], expect)
    }

    fn adder_plan(k: usize) -> Arc<Plan> {
        let c = crate::circuit::build_adder(k).with_owners(&[InputOwner::Party1, InputOwner::Party2]).unwrap();
        Arc::new(Plan::new(c))
    }

    #[test]
    fn every_single_tamper_is_detected() {
        let plan = adder_plan(8);
        let opened = 2 * plan.and_count();
        let out_bits = plan.circuit().n_output_bits();
        let mut cases = Vec::new();
        for i in 0..opened {
            cases.push((Party::Party1, Tamper::OpenedBit(i)));
            cases.push((Party::Party2, Tamper::OpenedTag(i)));
        }
        for i in 0..8 {
            cases.push((Party::Party1, Tamper::InputOpening(i)));
            cases.push((Party::Party2, Tamper::InputOpening(i)));
        }
        for i in 0..out_bits {
            cases.push((Party::Party2, Tamper::OutputShare(i)));
            cases.push((Party::Party2, Tamper::OutputTag(i)));
        }
        for (cheater, tamper) in cases {
            let (i1, i2, _) = random_adder_inputs(8);
            let mut o1 = EvalOptions::new(EngineMode::Malicious);
            let mut o2 = o1.clone();
            match cheater {
                Party::Party1 => o1.tamper = tamper,
                Party::Party2 => o2.tamper = tamper,
            }
            let (r1, r2) = run_both(plan.clone(), i1, i2, o1, o2);
            let honest = if cheater == Party::Party1 { &r2 } else { &r1 };
            match honest {
                Err(e) => assert!(e.is_cheat(), "{tamper:?}: {e}"),
                Ok(_) => panic!("{tamper:?} by {cheater:?} went undetected"),
            }
        }
    }

    #[test]
    fn semi_honest_tamper_goes_unnoticed() {
        // Without MACs a flipped opening silently corrupts the output.
        let plan = adder_plan(4);
        let (i1, i2, _) = random_adder_inputs(4);
        let o1 = EvalOptions { tamper: Tamper::OpenedBit(0), ..EvalOptions::default() };
        let (r1, r2) = run_both(plan, i1, i2, o1, EvalOptions::default());
        assert!(r1.is_ok() && r2.is_ok());
    }

    #[test]
    fn communication_is_input_independent() {
        let plan = adder_plan(16);
        for mode in [EngineMode::SemiHonest, EngineMode::Malicious] {
            let mut seen = None;
            for _ in 0..5 {
                let (i1, i2, expect) = random_adder_inputs(16);
                let (p1, p2) = deal(mode, plan.and_count(), 32, &mut thread_rng());
                let (mut c1, mut c2) = mem_pair();
                let plan2 = plan.clone();
                let o = EvalOptions::new(mode);
                let o2 = o.clone();
                let h = thread::spawn(move || {
                    evaluate(&mut c2, 9, Party::Party2, &plan2, &i2, p2, &o2, &mut thread_rng()).unwrap();
                    c2.bytes_sent()
                });
                let r = evaluate(&mut c1, 9, Party::Party1, &plan, &i1, p1, &o, &mut thread_rng()).unwrap();
                assert_eq!(r.outputs.unwrap()[0], expect);
                let bytes = (c1.bytes_sent(), h.join().unwrap());
                assert_eq!(*seen.get_or_insert(bytes), bytes);
            }
        }
    }

    #[test]
    fn opened_values_look_uniform_for_fixed_inputs() {
        let plan = adder_plan(32);
        let a = vec![true; 32];
        let b = vec![false; 32];
        let mut opened = Vec::new();
        while opened.len() < 20_000 {
            let o = EvalOptions { record_opened: true, ..EvalOptions::default() };
            let (r1, _) = run_both(plan.clone(), vec![Some(a.clone()), None], vec![None, Some(b.clone())], o.clone(), o);
            opened.extend(r1.unwrap().opened);
        }
        let n = opened.len() as f64;
        let ones = opened.iter().filter(|&&x| x).count() as f64;
        assert!((ones - n / 2.0).abs() <= 3.0 * (n / 4.0).sqrt(), "{ones} of {n}");
    }

    #[test]
    fn ot_triples_drive_the_engine() {
        let plan = adder_plan(8);
        let (i1, i2, expect) = random_adder_inputs(8);
        let (mut c1, mut c2) = mem_pair();
        let n = plan.and_count();
        let plan2 = plan.clone();
        let h = thread::spawn(move || {
            let t = gen_triples_ot(&mut c2, 4, Party::Party2, n, &mut thread_rng(), Parallelism::default()).unwrap();
            let pre = Preprocessing::from_bit_triples(&t);
            evaluate(&mut c2, 4, Party::Party2, &plan2, &i2, pre, &EvalOptions::default(), &mut thread_rng()).unwrap()
        });
        let t = gen_triples_ot(&mut c1, 4, Party::Party1, n, &mut thread_rng(), Parallelism::default()).unwrap();
        let pre = Preprocessing::from_bit_triples(&t);
        let r = evaluate(&mut c1, 4, Party::Party1, &plan, &i1, pre, &EvalOptions::default(), &mut thread_rng()).unwrap();
        h.join().unwrap();
        assert_eq!(r.outputs.unwrap()[0], expect);
        assert_eq!(r.triples_used, n);
    }

    #[test]
    fn rejects_bad_setup() {
        let plan = single_and();
        let (p1, _) = deal(EngineMode::SemiHonest, 0, 0, &mut thread_rng());
        let (mut c1, _c2) = mem_pair();
        let err = evaluate(&mut c1, 0, Party::Party1, &plan, &[Some(vec![true]), None], p1, &EvalOptions::default(), &mut thread_rng());
        assert!(matches!(err, Err(SmpcError::TriplesExhausted { .. })));
        let (p1, _) = deal(EngineMode::SemiHonest, 1, 0, &mut thread_rng());
        let err = evaluate(&mut c1, 0, Party::Party1, &plan, &[None, Some(vec![true])], p1.clone(), &EvalOptions::default(), &mut thread_rng());
        assert!(matches!(err, Err(SmpcError::Input(_))));
        let err = evaluate(&mut c1, 0, Party::Party1, &plan, &[Some(vec![true]), None], p1, &EvalOptions::new(EngineMode::Malicious), &mut thread_rng());
        assert!(matches!(err, Err(SmpcError::ModeMismatch { .. })));
    }
}
