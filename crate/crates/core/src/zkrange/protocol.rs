//! The networked proof.
//!
//! ```text
//! V → P  ZK_INIT        circuit digest, k, f, public input bits
//! V → P  ZK_TRIPLES     prover triples (verifier-as-dealer test mode only)
//! V ↔ P  OT_S1/R1/S2    correlated OT on random choice bits r
//! P → V  ZK_COT         witness ⊕ r
//! P → V  ZK_OPEN_BATCH  one per AND layer, no replies
//! P → V  ZK_FINAL       output bits and tags
//! V → P  ZK_VERDICT     verdict code
//! ```

use rand::{CryptoRng, Rng, RngCore};

use super::{
    deal_zk, decode_prover_triples, encode_prover_triples, public_key, AuthBit, ProofStatus, ProverState, ProverTriple,
    Verdict, VerifierMaterial, VerifierState, ZkError,
};
use crate::circuit::{build_range_check, optimize, range_check_public_bits, InputOwner, Plan};
use crate::fixed::{Bounds, FixedPoint, FpParams};
use crate::mac::Transcript;
use crate::net::{Channel, Frame, MsgType, Reader, Writer};
use crate::ot::{cot_receive, cot_send};
use crate::par::Parallelism;

/// Where the prover's triples come from.
#[derive(Debug, Clone)]
pub enum ProverTriples {
    Dealt(Vec<ProverTriple>),
    /// Receive them from the verifier in `ZK_TRIPLES`. Pairs with [`VerifierTriples::ActAsDealer`].
    FromVerifier,
}

/// Where the verifier's key material comes from.
#[derive(Debug, Clone)]
pub enum VerifierTriples {
    Dealt(VerifierMaterial),
    /// The verifier generates the triples itself and ships the prover's half. It then knows the
    /// masks behind every opening, so this mode is NOT zero-knowledge; tests and benchmarks only.
    ActAsDealer,
}

/// Prover-side deviations for soundness testing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ZkTamper {
    #[default]
    None,
    /// Flip the i-th opened bit (openings are `d, e` per AND gate, in layer order).
    OpenedBit(usize),
    /// Flip bit 0 of the i-th opening's tag.
    OpenedTag(usize),
    /// Flip the claimed output bit.
    FinalBit,
    /// Flip bit 0 of the output tag.
    FinalTag,
    /// Claim the output bit 1 with an arbitrary tag.
    ForgedFinal(u128),
}

#[derive(Debug, Clone, Default)]
pub struct ProverOptions {
    pub tamper: ZkTamper,
    pub par: Parallelism,
}

#[derive(Debug, Clone)]
pub struct VerifierOutcome {
    pub verdict: Verdict,
    pub status: ProofStatus,
    /// Every opened `d`/`e` bit the verifier saw.
    pub opened: Vec<bool>,
}

const ERR_STATEMENT: u16 = 1;

fn statement_payload(plan: &Plan, public: &[bool]) -> Vec<u8> {
    let c = plan.circuit();
    let (k, f) = c.params().map_or((0, 0), |p| (p.k() as u8, p.f() as u8));
    let mut w = Writer::new();
    w.raw(&c.digest()).u8(k).u8(f).bits(public);
    w.finish()
}

/// Splits the circuit's input groups into witness and public, checking widths.
fn check_groups(plan: &Plan, witness: Option<&[Vec<bool>]>, public: &[Vec<bool>]) -> Result<(usize, Vec<bool>), ZkError> {
    let mut n_wit = 0;
    let mut pub_bits = Vec::new();
    let mut wi = 0;
    let mut pi = 0;
    for (g, group) in plan.circuit().inputs().iter().enumerate() {
        match group.owner {
            InputOwner::Witness => {
                if let Some(w) = witness {
                    let bits = w.get(wi).ok_or_else(|| ZkError::Input(format!("missing witness group {g}")))?;
                    if bits.len() != group.width {
                        return Err(ZkError::Input(format!("witness group {g}: expected {} bits", group.width)));
                    }
                }
                wi += 1;
                n_wit += group.width;
            }
            InputOwner::Public => {
                let bits = public.get(pi).ok_or_else(|| ZkError::Input(format!("missing public group {g}")))?;
                if bits.len() != group.width {
                    return Err(ZkError::Input(format!("public group {g}: expected {} bits", group.width)));
                }
                pub_bits.extend_from_slice(bits);
                pi += 1;
            }
            other => return Err(ZkError::Input(format!("group {g} has owner {other:?}"))),
        }
    }
    if witness.is_some_and(|w| w.len() != wi) || public.len() != pi {
        return Err(ZkError::Input("wrong number of input groups".into()));
    }
    Ok((n_wit, pub_bits))
}

/// Interleaves witness and public values back into circuit input order.
fn assemble<T: Copy>(plan: &Plan, witness: &[T], public: &[T]) -> Vec<T> {
    let (mut w, mut p) = (witness.iter(), public.iter());
    let mut out = Vec::with_capacity(witness.len() + public.len());
    for g in plan.circuit().inputs() {
        let src = if g.owner == InputOwner::Witness { &mut w } else { &mut p };
        out.extend(src.by_ref().take(g.width).copied());
    }
    out
}

/// Proves that `witness` together with `public` makes every output of `plan` equal to 1.
#[allow(clippy::too_many_arguments)]
pub fn prove<C: Channel + ?Sized, R: RngCore + CryptoRng>(
    ch: &mut C,
    session: u64,
    plan: &Plan,
    witness: &[Vec<bool>],
    public: &[Vec<bool>],
    triples: ProverTriples,
    opts: &ProverOptions,
    rng: &mut R,
) -> Result<Verdict, ZkError> {
    let circuit = plan.circuit();
    let (n_wit, pub_bits) = check_groups(plan, Some(witness), public)?;

    let init = ch.expect(MsgType::ZkInit, session)?;
    if init != statement_payload(plan, &pub_bits) {
        ch.send(&Frame::error(session, ERR_STATEMENT, "statement mismatch"))?;
        return Err(ZkError::Statement("verifier's circuit, parameters or public inputs differ".into()));
    }
    let triples = match triples {
        ProverTriples::Dealt(t) => t,
        ProverTriples::FromVerifier => decode_prover_triples(&ch.expect(MsgType::ZkTriples, session)?)?,
    };
    if triples.len() < plan.and_count() {
        return Err(ZkError::TriplesExhausted { needed: plan.and_count(), available: triples.len() });
    }

    let r: Vec<bool> = (0..n_wit).map(|_| rng.gen()).collect();
    let tags = cot_receive(ch, session, &r, rng, opts.par)?;
    let wit_bits: Vec<bool> = witness.concat();
    let corrections: Vec<bool> = wit_bits.iter().zip(&r).map(|(x, r)| x ^ r).collect();
    let mut w = Writer::new();
    w.bits(&corrections);
    ch.send_msg(MsgType::ZkCot, session, w.finish())?;

    let wit_auth: Vec<AuthBit> =
        r.iter().zip(&tags).zip(&corrections).map(|((&r, &m), &c)| AuthBit { x: r, m }.xor(AuthBit::public(c))).collect();
    let pub_auth: Vec<AuthBit> = pub_bits.iter().map(|&b| AuthBit::public(b)).collect();
    let mut state = ProverState::new(circuit, &assemble(plan, &wit_auth, &pub_auth), triples);

    let mut sent = 0usize;
    for (l, locals) in plan.locals().iter().enumerate() {
        state.eval_locals(circuit, locals);
        let Some(ands) = plan.ands().get(l).filter(|a| !a.is_empty()) else { continue };
        let opened = state.eval_ands(circuit, ands)?;
        let mut bits = Vec::with_capacity(opened.len());
        let mut w = Writer::new();
        let mut tag_bytes = Writer::new();
        for o in opened {
            let (mut x, mut m) = (o.x, o.m);
            match opts.tamper {
                ZkTamper::OpenedBit(i) if i == sent => x ^= true,
                ZkTamper::OpenedTag(i) if i == sent => m ^= 1,
                _ => {}
            }
            sent += 1;
            bits.push(x);
            tag_bytes.u128(m);
        }
        w.bits(&bits).raw(&tag_bytes.finish());
        ch.send_msg(MsgType::ZkOpenBatch, session, w.finish())?;
    }

    let mut w = Writer::new();
    let outs = state.outputs(circuit);
    let mut bits = Vec::with_capacity(outs.len());
    let mut tags = Vec::with_capacity(outs.len());
    for o in outs {
        let (x, m) = match opts.tamper {
            ZkTamper::FinalBit => (!o.x, o.m),
            ZkTamper::FinalTag => (o.x, o.m ^ 1),
            ZkTamper::ForgedFinal(tag) => (true, tag),
            _ => (o.x, o.m),
        };
        bits.push(x);
        tags.push(m);
    }
    w.bits(&bits);
    tags.iter().for_each(|&t| {
        w.u128(t);
    });
    ch.send_msg(MsgType::ZkFinal, session, w.finish())?;

    let payload = ch.expect(MsgType::ZkVerdict, session)?;
    let mut r = Reader::new(&payload);
    let code = r.u8()?;
    r.finish()?;
    Verdict::from_code(code).ok_or(ZkError::BadVerdict(code))
}

/// Verifies a proof for `plan` with the given public inputs.
pub fn verify<C: Channel + ?Sized, R: RngCore + CryptoRng>(
    ch: &mut C,
    session: u64,
    plan: &Plan,
    public: &[Vec<bool>],
    triples: VerifierTriples,
    par: Parallelism,
    rng: &mut R,
) -> Result<VerifierOutcome, ZkError> {
    let circuit = plan.circuit();
    let (n_wit, pub_bits) = check_groups(plan, None, public)?;
    let mut transcript = Transcript::new("privnav-zk-v1");
    transcript.absorb("session", &session.to_le_bytes());

    let init = statement_payload(plan, &pub_bits);
    transcript.absorb("init", &init);
    ch.send_msg(MsgType::ZkInit, session, init)?;
    let material = match triples {
        VerifierTriples::Dealt(m) => m,
        VerifierTriples::ActAsDealer => {
            let (pt, vm) = deal_zk(plan.and_count(), rng);
            ch.send_msg(MsgType::ZkTriples, session, encode_prover_triples(&pt))?;
            vm
        }
    };
    if material.triples.len() < plan.and_count() {
        return Err(ZkError::TriplesExhausted { needed: plan.and_count(), available: material.triples.len() });
    }
    let delta = material.delta.delta;

    let keys = cot_send(ch, session, delta, n_wit, rng, par)?;
    let payload = ch.expect(MsgType::ZkCot, session)?;
    transcript.absorb("cot", &payload);
    let mut r = Reader::new(&payload);
    let corrections = r.bits_exact(n_wit)?;
    r.finish()?;
    let wit_keys: Vec<u128> = keys.iter().zip(&corrections).map(|(&k, &c)| k ^ public_key(c, delta)).collect();
    let pub_keys: Vec<u128> = pub_bits.iter().map(|&b| public_key(b, delta)).collect();
    let mut state = VerifierState::new(circuit, &assemble(plan, &wit_keys, &pub_keys), material);

    let mut opened_bits = Vec::new();
    for (l, locals) in plan.locals().iter().enumerate() {
        state.eval_locals(circuit, locals);
        let Some(ands) = plan.ands().get(l).filter(|a| !a.is_empty()) else { continue };
        let payload = ch.expect(MsgType::ZkOpenBatch, session)?;
        transcript.absorb("open", &payload);
        let mut r = Reader::new(&payload);
        let bits = r.bits_exact(2 * ands.len())?;
        let opened: Vec<(bool, u128)> = bits.iter().map(|&b| Ok((b, r.u128()?))).collect::<Result<_, ZkError>>()?;
        r.finish()?;
        opened_bits.extend_from_slice(&bits);
        state.eval_ands(circuit, ands, &opened)?;
    }

    let payload = ch.expect(MsgType::ZkFinal, session)?;
    transcript.absorb("final", &payload);
    let mut r = Reader::new(&payload);
    let n_out = circuit.n_output_bits();
    let bits = r.bits_exact(n_out)?;
    let outputs: Vec<(bool, u128)> = bits.iter().map(|&b| Ok((b, r.u128()?))).collect::<Result<_, ZkError>>()?;
    r.finish()?;

    let verdict = state.finalize(circuit, &outputs, transcript.challenge_seed("zk-mac-check"), par);
    let mut w = Writer::new();
    w.u8(verdict.code());
    ch.send_msg(MsgType::ZkVerdict, session, w.finish())?;
    Ok(VerifierOutcome { verdict, status: state.status, opened: opened_bits })
}

/// The optimized range-check circuit for `params`.
pub fn range_plan(params: FpParams) -> Plan {
    Plan::new(optimize(&build_range_check(params)))
}

fn check_params(plan: &Plan, params: FpParams) -> Result<(), ZkError> {
    if plan.circuit().params() != Some(params) {
        return Err(ZkError::Input(format!("plan was built for {:?}, inputs use {params}", plan.circuit().params())));
    }
    Ok(())
}

/// Proves `loc` lies within `bounds`. `plan` must come from [`range_plan`].
#[allow(clippy::too_many_arguments)]
pub fn prove_range<C: Channel + ?Sized, R: RngCore + CryptoRng>(
    ch: &mut C,
    session: u64,
    plan: &Plan,
    loc: &[FixedPoint; 3],
    bounds: &Bounds,
    triples: ProverTriples,
    opts: &ProverOptions,
    rng: &mut R,
) -> Result<Verdict, ZkError> {
    check_params(plan, bounds.params())?;
    if loc.iter().any(|p| p.params() != bounds.params()) {
        return Err(ZkError::Input("location and bounds use different parameters".into()));
    }
    let witness: Vec<Vec<bool>> = loc.iter().map(FixedPoint::to_bits_lsb).collect();
    prove(ch, session, plan, &witness, &range_check_public_bits(bounds), triples, opts, rng)
}

/// Verifier side of [`prove_range`].
pub fn verify_range<C: Channel + ?Sized, R: RngCore + CryptoRng>(
    ch: &mut C,
    session: u64,
    plan: &Plan,
    bounds: &Bounds,
    triples: VerifierTriples,
    par: Parallelism,
    rng: &mut R,
) -> Result<VerifierOutcome, ZkError> {
    check_params(plan, bounds.params())?;
    verify(ch, session, plan, &range_check_public_bits(bounds), triples, par, rng)
}
