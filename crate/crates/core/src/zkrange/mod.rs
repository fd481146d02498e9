//! Designated-verifier zero-knowledge proofs that a committed witness satisfies a Boolean
//! circuit, specialized to the location range check.
//!
//! The prover holds authenticated bits `(x, m)` and the verifier the matching keys `k` under a
//! global key `delta`, with `m = k ^ x * delta`. XOR is free, each AND opens two masked bits
//! against a preprocessed triple, and all openings are verified in one batched GF(2^128)
//! linear combination at the end.

mod protocol;

pub use protocol::{
    prove, prove_range, range_plan, verify, verify_range, ProverOptions, ProverTriples, VerifierOutcome, VerifierTriples,
    ZkTamper,
};

use rand::{CryptoRng, Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

use crate::circuit::{Circuit, GateKind, Plan};
use crate::mac::scale;
use crate::net::{NetError, Reader, Writer};
use crate::ot::OtError;

/// Prover half of an authenticated bit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct AuthBit {
    pub x: bool,
    pub m: u128,
}

impl AuthBit {
    pub fn xor(self, o: AuthBit) -> AuthBit {
        AuthBit { x: self.x ^ o.x, m: self.m ^ o.m }
    }

    pub fn times(self, c: bool) -> AuthBit {
        if c {
            self
        } else {
            AuthBit::default()
        }
    }

    /// A public constant: the tag is zero and the verifier's key is `b * delta`.
    pub fn public(b: bool) -> AuthBit {
        AuthBit { x: b, m: 0 }
    }
}

/// Verifier's key for a public constant.
pub fn public_key(b: bool, delta: u128) -> u128 {
    scale(b, delta)
}

/// The verifier's global key.
#[derive(Clone, Copy, PartialEq, Eq)]
pub struct GlobalKey {
    pub delta: u128,
}

impl std::fmt::Debug for GlobalKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("GlobalKey(..)")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ProverTriple {
    pub a: AuthBit,
    pub b: AuthBit,
    pub c: AuthBit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct VerifierTriple {
    pub a: u128,
    pub b: u128,
    pub c: u128,
}

/// The verifier's preprocessing: its global key and the keys of every triple.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerifierMaterial {
    pub delta: GlobalKey,
    pub triples: Vec<VerifierTriple>,
}

/// Samples `delta` and `n` authenticated AND triples.
pub fn deal_zk<R: RngCore + CryptoRng>(n: usize, rng: &mut R) -> (Vec<ProverTriple>, VerifierMaterial) {
    let mut rng = ChaCha20Rng::from_seed(rng.gen());
    let delta: u128 = rng.gen();
    let auth = |x: bool, rng: &mut ChaCha20Rng| {
        let k: u128 = rng.gen();
        (AuthBit { x, m: k ^ scale(x, delta) }, k)
    };
    let (mut pt, mut vt) = (Vec::with_capacity(n), Vec::with_capacity(n));
    for _ in 0..n {
        let (a, b): (bool, bool) = (rng.gen(), rng.gen());
        let (pa, ka) = auth(a, &mut rng);
        let (pb, kb) = auth(b, &mut rng);
        let (pc, kc) = auth(a & b, &mut rng);
        pt.push(ProverTriple { a: pa, b: pb, c: pc });
        vt.push(VerifierTriple { a: ka, b: kb, c: kc });
    }
    (pt, VerifierMaterial { delta: GlobalKey { delta }, triples: vt })
}

pub fn encode_prover_triples(triples: &[ProverTriple]) -> Vec<u8> {
    let mut w = Writer::new();
    w.bits(&triples.iter().flat_map(|t| [t.a.x, t.b.x, t.c.x]).collect::<Vec<_>>());
    for t in triples {
        w.u128(t.a.m).u128(t.b.m).u128(t.c.m);
    }
    w.finish()
}

pub fn decode_prover_triples(bytes: &[u8]) -> Result<Vec<ProverTriple>, NetError> {
    let mut r = Reader::new(bytes);
    let bits = r.bits()?;
    if bits.len() % 3 != 0 || bits.len() / 3 * 48 != r.remaining() {
        return Err(NetError::Malformed("triple block size mismatch".into()));
    }
    let mut out = Vec::with_capacity(bits.len() / 3);
    for c in bits.chunks_exact(3) {
        let (ma, mb, mc) = (r.u128()?, r.u128()?, r.u128()?);
        out.push(ProverTriple { a: AuthBit { x: c[0], m: ma }, b: AuthBit { x: c[1], m: mb }, c: AuthBit { x: c[2], m: mc } });
    }
    r.finish()?;
    Ok(out)
}

pub fn encode_verifier_material(v: &VerifierMaterial) -> Vec<u8> {
    let mut w = Writer::new();
    w.u128(v.delta.delta).u32(v.triples.len() as u32);
    for t in &v.triples {
        w.u128(t.a).u128(t.b).u128(t.c);
    }
    w.finish()
}

pub fn decode_verifier_material(bytes: &[u8]) -> Result<VerifierMaterial, NetError> {
    let mut r = Reader::new(bytes);
    let delta = GlobalKey { delta: r.u128()? };
    if delta.delta == 0 {
        return Err(NetError::Malformed("zero global key".into()));
    }
    let n = r.u32()? as usize;
    if n.checked_mul(48) != Some(r.remaining()) {
        return Err(NetError::Malformed("triple block size mismatch".into()));
    }
    let triples = (0..n).map(|_| Ok(VerifierTriple { a: r.u128()?, b: r.u128()?, c: r.u128()? })).collect::<Result<_, NetError>>()?;
    r.finish()?;
    Ok(VerifierMaterial { delta, triples })
}

/// Outcome of a proof.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Verdict {
    Accepted,
    /// A MAC check failed: the prover deviated from the protocol.
    RejectedCheat,
    /// The proof was honest but the statement is false (the location is out of bounds).
    RejectedOutOfBounds,
}

impl Verdict {
    pub fn code(self) -> u8 {
        match self {
            Verdict::Accepted => 0,
            Verdict::RejectedCheat => 1,
            Verdict::RejectedOutOfBounds => 2,
        }
    }

    pub fn from_code(c: u8) -> Option<Verdict> {
        match c {
            0 => Some(Verdict::Accepted),
            1 => Some(Verdict::RejectedCheat),
            2 => Some(Verdict::RejectedOutOfBounds),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Accepted => "accepted",
            Verdict::RejectedCheat => "rejected-cheat",
            Verdict::RejectedOutOfBounds => "rejected-out-of-bounds",
        }
    }
}

/// Progress of a verifier session; only moves forward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ProofStatus {
    Setup,
    Committed,
    Checked,
    Accepted,
    Rejected,
}

#[derive(Debug, Error)]
pub enum ZkError {
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Ot(#[from] OtError),
    #[error("statement mismatch: {0}")]
    Statement(String),
    #[error("need {needed} triples, have {available}")]
    TriplesExhausted { needed: usize, available: usize },
    #[error("triple {0} already consumed")]
    TripleReuse(usize),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("unknown verdict code {0}")]
    BadVerdict(u8),
}

/// Single-use guard over triple indices.
#[derive(Debug)]
struct UseTracker {
    used: Vec<bool>,
}

impl UseTracker {
    fn new(n: usize) -> Self {
        Self { used: vec![false; n] }
    }

    fn claim(&mut self, i: usize) -> Result<(), ZkError> {
        match self.used.get_mut(i) {
            None => Err(ZkError::TriplesExhausted { needed: i + 1, available: self.used.len() }),
            Some(true) => Err(ZkError::TripleReuse(i)),
            Some(u) => {
                *u = true;
                Ok(())
            }
        }
    }
}

/// Prover-side circuit state.
pub struct ProverState {
    pub wires: Vec<AuthBit>,
    triples: Vec<ProverTriple>,
    tracker: UseTracker,
    next: usize,
}

impl ProverState {
    /// `inputs` are the authenticated input wires in circuit order (witness and public alike).
    pub fn new(circuit: &Circuit, inputs: &[AuthBit], triples: Vec<ProverTriple>) -> Self {
        let mut wires = vec![AuthBit::default(); circuit.n_wires()];
        wires[1] = AuthBit::public(true);
        wires[2..2 + inputs.len()].copy_from_slice(inputs);
        let tracker = UseTracker::new(triples.len());
        Self { wires, triples, tracker, next: 0 }
    }

    pub fn eval_locals(&mut self, circuit: &Circuit, gates: &[usize]) {
        for &gi in gates {
            let g = circuit.gates()[gi];
            self.wires[g.out.index()] = match g.kind {
                GateKind::Xor => self.wires[g.in0.index()].xor(self.wires[g.in1.index()]),
                GateKind::Not => self.wires[g.in0.index()].xor(AuthBit::public(true)),
                GateKind::And => unreachable!("AND gates are scheduled separately"),
            };
        }
    }

    /// Evaluates a layer of AND gates and returns the openings `(d, e)` per gate, interleaved.
    pub fn eval_ands(&mut self, circuit: &Circuit, gates: &[usize]) -> Result<Vec<AuthBit>, ZkError> {
        let mut opened = Vec::with_capacity(2 * gates.len());
        for &gi in gates {
            let g = circuit.gates()[gi];
            let i = self.next;
            self.next += 1;
            self.tracker.claim(i)?;
            let t = self.triples[i];
            let (x, y) = (self.wires[g.in0.index()], self.wires[g.in1.index()]);
            let d = x.xor(t.a);
            let e = y.xor(t.b);
            opened.push(d);
            opened.push(e);
            self.wires[g.out.index()] = t.c.xor(t.b.times(d.x)).xor(t.a.times(e.x)).xor(AuthBit::public(d.x & e.x));
        }
        Ok(opened)
    }

    pub fn outputs(&self, circuit: &Circuit) -> Vec<AuthBit> {
        circuit.output_wires().map(|w| self.wires[w]).collect()
    }
}

/// Verifier-side circuit state.
pub struct VerifierState {
    pub keys: Vec<u128>,
    delta: u128,
    triples: Vec<VerifierTriple>,
    tracker: UseTracker,
    next: usize,
    pub openings: Vec<crate::mac::Opening>,
    pub status: ProofStatus,
}

impl VerifierState {
    pub fn new(circuit: &Circuit, input_keys: &[u128], material: VerifierMaterial) -> Self {
        let delta = material.delta.delta;
        let mut keys = vec![0u128; circuit.n_wires()];
        keys[1] = public_key(true, delta);
        keys[2..2 + input_keys.len()].copy_from_slice(input_keys);
        let tracker = UseTracker::new(material.triples.len());
        Self {
            keys,
            delta,
            triples: material.triples,
            tracker,
            next: 0,
            openings: Vec::new(),
            status: ProofStatus::Committed,
        }
    }

    pub fn delta(&self) -> u128 {
        self.delta
    }

    pub fn eval_locals(&mut self, circuit: &Circuit, gates: &[usize]) {
        for &gi in gates {
            let g = circuit.gates()[gi];
            self.keys[g.out.index()] = match g.kind {
                GateKind::Xor => self.keys[g.in0.index()] ^ self.keys[g.in1.index()],
                GateKind::Not => self.keys[g.in0.index()] ^ self.delta,
                GateKind::And => unreachable!("AND gates are scheduled separately"),
            };
        }
    }

    /// Consumes the prover's `(d, e)` openings for a layer, deferring their MAC checks.
    pub fn eval_ands(&mut self, circuit: &Circuit, gates: &[usize], opened: &[(bool, u128)]) -> Result<(), ZkError> {
        if opened.len() != 2 * gates.len() {
            return Err(ZkError::Input(format!("expected {} openings, got {}", 2 * gates.len(), opened.len())));
        }
        for (j, &gi) in gates.iter().enumerate() {
            let g = circuit.gates()[gi];
            let i = self.next;
            self.next += 1;
            self.tracker.claim(i)?;
            let t = self.triples[i];
            let kd = self.keys[g.in0.index()] ^ t.a;
            let ke = self.keys[g.in1.index()] ^ t.b;
            let (d, e) = (opened[2 * j], opened[2 * j + 1]);
            self.openings.push(crate::mac::Opening { bit: d.0, tag: d.1, key: kd });
            self.openings.push(crate::mac::Opening { bit: e.0, tag: e.1, key: ke });
            self.keys[g.out.index()] = t.c ^ scale(d.0, t.b) ^ scale(e.0, t.a) ^ public_key(d.0 & e.0, self.delta);
        }
        Ok(())
    }

    /// Checks the claimed outputs and every deferred opening. Accepts iff all MACs verify and
    /// every output bit is 1.
    pub fn finalize(&mut self, circuit: &Circuit, outputs: &[(bool, u128)], seed: [u8; 32], par: crate::par::Parallelism) -> Verdict {
        self.status = ProofStatus::Checked;
        let keys: Vec<u128> = circuit.output_wires().map(|w| self.keys[w]).collect();
        let outputs_ok = outputs.len() == keys.len()
            && outputs.iter().zip(&keys).all(|(&(bit, tag), &key)| crate::mac::Opening { bit, tag, key }.is_valid(self.delta));
        let verdict = if !outputs_ok || !crate::mac::batch_verify(&self.openings, self.delta, seed, par) {
            Verdict::RejectedCheat
        } else if outputs.iter().all(|o| o.0) {
            Verdict::Accepted
        } else {
            Verdict::RejectedOutOfBounds
        };
        self.status = if verdict == Verdict::Accepted { ProofStatus::Accepted } else { ProofStatus::Rejected };
        verdict
    }
}

/// Runs prover and verifier in one thread, asserting the MAC relation on every wire after every
/// layer. Returns the verdict of an honest proof over the given assignment.
pub fn loopback_instrumented<R: RngCore + CryptoRng>(plan: &Plan, inputs: &[Vec<bool>], rng: &mut R) -> Verdict {
    let circuit = plan.circuit();
    let (pt, vm) = deal_zk(plan.and_count(), rng);
    let delta = vm.delta.delta;
    let bits: Vec<bool> = inputs.concat();
    let keys: Vec<u128> = bits.iter().map(|_| rng.gen()).collect();
    let auth: Vec<AuthBit> = bits.iter().zip(&keys).map(|(&x, &k)| AuthBit { x, m: k ^ scale(x, delta) }).collect();
    let mut p = ProverState::new(circuit, &auth, pt);
    let mut v = VerifierState::new(circuit, &keys, vm);
    let check = |p: &ProverState, v: &VerifierState| {
        for (w, (a, k)) in p.wires.iter().zip(&v.keys).enumerate() {
            assert_eq!(a.m, k ^ scale(a.x, delta), "MAC relation broken on wire {w}");
        }
    };
    for (l, locals) in plan.locals().iter().enumerate() {
        p.eval_locals(circuit, locals);
        v.eval_locals(circuit, locals);
        if let Some(ands) = plan.ands().get(l) {
            let opened: Vec<(bool, u128)> = p.eval_ands(circuit, ands).unwrap().iter().map(|a| (a.x, a.m)).collect();
            v.eval_ands(circuit, ands, &opened).unwrap();
        }
        check(&p, &v);
    }
    let outs: Vec<(bool, u128)> = p.outputs(circuit).iter().map(|a| (a.x, a.m)).collect();
    v.finalize(circuit, &outs, rng.gen(), crate::par::Parallelism::Sequential)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{optimize, Builder, InputOwner};
    use rand::thread_rng;

    #[test]
    fn public_bit_and_xor_rules() {
        let delta: u128 = thread_rng().gen();
        assert_eq!((AuthBit::public(false), public_key(false, delta)), (AuthBit { x: false, m: 0 }, 0));
        assert_eq!((AuthBit::public(true), public_key(true, delta)), (AuthBit { x: true, m: 0 }, delta));
        let k: u128 = thread_rng().gen();
        let a = AuthBit { x: true, m: k ^ delta };
        let z = a.xor(a);
        assert_eq!((z, k ^ k), (AuthBit::default(), 0));
        assert_eq!(a.xor(AuthBit::public(false)), a);
        let flipped = a.xor(AuthBit::public(true));
        assert!(!flipped.x);
        assert_eq!(flipped.m, (k ^ public_key(true, delta)) ^ scale(flipped.x, delta));
    }

    #[test]
    fn random_xors_keep_macs() {
        let mut rng = thread_rng();
        let delta: u128 = rng.gen();
        for _ in 0..1000 {
            let (x1, x2): (bool, bool) = (rng.gen(), rng.gen());
            let (k1, k2): (u128, u128) = (rng.gen(), rng.gen());
            let a = AuthBit { x: x1, m: k1 ^ scale(x1, delta) };
            let b = AuthBit { x: x2, m: k2 ^ scale(x2, delta) };
            let c = a.xor(b);
            assert_eq!(c.m, (k1 ^ k2) ^ scale(c.x, delta));
        }
    }

    fn and_plan() -> Plan {
        let mut b = Builder::new();
        let x = b.input(InputOwner::Witness, 1);
        let y = b.input(InputOwner::Witness, 1);
        let z = b.and(x[0], y[0]);
        Plan::new(b.finish(&[vec![z]]))
    }

    #[test]
    fn forced_zero_triple_and() {
        let plan = and_plan();
        let c = plan.circuit();
        let delta: u128 = thread_rng().gen();
        let (k1, k2, ka, kb, kc): (u128, u128, u128, u128, u128) = thread_rng().gen();
        let one = |k: u128| AuthBit { x: true, m: k ^ delta };
        let zero = |k: u128| AuthBit { x: false, m: k };
        let pt = vec![ProverTriple { a: zero(ka), b: zero(kb), c: zero(kc) }];
        let vm = VerifierMaterial { delta: GlobalKey { delta }, triples: vec![VerifierTriple { a: ka, b: kb, c: kc }] };
        let mut p = ProverState::new(c, &[one(k1), one(k2)], pt);
        let mut v = VerifierState::new(c, &[k1, k2], vm);
        let ands = &plan.ands()[0];
        let opened: Vec<(bool, u128)> = p.eval_ands(c, ands).unwrap().iter().map(|a| (a.x, a.m)).collect();
        v.eval_ands(c, ands, &opened).unwrap();
        let z = p.outputs(c)[0];
        assert!(z.x);
        assert_eq!(v.finalize(c, &[(z.x, z.m)], [0; 32], crate::par::Parallelism::Sequential), Verdict::Accepted);
    }

    #[test]
    fn exhaustive_and_over_random_triples() {
        let plan = and_plan();
        for x in [false, true] {
            for y in [false, true] {
                for _ in 0..16 {
                    let expect = if x & y { Verdict::Accepted } else { Verdict::RejectedOutOfBounds };
                    assert_eq!(loopback_instrumented(&plan, &[vec![x], vec![y]], &mut thread_rng()), expect);
                }
            }
        }
    }

    #[test]
    fn triples_are_single_use() {
        let plan = and_plan();
        let c = plan.circuit();
        let (pt, _) = deal_zk(1, &mut thread_rng());
        let mut p = ProverState::new(c, &[AuthBit::default(); 2], pt);
        p.eval_ands(c, &plan.ands()[0]).unwrap();
        assert!(matches!(p.eval_ands(c, &plan.ands()[0]), Err(ZkError::TriplesExhausted { .. })));
        let mut t = UseTracker::new(2);
        t.claim(1).unwrap();
        assert!(matches!(t.claim(1), Err(ZkError::TripleReuse(1))));
    }

    #[test]
    fn instrumented_range_circuit_keeps_macs() {
        let p = crate::fixed::FpParams::new(8, 2).unwrap();
        let plan = Plan::new(optimize(&crate::circuit::build_range_check(p)));
        let v = |x: f64| crate::fixed::encode(x, p).unwrap();
        let bounds = crate::fixed::Bounds::cube(v(-3.0), v(10.0)).unwrap();
        for (loc, expect) in [([1.0, 2.0, 3.0], Verdict::Accepted), ([1.0, -4.0, 3.0], Verdict::RejectedOutOfBounds)] {
            let inputs = crate::circuit::range_check_inputs(&loc.map(v), &bounds);
            assert_eq!(loopback_instrumented(&plan, &inputs, &mut thread_rng()), expect);
        }
    }

    #[test]
    fn material_round_trips() {
        let (pt, vm) = deal_zk(9, &mut thread_rng());
        assert_eq!(decode_prover_triples(&encode_prover_triples(&pt)).unwrap(), pt);
        assert_eq!(decode_verifier_material(&encode_verifier_material(&vm)).unwrap(), vm);
        assert!(decode_prover_triples(&[1, 0, 0, 0, 0]).is_err());
        assert!(decode_verifier_material(&[0; 20]).is_err());
        for (t, k) in pt.iter().zip(&vm.triples) {
            assert_eq!(t.c.x, t.a.x & t.b.x);
            assert_eq!(t.a.m, k.a ^ scale(t.a.x, vm.delta.delta));
            assert_eq!(t.c.m, k.c ^ scale(t.c.x, vm.delta.delta));
        }
    }

    /// Honest run up to the final message; returns opened bits and the verdict on `claim`.
    fn run_with_claim(plan: &Plan, inputs: &[Vec<bool>], claim: Option<(bool, u128)>) -> (Vec<bool>, Verdict) {
        let mut rng = thread_rng();
        let c = plan.circuit();
        let (pt, vm) = deal_zk(plan.and_count(), &mut rng);
        let delta = vm.delta.delta;
        let bits = inputs.concat();
        let keys: Vec<u128> = bits.iter().map(|_| rng.gen()).collect();
        let auth: Vec<AuthBit> = bits.iter().zip(&keys).map(|(&x, &k)| AuthBit { x, m: k ^ scale(x, delta) }).collect();
        let mut p = ProverState::new(c, &auth, pt);
        let mut v = VerifierState::new(c, &keys, vm);
        let mut seen = Vec::new();
        for (l, locals) in plan.locals().iter().enumerate() {
            p.eval_locals(c, locals);
            v.eval_locals(c, locals);
            if let Some(ands) = plan.ands().get(l) {
                let opened: Vec<(bool, u128)> = p.eval_ands(c, ands).unwrap().iter().map(|a| (a.x, a.m)).collect();
                seen.extend(opened.iter().map(|o| o.0));
                v.eval_ands(c, ands, &opened).unwrap();
            }
        }
        let outs: Vec<(bool, u128)> = match claim {
            Some(cl) => vec![cl],
            None => p.outputs(c).iter().map(|a| (a.x, a.m)).collect(),
        };
        (seen, v.finalize(c, &outs, rng.gen(), crate::par::Parallelism::Sequential))
    }

    #[test]
    fn forged_output_tags_never_accepted() {
        let p = crate::fixed::FpParams::new(8, 4).unwrap();
        let plan = Plan::new(optimize(&crate::circuit::build_range_check(p)));
        let v = |x: f64| crate::fixed::encode(x, p).unwrap();
        let bounds = crate::fixed::Bounds::cube(v(0.0), v(5.0)).unwrap();
        let inputs = crate::circuit::range_check_inputs(&[v(6.0), v(1.0), v(1.0)], &bounds);
        let mut accepted = 0;
        for _ in 0..10_000 {
            let (_, verdict) = run_with_claim(&plan, &inputs, Some((true, thread_rng().gen())));
            accepted += (verdict == Verdict::Accepted) as u32;
        }
        assert_eq!(accepted, 0);
    }

    #[test]
    fn opened_bits_look_uniform() {
        let p = crate::fixed::FpParams::new(8, 4).unwrap();
        let plan = Plan::new(optimize(&crate::circuit::build_range_check(p)));
        let v = |x: f64| crate::fixed::encode(x, p).unwrap();
        let bounds = crate::fixed::Bounds::cube(v(0.0), v(5.0)).unwrap();
        // A fixed witness: any bias in the openings would show up per position.
        let inputs = crate::circuit::range_check_inputs(&[v(1.0), v(2.0), v(3.0)], &bounds);
        let runs = 2000;
        let mut ones = vec![0u32; 2 * plan.and_count()];
        for _ in 0..runs {
            let (seen, verdict) = run_with_claim(&plan, &inputs, None);
            assert_eq!(verdict, Verdict::Accepted);
            for (n, b) in ones.iter_mut().zip(seen) {
                *n += b as u32;
            }
        }
        let sigma = (runs as f64 * 0.25).sqrt();
        for (i, &n) in ones.iter().enumerate() {
            let z = (n as f64 - runs as f64 / 2.0).abs() / sigma;
            assert!(z < 4.5, "opening {i}: {n}/{runs}");
        }
    }
}
