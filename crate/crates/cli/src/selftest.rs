//! `privnav selftest`: exhaustive small-width circuit checks and the tamper suites.

use std::thread;

use privnav::circuit::{
    bits_to_u128, build_adder, build_comparator_geq, build_divider, build_isqrt, build_subtractor, trajectory_inputs, u128_to_bits,
    Circuit, Plan,
};
use privnav::fixed::{encode, Bounds, FixedPoint, FpParams};
use privnav::net::mem_pair;
use privnav::par::Parallelism;
use privnav::smpc::{deal, evaluate, EngineMode, EvalOptions, Party, SmpcError, Tamper};
use privnav::zkrange::{deal_zk, prove_range, range_plan, verify_range, ProverOptions, ProverTriples, Verdict, VerifierTriples, ZkTamper};
use privnav_fleet::plans_for;
use rand::{thread_rng, Rng};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuiteResult {
    pub name: String,
    pub cases: u64,
    pub failures: u64,
    /// The first failing case, if any.
    pub first_failure: Option<String>,
}

impl SuiteResult {
    pub fn passed(&self) -> bool {
        self.failures == 0 && self.cases > 0
    }
}

struct Tally {
    name: String,
    cases: u64,
    failures: u64,
    first: Option<String>,
}

impl Tally {
    fn new(name: impl Into<String>) -> Self {
        Self { name: name.into(), cases: 0, failures: 0, first: None }
    }

    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.cases += 1;
        if !ok {
            self.failures += 1;
            if self.first.is_none() {
                self.first = Some(what());
            }
        }
    }

    fn done(self) -> SuiteResult {
        SuiteResult { name: self.name, cases: self.cases, failures: self.failures, first_failure: self.first }
    }
}

fn signed(v: u128, k: usize) -> i128 {
    let v = v as i128;
    if k > 0 && v >> (k - 1) & 1 == 1 {
        v - (1 << k)
    } else {
        v
    }
}

fn eval2(c: &Circuit, ka: usize, a: u128, kb: usize, b: u128) -> u128 {
    bits_to_u128(&c.evaluate(&[u128_to_bits(a, ka), u128_to_bits(b, kb)]).expect("arity")[0])
}

pub fn arithmetic() -> Vec<SuiteResult> {
    let mut add = Tally::new("adder k<=6 exhaustive");
    let mut sub = Tally::new("subtractor k<=6 exhaustive");
    let mut cmp = Tally::new("comparator k<=6 exhaustive");
    for k in 1..=6usize {
        let (ca, cs, cc) = (build_adder(k), build_subtractor(k), build_comparator_geq(k));
        for a in 0..1u128 << k {
            for b in 0..1u128 << k {
                let (x, y) = (signed(a, k), signed(b, k));
                add.check(signed(eval2(&ca, k, a, k, b), k + 1) == x + y, || format!("{x}+{y} at k={k}"));
                sub.check(signed(eval2(&cs, k, a, k, b), k + 1) == x - y, || format!("{x}-{y} at k={k}"));
                cmp.check((eval2(&cc, k, a, k, b) == 1) == (x >= y), || format!("{x}>={y} at k={k}"));
            }
        }
    }
    let mut sqrt = Tally::new("isqrt 8-bit exhaustive");
    let c = build_isqrt(8);
    for n in 0..256u128 {
        let got = bits_to_u128(&c.evaluate(&[u128_to_bits(n, 8)]).expect("arity")[0]);
        sqrt.check(got * got <= n && (got + 1) * (got + 1) > n, || format!("isqrt({n}) gave {got}"));
    }
    let mut div = Tally::new("divider 6/6 exhaustive");
    let c = build_divider(6, 6);
    for n in 0..64u128 {
        for d in 0..64u128 {
            let want = if d == 0 { 0 } else { n / d };
            let got = eval2(&c, 6, n, 6, d);
            div.check(got == want, || format!("{n}/{d} gave {got}"));
        }
    }
    vec![add.done(), sub.done(), cmp.done(), sqrt.done(), div.done()]
}

/// One proof over an in-memory channel; returns the verifier's verdict, errors count as rejections.
pub fn zk_session(plan: &Plan, loc: [FixedPoint; 3], bounds: Bounds, tamper: ZkTamper) -> Option<Verdict> {
    let (pt, vm) = deal_zk(plan.and_count(), &mut thread_rng());
    let (mut a, mut b) = mem_pair();
    let prover_plan = plan.clone();
    let prover = thread::spawn(move || {
        let opts = ProverOptions { tamper, par: Parallelism::Sequential };
        let _ = prove_range(&mut a, 1, &prover_plan, &loc, &bounds, ProverTriples::Dealt(pt), &opts, &mut thread_rng());
    });
    let out = verify_range(&mut b, 1, plan, &bounds, VerifierTriples::Dealt(vm), Parallelism::Sequential, &mut thread_rng());
    drop(b);
    let _ = prover.join();
    out.ok().map(|o| o.verdict)
}

/// Every single opened bit, tag and output tamper against a k=8 range proof, plus forged outputs.
pub fn zk_soundness(forgeries: usize) -> Vec<SuiteResult> {
    let params = FpParams::for_bitwidth(8).unwrap();
    let plan = range_plan(params);
    let v = |x: f64| encode(x, params).unwrap();
    let bounds = Bounds::cube(v(-4.0), v(4.0)).unwrap();
    let inside = [v(1.5), v(-2.0), v(3.0)];
    let outside = [v(1.5), v(5.0), v(3.0)];

    let mut honest = Tally::new("zk honest proofs accepted");
    for loc in [inside, [v(-4.0), v(4.0), v(0.0)]] {
        let got = zk_session(&plan, loc, bounds, ZkTamper::None);
        honest.check(got == Some(Verdict::Accepted), || format!("{got:?}"));
    }
    let got = zk_session(&plan, outside, bounds, ZkTamper::None);
    honest.check(got == Some(Verdict::RejectedOutOfBounds), || format!("out of bounds gave {got:?}"));

    let mut tampered = Tally::new("zk single tampers rejected");
    let openings = 2 * plan.and_count();
    let mut kinds: Vec<ZkTamper> = (0..openings).flat_map(|i| [ZkTamper::OpenedBit(i), ZkTamper::OpenedTag(i)]).collect();
    kinds.extend([ZkTamper::FinalBit, ZkTamper::FinalTag]);
    for t in kinds {
        let got = zk_session(&plan, inside, bounds, t);
        tampered.check(got != Some(Verdict::Accepted), || format!("{t:?} was accepted"));
    }
    let mut forged = Tally::new("zk forged outputs rejected");
    let mut rng = thread_rng();
    for _ in 0..forgeries {
        let t = ZkTamper::ForgedFinal(rng.gen());
        let got = zk_session(&plan, outside, bounds, t);
        forged.check(got != Some(Verdict::Accepted), || format!("{t:?} was accepted"));
    }
    vec![honest.done(), tampered.done(), forged.done()]
}

/// Runs both parties of one evaluation over an in-memory channel.
pub fn mpc_pair(
    plan: &Plan,
    mode: EngineMode,
    inputs: &[Vec<bool>],
    t1: Tamper,
    t2: Tamper,
) -> (Result<Option<Vec<Vec<bool>>>, SmpcError>, Result<(), SmpcError>) {
    let c = plan.circuit();
    let masks = if mode == EngineMode::Malicious { c.n_input_bits() } else { 0 };
    let (pre1, pre2) = deal(mode, plan.and_count(), masks, &mut thread_rng());
    let owners: Vec<Party> = c
        .inputs()
        .iter()
        .map(|g| if g.owner == privnav::circuit::InputOwner::Party1 { Party::Party1 } else { Party::Party2 })
        .collect();
    let pick = |who: Party| -> Vec<Option<Vec<bool>>> {
        inputs.iter().zip(&owners).map(|(bits, &o)| (o == who).then(|| bits.clone())).collect()
    };
    let (in1, in2) = (pick(Party::Party1), pick(Party::Party2));
    let (mut a, mut b) = mem_pair();
    let p2 = plan.clone();
    let peer = thread::spawn(move || {
        let opts = EvalOptions { tamper: t2, par: Parallelism::Sequential, ..EvalOptions::new(mode) };
        let r = evaluate(&mut b, 1, Party::Party2, &p2, &in2, pre2, &opts, &mut thread_rng()).map(|_| ());
        drop(b);
        r
    });
    let opts = EvalOptions { tamper: t1, par: Parallelism::Sequential, ..EvalOptions::new(mode) };
    let r1 = evaluate(&mut a, 1, Party::Party1, plan, &in1, pre1, &opts, &mut thread_rng()).map(|r| r.outputs);
    drop(a);
    (r1, peer.join().expect("peer panicked"))
}

/// Single tampers by the aircraft in malicious tracking rounds at k=8.
pub fn mpc_integrity(stride: usize) -> Vec<SuiteResult> {
    let params = FpParams::for_bitwidth(8).unwrap();
    let plan = plans_for(params).trajectory.clone();
    let v = |x: f64| encode(x, params).unwrap();
    let (sat, air) = ([v(1.0), v(2.0), v(-3.0)], [v(4.5), v(-1.25), v(0.5)]);
    let inputs = trajectory_inputs(&sat, &air);

    let mut honest = Tally::new("malicious honest rounds exact");
    let want = plan.circuit().evaluate(&inputs).expect("arity");
    for _ in 0..3 {
        let (r1, r2) = mpc_pair(&plan, EngineMode::Malicious, &inputs, Tamper::None, Tamper::None);
        honest.check(matches!(&r1, Ok(Some(o)) if *o == want) && r2.is_ok(), || format!("{r1:?} {r2:?}"));
    }
    let mut caught = Tally::new("malicious single tampers detected");
    let opened = 2 * plan.and_count();
    let mut kinds: Vec<Tamper> = (0..opened).step_by(stride.max(1)).flat_map(|i| [Tamper::OpenedBit(i), Tamper::OpenedTag(i)]).collect();
    kinds.extend((0..3 * params.k() as usize).map(Tamper::InputOpening));
    kinds.extend((0..plan.circuit().n_output_bits()).flat_map(|i| [Tamper::OutputShare(i), Tamper::OutputTag(i)]));
    for t in kinds {
        let (r1, _) = mpc_pair(&plan, EngineMode::Malicious, &inputs, Tamper::None, t);
        caught.check(matches!(&r1, Err(e) if e.is_cheat()), || format!("{t:?} gave {r1:?}"));
    }
    vec![honest.done(), caught.done()]
}

pub fn run_all() -> Vec<SuiteResult> {
    let mut out = arithmetic();
    out.extend(zk_soundness(200));
    out.extend(mpc_integrity(16));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suites_pass() {
        for r in arithmetic().into_iter().chain(zk_soundness(20)).chain(mpc_integrity(64)) {
            assert!(r.passed(), "{r:?}");
        }
    }

    #[test]
    fn a_broken_oracle_would_be_reported() {
        let mut t = Tally::new("x");
        t.check(true, String::new);
        t.check(false, || "case 2".into());
        t.check(false, || "case 3".into());
        let r = t.done();
        assert!(!r.passed());
        assert_eq!((r.cases, r.failures, r.first_failure.as_deref()), (3, 2, Some("case 2")));
    }
}
