//! Boolean circuits over the `{XOR, AND, NOT}` basis.
//!
//! Wire layout is fixed: wire 0 carries constant 0, wire 1 carries constant 1, then every input
//! group in declaration order, then one wire per gate. Output wires are always the last wires
//! of the circuit, in output order, matching the Bristol-fashion convention.

mod bristol;
mod builder;
mod library;
mod optimize;

use std::fmt;

use thiserror::Error;

use crate::fixed::FpParams;
use crate::par::Parallelism;

pub use bristol::{from_bristol, to_bristol, BristolError};
pub use builder::Builder;
pub use library::{
    build_adder, build_comparator_geq, build_divider, build_isqrt, build_multiplier, build_range_check,
    build_squarer, build_subtractor, build_trajectory, range_check_inputs, range_check_public_bits,
    trajectory_inputs, trajectory_output,
};
pub use optimize::optimize;

/// Index of a wire.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Wire(pub u32);

impl Wire {
    pub const ZERO: Wire = Wire(0);
    pub const ONE: Wire = Wire(1);

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for Wire {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "w{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GateKind {
    Xor,
    And,
    Not,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Gate {
    pub kind: GateKind,
    pub in0: Wire,
    /// Unused (equal to `in0`) for NOT gates.
    pub in1: Wire,
    pub out: Wire,
}

impl Gate {
    pub fn xor(in0: Wire, in1: Wire, out: Wire) -> Self {
        Self { kind: GateKind::Xor, in0, in1, out }
    }

    pub fn and(in0: Wire, in1: Wire, out: Wire) -> Self {
        Self { kind: GateKind::And, in0, in1, out }
    }

    pub fn not(input: Wire, out: Wire) -> Self {
        Self { kind: GateKind::Not, in0: input, in1: input, out }
    }
}

/// Who supplies an input group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InputOwner {
    /// First computing party (the satellite).
    Party1,
    /// Second computing party (the aircraft).
    Party2,
    /// Private prover input in a zero-knowledge proof.
    Witness,
    /// Known to everyone.
    Public,
    /// Origin unknown, e.g. read from a Bristol file.
    Unspecified,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct InputGroup {
    pub owner: InputOwner,
    pub width: usize,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CircuitError {
    #[error("expected {expected} input groups, got {got}")]
    InputCount { expected: usize, got: usize },
    #[error("input group {group} expects {expected} bits, got {got}")]
    InputWidth { group: usize, expected: usize, got: usize },
    #[error("gate {gate} is malformed: {reason}")]
    Malformed { gate: usize, reason: String },
    #[error("circuit layout is invalid: {0}")]
    Layout(String),
}

/// Gate counts and multiplicative depth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CircuitStats {
    pub and_count: usize,
    pub xor_count: usize,
    pub not_count: usize,
    /// Longest chain of AND gates from any input to any output.
    pub depth: usize,
}

impl fmt::Display for CircuitStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "and={} xor={} not={} and_depth={}",
            self.and_count, self.xor_count, self.not_count, self.depth
        )
    }
}

/// An immutable, validated circuit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Circuit {
    n_wires: usize,
    inputs: Vec<InputGroup>,
    outputs: Vec<usize>,
    gates: Vec<Gate>,
    params: Option<FpParams>,
}

impl Circuit {
    /// Validates and assembles a circuit. Gates must be topologically ordered, write each wire
    /// exactly once and only read wires that are already defined.
    pub fn new(
        n_wires: usize,
        inputs: Vec<InputGroup>,
        outputs: Vec<usize>,
        gates: Vec<Gate>,
        params: Option<FpParams>,
    ) -> Result<Self, CircuitError> {
        let n_inputs: usize = inputs.iter().map(|g| g.width).sum();
        let first_gate_wire = 2 + n_inputs;
        if first_gate_wire + gates.len() != n_wires {
            return Err(CircuitError::Layout(format!(
                "{n_wires} wires but {} constants/inputs and {} gates",
                first_gate_wire,
                gates.len()
            )));
        }
        let mut defined = vec![false; n_wires];
        defined[..first_gate_wire].iter_mut().for_each(|d| *d = true);
        for (i, g) in gates.iter().enumerate() {
            let bad = |reason: String| CircuitError::Malformed { gate: i, reason };
            for w in [g.in0, g.in1] {
                if w.index() >= n_wires || !defined[w.index()] {
                    return Err(bad(format!("reads unwritten wire {w}")));
                }
            }
            if g.out.index() >= n_wires {
                return Err(bad(format!("writes out-of-range wire {}", g.out)));
            }
            if defined[g.out.index()] {
                return Err(bad(format!("writes wire {} twice", g.out)));
            }
            if g.out <= g.in0 || g.out <= g.in1 {
                return Err(bad("output must exceed both inputs".into()));
            }
            defined[g.out.index()] = true;
        }
        let n_out: usize = outputs.iter().sum();
        if n_out > gates.len() {
            return Err(CircuitError::Layout("outputs must be the final gate wires".into()));
        }
        Ok(Self { n_wires, inputs, outputs, gates, params })
    }

    pub fn n_wires(&self) -> usize {
        self.n_wires
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn inputs(&self) -> &[InputGroup] {
        &self.inputs
    }

    pub fn output_widths(&self) -> &[usize] {
        &self.outputs
    }

    pub fn params(&self) -> Option<FpParams> {
        self.params
    }

    pub fn n_input_bits(&self) -> usize {
        self.inputs.iter().map(|g| g.width).sum()
    }

    pub fn n_output_bits(&self) -> usize {
        self.outputs.iter().sum()
    }

    /// First wire of each input group.
    pub fn input_offsets(&self) -> Vec<usize> {
        let mut offset = 2;
        self.inputs
            .iter()
            .map(|g| {
                let start = offset;
                offset += g.width;
                start
            })
            .collect()
    }

    /// Wires of all outputs, flattened in output order.
    pub fn output_wires(&self) -> std::ops::Range<usize> {
        self.n_wires - self.n_output_bits()..self.n_wires
    }

    /// Replaces input owners, keeping widths. Used to relabel circuits read from Bristol files.
    pub fn with_owners(mut self, owners: &[InputOwner]) -> Result<Self, CircuitError> {
        if owners.len() != self.inputs.len() {
            return Err(CircuitError::InputCount { expected: self.inputs.len(), got: owners.len() });
        }
        for (g, &o) in self.inputs.iter_mut().zip(owners) {
            g.owner = o;
        }
        Ok(self)
    }

    /// SHA-256 over the Bristol text and input owners; peers compare it during handshakes.
    pub fn digest(&self) -> [u8; 32] {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        h.update(to_bristol(self).as_bytes());
        for g in &self.inputs {
            h.update(format!("{:?}\n", g.owner).as_bytes());
        }
        h.finalize().into()
    }

    pub fn stats(&self) -> CircuitStats {
        let mut stats = CircuitStats::default();
        let mut depth = vec![0usize; self.n_wires];
        for g in &self.gates {
            let d = depth[g.in0.index()].max(depth[g.in1.index()]);
            depth[g.out.index()] = match g.kind {
                GateKind::Xor => {
                    stats.xor_count += 1;
                    d
                }
                GateKind::Not => {
                    stats.not_count += 1;
                    d
                }
                GateKind::And => {
                    stats.and_count += 1;
                    d + 1
                }
            };
        }
        stats.depth = depth.iter().copied().max().unwrap_or(0);
        stats
    }

    /// Groups gate indices for round-efficient evaluation.
    ///
    /// Returns `(locals, ands)` where `locals[l]` holds the XOR/NOT gates at multiplicative
    /// depth `l` and `ands[l]` the AND gates at depth `l + 1`. Evaluating `locals[0]`, `ands[0]`,
    /// `locals[1]`, `ands[1]`, ... in order respects every dependency, and each `ands[l]` can be
    /// opened in a single communication round.
    pub fn layers(&self) -> (Vec<Vec<usize>>, Vec<Vec<usize>>) {
        let mut depth = vec![0usize; self.n_wires];
        let mut locals: Vec<Vec<usize>> = vec![Vec::new()];
        let mut ands: Vec<Vec<usize>> = Vec::new();
        for (i, g) in self.gates.iter().enumerate() {
            let d = depth[g.in0.index()].max(depth[g.in1.index()]);
            match g.kind {
                GateKind::And => {
                    depth[g.out.index()] = d + 1;
                    if ands.len() <= d {
                        ands.resize_with(d + 1, Vec::new);
                    }
                    ands[d].push(i);
                }
                _ => {
                    depth[g.out.index()] = d;
                    if locals.len() <= d {
                        locals.resize_with(d + 1, Vec::new);
                    }
                    locals[d].push(i);
                }
            }
        }
        let n = locals.len().max(ands.len() + 1);
        locals.resize_with(n, Vec::new);
        ands.resize_with(n - 1, Vec::new);
        (locals, ands)
    }

    fn check_inputs(&self, inputs: &[Vec<bool>]) -> Result<(), CircuitError> {
        if inputs.len() != self.inputs.len() {
            return Err(CircuitError::InputCount { expected: self.inputs.len(), got: inputs.len() });
        }
        for (group, (g, bits)) in self.inputs.iter().zip(inputs).enumerate() {
            if g.width != bits.len() {
                return Err(CircuitError::InputWidth { group, expected: g.width, got: bits.len() });
            }
        }
        Ok(())
    }

    /// Plaintext evaluation; one bit vector per input group in, one per output group out.
    pub fn evaluate(&self, inputs: &[Vec<bool>]) -> Result<Vec<Vec<bool>>, CircuitError> {
        self.check_inputs(inputs)?;
        let mut values = vec![false; self.n_wires];
        values[1] = true;
        let mut w = 2;
        for bits in inputs {
            values[w..w + bits.len()].copy_from_slice(bits);
            w += bits.len();
        }
        for g in &self.gates {
            let a = values[g.in0.index()];
            let b = values[g.in1.index()];
            values[g.out.index()] = match g.kind {
                GateKind::Xor => a ^ b,
                GateKind::And => a & b,
                GateKind::Not => !a,
            };
        }
        Ok(self.split_outputs(&values[self.output_wires()]))
    }

    fn split_outputs<T: Clone>(&self, flat: &[T]) -> Vec<Vec<T>> {
        let mut out = Vec::with_capacity(self.outputs.len());
        let mut at = 0;
        for &w in &self.outputs {
            out.push(flat[at..at + w].to_vec());
            at += w;
        }
        out
    }

    /// Evaluates 64 input assignments at once, one per bit lane.
    fn evaluate_lanes(&self, inputs: &[Vec<u64>]) -> Vec<u64> {
        let mut values = vec![0u64; self.n_wires];
        values[1] = u64::MAX;
        let mut w = 2;
        for lanes in inputs {
            values[w..w + lanes.len()].copy_from_slice(lanes);
            w += lanes.len();
        }
        for g in &self.gates {
            let a = values[g.in0.index()];
            let b = values[g.in1.index()];
            values[g.out.index()] = match g.kind {
                GateKind::Xor => a ^ b,
                GateKind::And => a & b,
                GateKind::Not => !a,
            };
        }
        values[self.output_wires()].to_vec()
    }

    /// Evaluates many assignments with bit-sliced gates, splitting work across threads when
    /// `par` allows it.
    pub fn evaluate_batch(&self, cases: &[Vec<Vec<bool>>], par: Parallelism) -> Result<Vec<Vec<Vec<bool>>>, CircuitError> {
        for case in cases {
            self.check_inputs(case)?;
        }
        let chunks: Vec<&[Vec<Vec<bool>>]> = cases.chunks(64).collect();
        let run = |chunk: &&[Vec<Vec<bool>>]| -> Vec<Vec<Vec<bool>>> {
            let lanes: Vec<Vec<u64>> = self
                .inputs
                .iter()
                .enumerate()
                .map(|(gi, g)| {
                    (0..g.width)
                        .map(|bit| {
                            chunk
                                .iter()
                                .enumerate()
                                .fold(0u64, |acc, (lane, case)| acc | ((case[gi][bit] as u64) << lane))
                        })
                        .collect()
                })
                .collect();
            let out = self.evaluate_lanes(&lanes);
            (0..chunk.len())
                .map(|lane| {
                    let flat: Vec<bool> = out.iter().map(|v| (v >> lane) & 1 == 1).collect();
                    self.split_outputs(&flat)
                })
                .collect()
        };
        let results: Vec<Vec<Vec<Vec<bool>>>> = crate::par::map(&chunks, par, run);
        Ok(results.into_iter().flatten().collect())
    }
}

/// A circuit with its precomputed layer schedule; shareable across sessions.
#[derive(Debug, Clone)]
pub struct Plan {
    circuit: Circuit,
    locals: Vec<Vec<usize>>,
    ands: Vec<Vec<usize>>,
    and_count: usize,
}

impl Plan {
    pub fn new(circuit: Circuit) -> Self {
        let (locals, ands) = circuit.layers();
        let and_count = ands.iter().map(Vec::len).sum();
        Self { circuit, locals, ands, and_count }
    }

    pub fn circuit(&self) -> &Circuit {
        &self.circuit
    }

    pub fn and_count(&self) -> usize {
        self.and_count
    }

    /// Local gates per layer; see [`Circuit::layers`].
    pub fn locals(&self) -> &[Vec<usize>] {
        &self.locals
    }

    /// AND gates per layer; see [`Circuit::layers`].
    pub fn ands(&self) -> &[Vec<usize>] {
        &self.ands
    }

    /// Number of interactive AND layers.
    pub fn rounds(&self) -> usize {
        self.ands.iter().filter(|l| !l.is_empty()).count()
    }
}

/// Packs `bits` (least significant first) into an integer.
pub fn bits_to_u128(bits: &[bool]) -> u128 {
    bits.iter().enumerate().fold(0u128, |acc, (i, &b)| acc | ((b as u128) << i))
}

/// The low `width` bits of `value`, least significant first.
pub fn u128_to_bits(value: u128, width: usize) -> Vec<bool> {
    (0..width).map(|i| i < 128 && (value >> i) & 1 == 1).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> Circuit {
        // out = (a AND b) XOR NOT(a)
        let inputs = vec![
            InputGroup { owner: InputOwner::Party1, width: 1 },
            InputGroup { owner: InputOwner::Party2, width: 1 },
        ];
        let gates = vec![
            Gate::and(Wire(2), Wire(3), Wire(4)),
            Gate::not(Wire(2), Wire(5)),
            Gate::xor(Wire(4), Wire(5), Wire(6)),
        ];
        Circuit::new(7, inputs, vec![1], gates, None).unwrap()
    }

    #[test]
    fn evaluate_truth_table() {
        let c = tiny();
        for a in [false, true] {
            for b in [false, true] {
                let out = c.evaluate(&[vec![a], vec![b]]).unwrap();
                assert_eq!(out, vec![vec![(a & b) ^ !a]]);
            }
        }
    }

    #[test]
    fn evaluate_arity_errors() {
        let c = tiny();
        assert_eq!(c.evaluate(&[vec![true]]), Err(CircuitError::InputCount { expected: 2, got: 1 }));
        assert_eq!(
            c.evaluate(&[vec![true], vec![]]),
            Err(CircuitError::InputWidth { group: 1, expected: 1, got: 0 })
        );
    }

    #[test]
    fn rejects_non_topological_gates() {
        let inputs = vec![InputGroup { owner: InputOwner::Public, width: 1 }];
        let gates = vec![Gate::xor(Wire(2), Wire(4), Wire(3)), Gate::xor(Wire(2), Wire(2), Wire(4))];
        assert!(matches!(Circuit::new(5, inputs, vec![1], gates, None), Err(CircuitError::Malformed { gate: 0, .. })));
    }

    #[test]
    fn rejects_double_write() {
        let inputs = vec![InputGroup { owner: InputOwner::Public, width: 1 }];
        let gates = vec![Gate::xor(Wire(1), Wire(2), Wire(3)), Gate::xor(Wire(1), Wire(2), Wire(3))];
        assert!(Circuit::new(5, inputs, vec![1], gates, None).is_err());
    }

    #[test]
    fn stats_and_layers() {
        let c = tiny();
        let s = c.stats();
        assert_eq!((s.and_count, s.xor_count, s.not_count, s.depth), (1, 1, 1, 1));
        let (locals, ands) = c.layers();
        assert_eq!(ands, vec![vec![0]]);
        assert_eq!(locals, vec![vec![1], vec![2]]);
    }

    #[test]
    fn batch_matches_single() {
        let c = tiny();
        let cases: Vec<Vec<Vec<bool>>> = (0..200).map(|i| vec![vec![i % 3 == 0], vec![i % 5 < 2]]).collect();
        for par in [Parallelism::Sequential, Parallelism::Parallel] {
            let batch = c.evaluate_batch(&cases, par).unwrap();
            for (case, got) in cases.iter().zip(&batch) {
                assert_eq!(&c.evaluate(case).unwrap(), got);
            }
        }
    }

    #[test]
    fn bit_helpers() {
        assert_eq!(bits_to_u128(&u128_to_bits(0b1011, 6)), 0b1011);
        assert_eq!(u128_to_bits(5, 3), vec![true, false, true]);
    }
}
