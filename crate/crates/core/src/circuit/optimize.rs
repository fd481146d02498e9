//! Semantics-preserving circuit simplification.
//!
//! A single forward pass rewrites every gate into a literal (wire plus inversion flag), which
//! folds constants, absorbs NOT gates into literals, and deduplicates structurally identical
//! gates. A backward pass then drops gates that no output depends on. Inversions that reach an
//! AND input or an output are materialized as `XOR` with the constant-1 wire, so the result
//! contains no NOT gates. No AND gate is ever created that did not exist before.

use std::collections::HashMap;

use super::{Circuit, Gate, GateKind, Wire};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct Lit {
    wire: u32,
    inv: bool,
}

impl Lit {
    const FALSE: Lit = Lit { wire: 0, inv: false };
    const TRUE: Lit = Lit { wire: 0, inv: true };

    fn plain(wire: u32) -> Self {
        Lit { wire, inv: false }
    }

    fn is_const(self) -> bool {
        self.wire == 0
    }

    fn flip(self, by: bool) -> Self {
        Lit { wire: self.wire, inv: self.inv ^ by }
    }
}

struct Rewriter {
    first_gate_wire: u32,
    gates: Vec<(GateKind, u32, u32)>,
    table: HashMap<(GateKind, u32, u32), u32>,
}

impl Rewriter {
    fn gate(&mut self, kind: GateKind, a: u32, b: u32) -> u32 {
        let key = if a <= b { (kind, a, b) } else { (kind, b, a) };
        if let Some(&w) = self.table.get(&key) {
            return w;
        }
        let w = self.first_gate_wire + self.gates.len() as u32;
        self.gates.push(key);
        self.table.insert(key, w);
        w
    }

    /// A wire carrying exactly the value of `lit`.
    fn materialize(&mut self, lit: Lit) -> u32 {
        match (lit.is_const(), lit.inv) {
            (true, false) => 0,
            (true, true) => 1,
            (false, false) => lit.wire,
            (false, true) => self.gate(GateKind::Xor, lit.wire, 1),
        }
    }

    fn xor(&mut self, x: Lit, y: Lit) -> Lit {
        if x.wire == y.wire {
            return Lit::FALSE.flip(x.inv ^ y.inv);
        }
        if x.is_const() {
            return y.flip(x.inv);
        }
        if y.is_const() {
            return x.flip(y.inv);
        }
        Lit::plain(self.gate(GateKind::Xor, x.wire, y.wire)).flip(x.inv ^ y.inv)
    }

    fn and(&mut self, x: Lit, y: Lit) -> Lit {
        if x.is_const() {
            return if x.inv { y } else { Lit::FALSE };
        }
        if y.is_const() {
            return if y.inv { x } else { Lit::FALSE };
        }
        if x.wire == y.wire {
            return if x.inv == y.inv { x } else { Lit::FALSE };
        }
        let a = self.materialize(x);
        let b = self.materialize(y);
        Lit::plain(self.gate(GateKind::And, a, b))
    }
}

/// Constant propagation, NOT elimination, structural hashing and dead-gate removal.
pub fn optimize(c: &Circuit) -> Circuit {
    let n_inputs = c.n_input_bits() as u32;
    let first_gate_wire = 2 + n_inputs;
    let mut lits: Vec<Lit> = Vec::with_capacity(c.n_wires());
    lits.push(Lit::FALSE);
    lits.push(Lit::TRUE);
    lits.extend((2..first_gate_wire).map(Lit::plain));
    lits.resize(c.n_wires(), Lit::FALSE);

    let mut rw = Rewriter { first_gate_wire, gates: Vec::new(), table: HashMap::new() };
    for g in c.gates() {
        let x = lits[g.in0.index()];
        let y = lits[g.in1.index()];
        lits[g.out.index()] = match g.kind {
            GateKind::Xor => rw.xor(x, y),
            GateKind::And => rw.and(x, y),
            GateKind::Not => x.flip(true),
        };
    }
    let outputs: Vec<Lit> = c.output_wires().map(|w| lits[w]).collect();

    // Liveness and fan-out over the rewritten gates.
    let n_new = rw.gates.len();
    let gate_of = |w: u32| -> Option<usize> { (w >= first_gate_wire).then(|| (w - first_gate_wire) as usize) };
    let mut live = vec![false; n_new];
    let mut stack: Vec<usize> = outputs.iter().filter_map(|l| gate_of(l.wire)).collect();
    while let Some(g) = stack.pop() {
        if std::mem::replace(&mut live[g], true) {
            continue;
        }
        let (_, a, b) = rw.gates[g];
        stack.extend([a, b].into_iter().filter_map(gate_of));
    }
    let mut readers = vec![0usize; n_new];
    for (g, &(_, a, b)) in rw.gates.iter().enumerate() {
        if live[g] {
            for w in [a, b] {
                if let Some(src) = gate_of(w) {
                    readers[src] += 1;
                }
            }
        }
    }
    let mut output_uses = vec![0usize; n_new];
    for l in &outputs {
        if let Some(g) = gate_of(l.wire) {
            output_uses[g] += 1;
        }
    }
    // A gate that only feeds one non-inverted output can sit on that output wire directly.
    let at_tail: Vec<bool> = (0..n_new).map(|g| live[g] && readers[g] == 0 && output_uses[g] == 1).collect();
    let tail_gate = |l: &Lit| -> Option<usize> { gate_of(l.wire).filter(|&g| !l.inv && at_tail[g]) };

    let mut renumber: Vec<u32> = vec![u32::MAX; n_new];
    let mut gates: Vec<Gate> = Vec::new();
    let mut next = first_gate_wire;
    let map_wire = |w: u32, renumber: &[u32]| -> Wire {
        match gate_of(w) {
            Some(g) => Wire(renumber[g]),
            None => Wire(w),
        }
    };
    let emit = |kind: GateKind, a: Wire, b: Wire, next: &mut u32, gates: &mut Vec<Gate>| -> u32 {
        let out = Wire(*next);
        *next += 1;
        gates.push(Gate { kind, in0: a, in1: b, out });
        out.0
    };
    for g in 0..n_new {
        if live[g] && !at_tail[g] {
            let (kind, a, b) = rw.gates[g];
            let (a, b) = (map_wire(a, &renumber), map_wire(b, &renumber));
            renumber[g] = emit(kind, a, b, &mut next, &mut gates);
        }
    }
    for l in &outputs {
        match tail_gate(l) {
            Some(g) => {
                let (kind, a, b) = rw.gates[g];
                let (a, b) = (map_wire(a, &renumber), map_wire(b, &renumber));
                renumber[g] = emit(kind, a, b, &mut next, &mut gates);
            }
            None => {
                let src = if l.is_const() { Wire::ZERO } else { map_wire(l.wire, &renumber) };
                let other = if l.inv { Wire::ONE } else { Wire::ZERO };
                emit(GateKind::Xor, src, other, &mut next, &mut gates);
            }
        }
    }
    Circuit::new(next as usize, c.inputs().to_vec(), c.output_widths().to_vec(), gates, c.params())
        .expect("optimizer preserves well-formedness")
}
