//! Bristol-fashion text serialization.
//!
//! ```text
//! <n_gates> <n_wires>
//! <n_input_values> <width>...
//! <n_output_values> <width>...
//!
//! 2 1 <in0> <in1> <out> XOR|AND
//! 1 1 <in> <out> INV
//! ```
//!
//! The first input value always has width 2 and carries the constants: wire 0 is 0 and wire 1
//! is 1. Output values occupy the final wires.

use std::fmt::Write as _;

use super::{Circuit, CircuitError, Gate, GateKind, InputGroup, InputOwner, Wire};

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
#[error("bristol line {line}: {message}")]
pub struct BristolError {
    pub line: usize,
    pub message: String,
}

pub fn to_bristol(c: &Circuit) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{} {}", c.gates().len(), c.n_wires());
    let mut ins = vec![c.inputs().len() + 1, 2];
    ins.extend(c.inputs().iter().map(|g| g.width));
    let _ = writeln!(s, "{}", join(&ins));
    let mut outs = vec![c.output_widths().len()];
    outs.extend_from_slice(c.output_widths());
    let _ = writeln!(s, "{}", join(&outs));
    s.push('\n');
    for g in c.gates() {
        let _ = match g.kind {
            GateKind::Xor => writeln!(s, "2 1 {} {} {} XOR", g.in0.0, g.in1.0, g.out.0),
            GateKind::And => writeln!(s, "2 1 {} {} {} AND", g.in0.0, g.in1.0, g.out.0),
            GateKind::Not => writeln!(s, "1 1 {} {} INV", g.in0.0, g.out.0),
        };
    }
    s
}

fn join(v: &[usize]) -> String {
    v.iter().map(usize::to_string).collect::<Vec<_>>().join(" ")
}

fn numbers(line: &str, lineno: usize) -> Result<Vec<usize>, BristolError> {
    line.split_whitespace()
        .map(|t| {
            t.parse::<usize>()
                .map_err(|_| BristolError { line: lineno, message: format!("expected a number, found `{t}`") })
        })
        .collect()
}

fn counted(nums: Vec<usize>, lineno: usize, what: &str) -> Result<Vec<usize>, BristolError> {
    match nums.split_first() {
        Some((&n, rest)) if rest.len() == n => Ok(rest.to_vec()),
        _ => Err(BristolError { line: lineno, message: format!("malformed {what} arity line") }),
    }
}

/// Parses a circuit. Input owners are unknown after parsing; see [`Circuit::with_owners`].
pub fn from_bristol(text: &str) -> Result<Circuit, BristolError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty());
    let mut header = |what: &str| {
        lines.next().ok_or_else(|| BristolError { line: 0, message: format!("missing {what} line") })
    };
    let (l1, head) = header("header")?;
    let head = numbers(head, l1)?;
    let [n_gates, n_wires] = head[..] else {
        return Err(BristolError { line: l1, message: "expected `<n_gates> <n_wires>`".into() });
    };
    let (l2, ins) = header("input")?;
    let ins = counted(numbers(ins, l2)?, l2, "input")?;
    if ins.first() != Some(&2) {
        return Err(BristolError { line: l2, message: "first input value must be the 2-wire constant pair".into() });
    }
    let (l3, outs) = header("output")?;
    let outs = counted(numbers(outs, l3)?, l3, "output")?;

    let n_inputs: usize = ins.iter().sum();
    let mut written = vec![false; n_wires.max(n_inputs)];
    written[..n_inputs.min(n_wires)].iter_mut().for_each(|w| *w = true);
    let mut gates = Vec::with_capacity(n_gates);
    for (lineno, line) in lines {
        let err = |message: String| BristolError { line: lineno, message };
        let toks: Vec<&str> = line.split_whitespace().collect();
        let op = *toks.last().unwrap_or(&"");
        let nums = numbers(&toks[..toks.len().saturating_sub(1)].join(" "), lineno)?;
        let wire = |w: usize| -> Result<Wire, BristolError> {
            if w >= n_wires {
                return Err(err(format!("wire {w} out of range")));
            }
            Ok(Wire(w as u32))
        };
        let read = |w: usize| -> Result<Wire, BristolError> {
            let wire = wire(w)?;
            if !written[w] {
                return Err(err(format!("gate reads wire {w} before it is written")));
            }
            Ok(wire)
        };
        let gate = match (op, nums.as_slice()) {
            ("XOR", [2, 1, a, b, o]) => Gate::xor(read(*a)?, read(*b)?, wire(*o)?),
            ("AND", [2, 1, a, b, o]) => Gate::and(read(*a)?, read(*b)?, wire(*o)?),
            ("INV", [1, 1, a, o]) => Gate::not(read(*a)?, wire(*o)?),
            _ => return Err(err(format!("unsupported gate `{line}`"))),
        };
        if written[gate.out.index()] {
            return Err(err(format!("wire {} written twice", gate.out.0)));
        }
        written[gate.out.index()] = true;
        gates.push(gate);
    }
    if gates.len() != n_gates {
        return Err(BristolError { line: 0, message: format!("header declares {n_gates} gates, found {}", gates.len()) });
    }
    let groups = ins[1..].iter().map(|&width| InputGroup { owner: InputOwner::Unspecified, width }).collect();
    Circuit::new(n_wires, groups, outs, gates, None).map_err(|e| {
        let line = match &e {
            CircuitError::Malformed { gate, .. } => gate + 5,
            _ => 0,
        };
        BristolError { line, message: e.to_string() }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{build_range_check, optimize};
    use crate::fixed::FpParams;

    #[test]
    fn roundtrip_range_check() {
        let c = optimize(&build_range_check(FpParams::new(8, 2).unwrap()));
        let text = to_bristol(&c);
        let back = from_bristol(&text).unwrap();
        assert_eq!(back.gates(), c.gates());
        assert_eq!(back.n_wires(), c.n_wires());
        assert_eq!(back.output_widths(), c.output_widths());
        assert_eq!(
            back.inputs().iter().map(|g| g.width).collect::<Vec<_>>(),
            c.inputs().iter().map(|g| g.width).collect::<Vec<_>>()
        );
        assert_eq!(to_bristol(&back), text);
    }

    #[test]
    fn hand_written_three_gates() {
        // out0 = (a AND b), out1 = NOT(a XOR b)
        let text = "3 7\n3 2 1 1\n1 2\n\n2 1 2 3 4 AND\n2 1 2 3 5 XOR\n1 1 5 6 INV\n";
        let c = from_bristol(text).unwrap();
        let outs = c.output_widths();
        assert_eq!(outs, &[2]);
        // The output value spans wires 5..7; wire 5 is a XOR b, wire 6 is its negation.
        for a in [false, true] {
            for b in [false, true] {
                let got = c.evaluate(&[vec![a], vec![b]]).unwrap();
                assert_eq!(got, vec![vec![a ^ b, !(a ^ b)]]);
            }
        }
    }

    #[test]
    fn rejects_unwritten_wire() {
        let text = "1 5\n2 2 1\n1 1\n2 1 2 3 4 AND\n";
        let err = from_bristol(text).unwrap_err();
        assert_eq!(err.line, 4);
        assert!(err.message.contains("before it is written"));
    }

    #[test]
    fn rejects_garbage() {
        assert_eq!(from_bristol("x y\n").unwrap_err().line, 1);
        assert_eq!(from_bristol("1 5\n2 2 1\n1 1\n2 1 2 0 4 NAND\n").unwrap_err().line, 4);
        assert!(from_bristol("1 4\n1 2\n1 1\n").is_err());
        assert!(from_bristol("2 5\n2 2 1\n1 1\n2 1 2 0 4 XOR\n").is_err());
    }
}
