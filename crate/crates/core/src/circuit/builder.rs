use super::{Circuit, Gate, GateKind, InputGroup, InputOwner, Wire};
use crate::fixed::FpParams;

/// Incremental circuit construction. Bit vectors are least significant bit first.
///
/// The builder emits gates verbatim, constants included; [`super::optimize`] folds them away.
#[derive(Debug, Default)]
pub struct Builder {
    inputs: Vec<InputGroup>,
    gates: Vec<Gate>,
    next: u32,
    params: Option<FpParams>,
}

impl Builder {
    pub fn new() -> Self {
        Self { inputs: Vec::new(), gates: Vec::new(), next: 2, params: None }
    }

    pub fn with_params(params: FpParams) -> Self {
        Self { params: Some(params), ..Self::new() }
    }

    /// Declares an input group. All inputs must be declared before the first gate.
    pub fn input(&mut self, owner: InputOwner, width: usize) -> Vec<Wire> {
        assert!(self.gates.is_empty(), "inputs must precede gates");
        self.inputs.push(InputGroup { owner, width });
        let start = self.next;
        self.next += width as u32;
        (start..self.next).map(Wire).collect()
    }

    fn push(&mut self, kind: GateKind, in0: Wire, in1: Wire) -> Wire {
        let out = Wire(self.next);
        self.next += 1;
        self.gates.push(Gate { kind, in0, in1, out });
        out
    }

    pub fn xor(&mut self, a: Wire, b: Wire) -> Wire {
        self.push(GateKind::Xor, a, b)
    }

    pub fn and(&mut self, a: Wire, b: Wire) -> Wire {
        self.push(GateKind::And, a, b)
    }

    pub fn not(&mut self, a: Wire) -> Wire {
        self.push(GateKind::Not, a, a)
    }

    pub fn or(&mut self, a: Wire, b: Wire) -> Wire {
        let x = self.xor(a, b);
        let y = self.and(a, b);
        self.xor(x, y)
    }

    /// `sel ? on_true : on_false`, one AND.
    pub fn mux(&mut self, sel: Wire, on_true: Wire, on_false: Wire) -> Wire {
        let diff = self.xor(on_true, on_false);
        let pick = self.and(sel, diff);
        self.xor(on_false, pick)
    }

    pub fn mux_vec(&mut self, sel: Wire, on_true: &[Wire], on_false: &[Wire]) -> Vec<Wire> {
        assert_eq!(on_true.len(), on_false.len());
        on_true.iter().zip(on_false).map(|(&t, &f)| self.mux(sel, t, f)).collect()
    }

    /// OR of all bits as a balanced tree.
    pub fn or_reduce(&mut self, bits: &[Wire]) -> Wire {
        match bits.len() {
            0 => Wire::ZERO,
            1 => bits[0],
            n => {
                let (lo, hi) = bits.split_at(n / 2);
                let a = self.or_reduce(lo);
                let b = self.or_reduce(hi);
                self.or(a, b)
            }
        }
    }

    pub fn and_reduce(&mut self, bits: &[Wire]) -> Wire {
        match bits.len() {
            0 => Wire::ONE,
            1 => bits[0],
            n => {
                let (lo, hi) = bits.split_at(n / 2);
                let a = self.and_reduce(lo);
                let b = self.and_reduce(hi);
                self.and(a, b)
            }
        }
    }

    /// Sum and carry-out of `a + b + cin`; one AND per bit.
    pub fn full_add(&mut self, a: Wire, b: Wire, cin: Wire) -> (Wire, Wire) {
        let t0 = self.xor(a, cin);
        let t1 = self.xor(b, cin);
        let sum = self.xor(t0, b);
        let both = self.and(t0, t1);
        let cout = self.xor(cin, both);
        (sum, cout)
    }

    /// Equal-width ripple-carry addition; returns the sum bits and the carry out.
    pub fn add_with_carry(&mut self, a: &[Wire], b: &[Wire], cin: Wire) -> (Vec<Wire>, Wire) {
        assert_eq!(a.len(), b.len(), "adder operands must share a width");
        let mut carry = cin;
        let sum = a
            .iter()
            .zip(b)
            .map(|(&x, &y)| {
                let (s, c) = self.full_add(x, y, carry);
                carry = c;
                s
            })
            .collect();
        (sum, carry)
    }

    /// Unsigned addition of possibly different widths, result one bit wider than the wider operand.
    pub fn add_unsigned(&mut self, a: &[Wire], b: &[Wire]) -> Vec<Wire> {
        let n = a.len().max(b.len());
        let a = zero_extend(a, n);
        let b = zero_extend(b, n);
        let (mut sum, carry) = self.add_with_carry(&a, &b, Wire::ZERO);
        sum.push(carry);
        sum
    }

    /// `a - b` over equal widths as `a + !b + 1`. Returns the difference and a borrow bit that
    /// is set iff `a < b` as unsigned numbers.
    pub fn sub_with_borrow(&mut self, a: &[Wire], b: &[Wire]) -> (Vec<Wire>, Wire) {
        let nb: Vec<Wire> = b.iter().map(|&w| self.not(w)).collect();
        let (diff, carry) = self.add_with_carry(a, &nb, Wire::ONE);
        let borrow = self.not(carry);
        (diff, borrow)
    }

    /// Signed subtraction of two `k`-bit operands, exact in `k + 1` bits.
    pub fn sub_signed(&mut self, a: &[Wire], b: &[Wire]) -> Vec<Wire> {
        let n = a.len().max(b.len()) + 1;
        let a = sign_extend(a, n);
        let b = sign_extend(b, n);
        self.sub_with_borrow(&a, &b).0
    }

    /// Signed addition of two `k`-bit operands, exact in `k + 1` bits.
    pub fn add_signed(&mut self, a: &[Wire], b: &[Wire]) -> Vec<Wire> {
        let n = a.len().max(b.len()) + 1;
        let a = sign_extend(a, n);
        let b = sign_extend(b, n);
        self.add_with_carry(&a, &b, Wire::ZERO).0
    }

    /// Unsigned `a >= b` through a multiplexer chain: scanning from the least significant bit,
    /// the running result becomes `a_i` wherever the operands differ. One AND per bit.
    pub fn geq_unsigned(&mut self, a: &[Wire], b: &[Wire]) -> Wire {
        let n = a.len().max(b.len());
        let a = zero_extend(a, n);
        let b = zero_extend(b, n);
        let mut acc = Wire::ONE;
        for (&x, &y) in a.iter().zip(&b) {
            let differ = self.xor(x, y);
            let towards_a = self.xor(x, acc);
            let flip = self.and(differ, towards_a);
            acc = self.xor(acc, flip);
        }
        acc
    }

    /// Signed `a >= b`: flipping both sign bits maps two's complement order onto unsigned order.
    pub fn geq_signed(&mut self, a: &[Wire], b: &[Wire]) -> Wire {
        let n = a.len().max(b.len());
        let mut a = sign_extend(a, n);
        let mut b = sign_extend(b, n);
        a[n - 1] = self.not(a[n - 1]);
        b[n - 1] = self.not(b[n - 1]);
        self.geq_unsigned(&a, &b)
    }

    /// `neg ? -x : x` in the width of `x`: `(x ^ neg) + neg`.
    pub fn negate_if(&mut self, x: &[Wire], neg: Wire) -> Vec<Wire> {
        let mut carry = neg;
        x.iter()
            .map(|&bit| {
                let flipped = self.xor(bit, neg);
                let sum = self.xor(flipped, carry);
                carry = self.and(flipped, carry);
                sum
            })
            .collect()
    }

    /// Magnitude (same width, unsigned) and sign bit of a two's-complement value.
    pub fn abs(&mut self, x: &[Wire]) -> (Vec<Wire>, Wire) {
        let sign = *x.last().expect("empty operand");
        (self.negate_if(x, sign), sign)
    }

    /// Adds `row` into `acc` at bit offset `shift`, rippling the carry to the top of `acc`.
    fn accumulate(&mut self, acc: &mut Vec<Wire>, row: &[Wire], shift: usize) {
        let mut carry = Wire::ZERO;
        let mut i = shift;
        for &bit in row {
            if i >= acc.len() {
                acc.push(Wire::ZERO);
            }
            let (s, c) = self.full_add(acc[i], bit, carry);
            acc[i] = s;
            carry = c;
            i += 1;
        }
        while carry != Wire::ZERO {
            if i >= acc.len() {
                acc.push(carry);
                break;
            }
            let s = self.xor(acc[i], carry);
            carry = self.and(acc[i], carry);
            acc[i] = s;
            i += 1;
        }
    }

    /// Unsigned shift-and-add array multiplier; the product has `a.len() + b.len()` bits.
    pub fn mul_unsigned(&mut self, a: &[Wire], b: &[Wire]) -> Vec<Wire> {
        let width = a.len() + b.len();
        let mut acc: Vec<Wire> = Vec::new();
        for (i, &bi) in b.iter().enumerate() {
            let row: Vec<Wire> = a.iter().map(|&aj| self.and(aj, bi)).collect();
            if i == 0 {
                acc = row;
            } else {
                self.accumulate(&mut acc, &row, i);
            }
        }
        let mut acc = zero_extend(&acc, width);
        acc.truncate(width);
        acc
    }

    /// Unsigned square sharing symmetric partial products:
    /// `x^2 = sum_i x_i 2^(2i) + sum_{i<j} x_i x_j 2^(i+j+1)`.
    pub fn square_unsigned(&mut self, x: &[Wire]) -> Vec<Wire> {
        let n = x.len();
        let width = 2 * n;
        let mut acc: Vec<Wire> = Vec::new();
        for i in 0..n {
            // Row i starts at bit 2i: [x_i, 0, x_i x_{i+1}, x_i x_{i+2}, ...].
            let mut row = vec![x[i], Wire::ZERO];
            for j in i + 1..n {
                row.push(self.and(x[i], x[j]));
            }
            if i + 1 == n {
                row.truncate(1);
            }
            self.accumulate(&mut acc, &row, 2 * i);
        }
        let mut acc = zero_extend(&acc, width);
        acc.truncate(width);
        acc
    }

    /// Bit-serial restoring square root of an unsigned radicand; `ceil(n / 2)` result bits.
    pub fn isqrt(&mut self, radicand: &[Wire]) -> Vec<Wire> {
        let half = radicand.len().div_ceil(2);
        let padded = zero_extend(radicand, 2 * half);
        // root is kept most significant bit first while it grows.
        let mut root_msb_first: Vec<Wire> = Vec::new();
        let mut rem: Vec<Wire> = Vec::new();
        for step in 0..half {
            let pair = half - 1 - step;
            // rem = rem * 4 + next two radicand bits; fits in step + 3 bits.
            let width = step + 3;
            let mut shifted = vec![padded[2 * pair], padded[2 * pair + 1]];
            shifted.extend(rem.iter().copied());
            let shifted = zero_extend(&shifted, width);
            // trial = root * 4 + 1
            let mut trial = vec![Wire::ONE, Wire::ZERO];
            trial.extend(root_msb_first.iter().rev().copied());
            let trial = zero_extend(&trial, width);
            let (diff, borrow) = self.sub_with_borrow(&shifted, &trial);
            let bit = self.not(borrow);
            let next_rem = self.mux_vec(bit, &diff, &shifted);
            // After a step the remainder is at most 2 * root, i.e. step + 2 bits.
            rem = next_rem[..step + 2].to_vec();
            root_msb_first.push(bit);
        }
        root_msb_first.into_iter().rev().collect()
    }

    /// Restoring division on unsigned operands producing `quotient_bits` quotient bits.
    ///
    /// The caller guarantees `num < den * 2^quotient_bits`; with `quotient_bits == num.len()`
    /// this holds for every input. A zero divisor yields an all-zero quotient.
    pub fn div_unsigned(&mut self, num: &[Wire], den: &[Wire], quotient_bits: usize) -> Vec<Wire> {
        assert!(quotient_bits <= num.len());
        let width = den.len() + 1;
        let den_ext = zero_extend(den, width);
        // Bits above the quotient range form the initial remainder, known to be below den.
        let mut rem = zero_extend(&num[quotient_bits..], width);
        rem.truncate(width);
        let mut quotient = vec![Wire::ZERO; quotient_bits];
        for i in (0..quotient_bits).rev() {
            let mut shifted = vec![num[i]];
            shifted.extend_from_slice(&rem[..width - 1]);
            let (diff, borrow) = self.sub_with_borrow(&shifted, &den_ext);
            let q = self.not(borrow);
            quotient[i] = q;
            rem = self.mux_vec(q, &diff, &shifted);
        }
        let nonzero = self.or_reduce(den);
        quotient.iter().map(|&q| self.and(q, nonzero)).collect()
    }

    /// Finishes the circuit. Output bits are placed on the final wires in the given order,
    /// adding copy gates (`XOR` with constant 0) where needed.
    pub fn finish(mut self, outputs: &[Vec<Wire>]) -> Circuit {
        let flat: Vec<Wire> = outputs.iter().flatten().copied().collect();
        let n = flat.len();
        let tail_ok = n <= self.gates.len()
            && self.gates[self.gates.len() - n..].iter().zip(&flat).all(|(g, &w)| g.out == w);
        if !tail_ok {
            for w in flat {
                self.xor(w, Wire::ZERO);
            }
        }
        let widths = outputs.iter().map(Vec::len).collect();
        Circuit::new(self.next as usize, self.inputs, widths, self.gates, self.params)
            .expect("builder produces well-formed circuits")
    }
}

pub fn zero_extend(bits: &[Wire], width: usize) -> Vec<Wire> {
    let mut out = bits.to_vec();
    if out.len() < width {
        out.resize(width, Wire::ZERO);
    }
    out
}

pub fn sign_extend(bits: &[Wire], width: usize) -> Vec<Wire> {
    let sign = *bits.last().expect("empty operand");
    let mut out = bits.to_vec();
    if out.len() < width {
        out.resize(width, sign);
    }
    out
}
