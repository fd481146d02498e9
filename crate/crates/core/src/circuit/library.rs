//! Ready-made circuits: arithmetic fragments and the two application circuits.

use super::builder::{zero_extend, Builder};
use super::{Circuit, InputOwner, Wire};
use crate::fixed::{Bounds, FixedPoint, FpParams};

fn two_operand(k: usize, body: impl FnOnce(&mut Builder, &[Wire], &[Wire]) -> Vec<Wire>) -> Circuit {
    let mut b = Builder::new();
    let x = b.input(InputOwner::Party1, k);
    let y = b.input(InputOwner::Party2, k);
    let out = body(&mut b, &x, &y);
    b.finish(&[out])
}

/// `a + b` on `k`-bit two's-complement operands, exact `k + 1`-bit result.
pub fn build_adder(k: usize) -> Circuit {
    two_operand(k, |b, x, y| b.add_signed(x, y))
}

/// `a - b` on `k`-bit two's-complement operands, exact `k + 1`-bit result.
pub fn build_subtractor(k: usize) -> Circuit {
    two_operand(k, |b, x, y| b.sub_signed(x, y))
}

/// Signed `a >= b`, one output bit.
pub fn build_comparator_geq(k: usize) -> Circuit {
    two_operand(k, |b, x, y| vec![b.geq_signed(x, y)])
}

/// Unsigned `k x k -> 2k` product.
pub fn build_multiplier(k: usize) -> Circuit {
    two_operand(k, |b, x, y| b.mul_unsigned(x, y))
}

/// Unsigned `k -> 2k` square.
pub fn build_squarer(k: usize) -> Circuit {
    let mut b = Builder::new();
    let x = b.input(InputOwner::Party1, k);
    let out = b.square_unsigned(&x);
    b.finish(&[out])
}

/// `floor(sqrt(n))` of an unsigned `k`-bit radicand, `ceil(k / 2)` result bits.
pub fn build_isqrt(k: usize) -> Circuit {
    let mut b = Builder::new();
    let x = b.input(InputOwner::Party1, k);
    let out = b.isqrt(&x);
    b.finish(&[out])
}

/// Unsigned `num / den` with a `kn`-bit quotient; zero divisor gives zero.
pub fn build_divider(kn: usize, kd: usize) -> Circuit {
    let mut b = Builder::new();
    let n = b.input(InputOwner::Party1, kn);
    let d = b.input(InputOwner::Party2, kd);
    let out = b.div_unsigned(&n, &d, kn);
    b.finish(&[out])
}

/// The trajectory unit vector circuit, bit-exact with [`crate::fixed::trajectory_plain`].
///
/// Inputs: `x_s, y_s, z_s` from [`InputOwner::Party1`], then `x_a, y_a, z_a` from
/// [`InputOwner::Party2`], each `k` bits. Outputs: `u_x, u_y, u_z`, each `k` bits. Coinciding
/// positions produce the zero vector.
pub fn build_trajectory(params: FpParams) -> Circuit {
    let k = params.k() as usize;
    let f = params.f() as usize;
    let mut b = Builder::with_params(params);
    let sat: Vec<Vec<Wire>> = (0..3).map(|_| b.input(InputOwner::Party1, k)).collect();
    let air: Vec<Vec<Wire>> = (0..3).map(|_| b.input(InputOwner::Party2, k)).collect();

    let mut mags = Vec::with_capacity(3);
    let mut signs = Vec::with_capacity(3);
    let mut squares = Vec::with_capacity(3);
    for (s, a) in sat.iter().zip(&air) {
        let v = b.sub_signed(a, s); // k + 1 bits
        let (mag, sign) = b.abs(&v);
        squares.push(b.square_unsigned(&mag)); // 2k + 2 bits
        mags.push(mag);
        signs.push(sign);
    }
    let partial = b.add_unsigned(&squares[0], &squares[1]); // 2k + 3 bits
    let norm_sq = b.add_unsigned(&partial, &squares[2]); // 2k + 4 bits
    let magnitude = b.isqrt(&norm_sq); // k + 2 bits

    let outputs: Vec<Vec<Wire>> = mags
        .iter()
        .zip(&signs)
        .map(|(mag, &sign)| {
            let mut num = vec![Wire::ZERO; f];
            num.extend_from_slice(mag); // |v| * 2^f, k + 1 + f bits
            // |v_i| <= m, so the quotient is at most 2^f and fits in f + 1 bits.
            let q = b.div_unsigned(&num, &magnitude, f + 1);
            let q = zero_extend(&q, k);
            b.negate_if(&q, sign)
        })
        .collect();
    b.finish(&outputs)
}

/// Circuit inputs for [`build_trajectory`].
pub fn trajectory_inputs(sat: &[FixedPoint; 3], air: &[FixedPoint; 3]) -> Vec<Vec<bool>> {
    sat.iter().chain(air.iter()).map(FixedPoint::to_bits_lsb).collect()
}

/// Decodes the three output groups of [`build_trajectory`].
pub fn trajectory_output(outputs: &[Vec<bool>], params: FpParams) -> [FixedPoint; 3] {
    [0, 1, 2].map(|i| FixedPoint::from_bits_lsb(&outputs[i], params))
}

/// The location range check: one output bit, set iff the witness location lies in the bounds.
///
/// Inputs: `x_a, y_a, z_a` as [`InputOwner::Witness`], then `x_min, x_max, y_min, y_max,
/// z_min, z_max` as [`InputOwner::Public`]. Six signed comparators joined by five ANDs.
pub fn build_range_check(params: FpParams) -> Circuit {
    let k = params.k() as usize;
    let mut b = Builder::with_params(params);
    let loc: Vec<Vec<Wire>> = (0..3).map(|_| b.input(InputOwner::Witness, k)).collect();
    let bounds: Vec<Vec<Wire>> = (0..6).map(|_| b.input(InputOwner::Public, k)).collect();
    let axis_ok: Vec<Wire> = (0..3)
        .map(|axis| {
            let above_min = b.geq_signed(&loc[axis], &bounds[2 * axis]);
            let below_max = b.geq_signed(&bounds[2 * axis + 1], &loc[axis]);
            b.and(above_min, below_max)
        })
        .collect();
    let xy = b.and(axis_ok[0], axis_ok[1]);
    let valid = b.and(xy, axis_ok[2]);
    b.finish(&[vec![valid]])
}

/// Bits of the six public bound groups, in circuit order.
pub fn range_check_public_bits(bounds: &Bounds) -> Vec<Vec<bool>> {
    bounds.as_array().iter().map(FixedPoint::to_bits_lsb).collect()
}

/// Full input assignment for [`build_range_check`].
pub fn range_check_inputs(loc: &[FixedPoint; 3], bounds: &Bounds) -> Vec<Vec<bool>> {
    let mut v: Vec<Vec<bool>> = loc.iter().map(FixedPoint::to_bits_lsb).collect();
    v.extend(range_check_public_bits(bounds));
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{bits_to_u128, optimize, u128_to_bits};
    use crate::fixed::{encode, in_bounds_plain, isqrt_u128, trajectory_plain};

    fn signed(bits: &[bool]) -> i128 {
        let v = bits_to_u128(bits) as i128;
        let n = bits.len();
        if bits[n - 1] {
            v - (1i128 << n)
        } else {
            v
        }
    }

    fn eval2(c: &Circuit, k: usize, a: u128, b: u128) -> Vec<bool> {
        c.evaluate(&[u128_to_bits(a, k), u128_to_bits(b, k)]).unwrap().remove(0)
    }

    fn sx(v: u128, k: usize) -> i128 {
        signed(&u128_to_bits(v, k))
    }

    #[test]
    fn subtractor_examples() {
        let c = build_subtractor(4);
        let out = eval2(&c, 4, 3, 5);
        assert_eq!(out, vec![false, true, true, true, true]); // -2 as 11110
        assert_eq!(signed(&eval2(&c, 4, 0, 0)), 0);
    }

    #[test]
    fn adder_subtractor_exhaustive() {
        for k in 1..=6usize {
            let add = build_adder(k);
            let sub = build_subtractor(k);
            for a in 0..(1u128 << k) {
                for b in 0..(1u128 << k) {
                    let (x, y) = (sx(a, k), sx(b, k));
                    assert_eq!(signed(&eval2(&add, k, a, b)), x + y, "{x}+{y} k={k}");
                    assert_eq!(signed(&eval2(&sub, k, a, b)), x - y, "{x}-{y} k={k}");
                }
            }
        }
    }

    #[test]
    fn comparator_examples_and_exhaustive() {
        let c4 = build_comparator_geq(4);
        assert!(!eval2(&c4, 4, 0b1000, 0b0111)[0]); // -8 >= 7
        assert!(eval2(&c4, 4, 3, 3)[0]);
        for k in 1..=6usize {
            let c = build_comparator_geq(k);
            for a in 0..(1u128 << k) {
                for b in 0..(1u128 << k) {
                    assert_eq!(eval2(&c, k, a, b)[0], sx(a, k) >= sx(b, k));
                }
            }
        }
    }

    #[test]
    fn multiplier_and_squarer_exhaustive() {
        let m = build_multiplier(4);
        for a in 0..16u128 {
            assert_eq!(bits_to_u128(&eval2(&m, 4, a, 0)), 0);
            assert_eq!(bits_to_u128(&eval2(&m, 4, a, 1)), a);
            for b in 0..16u128 {
                assert_eq!(bits_to_u128(&eval2(&m, 4, a, b)), a * b);
            }
        }
        for k in 1..=8usize {
            let s = build_squarer(k);
            for a in 0..(1u128 << k) {
                let out = s.evaluate(&[u128_to_bits(a, k)]).unwrap().remove(0);
                assert_eq!(out.len(), 2 * k);
                assert_eq!(bits_to_u128(&out), a * a);
            }
        }
    }

    #[test]
    fn isqrt_exhaustive() {
        for k in 1..=10usize {
            let c = build_isqrt(k);
            for n in 0..(1u128 << k) {
                let out = c.evaluate(&[u128_to_bits(n, k)]).unwrap().remove(0);
                assert_eq!(out.len(), k.div_ceil(2));
                assert_eq!(bits_to_u128(&out), isqrt_u128(n), "k={k} n={n}");
            }
        }
    }

    #[test]
    fn divider_examples_and_exhaustive() {
        let c = build_divider(6, 6);
        assert_eq!(bits_to_u128(&eval2(&c, 6, 8, 3)), 2);
        assert_eq!(bits_to_u128(&eval2(&c, 6, 0, 7)), 0);
        assert_eq!(bits_to_u128(&eval2(&c, 6, 63, 0)), 0);
        for n in 0..64u128 {
            for d in 1..64u128 {
                assert_eq!(bits_to_u128(&eval2(&c, 6, n, d)), n / d);
            }
        }
    }

    #[test]
    fn bounded_quotient_division() {
        // num < den * 2^q for every pair used here
        let mut b = Builder::new();
        let n = b.input(InputOwner::Party1, 8);
        let d = b.input(InputOwner::Party2, 5);
        let out = b.div_unsigned(&n, &d, 4);
        let c = b.finish(&[out]);
        for den in 1..32u128 {
            for num in 0..(den * 16).min(256) {
                let got = c.evaluate(&[u128_to_bits(num, 8), u128_to_bits(den, 5)]).unwrap().remove(0);
                assert_eq!(bits_to_u128(&got), num / den);
            }
        }
    }

    fn fp(v: f64, params: FpParams) -> FixedPoint {
        encode(v, params).unwrap()
    }

    #[test]
    fn trajectory_axis_example() {
        let params = FpParams::new(16, 8).unwrap();
        let c = build_trajectory(params);
        let sat = [fp(0., params); 3];
        let air = [fp(0., params), fp(0., params), fp(5., params)];
        let out = c.evaluate(&trajectory_inputs(&sat, &air)).unwrap();
        assert_eq!(trajectory_output(&out, params).map(|u| u.raw()), [0, 0, 256]);
    }

    #[test]
    fn trajectory_degenerate_gives_zero() {
        let params = FpParams::new(16, 8).unwrap();
        let c = optimize(&build_trajectory(params));
        let p = [fp(1.5, params), fp(-2., params), fp(3., params)];
        let out = c.evaluate(&trajectory_inputs(&p, &p)).unwrap();
        assert_eq!(trajectory_output(&out, params).map(|u| u.raw()), [0, 0, 0]);
    }

    #[test]
    fn trajectory_matches_oracle_on_345() {
        let params = FpParams::new(32, 16).unwrap();
        let c = optimize(&build_trajectory(params));
        let sat = [fp(1., params), fp(1., params), fp(1., params)];
        let air = [fp(4., params), fp(5., params), fp(1., params)];
        let out = trajectory_output(&c.evaluate(&trajectory_inputs(&sat, &air)).unwrap(), params);
        assert_eq!(out, trajectory_plain(&sat, &air).unwrap());
        assert_eq!(out.map(|u| u.raw()), [39321, 52428, 0]);
    }

    #[test]
    fn trajectory_exhaustive_tiny_width() {
        // k = 8, f = 2: sweep one axis fully against a grid on the others.
        let params = FpParams::new(8, 2).unwrap();
        let c = optimize(&build_trajectory(params));
        let vals: Vec<FixedPoint> = (0..256u128).map(|b| FixedPoint::from_bits(b, params)).collect();
        for &xs in vals.iter().step_by(3) {
            for &xa in vals.iter().step_by(5) {
                for &ya in vals.iter().step_by(37) {
                    let sat = [xs, vals[7], vals[200]];
                    let air = [xa, ya, vals[128]];
                    let got = trajectory_output(&c.evaluate(&trajectory_inputs(&sat, &air)).unwrap(), params);
                    match trajectory_plain(&sat, &air) {
                        Ok(expect) => assert_eq!(got, expect),
                        Err(_) => assert_eq!(got.map(|u| u.raw()), [0, 0, 0]),
                    }
                }
            }
        }
    }

    #[test]
    fn range_check_examples_and_structure() {
        let params = FpParams::new(16, 4).unwrap();
        let c = build_range_check(params);
        let b = Bounds::cube(fp(0., params), fp(10., params)).unwrap();
        let run = |loc: [f64; 3]| {
            let loc = loc.map(|v| fp(v, params));
            c.evaluate(&range_check_inputs(&loc, &b)).unwrap()[0][0]
        };
        assert!(run([5., 5., 5.]));
        assert!(!run([5., 5., 11.]));
        assert!(run([10., 0., 10.]));
        assert!(!run([-0.0625, 5., 5.]));
        // six comparators of k ANDs each, plus five glue ANDs
        assert_eq!(c.stats().and_count, 6 * 16 + 5);
        assert_eq!(optimize(&c).stats().and_count, 6 * 16 + 5);
    }

    #[test]
    fn range_check_exhaustive_k8_axis() {
        let params = FpParams::new(8, 0).unwrap();
        let c = optimize(&build_range_check(params));
        let vals: Vec<FixedPoint> = (0..256u128).map(|b| FixedPoint::from_bits(b, params)).collect();
        let bounds = [
            Bounds::new((vals[250], vals[6]), (vals[0], vals[10]), (vals[128], vals[127])).unwrap(),
            Bounds::cube(vals[0], vals[0]).unwrap(),
            Bounds::cube(vals[128], vals[127]).unwrap(),
        ];
        let ys = [vals[0], vals[5], vals[11], vals[255]];
        let mut cases = Vec::new();
        for b in &bounds {
            for &x in &vals {
                for &y in &ys {
                    cases.push(range_check_inputs(&[x, y, x], b));
                }
            }
        }
        let outs = c.evaluate_batch(&cases, Default::default()).unwrap();
        let mut i = 0;
        for b in &bounds {
            for &x in &vals {
                for &y in &ys {
                    assert_eq!(outs[i][0][0], in_bounds_plain(&[x, y, x], b).unwrap());
                    i += 1;
                }
            }
        }
    }
}
