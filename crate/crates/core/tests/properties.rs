use privnav::circuit::{build_comparator_geq, build_range_check, range_check_inputs};
use privnav::fixed::{encode, in_bounds_plain, trajectory_plain, Bounds, FixedPoint, FpParams};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn params() -> impl Strategy<Value = FpParams> {
    (8u32..=128).prop_flat_map(|k| (Just(k), 0..=k - 3)).prop_map(|(k, f)| FpParams::new(k, f).unwrap())
}

proptest! {
    #[test]
    fn bits_round_trip(p in params(), bits in any::<u128>()) {
        let x = FixedPoint::from_bits(bits & p.mask(), p);
        prop_assert_eq!(FixedPoint::from_bits(x.bits(), p), x);
        prop_assert_eq!(FixedPoint::from_raw(x.raw(), p).unwrap(), x);
        prop_assert_eq!(FixedPoint::from_bits_lsb(&x.to_bits_lsb(), p), x);
    }

    #[test]
    fn encode_floors(p in params(), frac in -0.999f64..0.999) {
        let limit = 2f64.powi((p.k() - p.f() - 1) as i32);
        let v = frac * limit;
        let x = encode(v, p).unwrap();
        let scaled = v * 2f64.powi(p.f() as i32);
        // f64 loses precision past 2^53; only check where it is exact enough.
        prop_assume!(scaled.abs() < 2f64.powi(50));
        prop_assert_eq!(x.raw(), scaled.floor() as i128);
    }

    #[test]
    fn comparator_matches_signed_order(a in any::<i16>(), b in any::<i16>()) {
        let c = build_comparator_geq(16);
        let bits = |v: i16| (0..16).map(|i| (v as u16 >> i) & 1 == 1).collect::<Vec<_>>();
        let out = c.evaluate(&[bits(a), bits(b)]).unwrap();
        prop_assert_eq!(out[0][0], a >= b);
    }

    #[test]
    fn range_circuit_matches_oracle(raw in prop::array::uniform9(any::<i32>())) {
        let p = FpParams::for_bitwidth(32).unwrap();
        let fp = |v: i32| FixedPoint::from_raw(v as i128, p).unwrap();
        let loc = [fp(raw[0]), fp(raw[1]), fp(raw[2])];
        let pair = |a: i32, b: i32| (fp(a.min(b)), fp(a.max(b)));
        let bounds = Bounds::new(pair(raw[3], raw[4]), pair(raw[5], raw[6]), pair(raw[7], raw[8])).unwrap();
        let out = build_range_check(p).evaluate(&range_check_inputs(&loc, &bounds)).unwrap();
        prop_assert_eq!(out[0][0], in_bounds_plain(&loc, &bounds).unwrap());
    }
}

/// Largest observed deviation of the squared norm from 1 over random non-degenerate inputs.
fn worst_norm_error(p: FpParams, n: usize, seed: u64) -> f64 {
    let mut rng = StdRng::seed_from_u64(seed);
    let one = 2f64.powi(2 * p.f() as i32);
    let mut worst = 0f64;
    let mut done = 0;
    while done < n {
        let pt = |rng: &mut StdRng| [0; 3].map(|_| FixedPoint::from_bits(rng.gen::<u128>() & p.mask(), p));
        let (s, a) = (pt(&mut rng), pt(&mut rng));
        let Ok(u) = trajectory_plain(&s, &a) else { continue };
        let norm: f64 = u.iter().map(|c| (c.raw() as f64).powi(2)).sum();
        worst = worst.max((norm / one - 1.0).abs());
        done += 1;
    }
    worst
}

#[test]
fn unit_norm_within_tolerance() {
    for (k, f) in [(64, 20), (32, 16), (128, 20), (100, 20)] {
        let p = FpParams::new(k, f).unwrap();
        let tol = 2f64.powi(-(f as i32) + 3);
        let worst = worst_norm_error(p, 10_000, k as u64);
        assert!(worst <= tol, "k={k} f={f}: worst {worst:e} > {tol:e}");
    }
}

#[test]
fn short_vectors_are_outside_the_norm_bound() {
    // The magnitude is an integer square root of raw values, so very short difference vectors
    // give a coarse m. (1, 1, 0) in raw units has m = 1 and u = (1.0, 1.0, 0), norm 2.
    let p = FpParams::new(64, 20).unwrap();
    let r = |x: i128| FixedPoint::from_raw(x, p).unwrap();
    let u = trajectory_plain(&[r(0); 3], &[r(1), r(1), r(0)]).unwrap();
    assert_eq!(u.map(|c| c.raw()), [1 << 20, 1 << 20, 0]);
}
