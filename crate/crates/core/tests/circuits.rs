use privnav::circuit::{
    bits_to_u128, build_range_check, build_trajectory, from_bristol, optimize, to_bristol, trajectory_inputs,
    trajectory_output, u128_to_bits,
};
use privnav::fixed::{trajectory_plain, FixedPoint, FpParams};
use privnav::par::Parallelism;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn random_point(p: FpParams, rng: &mut StdRng) -> [FixedPoint; 3] {
    [0; 3].map(|_| FixedPoint::from_bits(rng.gen::<u128>() & p.mask(), p))
}

// Pinned so optimizer or builder changes show up as a diff. Each row:
// k, optimized trajectory ANDs, trajectory AND depth, range-check ANDs, range-check depth.
const PINS: [(u32, usize, usize, usize, usize); 6] = [
    (8, 745, 144, 53, 11),
    (16, 2373, 408, 101, 19),
    (32, 8317, 1320, 197, 35),
    (64, 26169, 3876, 389, 67),
    (100, 55113, 7818, 605, 103),
    (128, 84793, 11780, 773, 131),
];

#[test]
fn and_counts_are_pinned() {
    let mut prev = 0;
    for (k, t_and, t_depth, r_and, r_depth) in PINS {
        let p = FpParams::for_bitwidth(k).unwrap();
        let raw = build_trajectory(p);
        let t = optimize(&raw).stats();
        let r = optimize(&build_range_check(p)).stats();
        assert_eq!((t.and_count, t.depth, r.and_count, r.depth), (t_and, t_depth, r_and, r_depth), "k={k}");
        assert!(t.and_count <= raw.stats().and_count);
        assert_eq!(r.and_count, 6 * k as usize + 5);
        // Superlinear growth in k.
        assert!(t.and_count as f64 / k as f64 > prev as f64);
        prev = t.and_count / k as usize;
    }
}

#[test]
fn optimizer_is_semantics_preserving_k16() {
    let p = FpParams::for_bitwidth(16).unwrap();
    let raw = build_trajectory(p);
    let opt = optimize(&raw);
    assert_eq!(raw.inputs(), opt.inputs());
    assert_eq!(raw.output_widths(), opt.output_widths());
    let mut rng = StdRng::seed_from_u64(16);
    let cases: Vec<Vec<Vec<bool>>> =
        (0..10_000).map(|_| trajectory_inputs(&random_point(p, &mut rng), &random_point(p, &mut rng))).collect();
    let a = raw.evaluate_batch(&cases, Parallelism::default()).unwrap();
    let b = opt.evaluate_batch(&cases, Parallelism::default()).unwrap();
    assert!(a == b);
}

#[test]
fn trajectory_matches_oracle_on_random_inputs() {
    for k in [16, 32, 64] {
        let p = FpParams::for_bitwidth(k).unwrap();
        let c = optimize(&build_trajectory(p));
        let mut rng = StdRng::seed_from_u64(k as u64);
        let pairs: Vec<_> = (0..1000).map(|_| (random_point(p, &mut rng), random_point(p, &mut rng))).collect();
        let cases: Vec<_> = pairs.iter().map(|(s, a)| trajectory_inputs(s, a)).collect();
        let outs = c.evaluate_batch(&cases, Parallelism::default()).unwrap();
        for ((s, a), out) in pairs.iter().zip(&outs) {
            let want = trajectory_plain(s, a).unwrap_or([FixedPoint::zero(p); 3]);
            assert_eq!(trajectory_output(out, p), want, "k={k}");
        }
    }
}

#[test]
fn trajectory_survives_bristol_round_trip() {
    let p = FpParams::for_bitwidth(16).unwrap();
    let c = optimize(&build_trajectory(p));
    let back = from_bristol(&to_bristol(&c)).unwrap();
    assert_eq!(back.gates(), c.gates());
    assert_eq!(to_bristol(&back), to_bristol(&c));
}

#[test]
fn bit_helpers_round_trip() {
    let mut rng = StdRng::seed_from_u64(1);
    for _ in 0..1000 {
        let v: u128 = rng.gen();
        assert_eq!(bits_to_u128(&u128_to_bits(v, 128)), v);
    }
}
