use std::thread;

use criterion::{criterion_group, criterion_main, BatchSize, BenchmarkId, Criterion};
use privnav::circuit::{build_trajectory, optimize, trajectory_inputs};
use privnav::fixed::{FixedPoint, FpParams};
use privnav::mac::{combine, Opening};
use privnav::net::mem_pair;
use privnav::ot::{cot_receive, cot_send};
use privnav::par::Parallelism;
use rand::rngs::StdRng;
use rand::{thread_rng, Rng, SeedableRng};

const MODES: [(&str, Parallelism); 2] = [("sequential", Parallelism::Sequential), ("parallel", Parallelism::Parallel)];

fn evaluate_batch(c: &mut Criterion) {
    let p = FpParams::for_bitwidth(32).unwrap();
    let circuit = optimize(&build_trajectory(p));
    let mut rng = StdRng::seed_from_u64(7);
    let mut pt = || [0; 3].map(|_| FixedPoint::from_bits(rng.gen::<u128>() & p.mask(), p));
    let cases: Vec<_> = (0..1024).map(|_| trajectory_inputs(&pt(), &pt())).collect();
    let mut g = c.benchmark_group("evaluate_batch_k32_x1024");
    for (name, par) in MODES {
        g.bench_function(name, |b| b.iter(|| circuit.evaluate_batch(&cases, par).unwrap()));
    }
    g.finish();
}

fn mac_check(c: &mut Criterion) {
    let mut rng = thread_rng();
    let delta: u128 = rng.gen();
    let openings: Vec<Opening> = (0..100_000)
        .map(|_| {
            let (bit, key): (bool, u128) = rng.gen();
            Opening { bit, key, tag: key ^ if bit { delta } else { 0 } }
        })
        .collect();
    let mut g = c.benchmark_group("mac_combine_x100k");
    for (name, par) in MODES {
        g.bench_function(name, |b| b.iter(|| combine(&openings, delta, [3; 32], par)));
    }
    g.finish();
}

fn correlated_ot(c: &mut Criterion) {
    let mut g = c.benchmark_group("cot_batch");
    g.sample_size(10);
    for (name, par) in MODES {
        g.bench_with_input(BenchmarkId::new(name, 256), &256usize, |b, &n| {
            b.iter_batched(
                || (0..n).map(|_| thread_rng().gen()).collect::<Vec<bool>>(),
                |choices| {
                    let (mut s, mut r) = mem_pair();
                    let h = thread::spawn(move || cot_send(&mut s, 1, 5, n, &mut thread_rng(), par).unwrap());
                    let tags = cot_receive(&mut r, 1, &choices, &mut thread_rng(), par).unwrap();
                    h.join().unwrap();
                    tags
                },
                BatchSize::SmallInput,
            )
        });
    }
    g.finish();
}

criterion_group!(benches, evaluate_batch, mac_check, correlated_ot);
criterion_main!(benches);
