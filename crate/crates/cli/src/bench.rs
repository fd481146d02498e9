//! Loopback benchmark harness: both parties run as threads in this process and talk over a
//! TCP socket bound to 127.0.0.1. A round's time is dealing its preprocessing plus the online
//! protocol, since a fleet round fetches fresh preprocessing every time. Byte counts cover the
//! online protocol only.

use std::io::{self, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::{Arc, Barrier};
use std::thread;
use std::time::{Duration, Instant};

use privnav::circuit::trajectory_inputs;
use privnav::fixed::{Bounds, FixedPoint, FpParams};
use privnav::net::{Channel, TcpChannel};
use privnav::par::Parallelism;
use privnav::smpc::{deal, evaluate, EngineMode, EvalOptions, Party};
use privnav::zkrange::{deal_zk, prove_range, verify_range, ProverOptions, ProverTriples, Verdict, VerifierTriples};
use privnav_fleet::plans_for;
use rand::rngs::StdRng;
use rand::{thread_rng, Rng, SeedableRng};
use serde::{Serialize, Serializer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, clap::ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Tracking,
    Proof,
}

/// One row of the benchmark table. Times are wall clock for a complete round.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRecord {
    pub task: Task,
    /// `semi` or `malicious` for tracking rounds, `zk` for proofs.
    pub mode: String,
    pub k: u32,
    #[serde(serialize_with = "millis")]
    pub median_ms: f64,
    #[serde(serialize_with = "millis")]
    pub p95_ms: f64,
    /// Bytes party 1 (satellite) put on the wire, frame headers included.
    pub bytes_p1: u64,
    /// Bytes party 2 (aircraft) put on the wire.
    pub bytes_p2: u64,
    pub and_count: usize,
    /// Every repetition sent exactly the same byte counts.
    #[serde(skip)]
    pub bytes_stable: bool,
    #[serde(skip)]
    pub reps: usize,
}

fn millis<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&format!("{v:.3}"))
}

pub const CSV_HEADER: &str = "task,mode,k,median_ms,p95_ms,bytes_p1,bytes_p2,and_count";

#[derive(Debug, Clone)]
pub struct BenchSpec {
    pub sweep: Vec<u32>,
    pub tasks: Vec<Task>,
    pub modes: Vec<EngineMode>,
    pub reps: usize,
    pub frac: Option<u32>,
    pub seed: Option<u64>,
}

/// The measurements of one round.
#[derive(Debug, Clone, Copy)]
struct Sample {
    elapsed: Duration,
    bytes_p1: u64,
    bytes_p2: u64,
}

impl Sample {
    fn plus(self, offline: Duration) -> Self {
        Self { elapsed: self.elapsed + offline, ..self }
    }
}

/// Runs every configuration of `spec` in order, calling `progress` after each record.
pub fn run(spec: &BenchSpec, mut progress: impl FnMut(&BenchRecord)) -> io::Result<Vec<BenchRecord>> {
    if spec.reps == 0 {
        return Err(io::Error::new(io::ErrorKind::InvalidInput, "--reps must be at least 1"));
    }
    let mut rng = match spec.seed {
        Some(s) => StdRng::seed_from_u64(s),
        None => StdRng::from_rng(thread_rng()).expect("rng"),
    };
    let mut out = Vec::new();
    let mut tasks = spec.tasks.clone();
    tasks.sort();
    tasks.dedup();
    for task in tasks {
        let modes: Vec<Option<EngineMode>> = match task {
            Task::Tracking => spec.modes.iter().copied().map(Some).collect(),
            Task::Proof => vec![None],
        };
        for mode in modes {
            for &k in &spec.sweep {
                let params = match spec.frac {
                    Some(f) => FpParams::new(k, f),
                    None => FpParams::for_bitwidth(k),
                }
                .map_err(|e| io::Error::new(io::ErrorKind::InvalidInput, e.to_string()))?;
                let rec = bench_one(task, mode, params, spec.reps, &mut rng)?;
                progress(&rec);
                out.push(rec);
            }
        }
    }
    Ok(out)
}

fn bench_one(task: Task, mode: Option<EngineMode>, params: FpParams, reps: usize, rng: &mut StdRng) -> io::Result<BenchRecord> {
    let plans = plans_for(params);
    let and_count = match task {
        Task::Tracking => plans.trajectory.and_count(),
        Task::Proof => plans.range.and_count(),
    };
    let mut samples = Vec::with_capacity(reps);
    for _ in 0..reps {
        let s = match task {
            Task::Tracking => tracking_round(params, mode.unwrap_or(EngineMode::SemiHonest), rng)?,
            Task::Proof => proof_round(params, rng)?,
        };
        samples.push(s);
    }
    let bytes_stable = samples.windows(2).all(|w| (w[0].bytes_p1, w[0].bytes_p2) == (w[1].bytes_p1, w[1].bytes_p2));
    let mut ms: Vec<f64> = samples.iter().map(|s| s.elapsed.as_secs_f64() * 1e3).collect();
    ms.sort_by(f64::total_cmp);
    Ok(BenchRecord {
        task,
        mode: mode.map_or("zk", EngineMode::as_str).to_string(),
        k: params.k(),
        median_ms: median(&ms),
        p95_ms: nearest_rank(&ms, 0.95),
        bytes_p1: samples[0].bytes_p1,
        bytes_p2: samples[0].bytes_p2,
        and_count,
        bytes_stable,
        reps,
    })
}

/// Median of sorted values.
pub fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

/// Nearest-rank percentile of sorted values.
pub fn nearest_rank(sorted: &[f64], q: f64) -> f64 {
    let rank = (q * sorted.len() as f64).ceil().max(1.0) as usize;
    sorted[rank.min(sorted.len()) - 1]
}

fn random_point(params: FpParams, rng: &mut StdRng) -> [FixedPoint; 3] {
    [(); 3].map(|_| FixedPoint::from_raw(rng.gen_range(params.min_raw()..=params.max_raw()), params).unwrap())
}

/// Connects a loopback pair and runs `p1` and `p2` on it once both ends are up. The clock
/// covers the protocol only.
fn loopback<A, B>(p1: A, p2: B) -> io::Result<Sample>
where
    A: FnOnce(&mut TcpChannel) -> Result<(), String>,
    B: FnOnce(&mut TcpChannel) -> Result<(), String> + Send + 'static,
{
    let listener = TcpListener::bind("127.0.0.1:0")?;
    let addr = listener.local_addr()?;
    let ready = Arc::new(Barrier::new(2));
    let r2 = ready.clone();
    let peer = thread::spawn(move || -> Result<u64, String> {
        let mut ch = TcpChannel::new(TcpStream::connect(addr).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        r2.wait();
        p2(&mut ch)?;
        Ok(ch.bytes_sent())
    });
    let (stream, _) = listener.accept()?;
    let mut ch = TcpChannel::new(stream)?;
    ready.wait();
    let start = Instant::now();
    let mine = p1(&mut ch);
    let theirs = peer.join().map_err(|_| io::Error::other("peer thread panicked"))?;
    let elapsed = start.elapsed();
    mine.map_err(io::Error::other)?;
    let bytes_p2 = theirs.map_err(io::Error::other)?;
    Ok(Sample { elapsed, bytes_p1: ch.bytes_sent(), bytes_p2 })
}

fn tracking_round(params: FpParams, mode: EngineMode, rng: &mut StdRng) -> io::Result<Sample> {
    let plans = plans_for(params);
    let n = plans.trajectory.and_count();
    let masks = match mode {
        EngineMode::SemiHonest => 0,
        EngineMode::Malicious => plans.trajectory.circuit().n_input_bits(),
    };
    let offline = Instant::now();
    let (pre1, pre2) = deal(mode, n, masks, rng);
    let offline = offline.elapsed();
    let bits = trajectory_inputs(&random_point(params, rng), &random_point(params, rng));
    let mut in1: Vec<Option<Vec<bool>>> = bits[..3].iter().cloned().map(Some).collect();
    in1.extend([None, None, None]);
    let mut in2: Vec<Option<Vec<bool>>> = vec![None, None, None];
    in2.extend(bits[3..].iter().cloned().map(Some));
    let opts = EvalOptions { par: Parallelism::default(), ..EvalOptions::new(mode) };
    let (o2, p2) = (opts.clone(), plans.clone());
    loopback(
        |ch| {
            let r = evaluate(ch, 1, Party::Party1, &plans.trajectory, &in1, pre1, &opts, &mut thread_rng()).map_err(|e| e.to_string())?;
            r.outputs.map(|_| ()).ok_or_else(|| "no output".to_string())
        },
        move |ch| {
            evaluate(ch, 1, Party::Party2, &p2.trajectory, &in2, pre2, &o2, &mut thread_rng()).map(|_| ()).map_err(|e| e.to_string())
        },
    )
    .map(|s| s.plus(offline))
}

fn proof_round(params: FpParams, rng: &mut StdRng) -> io::Result<Sample> {
    let plans = plans_for(params);
    let offline = Instant::now();
    let (pt, vm) = deal_zk(plans.range.and_count(), rng);
    let offline = offline.elapsed();
    let half = |r: i128| FixedPoint::from_raw(r / 2, params).unwrap();
    let bounds = Bounds::cube(half(params.min_raw()), half(params.max_raw())).unwrap();
    let loc = [(); 3].map(|_| FixedPoint::from_raw(rng.gen_range(params.min_raw() / 2..=params.max_raw() / 2), params).unwrap());
    let p2 = plans.clone();
    loopback(
        |ch| {
            let out = verify_range(ch, 1, &plans.range, &bounds, VerifierTriples::Dealt(vm), Parallelism::default(), &mut thread_rng())
                .map_err(|e| e.to_string())?;
            match out.verdict {
                Verdict::Accepted => Ok(()),
                v => Err(format!("honest proof was {}", v.as_str())),
            }
        },
        move |ch| {
            let opts = ProverOptions { par: Parallelism::default(), ..Default::default() };
            prove_range(ch, 1, &p2.range, &loc, &bounds, ProverTriples::Dealt(pt), &opts, &mut thread_rng())
                .map(|_| ())
                .map_err(|e| e.to_string())
        },
    )
    .map(|s| s.plus(offline))
}

pub fn write_csv<W: Write>(records: &[BenchRecord], out: W) -> io::Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(true).from_writer(out);
    for r in records {
        w.serialize(r).map_err(io::Error::other)?;
    }
    if records.is_empty() {
        let mut inner = w.into_inner().map_err(|e| io::Error::other(e.to_string()))?;
        writeln!(inner, "{CSV_HEADER}")?;
        return Ok(());
    }
    w.flush()
}

pub fn write_json<W: Write>(records: &[BenchRecord], mut out: W) -> io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        writeln!(out)?;
    }
    Ok(())
}

pub fn write_table<W: Write>(records: &[BenchRecord], mut out: W) -> io::Result<()> {
    writeln!(out, "{:<9} {:<9} {:>4} {:>11} {:>11} {:>12} {:>12} {:>8}", "task", "mode", "k", "median_ms", "p95_ms", "bytes_p1", "bytes_p2", "ands")?;
    for r in records {
        writeln!(
            out,
            "{:<9} {:<9} {:>4} {:>11.3} {:>11.3} {:>12} {:>12} {:>8}{}",
            match r.task {
                Task::Tracking => "tracking",
                Task::Proof => "proof",
            },
            r.mode,
            r.k,
            r.median_ms,
            r.p95_ms,
            r.bytes_p1,
            r.bytes_p2,
            r.and_count,
            if r.bytes_stable { "" } else { "  (bytes varied)" }
        )?;
    }
    Ok(())
}
