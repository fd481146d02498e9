use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use privnav::circuit::optimize;
use privnav::smpc::EngineMode;
use privnav_cli::bench::{self, BenchSpec, Task};
use privnav_cli::circuit_cmd::{self as cc, CmdError, Kind};
use privnav_cli::nodes::{self, NodeArgs, EXIT_CONFIG};
use privnav_cli::selftest;

#[derive(Parser)]
#[command(name = "privnav", version, about = "Private aircraft tracking and location proofs")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a satellite: accepts aircraft, runs tracking and proof rounds.
    Satellite(NodeArgs),
    /// Run an aircraft that replays a flight path.
    Aircraft(NodeArgs),
    /// Run the preprocessing dealer.
    Dealer(NodeArgs),
    /// Build, inspect and evaluate circuits.
    Circuit {
        #[command(subcommand)]
        action: CircuitCmd,
    },
    /// Loopback benchmark sweep.
    Bench(BenchArgs),
    /// Exhaustive small-width checks and tamper suites.
    Selftest,
}

#[derive(clap::Args)]
struct CircuitArgs {
    #[arg(long, value_enum)]
    kind: Option<Kind>,
    #[arg(long, default_value_t = 64)]
    bitwidth: u32,
    #[arg(long)]
    frac: Option<u32>,
    /// Read a Bristol file instead of building `--kind`.
    #[arg(long, conflicts_with = "kind")]
    input: Option<PathBuf>,
}

#[derive(Subcommand)]
enum CircuitCmd {
    /// Emit the unoptimized circuit as Bristol.
    Build {
        #[command(flatten)]
        c: CircuitArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print gate counts and AND depth.
    Stats {
        #[command(flatten)]
        c: CircuitArgs,
    },
    /// Optimize and emit as Bristol.
    Optimize {
        #[command(flatten)]
        c: CircuitArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate in the clear and compare with the reference arithmetic.
    Eval {
        #[arg(long, value_enum)]
        kind: Kind,
        #[arg(long, default_value_t = 64)]
        bitwidth: u32,
        #[arg(long)]
        frac: Option<u32>,
        /// Satellite position x,y,z (trajectory).
        #[arg(long, allow_hyphen_values = true)]
        sat: Option<String>,
        /// Aircraft position x,y,z (trajectory).
        #[arg(long, allow_hyphen_values = true)]
        air: Option<String>,
        /// Location x,y,z (range).
        #[arg(long, allow_hyphen_values = true)]
        loc: Option<String>,
        /// x_min,x_max,y_min,y_max,z_min,z_max (range).
        #[arg(long, allow_hyphen_values = true)]
        bounds: Option<String>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Semi,
    Malicious,
}

#[derive(clap::Args)]
struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_values_t = [8, 16, 32, 64, 100, 128])]
    sweep: Vec<u32>,
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [Task::Tracking])]
    task: Vec<Task>,
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [ModeArg::Semi])]
    mode: Vec<ModeArg>,
    #[arg(long, default_value_t = 10)]
    reps: usize,
    #[arg(long)]
    frac: Option<u32>,
    /// Seed for the generated inputs.
    #[arg(long)]
    seed: Option<u64>,
    /// Print one JSON object per record instead of the table.
    #[arg(long)]
    json: bool,
    /// Also write the records as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

fn circuit_source(c: &CircuitArgs) -> Result<privnav::circuit::Circuit, CmdError> {
    match (&c.input, c.kind) {
        (Some(p), _) => cc::load(p),
        (None, Some(kind)) => Ok(cc::build(kind, cc::params(c.bitwidth, c.frac)?)),
        (None, None) => Err(CmdError::Usage("give --kind trajectory|range or --input FILE".into())),
    }
}

fn emit(c: &privnav::circuit::Circuit, out: Option<&PathBuf>, label: &str) -> Result<(), CmdError> {
    match cc::emit(c, out.map(|p| p.as_path()))? {
        Some(text) => {
            io::stdout().write_all(text.as_bytes())?;
            eprintln!("{}", cc::stats_line(label, c));
        }
        None => println!("{}", cc::stats_line(label, c)),
    }
    Ok(())
}

fn circuit(action: CircuitCmd) -> Result<(), CmdError> {
    match action {
        CircuitCmd::Build { c, out } => emit(&circuit_source(&c)?, out.as_ref(), "built"),
        CircuitCmd::Optimize { c, out } => {
            let raw = circuit_source(&c)?;
            let opt = optimize(&raw);
            let line = cc::stats_line("input", &raw);
            if out.is_some() {
                println!("{line}");
            } else {
                eprintln!("{line}");
            }
            emit(&opt, out.as_ref(), "optimized")
        }
        CircuitCmd::Stats { c } => {
            let raw = circuit_source(&c)?;
            println!("{}", cc::stats_line("raw", &raw));
            println!("{}", cc::stats_line("optimized", &optimize(&raw)));
            Ok(())
        }
        CircuitCmd::Eval { kind, bitwidth, frac, sat, air, loc, bounds } => {
            let params = cc::params(bitwidth, frac)?;
            let missing = |f: &str| CmdError::Usage(format!("{f} is required for this kind"));
            let line = match kind {
                Kind::Trajectory => cc::eval_trajectory(params, &sat.ok_or_else(|| missing("--sat"))?, &air.ok_or_else(|| missing("--air"))?)?,
                Kind::Range => cc::eval_range(params, &loc.ok_or_else(|| missing("--loc"))?, &bounds.ok_or_else(|| missing("--bounds"))?)?,
            };
            println!("{line}");
            println!("reference: match");
            Ok(())
        }
    }
}

fn run_bench(a: BenchArgs) -> i32 {
    let spec = BenchSpec {
        sweep: a.sweep,
        tasks: a.task,
        modes: a
            .mode
            .iter()
            .map(|m| match m {
                ModeArg::Semi => EngineMode::SemiHonest,
                ModeArg::Malicious => EngineMode::Malicious,
            })
            .collect(),
        reps: a.reps,
        frac: a.frac,
        seed: a.seed,
    };
    let records = match bench::run(&spec, |r| eprintln!("{:?} {} k={} median {:.3} ms", r.task, r.mode, r.k, r.median_ms)) {
        Ok(r) => r,
        Err(e) if e.kind() == io::ErrorKind::InvalidInput => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
        Err(e) => {
            eprintln!("error: {e}");
            return nodes::EXIT_PROTOCOL;
        }
    };
    let out = io::stdout().lock();
    let shown = if a.json { bench::write_json(&records, out) } else { bench::write_table(&records, out) };
    let written = a.csv.map_or(Ok(()), |p| std::fs::File::create(p).and_then(|f| bench::write_csv(&records, f)));
    match shown.and(written) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn run_selftest() -> i32 {
    let results = selftest::run_all();
    for r in &results {
        let tag = if r.passed() { "PASS" } else { "FAIL" };
        print!("{tag} {}: {} cases, {} failures", r.name, r.cases, r.failures);
        match &r.first_failure {
            Some(f) => println!(" (first: {f})"),
            None => println!(),
        }
    }
    let failed = results.iter().filter(|r| !r.passed()).count();
    println!("{} suites, {failed} failed", results.len());
    i32::from(failed > 0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let stop = Arc::new(AtomicBool::new(false));
    let s = stop.clone();
    // Nodes shut down cleanly on Ctrl-C or SIGTERM.
    let _ = ctrlc::set_handler(move || s.store(true, Ordering::SeqCst));
    let code = match cli.cmd {
        Cmd::Satellite(a) => nodes::satellite(&a, &stop),
        Cmd::Aircraft(a) => nodes::aircraft(&a, &stop),
        Cmd::Dealer(a) => nodes::dealer(&a, &stop),
        Cmd::Circuit { action } => match circuit(action) {
            Ok(()) => 0,
            Err(e @ CmdError::Mismatch(_)) => {
                eprintln!("error: {e}");
                1
            }
            Err(e) => {
                eprintln!("error: {e}");
                EXIT_CONFIG
            }
        },
        Cmd::Bench(a) => run_bench(a),
        Cmd::Selftest => run_selftest(),
    };
    ExitCode::from(code as u8)
}
