//! Long-running node commands. Each returns the process exit code.

use std::net::TcpListener;
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use privnav::fixed::parse_flight_path;
use privnav::net::NetError;
use privnav_fleet::{
    codes, dealer_serve, satellite_serve, spawn_aircraft, AircraftConfig, AircraftOptions, DealerHub, DealerSpec, Ending, FleetError,
    NodeConfig, SatelliteConfig,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_PROTOCOL: i32 = 3;

/// Flags shared by the node commands. Anything given here overrides the config file.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct NodeArgs {
    /// Address to accept connections on.
    #[arg(long)]
    pub listen: Option<String>,
    /// Satellite address (aircraft only).
    #[arg(long)]
    pub connect: Option<String>,
    /// key = value configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Flight path CSV with `t_ms,x,y,z` rows (aircraft only).
    #[arg(long)]
    pub path: Option<PathBuf>,
    /// semi or malicious.
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub bitwidth: Option<u32>,
    #[arg(long)]
    pub frac: Option<u32>,
    /// Aircraft identifier.
    #[arg(long)]
    pub id: Option<String>,
    /// Address for the satellite's status endpoint.
    #[arg(long)]
    pub status: Option<String>,
    /// Dealer address.
    #[arg(long)]
    pub dealer: Option<String>,
    /// Stop after this many seconds instead of waiting for a signal.
    #[arg(long)]
    pub duration: Option<f64>,
}

impl NodeArgs {
    pub fn load(&self) -> Result<NodeConfig, FleetError> {
        let mut over: Vec<(&str, String)> = Vec::new();
        let mut put = |k: &'static str, v: Option<String>| {
            if let Some(v) = v {
                over.push((k, v));
            }
        };
        put("bitwidth", self.bitwidth.map(|v| v.to_string()));
        put("frac_bits", self.frac.map(|v| v.to_string()));
        put("mode", self.mode.clone());
        put("listen", self.listen.clone());
        put("connect", self.connect.clone());
        put("id", self.id.clone());
        put("status", self.status.clone());
        put("dealer", self.dealer.clone());
        put("path", self.path.as_ref().map(|p| p.display().to_string()));
        NodeConfig::load_with(self.config.as_deref(), &over)
    }

    fn deadline(&self) -> Option<Instant> {
        self.duration.map(|s| Instant::now() + Duration::from_secs_f64(s.max(0.0)))
    }
}

fn config_error(msg: impl std::fmt::Display) -> i32 {
    eprintln!("error: {msg}");
    EXIT_CONFIG
}

fn require(v: Option<String>, flag: &str, cmd: &str) -> Result<String, i32> {
    v.ok_or_else(|| config_error(format!("{cmd} needs --{flag} (or `{flag} = ...` in the config file)")))
}

/// Blocks until `stop` is raised, the deadline passes or `done` returns true.
fn wait(stop: &AtomicBool, deadline: Option<Instant>, mut done: impl FnMut() -> bool) {
    while !stop.load(Ordering::SeqCst) && deadline.map_or(true, |d| Instant::now() < d) && !done() {
        thread::sleep(Duration::from_millis(50));
    }
}

pub fn satellite(args: &NodeArgs, stop: &AtomicBool) -> i32 {
    let cfg = match args.load() {
        Ok(c) => c,
        Err(e) => return config_error(e),
    };
    let (listen, dealer) = match (require(cfg.listen.clone(), "listen", "satellite"), require(cfg.dealer.clone(), "dealer", "satellite")) {
        (Ok(l), Ok(d)) => (l, d),
        (Err(code), _) | (_, Err(code)) => return code,
    };
    let mut sat = match SatelliteConfig::from_node(&cfg, DealerSpec::Remote(dealer)) {
        Ok(s) => s,
        Err(e) => return config_error(e),
    };
    if sat.default_bounds.is_none() && sat.bounds.is_empty() {
        return config_error("no bounds configured: add bounds.default or bounds.<id> lines");
    }
    sat.echo = true;
    let listener = match TcpListener::bind(&listen) {
        Ok(l) => l,
        Err(e) => return config_error(format!("cannot listen on {listen}: {e}")),
    };
    let status = match cfg.status.as_deref().map(TcpListener::bind).transpose() {
        Ok(s) => s,
        Err(e) => return config_error(format!("cannot open status endpoint: {e}")),
    };
    let handle = match satellite_serve(listener, status, sat) {
        Ok(h) => h,
        Err(e) => return config_error(e),
    };
    println!("satellite listening on {}", handle.addr);
    if let Some(a) = handle.status_addr {
        println!("status endpoint on {a}");
    }
    wait(stop, args.deadline(), || false);
    let state = handle.stop();
    for line in state.query("LIST") {
        println!("{line}");
    }
    EXIT_OK
}

pub fn dealer(args: &NodeArgs, stop: &AtomicBool) -> i32 {
    let cfg = match args.load() {
        Ok(c) => c,
        Err(e) => return config_error(e),
    };
    let listen = match require(cfg.listen, "listen", "dealer") {
        Ok(l) => l,
        Err(code) => return code,
    };
    let listener = match TcpListener::bind(&listen) {
        Ok(l) => l,
        Err(e) => return config_error(format!("cannot listen on {listen}: {e}")),
    };
    let handle = match dealer_serve(listener, Arc::new(DealerHub::new())) {
        Ok(h) => h,
        Err(e) => return config_error(e),
    };
    println!("dealer listening on {}", handle.addr);
    wait(stop, args.deadline(), || false);
    handle.stop();
    EXIT_OK
}

/// Exit code for an aircraft that stopped on `err`.
pub fn aircraft_exit_code(err: &FleetError) -> i32 {
    let rejected_config = |code: u16| {
        [codes::VERSION_MISMATCH, codes::CFG_MISMATCH, codes::HASH_MISMATCH, codes::DUPLICATE_ID, codes::NO_BOUNDS].contains(&code)
    };
    match err {
        e if e.is_config() => EXIT_CONFIG,
        FleetError::Handshake { code, .. } if rejected_config(*code) => EXIT_CONFIG,
        FleetError::Net(NetError::Peer { code, .. }) if rejected_config(*code) => EXIT_CONFIG,
        _ => EXIT_PROTOCOL,
    }
}

pub fn aircraft(args: &NodeArgs, stop: &AtomicBool) -> i32 {
    let cfg = match args.load() {
        Ok(c) => c,
        Err(e) => return config_error(e),
    };
    let (connect, id, path, dealer) = match (
        require(cfg.connect.clone(), "connect", "aircraft"),
        require(cfg.id.clone(), "id", "aircraft"),
        require(cfg.path.clone(), "path", "aircraft"),
        require(cfg.dealer.clone(), "dealer", "aircraft"),
    ) {
        (Ok(c), Ok(i), Ok(p), Ok(d)) => (c, i, p, d),
        (Err(code), ..) | (_, Err(code), ..) | (_, _, Err(code), _) | (.., Err(code)) => return code,
    };
    let text = match std::fs::read_to_string(&path) {
        Ok(t) => t,
        Err(e) => return config_error(format!("{path}: {e}")),
    };
    let points = match parse_flight_path(&text, cfg.params) {
        Ok(p) => p,
        Err(e) => return config_error(format!("{path}: {e}")),
    };
    let handle = spawn_aircraft(AircraftConfig {
        id,
        connect,
        session: cfg.session_config(),
        path: points,
        dealer: DealerSpec::Remote(dealer),
        options: AircraftOptions { echo: true, ..Default::default() },
    });
    let deadline = args.deadline();
    wait(stop, deadline, || handle.is_finished());
    if !handle.is_finished() {
        handle.kill();
    }
    let report = handle.join();
    println!(
        "{}: tracking={} proofs={} failed={} alerts={} sent={}B received={}B",
        report.id,
        report.tracking_rounds,
        report.proof_rounds,
        report.failed_rounds,
        report.alerts.len(),
        report.bytes_sent,
        report.bytes_received
    );
    match report.ending {
        Ending::Closed | Ending::Killed => EXIT_OK,
        Ending::Error(e) => {
            eprintln!("error: {e}");
            aircraft_exit_code(&e)
        }
    }
}
