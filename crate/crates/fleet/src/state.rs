//! Satellite-side fleet bookkeeping and the event log shared by all nodes.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::{Mutex, MutexGuard};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use privnav::fixed::{Bounds, FixedPoint};
use privnav::zkrange::Verdict;

fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64)
}

/// Append-only, timestamped log lines. Echoed to stderr when `echo` is set.
#[derive(Debug, Default)]
pub struct EventLog {
    lines: Mutex<Vec<String>>,
    echo: bool,
}

impl EventLog {
    pub fn new(echo: bool) -> Self {
        Self { lines: Mutex::default(), echo }
    }

    pub fn log(&self, msg: impl fmt::Display) {
        let line = format!("{} {msg}", now_ms());
        if self.echo {
            eprintln!("{line}");
        }
        self.lines.lock().unwrap().push(line);
    }

    pub fn lines(&self) -> Vec<String> {
        self.lines.lock().unwrap().clone()
    }
}

/// Where the satellite's antenna should point for one aircraft.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AntennaState {
    pub u: [FixedPoint; 3],
    /// Set when the circuit returned the all-zero vector (satellite and aircraft coincide).
    pub fault: bool,
    pub round: u64,
    pub at_ms: u64,
}

impl AntennaState {
    pub fn new(u: [FixedPoint; 3], round: u64) -> Self {
        Self { u, fault: u.iter().all(|c| c.raw() == 0), round, at_ms: now_ms() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SessionStatus {
    Active,
    /// A MAC check failed; no further rounds are run.
    Quarantined,
    /// Torn down after repeated failures or a broken connection.
    Failed,
    Closed,
}

impl SessionStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SessionStatus::Active => "active",
            SessionStatus::Quarantined => "quarantined",
            SessionStatus::Failed => "failed",
            SessionStatus::Closed => "closed",
        }
    }
}

/// Per-kind round counters. `late` counts scheduled rounds that did not complete within two
/// intervals of their slot, including slots skipped because the session fell behind.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RoundStats {
    pub completed: u64,
    pub failed: u64,
    pub late: u64,
    pub max_latency_ms: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VerdictRecord {
    pub verdict: Verdict,
    pub round: u64,
    pub at_ms: u64,
}

#[derive(Debug, Clone)]
pub struct AircraftRecord {
    pub id: String,
    pub session: u64,
    pub status: SessionStatus,
    pub antenna: Option<AntennaState>,
    pub verdicts: Vec<VerdictRecord>,
    pub bounds: Bounds,
    /// Applied at the start of the next round.
    pub pending_bounds: Option<Bounds>,
    pub tracking: RoundStats,
    pub proofs: RoundStats,
    pub consecutive_failures: u32,
}

impl AircraftRecord {
    fn status_lines(&self) -> Vec<String> {
        let fp = |v: &[FixedPoint]| v.iter().map(|c| c.to_decimal()).collect::<Vec<_>>().join(",");
        let mut out = vec![
            format!("id={}", self.id),
            format!("session={:016x}", self.session),
            format!("status={}", self.status.as_str()),
            format!(
                "tracking completed={} failed={} late={} max_latency_ms={}",
                self.tracking.completed, self.tracking.failed, self.tracking.late, self.tracking.max_latency_ms
            ),
            format!(
                "proofs completed={} failed={} late={} max_latency_ms={}",
                self.proofs.completed, self.proofs.failed, self.proofs.late, self.proofs.max_latency_ms
            ),
            format!("bounds={}", fp(&self.bounds.as_array())),
        ];
        match &self.antenna {
            Some(a) => out.push(format!("antenna round={} u={} fault={}", a.round, fp(&a.u), a.fault)),
            None => out.push("antenna none".into()),
        }
        match self.verdicts.last() {
            Some(v) => out.push(format!("last_verdict={} round={} at_ms={}", v.verdict.as_str(), v.round, v.at_ms)),
            None => out.push("last_verdict=none".into()),
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlertKind {
    OutOfBounds,
    Cheat,
    Fault,
    Teardown,
}

impl AlertKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AlertKind::OutOfBounds => "out-of-bounds",
            AlertKind::Cheat => "cheat",
            AlertKind::Fault => "fault",
            AlertKind::Teardown => "teardown",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alert {
    pub aircraft: String,
    pub kind: AlertKind,
    pub round: u64,
    pub at_ms: u64,
    pub detail: String,
}

#[derive(Debug, Default)]
struct Inner {
    aircraft: BTreeMap<String, AircraftRecord>,
    alerts: Vec<Alert>,
}

/// Shared satellite state. Every accessor holds the lock only for the duration of the call.
#[derive(Debug)]
pub struct FleetState {
    inner: Mutex<Inner>,
    pub log: EventLog,
    pub started: Instant,
}

impl FleetState {
    pub fn new(echo: bool) -> Self {
        Self { inner: Mutex::default(), log: EventLog::new(echo), started: Instant::now() }
    }

    fn lock(&self) -> MutexGuard<'_, Inner> {
        self.inner.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Registers a new session. Fails if `id` already has an active one.
    pub fn register(&self, id: &str, session: u64, bounds: Bounds) -> Result<(), String> {
        let mut g = self.lock();
        if g.aircraft.get(id).is_some_and(|r| r.status == SessionStatus::Active) {
            return Err(format!("aircraft {id} already has an active session"));
        }
        g.aircraft.insert(
            id.to_string(),
            AircraftRecord {
                id: id.to_string(),
                session,
                status: SessionStatus::Active,
                antenna: None,
                verdicts: Vec::new(),
                bounds,
                pending_bounds: None,
                tracking: RoundStats::default(),
                proofs: RoundStats::default(),
                consecutive_failures: 0,
            },
        );
        Ok(())
    }

    pub fn with<T>(&self, id: &str, f: impl FnOnce(&mut AircraftRecord) -> T) -> Option<T> {
        self.lock().aircraft.get_mut(id).map(f)
    }

    pub fn get(&self, id: &str) -> Option<AircraftRecord> {
        self.lock().aircraft.get(id).cloned()
    }

    pub fn ids(&self) -> Vec<String> {
        self.lock().aircraft.keys().cloned().collect()
    }

    pub fn records(&self) -> Vec<AircraftRecord> {
        self.lock().aircraft.values().cloned().collect()
    }

    /// Queues new bounds for `id`; they take effect at the start of its next round.
    pub fn update_bounds(&self, id: &str, values: [FixedPoint; 6]) -> Result<(), crate::FleetError> {
        let b = Bounds::from_array(values).map_err(|e| crate::FleetError::BoundsInvalid(e.to_string()))?;
        self.with(id, |r| r.pending_bounds = Some(b)).ok_or_else(|| crate::FleetError::UnknownAircraft(id.into()))
    }

    pub fn alert(&self, aircraft: &str, kind: AlertKind, round: u64, detail: impl Into<String>) {
        let a = Alert { aircraft: aircraft.into(), kind, round, at_ms: now_ms(), detail: detail.into() };
        self.log.log(format_args!("alert {} {} round={} {}", a.aircraft, kind.as_str(), round, a.detail));
        self.lock().alerts.push(a);
    }

    pub fn alerts(&self) -> Vec<Alert> {
        self.lock().alerts.clone()
    }

    /// Answers one status-endpoint command with its response lines (without the terminator).
    pub fn query(&self, command: &str) -> Vec<String> {
        let mut parts = command.split_whitespace();
        match (parts.next(), parts.next(), parts.next()) {
            (Some("LIST"), None, _) => self
                .records()
                .iter()
                .map(|r| {
                    let v = r.verdicts.last().map_or("none", |v| v.verdict.as_str());
                    format!("{} {} tracking={} proofs={} last_verdict={}", r.id, r.status.as_str(), r.tracking.completed, r.proofs.completed, v)
                })
                .collect(),
            (Some("STATUS"), Some(id), None) => match self.get(id) {
                Some(r) => r.status_lines(),
                None => vec![format!("ERR unknown aircraft {id}")],
            },
            (Some("ALERTS"), None, _) => self
                .alerts()
                .iter()
                .map(|a| format!("{} {} {} round={} {}", a.at_ms, a.aircraft, a.kind.as_str(), a.round, a.detail))
                .collect(),
            _ => vec![format!("ERR unknown command: {}", command.trim())],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use privnav::fixed::{encode, FpParams};

    fn bounds() -> Bounds {
        let p = FpParams::for_bitwidth(16).unwrap();
        Bounds::cube(encode(0.0, p).unwrap(), encode(10.0, p).unwrap()).unwrap()
    }

    #[test]
    fn register_and_query() {
        let s = FleetState::new(false);
        s.register("AC1", 7, bounds()).unwrap();
        assert!(s.register("AC1", 8, bounds()).is_err());
        s.with("AC1", |r| {
            r.tracking.completed = 3;
            r.verdicts.push(VerdictRecord { verdict: Verdict::Accepted, round: 2, at_ms: 0 });
        });
        assert_eq!(s.query("LIST"), vec!["AC1 active tracking=3 proofs=0 last_verdict=accepted"]);
        let status = s.query("STATUS AC1");
        assert!(status.contains(&"status=active".to_string()));
        assert!(status.iter().any(|l| l.starts_with("last_verdict=accepted")));
        assert!(s.query("STATUS AC9")[0].starts_with("ERR"));
        assert!(s.query("DROP TABLES")[0].starts_with("ERR"));
        s.alert("AC1", AlertKind::OutOfBounds, 4, "verdict rejected-out-of-bounds");
        assert_eq!(s.query("ALERTS").len(), 1);
        assert!(s.log.lines()[0].contains("out-of-bounds"));
    }

    #[test]
    fn bounds_updates_are_validated_and_queued() {
        let s = FleetState::new(false);
        s.register("AC1", 1, bounds()).unwrap();
        let mut v = bounds().as_array();
        v.swap(0, 1);
        assert!(matches!(s.update_bounds("AC1", v), Err(crate::FleetError::BoundsInvalid(_))));
        v.swap(0, 1);
        s.update_bounds("AC1", v).unwrap();
        assert_eq!(s.get("AC1").unwrap().pending_bounds, Some(bounds()));
        assert!(s.update_bounds("nobody", v).is_err());
    }

    #[test]
    fn coincident_positions_mark_a_fault() {
        let p = FpParams::for_bitwidth(16).unwrap();
        assert!(AntennaState::new([FixedPoint::zero(p); 3], 1).fault);
        assert!(!AntennaState::new([encode(1.0, p).unwrap(), FixedPoint::zero(p), FixedPoint::zero(p)], 1).fault);
    }
}
