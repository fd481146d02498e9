//! Session parameters, node configuration files and the per-parameter circuit cache.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::{Arc, Mutex, OnceLock};
use std::time::Duration;

use privnav::circuit::{build_trajectory, optimize, Plan};
use privnav::fixed::{encode_decimal, Bounds, FixedPoint, FpParams};
use privnav::net::{NetError, Reader, Writer};
use privnav::smpc::EngineMode;
use privnav::zkrange::range_plan;
use sha2::{Digest, Sha256};

use crate::FleetError;

pub const PROTOCOL_VERSION: u16 = 1;

/// The trajectory and range-check circuits for one parameter set.
#[derive(Debug)]
pub struct Plans {
    pub trajectory: Plan,
    pub range: Plan,
}

/// Optimized circuits are built once per parameter set and shared by every session.
pub fn plans_for(params: FpParams) -> Arc<Plans> {
    static CACHE: OnceLock<Mutex<HashMap<FpParams, Arc<Plans>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(p) = cache.lock().unwrap().get(&params) {
        return p.clone();
    }
    // Built outside the lock; a racing duplicate build is harmless.
    let plans = Arc::new(Plans {
        trajectory: Plan::new(optimize(&build_trajectory(params))),
        range: range_plan(params),
    });
    cache.lock().unwrap().entry(params).or_insert(plans).clone()
}

/// Everything both peers must agree on, byte for byte.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionConfig {
    pub version: u16,
    pub params: FpParams,
    pub mode: EngineMode,
    pub tracking_interval: Duration,
    pub proof_interval: Duration,
    pub trajectory_hash: [u8; 32],
    pub range_hash: [u8; 32],
}

impl SessionConfig {
    pub fn new(params: FpParams, mode: EngineMode, tracking_interval: Duration, proof_interval: Duration) -> Self {
        let plans = plans_for(params);
        Self {
            version: PROTOCOL_VERSION,
            params,
            mode,
            tracking_interval,
            proof_interval,
            trajectory_hash: plans.trajectory.circuit().digest(),
            range_hash: plans.range.circuit().digest(),
        }
    }

    pub fn plans(&self) -> Arc<Plans> {
        plans_for(self.params)
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.u16(self.version)
            .u8(self.params.k() as u8)
            .u8(self.params.f() as u8)
            .u8(matches!(self.mode, EngineMode::Malicious) as u8)
            .u32(self.tracking_interval.as_millis() as u32)
            .u32(self.proof_interval.as_millis() as u32)
            .raw(&self.trajectory_hash)
            .raw(&self.range_hash);
        w.finish()
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, NetError> {
        let mut r = Reader::new(bytes);
        let version = r.u16()?;
        let (k, f) = (r.u8()? as u32, r.u8()? as u32);
        let params = FpParams::new(k, f).map_err(|e| NetError::Malformed(e.to_string()))?;
        let mode = match r.u8()? {
            0 => EngineMode::SemiHonest,
            1 => EngineMode::Malicious,
            m => return Err(NetError::Malformed(format!("mode byte {m}"))),
        };
        let tracking_interval = Duration::from_millis(r.u32()? as u64);
        let proof_interval = Duration::from_millis(r.u32()? as u64);
        let trajectory_hash = r.raw(32)?.try_into().unwrap();
        let range_hash = r.raw(32)?.try_into().unwrap();
        r.finish()?;
        Ok(Self { version, params, mode, tracking_interval, proof_interval, trajectory_hash, range_hash })
    }

    pub fn digest(&self) -> [u8; 32] {
        Sha256::digest(self.encode()).into()
    }
}

/// Wire form of a bounds box: six raw k-bit values, x_min first.
pub fn encode_bounds(b: &Bounds) -> Vec<u8> {
    let mut w = Writer::new();
    for v in b.as_array() {
        w.u128(v.bits());
    }
    w.finish()
}

/// Decodes the six values without validating their order.
pub fn decode_bounds_raw(bytes: &[u8], params: FpParams) -> Result<[FixedPoint; 6], NetError> {
    let mut r = Reader::new(bytes);
    let mut out = [FixedPoint::zero(params); 6];
    for v in &mut out {
        let bits = r.u128()?;
        if bits & !params.mask() != 0 {
            return Err(NetError::Malformed("bounds value wider than k bits".into()));
        }
        *v = FixedPoint::from_bits(bits, params);
    }
    r.finish()?;
    Ok(out)
}

pub fn bounds_hash(b: &Bounds) -> [u8; 32] {
    Sha256::digest(encode_bounds(b)).into()
}

/// Parsed `key = value` configuration shared by all node kinds. Which keys are required
/// depends on the node.
#[derive(Debug, Clone)]
pub struct NodeConfig {
    pub params: FpParams,
    pub mode: EngineMode,
    pub tracking_interval: Duration,
    pub proof_interval: Duration,
    pub dealer: Option<String>,
    pub listen: Option<String>,
    pub status: Option<String>,
    pub connect: Option<String>,
    pub id: Option<String>,
    pub path: Option<String>,
    pub satellite_position: Option<[FixedPoint; 3]>,
    pub default_bounds: Option<Bounds>,
    pub bounds: BTreeMap<String, Bounds>,
    pub max_failures: u32,
}

impl Default for NodeConfig {
    fn default() -> Self {
        Self {
            params: FpParams::default(),
            mode: EngineMode::SemiHonest,
            tracking_interval: Duration::from_secs(2),
            proof_interval: Duration::from_secs(5),
            dealer: None,
            listen: None,
            status: None,
            connect: None,
            id: None,
            path: None,
            satellite_position: None,
            default_bounds: None,
            bounds: BTreeMap::new(),
            max_failures: 3,
        }
    }
}

fn cfg_err(at: &str, msg: impl std::fmt::Display) -> FleetError {
    FleetError::Config(format!("{at}: {msg}"))
}

fn decimals<const N: usize>(at: &str, value: &str, params: FpParams) -> Result<[FixedPoint; N], FleetError> {
    let parts: Vec<&str> = value.split(',').map(str::trim).collect();
    if parts.len() != N {
        return Err(cfg_err(at, format!("expected {N} comma-separated numbers")));
    }
    let mut out = [FixedPoint::zero(params); N];
    for (o, p) in out.iter_mut().zip(parts) {
        *o = encode_decimal(p, params).map_err(|e| cfg_err(at, e))?;
    }
    Ok(out)
}

impl NodeConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, FleetError> {
        Self::load_with(Some(path.as_ref()), &[])
    }

    /// Reads the file at `path`, if any, then applies `overrides` as if they were later lines.
    pub fn load_with(path: Option<&Path>, overrides: &[(&str, String)]) -> Result<Self, FleetError> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p).map_err(|e| FleetError::Config(format!("{}: {e}", p.display())))?,
            None => String::new(),
        };
        Self::parse_with(&text, overrides)
    }

    /// Parses `key = value` lines; `#` starts a comment. Numeric bounds and positions are read
    /// after `bitwidth`/`frac_bits` regardless of their position in the file.
    pub fn parse(text: &str) -> Result<Self, FleetError> {
        Self::parse_with(text, &[])
    }

    pub fn parse_with(text: &str, overrides: &[(&str, String)]) -> Result<Self, FleetError> {
        let mut raw = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let at = format!("line {}", i + 1);
            let (key, value) = line.split_once('=').ok_or_else(|| cfg_err(&at, "expected key = value"))?;
            raw.push((at, key.trim().to_string(), value.trim().to_string()));
        }
        for (key, value) in overrides {
            raw.push((format!("option {key}"), key.to_string(), value.clone()));
        }

        let mut entries = Vec::new();
        let (mut k, mut f) = (None, None);
        for (at, key, value) in raw {
            match key.as_str() {
                "bitwidth" => k = Some(value.parse::<u32>().map_err(|e| cfg_err(&at, e))?),
                "frac_bits" => f = Some(value.parse::<u32>().map_err(|e| cfg_err(&at, e))?),
                _ => entries.push((at, key, value)),
            }
        }
        let mut cfg = NodeConfig::default();
        cfg.params = match (k, f) {
            (Some(k), Some(f)) => FpParams::new(k, f),
            (Some(k), None) => FpParams::for_bitwidth(k),
            (None, Some(f)) => FpParams::new(FpParams::default().k(), f),
            (None, None) => Ok(FpParams::default()),
        }
        .map_err(|e| FleetError::Config(e.to_string()))?;
        let p = cfg.params;
        for (at, key, value) in entries {
            let at = at.as_str();
            let ms = |v: &str| v.parse::<u64>().map(Duration::from_millis).map_err(|e| cfg_err(at, e));
            match key.as_str() {
                "mode" => cfg.mode = EngineMode::parse(&value).ok_or_else(|| cfg_err(at, format!("unknown mode {value}")))?,
                "tracking_interval_ms" => cfg.tracking_interval = ms(&value)?,
                "proof_interval_ms" => cfg.proof_interval = ms(&value)?,
                "dealer" => cfg.dealer = Some(value),
                "listen" => cfg.listen = Some(value),
                "status" => cfg.status = Some(value),
                "connect" => cfg.connect = Some(value),
                "id" => cfg.id = Some(value),
                "path" => cfg.path = Some(value),
                "max_failures" => cfg.max_failures = value.parse().map_err(|e| cfg_err(at, e))?,
                "satellite_position" => cfg.satellite_position = Some(decimals::<3>(at, &value, p)?),
                _ => {
                    let Some(target) = key.strip_prefix("bounds.") else {
                        return Err(cfg_err(at, format!("unknown key {key}")));
                    };
                    let b = Bounds::from_array(decimals::<6>(at, &value, p)?).map_err(|e| cfg_err(at, e))?;
                    if target == "default" {
                        cfg.default_bounds = Some(b);
                    } else {
                        cfg.bounds.insert(target.to_string(), b);
                    }
                }
            }
        }
        if cfg.tracking_interval.is_zero() || cfg.proof_interval.is_zero() {
            return Err(FleetError::Config("intervals must be positive".into()));
        }
        Ok(cfg)
    }

    pub fn session_config(&self) -> SessionConfig {
        SessionConfig::new(self.params, self.mode, self.tracking_interval, self.proof_interval)
    }

    pub fn bounds_for(&self, id: &str) -> Option<Bounds> {
        self.bounds.get(id).copied().or(self.default_bounds)
    }
}
