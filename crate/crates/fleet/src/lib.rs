//! Satellite, aircraft and dealer nodes.
//!
//! The satellite verifies range proofs and is the only party that learns trajectory unit
//! vectors. Aircraft replay a flight path and take part in both round kinds. The dealer hands
//! out correlated randomness. All three talk the framed protocol from [`privnav::net`] over TCP.

pub mod aircraft;
pub mod config;
pub mod counting;
pub mod dealer;
pub mod satellite;
pub mod session;
pub mod state;

use std::io;

use privnav::fixed::PathError;
use privnav::net::NetError;
use privnav::ot::OtError;
use privnav::smpc::SmpcError;
use privnav::zkrange::ZkError;
use thiserror::Error;

pub use aircraft::{run_aircraft, spawn_aircraft, AircraftConfig, AircraftHandle, AircraftOptions, AircraftReport, Ending};
pub use config::{plans_for, NodeConfig, SessionConfig};
pub use dealer::{dealer_serve, DealerHandle, DealerHub, DealerSpec};
pub use satellite::{satellite_serve, SatelliteConfig, SatelliteHandle};
pub use state::{AlertKind, AntennaState, FleetState, SessionStatus};

/// Reason codes carried in `ERROR` frames.
pub mod codes {
    pub const VERSION_MISMATCH: u16 = 0x10;
    pub const CFG_MISMATCH: u16 = 0x11;
    pub const HASH_MISMATCH: u16 = 0x12;
    pub const DUPLICATE_ID: u16 = 0x13;
    pub const NO_BOUNDS: u16 = 0x14;
    pub const BOUNDS_INVALID: u16 = 0x20;
    pub const PROTOCOL: u16 = 0x30;
    pub const CHEAT: u16 = 0x31;
    pub const DEALER: u16 = 0x32;
    pub const TEARDOWN: u16 = 0x33;
    pub const SHUTDOWN: u16 = 0x40;
}

#[derive(Debug, Error)]
pub enum FleetError {
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Smpc(#[from] SmpcError),
    #[error(transparent)]
    Zk(#[from] ZkError),
    #[error(transparent)]
    Ot(#[from] OtError),
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
    #[error(transparent)]
    Path(#[from] PathError),
    #[error("config: {0}")]
    Config(String),
    #[error("dealer: {0}")]
    Dealer(String),
    #[error("handshake rejected ({code:#x}): {reason}")]
    Handshake { code: u16, reason: String },
    #[error("invalid bounds: {0}")]
    BoundsInvalid(String),
    #[error("unknown aircraft {0}")]
    UnknownAircraft(String),
    #[error("session aborted: {0}")]
    Aborted(String),
}

impl FleetError {
    pub fn is_cheat(&self) -> bool {
        match self {
            FleetError::Smpc(e) => e.is_cheat(),
            FleetError::Net(NetError::Peer { code, .. }) => *code == codes::CHEAT,
            _ => false,
        }
    }

    /// Errors raised before any node starts talking: bad flags, files or config values.
    pub fn is_config(&self) -> bool {
        matches!(self, FleetError::Config(_) | FleetError::Path(_) | FleetError::BoundsInvalid(_))
    }
}
