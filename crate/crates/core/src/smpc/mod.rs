//! Two-party GMW evaluation of Boolean circuits on XOR shares.
//!
//! XOR and NOT are local; every AND consumes one Beaver triple and one masked opening, and all
//! ANDs at the same multiplicative depth share a single round. In [`EngineMode::Malicious`]
//! every share carries a pairwise IT-MAC (see [`crate::mac`]) and all openings are batch-checked
//! before anything is revealed.

mod dealer;
mod engine;
mod triples;

pub use dealer::{deal, Dealer};
pub use crate::circuit::Plan;
pub use engine::{evaluate, EvalOptions, EvalReport, Tamper};
pub use triples::{gen_triples_ot, gen_triples_ot_with};

use thiserror::Error;

use crate::circuit::CircuitError;
use crate::mac::scale;
use crate::net::{NetError, Reader, Writer};
use crate::ot::OtError;

/// The two computing parties. `Party1` is the satellite and the default output receiver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Party {
    Party1,
    Party2,
}

impl Party {
    pub fn peer(self) -> Party {
        match self {
            Party::Party1 => Party::Party2,
            Party::Party2 => Party::Party1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EngineMode {
    SemiHonest,
    Malicious,
}

impl EngineMode {
    pub fn as_str(self) -> &'static str {
        match self {
            EngineMode::SemiHonest => "semi",
            EngineMode::Malicious => "malicious",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "semi" | "semi-honest" | "semi_honest" => Some(EngineMode::SemiHonest),
            "malicious" | "mal" => Some(EngineMode::Malicious),
            _ => None,
        }
    }
}

/// One party's XOR share of a wire bit.
pub type BitShare = bool;

/// One party's shares of a multiplication triple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BitTriple {
    pub a: BitShare,
    pub b: BitShare,
    pub c: BitShare,
}

/// A share with its pairwise MAC material.
///
/// `tag` authenticates this party's `bit` under the peer's global key; `key` is this party's
/// key for the peer's bit. With `delta_1`, `delta_2` the parties' global keys:
/// `tag_1 = key_2 ^ bit_1 * delta_2` and `tag_2 = key_1 ^ bit_2 * delta_1`.
/// Semi-honest shares keep `tag` and `key` at zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct AuthShare {
    pub bit: bool,
    pub tag: u128,
    pub key: u128,
}

impl AuthShare {
    pub fn xor(self, o: AuthShare) -> AuthShare {
        AuthShare { bit: self.bit ^ o.bit, tag: self.tag ^ o.tag, key: self.key ^ o.key }
    }

    /// Multiplication by a public bit.
    pub fn times(self, c: bool) -> AuthShare {
        if c {
            self
        } else {
            AuthShare::default()
        }
    }

    /// Adds the public constant `c` to the shared value: `Party1` flips its bit, `Party2`
    /// adjusts its key for `Party1`'s bit. `delta` is this party's global key.
    pub fn add_public(self, c: bool, role: Party, delta: u128) -> AuthShare {
        match role {
            Party::Party1 => AuthShare { bit: self.bit ^ c, ..self },
            Party::Party2 => AuthShare { key: self.key ^ scale(c, delta), ..self },
        }
    }

    /// This party's share of the public constant `c`.
    pub fn public(c: bool, role: Party, delta: u128) -> AuthShare {
        AuthShare::default().add_public(c, role, delta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct AuthTriple {
    pub a: AuthShare,
    pub b: AuthShare,
    pub c: AuthShare,
}

/// Correlated randomness for one party and one evaluation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Preprocessing {
    pub mode: EngineMode,
    /// This party's global MAC key; zero in semi-honest mode.
    pub delta: u128,
    pub triples: Vec<AuthTriple>,
    /// Authenticated random masks for input sharing, one per circuit input bit (malicious only).
    pub masks: Vec<AuthShare>,
}

impl Preprocessing {
    /// Semi-honest material from plain triples.
    pub fn from_bit_triples(triples: &[BitTriple]) -> Self {
        let sh = |bit| AuthShare { bit, tag: 0, key: 0 };
        Self {
            mode: EngineMode::SemiHonest,
            delta: 0,
            triples: triples.iter().map(|t| AuthTriple { a: sh(t.a), b: sh(t.b), c: sh(t.c) }).collect(),
            masks: Vec::new(),
        }
    }

    /// Serialized form carried in `TRIPLE_BLOCK` frames.
    pub fn encode(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.u8(matches!(self.mode, EngineMode::Malicious) as u8).u128(self.delta);
        let shares: Vec<AuthShare> = self.triples.iter().flat_map(|t| [t.a, t.b, t.c]).chain(self.masks.iter().copied()).collect();
        w.u32(self.triples.len() as u32).u32(self.masks.len() as u32);
        w.bits(&shares.iter().map(|s| s.bit).collect::<Vec<_>>());
        if self.mode == EngineMode::Malicious {
            for s in &shares {
                w.u128(s.tag).u128(s.key);
            }
        }
        w.finish()
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, NetError> {
        let mut r = Reader::new(bytes);
        let mode = match r.u8()? {
            0 => EngineMode::SemiHonest,
            1 => EngineMode::Malicious,
            m => return Err(NetError::Malformed(format!("unknown mode byte {m}"))),
        };
        let delta = r.u128()?;
        let n_triples = r.u32()? as usize;
        let n_masks = r.u32()? as usize;
        let total = n_triples
            .checked_mul(3)
            .and_then(|t| t.checked_add(n_masks))
            .filter(|&t| t <= bytes.len() * 8)
            .ok_or_else(|| NetError::Malformed("share counts overrun payload".into()))?;
        let bits = r.bits_exact(total)?;
        let mut shares: Vec<AuthShare> = bits.into_iter().map(|bit| AuthShare { bit, tag: 0, key: 0 }).collect();
        if mode == EngineMode::Malicious {
            for s in &mut shares {
                s.tag = r.u128()?;
                s.key = r.u128()?;
            }
        }
        r.finish()?;
        let masks = shares.split_off(3 * n_triples);
        let triples = shares.chunks_exact(3).map(|c| AuthTriple { a: c[0], b: c[1], c: c[2] }).collect();
        Ok(Self { mode, delta, triples, masks })
    }
}

/// Hands out triples by index and refuses to hand out any index twice.
#[derive(Debug)]
pub struct TriplePool {
    triples: Vec<AuthTriple>,
    used: Vec<bool>,
    next: usize,
}

impl TriplePool {
    pub fn new(triples: Vec<AuthTriple>) -> Self {
        let used = vec![false; triples.len()];
        Self { triples, used, next: 0 }
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn take(&mut self, index: usize) -> Result<AuthTriple, SmpcError> {
        match self.used.get_mut(index) {
            None => Err(SmpcError::TriplesExhausted { needed: index + 1, available: self.triples.len() }),
            Some(true) => Err(SmpcError::TripleReuse(index)),
            Some(u) => {
                *u = true;
                Ok(self.triples[index])
            }
        }
    }

    pub fn take_next(&mut self) -> Result<AuthTriple, SmpcError> {
        let i = self.next;
        self.next += 1;
        self.take(i)
    }

    pub fn consumed(&self) -> usize {
        self.used.iter().filter(|&&u| u).count()
    }
}

#[derive(Debug, Error)]
pub enum SmpcError {
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Ot(#[from] OtError),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("need {needed} triples, have {available}")]
    TriplesExhausted { needed: usize, available: usize },
    #[error("triple {0} already consumed")]
    TripleReuse(usize),
    #[error("preprocessing is for {got:?} but the session runs {expected:?}")]
    ModeMismatch { expected: EngineMode, got: EngineMode },
    #[error("cheating detected: {0}")]
    CheatDetected(String),
}

impl SmpcError {
    pub fn is_cheat(&self) -> bool {
        matches!(self, SmpcError::CheatDetected(_))
    }
}
