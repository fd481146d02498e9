//! Semi-trusted dealer: samples triples and input masks and splits them between the parties.
//!
//! The dealer never sees inputs or wire values. In malicious mode it also picks both parties'
//! global keys, so it must not collude with either party.

use rand::{CryptoRng, Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::{AuthShare, AuthTriple, EngineMode, Preprocessing};
use crate::mac::scale;

/// Splits `x` into two authenticated shares under `(delta1, delta2)`.
fn split<R: RngCore>(x: bool, mode: EngineMode, deltas: (u128, u128), rng: &mut R) -> (AuthShare, AuthShare) {
    let b1: bool = rng.gen();
    let b2 = x ^ b1;
    if mode == EngineMode::SemiHonest {
        return (AuthShare { bit: b1, tag: 0, key: 0 }, AuthShare { bit: b2, tag: 0, key: 0 });
    }
    let (k1, k2): (u128, u128) = (rng.gen(), rng.gen());
    let s1 = AuthShare { bit: b1, tag: k2 ^ scale(b1, deltas.1), key: k1 };
    let s2 = AuthShare { bit: b2, tag: k1 ^ scale(b2, deltas.0), key: k2 };
    (s1, s2)
}

/// Deals `n_triples` triples and `n_masks` random masks.
pub fn deal<R: RngCore + CryptoRng>(
    mode: EngineMode,
    n_triples: usize,
    n_masks: usize,
    rng: &mut R,
) -> (Preprocessing, Preprocessing) {
    Dealer::from_rng(rng).deal(mode, n_triples, n_masks)
}

/// A seeded dealer; the stream cipher keeps bulk generation cheap.
pub struct Dealer {
    rng: ChaCha20Rng,
}

impl Dealer {
    pub fn from_rng<R: RngCore + CryptoRng>(rng: &mut R) -> Self {
        Self { rng: ChaCha20Rng::from_seed(rng.gen()) }
    }

    pub fn from_seed(seed: [u8; 32]) -> Self {
        Self { rng: ChaCha20Rng::from_seed(seed) }
    }

    pub fn deal(&mut self, mode: EngineMode, n_triples: usize, n_masks: usize) -> (Preprocessing, Preprocessing) {
        let rng = &mut self.rng;
        let deltas: (u128, u128) = match mode {
            EngineMode::SemiHonest => (0, 0),
            EngineMode::Malicious => (rng.gen(), rng.gen()),
        };
        let mut t1 = Vec::with_capacity(n_triples);
        let mut t2 = Vec::with_capacity(n_triples);
        for _ in 0..n_triples {
            let (a, b): (bool, bool) = (rng.gen(), rng.gen());
            let (a1, a2) = split(a, mode, deltas, rng);
            let (b1, b2) = split(b, mode, deltas, rng);
            let (c1, c2) = split(a & b, mode, deltas, rng);
            t1.push(AuthTriple { a: a1, b: b1, c: c1 });
            t2.push(AuthTriple { a: a2, b: b2, c: c2 });
        }
        let (m1, m2) = (0..n_masks).map(|_| split(rng.gen(), mode, deltas, rng)).unzip();
        (
            Preprocessing { mode, delta: deltas.0, triples: t1, masks: m1 },
            Preprocessing { mode, delta: deltas.1, triples: t2, masks: m2 },
        )
    }
}
