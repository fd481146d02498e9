//! Information-theoretic MACs over GF(2^128) and their batched verification.
//!
//! A bit `x` held by one party is authenticated towards the other party, who holds a global key
//! `delta` and a per-bit key `k`; the holder keeps the tag `m = k ^ x * delta`. Tags and keys are
//! XOR-homomorphic, so linear gates need no interaction.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

use crate::gf128::Gf128;
use crate::par::{self, Parallelism};

/// `x * delta` as a 128-bit mask.
#[inline]
pub fn scale(bit: bool, delta: u128) -> u128 {
    0u128.wrapping_sub(bit as u128) & delta
}

/// Running hash of everything that should bind the verification coefficients.
#[derive(Clone)]
pub struct Transcript {
    hasher: Sha256,
}

impl Transcript {
    pub fn new(domain: &str) -> Self {
        let mut hasher = Sha256::new();
        hasher.update((domain.len() as u32).to_le_bytes());
        hasher.update(domain.as_bytes());
        Self { hasher }
    }

    pub fn absorb(&mut self, label: &str, data: &[u8]) {
        self.hasher.update((label.len() as u32).to_le_bytes());
        self.hasher.update(label.as_bytes());
        self.hasher.update((data.len() as u64).to_le_bytes());
        self.hasher.update(data);
    }

    /// Digest of the transcript so far, without consuming it.
    pub fn digest(&self) -> [u8; 32] {
        self.hasher.clone().finalize().into()
    }

    /// Seed for check coefficients, domain-separated from the plain digest.
    pub fn challenge_seed(&self, label: &str) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(b"mac-check-coefficients");
        h.update(label.as_bytes());
        h.update(self.digest());
        h.finalize().into()
    }
}

/// An opened value as seen by the key holder: the claimed bit and tag, and the local key.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Opening {
    pub bit: bool,
    pub tag: u128,
    pub key: u128,
}

impl Opening {
    pub fn is_valid(&self, delta: u128) -> bool {
        self.tag == self.key ^ scale(self.bit, delta)
    }
}

/// Random linear combination `sum chi_i * (tag_i ^ key_i ^ bit_i * delta)` with coefficients
/// drawn from `seed`. Zero for honest openings; nonzero with probability `1 - 2^-128` otherwise.
pub fn combine(openings: &[Opening], delta: u128, seed: [u8; 32], par: Parallelism) -> Gf128 {
    let mut rng = ChaCha20Rng::from_seed(seed);
    let chi: Vec<u128> = (0..openings.len()).map(|_| rng.gen()).collect();
    Gf128(par::xor_reduce(openings.len(), par, |i| {
        let o = &openings[i];
        let err = o.tag ^ o.key ^ scale(o.bit, delta);
        (Gf128(chi[i]) * Gf128(err)).0
    }))
}

/// Whether the batch of openings verifies under `delta`.
pub fn batch_verify(openings: &[Opening], delta: u128, seed: [u8; 32], par: Parallelism) -> bool {
    combine(openings, delta, seed, par).is_zero()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::thread_rng;

    fn honest(n: usize, delta: u128) -> Vec<Opening> {
        let mut rng = thread_rng();
        (0..n)
            .map(|_| {
                let bit: bool = rng.gen();
                let key: u128 = rng.gen();
                Opening { bit, key, tag: key ^ scale(bit, delta) }
            })
            .collect()
    }

    #[test]
    fn honest_batch_passes() {
        let delta = thread_rng().gen();
        let ops = honest(1000, delta);
        assert!(batch_verify(&ops, delta, [7; 32], Parallelism::Sequential));
        assert!(batch_verify(&ops, delta, [7; 32], Parallelism::Parallel));
        assert!(batch_verify(&[], delta, [0; 32], Parallelism::default()));
    }

    #[test]
    fn flipped_bit_always_detected() {
        let mut rng = thread_rng();
        for _ in 0..1000 {
            let delta: u128 = rng.gen::<u128>() | 1;
            let mut ops = honest(20, delta);
            let i = rng.gen_range(0..ops.len());
            ops[i].bit ^= true;
            assert!(!batch_verify(&ops, delta, rng.gen(), Parallelism::Sequential));
        }
    }

    #[test]
    fn random_tag_forgeries_rejected() {
        let mut rng = thread_rng();
        let delta: u128 = rng.gen();
        let mut accepted = 0;
        for _ in 0..10_000 {
            let mut ops = honest(4, delta);
            ops[rng.gen_range(0..4)].tag = rng.gen();
            if batch_verify(&ops, delta, rng.gen(), Parallelism::Sequential) {
                accepted += 1;
            }
        }
        assert_eq!(accepted, 0);
    }

    #[test]
    fn transcript_is_order_sensitive() {
        let mut a = Transcript::new("t");
        let mut b = Transcript::new("t");
        a.absorb("x", b"1");
        a.absorb("y", b"2");
        b.absorb("y", b"2");
        b.absorb("x", b"1");
        assert_ne!(a.digest(), b.digest());
        assert_ne!(a.challenge_seed("c"), a.digest());
    }
}
