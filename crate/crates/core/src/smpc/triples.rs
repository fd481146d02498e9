//! Semi-honest triple generation from oblivious transfer.
//!
//! Each party samples `a_i, b_i`. The cross terms `a_1·b_2` and `a_2·b_1` are each obtained
//! with one OT: the sender inputs `(r, r ⊕ a)`, the receiver chooses with its `b` and keeps the
//! result; the sender keeps `r`.

use rand::{CryptoRng, Rng, RngCore};

use super::{BitTriple, Party, SmpcError};
use crate::net::Channel;
use crate::ot::{receive_batch, send_batch, OtSenderInput};
use crate::par::Parallelism;

/// Generates `count` triples with fresh local randomness.
pub fn gen_triples_ot<C: Channel + ?Sized, R: RngCore + CryptoRng>(
    ch: &mut C,
    session: u64,
    role: Party,
    count: usize,
    rng: &mut R,
    par: Parallelism,
) -> Result<Vec<BitTriple>, SmpcError> {
    let a: Vec<bool> = (0..count).map(|_| rng.gen()).collect();
    let b: Vec<bool> = (0..count).map(|_| rng.gen()).collect();
    gen_triples_ot_with(ch, session, role, &a, &b, rng, par)
}

/// Like [`gen_triples_ot`] but with caller-chosen `a` and `b` shares.
pub fn gen_triples_ot_with<C: Channel + ?Sized, R: RngCore + CryptoRng>(
    ch: &mut C,
    session: u64,
    role: Party,
    a: &[bool],
    b: &[bool],
    rng: &mut R,
    par: Parallelism,
) -> Result<Vec<BitTriple>, SmpcError> {
    if a.len() != b.len() {
        return Err(SmpcError::Input("a and b share vectors differ in length".into()));
    }
    let n = a.len();
    let masks: Vec<bool> = (0..n).map(|_| rng.gen()).collect();
    let sender_inputs: Vec<OtSenderInput> =
        masks.iter().zip(a).map(|(&r, &ai)| OtSenderInput { m0: vec![r as u8], m1: vec![(r ^ ai) as u8] }).collect();

    // Party1 sends first, then the roles swap.
    let received = match role {
        Party::Party1 => {
            send_batch(ch, session, &sender_inputs, rng, par)?;
            receive_batch(ch, session, b, rng, par)?
        }
        Party::Party2 => {
            let out = receive_batch(ch, session, b, rng, par)?;
            send_batch(ch, session, &sender_inputs, rng, par)?;
            out
        }
    };
    received
        .iter()
        .enumerate()
        .map(|(i, o)| match o.message.as_slice() {
            [m @ (0 | 1)] => Ok(BitTriple { a: a[i], b: b[i], c: (a[i] & b[i]) ^ masks[i] ^ (*m == 1) }),
            _ => Err(SmpcError::Input(format!("malformed OT output for triple {i}"))),
        })
        .collect()
}
