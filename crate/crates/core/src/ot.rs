//! 1-out-of-2 oblivious transfer in the Diffie-Hellman "simplest OT" style over ristretto255,
//! plus the correlated variant used to authenticate bits.
//!
//! One batch is three messages:
//!
//! * `OT_S1` sender → receiver: group id, instance count, message length, `A = a·G`.
//! * `OT_R1` receiver → sender: `B_i = b_i·G` for choice 0, `A + b_i·G` for choice 1.
//! * `OT_S2` sender → receiver: `m_0 ⊕ expand(k_0)`, `m_1 ⊕ expand(k_1)` per instance, where
//!   `k_j = H(session ‖ i ‖ A ‖ B_i ‖ a·(B_i − j·A))`.
//!
//! The receiver derives `k_c = H(session ‖ i ‖ A ‖ B_i ‖ b_i·A)` and can decrypt only `m_c`.

use curve25519_dalek::constants::RISTRETTO_BASEPOINT_TABLE;
use curve25519_dalek::ristretto::{CompressedRistretto, RistrettoPoint};
use curve25519_dalek::scalar::Scalar;
use curve25519_dalek::traits::Identity;
use rand::{CryptoRng, Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::net::{Channel, MsgType, NetError, Reader, Writer};
use crate::par::{self, Parallelism};

/// Wire identifier for ristretto255 with compressed 32-byte encodings.
pub const GROUP_RISTRETTO255: u8 = 0x01;

#[derive(Debug, Error)]
pub enum OtError {
    #[error(transparent)]
    Net(#[from] NetError),
    #[error("unsupported group id 0x{0:02x}")]
    Group(u8),
    #[error("invalid group element for instance {0}")]
    InvalidPoint(usize),
    #[error("expected {expected} OT instances, peer sent {got}")]
    Arity { expected: usize, got: usize },
    #[error("message pair {0} has unequal lengths")]
    Length(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OtSenderInput {
    pub m0: Vec<u8>,
    pub m1: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OtReceiverOutput {
    pub choice: bool,
    pub message: Vec<u8>,
}

fn kdf(session: u64, index: usize, a: &[u8; 32], b: &[u8; 32], shared: &RistrettoPoint, len: usize) -> Vec<u8> {
    let mut h = Sha256::new();
    h.update(b"privnav-ot-v1");
    h.update(session.to_le_bytes());
    h.update((index as u64).to_le_bytes());
    h.update(a);
    h.update(b);
    h.update(shared.compress().as_bytes());
    let mut out = vec![0u8; len];
    ChaCha20Rng::from_seed(h.finalize().into()).fill_bytes(&mut out);
    out
}

fn decode_point(bytes: &[u8], index: usize) -> Result<(RistrettoPoint, [u8; 32]), OtError> {
    let arr: [u8; 32] = bytes.try_into().map_err(|_| OtError::InvalidPoint(index))?;
    let p = CompressedRistretto(arr).decompress().ok_or(OtError::InvalidPoint(index))?;
    if p == RistrettoPoint::identity() {
        return Err(OtError::InvalidPoint(index));
    }
    Ok((p, arr))
}

fn xor_into(dst: &mut [u8], src: &[u8]) {
    dst.iter_mut().zip(src).for_each(|(d, s)| *d ^= s);
}

/// Sender side of a batch of OTs. All message pairs must share one length.
pub fn send_batch<C: Channel + ?Sized, R: RngCore + CryptoRng>(
    ch: &mut C,
    session: u64,
    inputs: &[OtSenderInput],
    rng: &mut R,
    par: Parallelism,
) -> Result<(), OtError> {
    let len = inputs.first().map_or(0, |m| m.m0.len());
    if let Some(i) = inputs.iter().position(|m| m.m0.len() != len || m.m1.len() != len) {
        return Err(OtError::Length(i));
    }
    let a = Scalar::random(rng);
    let big_a = &a * RISTRETTO_BASEPOINT_TABLE;
    let a_bytes = big_a.compress().to_bytes();
    let a_big_a = a * big_a;

    let mut w = Writer::new();
    w.u8(GROUP_RISTRETTO255).u32(inputs.len() as u32).u32(len as u32).short_bytes(&a_bytes);
    ch.send_msg(MsgType::OtS1, session, w.finish())?;

    let payload = ch.expect(MsgType::OtR1, session)?;
    let mut r = Reader::new(&payload);
    let n = r.u32()? as usize;
    if n != inputs.len() {
        return Err(OtError::Arity { expected: inputs.len(), got: n });
    }
    let bs: Vec<&[u8]> = (0..n).map(|_| r.short_bytes()).collect::<Result<_, _>>()?;
    r.finish()?;

    let cts = par::map_range(n, par, |i| -> Result<Vec<u8>, OtError> {
        let (b, b_bytes) = decode_point(bs[i], i)?;
        let p0 = a * b;
        let p1 = p0 - a_big_a;
        let mut e0 = inputs[i].m0.clone();
        xor_into(&mut e0, &kdf(session, i, &a_bytes, &b_bytes, &p0, len));
        let mut e1 = inputs[i].m1.clone();
        xor_into(&mut e1, &kdf(session, i, &a_bytes, &b_bytes, &p1, len));
        e0.extend_from_slice(&e1);
        Ok(e0)
    });
    let mut w = Writer::new();
    w.u32(n as u32);
    for ct in cts {
        w.raw(&ct?);
    }
    ch.send_msg(MsgType::OtS2, session, w.finish())?;
    Ok(())
}

/// Receiver side of a batch of OTs.
pub fn receive_batch<C: Channel + ?Sized, R: RngCore + CryptoRng>(
    ch: &mut C,
    session: u64,
    choices: &[bool],
    rng: &mut R,
    par: Parallelism,
) -> Result<Vec<OtReceiverOutput>, OtError> {
    let payload = ch.expect(MsgType::OtS1, session)?;
    let mut r = Reader::new(&payload);
    let group = r.u8()?;
    if group != GROUP_RISTRETTO255 {
        return Err(OtError::Group(group));
    }
    let n = r.u32()? as usize;
    if n != choices.len() {
        return Err(OtError::Arity { expected: choices.len(), got: n });
    }
    let len = r.u32()? as usize;
    let (big_a, a_bytes) = decode_point(r.short_bytes()?, 0)?;
    r.finish()?;

    let secrets: Vec<Scalar> = (0..n).map(|_| Scalar::random(rng)).collect();
    let bs: Vec<[u8; 32]> = par::map_range(n, par, |i| {
        let gb = &secrets[i] * RISTRETTO_BASEPOINT_TABLE;
        let b = if choices[i] { big_a + gb } else { gb };
        b.compress().to_bytes()
    });
    let mut w = Writer::new();
    w.u32(n as u32);
    for b in &bs {
        w.short_bytes(b);
    }
    ch.send_msg(MsgType::OtR1, session, w.finish())?;

    let payload = ch.expect(MsgType::OtS2, session)?;
    let mut r = Reader::new(&payload);
    let m = r.u32()? as usize;
    if m != n {
        return Err(OtError::Arity { expected: n, got: m });
    }
    let cts: Vec<&[u8]> = (0..n).map(|_| r.raw(2 * len)).collect::<Result<_, _>>()?;
    r.finish()?;
    Ok(par::map_range(n, par, |i| {
        let shared = secrets[i] * big_a;
        let c = choices[i];
        let mut message = cts[i][c as usize * len..(c as usize + 1) * len].to_vec();
        xor_into(&mut message, &kdf(session, i, &a_bytes, &bs[i], &shared, len));
        OtReceiverOutput { choice: c, message }
    }))
}

/// A single OT; see [`send_batch`].
pub fn base_ot_send<C: Channel + ?Sized, R: RngCore + CryptoRng>(
    ch: &mut C,
    session: u64,
    input: &OtSenderInput,
    rng: &mut R,
) -> Result<(), OtError> {
    send_batch(ch, session, std::slice::from_ref(input), rng, Parallelism::Sequential)
}

/// A single OT; see [`receive_batch`].
pub fn base_ot_receive<C: Channel + ?Sized, R: RngCore + CryptoRng>(
    ch: &mut C,
    session: u64,
    choice: bool,
    rng: &mut R,
) -> Result<OtReceiverOutput, OtError> {
    Ok(receive_batch(ch, session, &[choice], rng, Parallelism::Sequential)?.remove(0))
}

/// Correlated OT, sender side: returns `n` uniform keys `K_i`; the receiver learns
/// `K_i ⊕ c_i·delta`.
pub fn cot_send<C: Channel + ?Sized, R: RngCore + CryptoRng>(
    ch: &mut C,
    session: u64,
    delta: u128,
    n: usize,
    rng: &mut R,
    par: Parallelism,
) -> Result<Vec<u128>, OtError> {
    let keys: Vec<u128> = (0..n).map(|_| rng.gen()).collect();
    let inputs: Vec<OtSenderInput> = keys
        .iter()
        .map(|&k| OtSenderInput { m0: k.to_le_bytes().to_vec(), m1: (k ^ delta).to_le_bytes().to_vec() })
        .collect();
    send_batch(ch, session, &inputs, rng, par)?;
    Ok(keys)
}

/// Correlated OT, receiver side: returns the tags `M_i = K_i ⊕ c_i·delta`.
pub fn cot_receive<C: Channel + ?Sized, R: RngCore + CryptoRng>(
    ch: &mut C,
    session: u64,
    choices: &[bool],
    rng: &mut R,
    par: Parallelism,
) -> Result<Vec<u128>, OtError> {
    let outs = receive_batch(ch, session, choices, rng, par)?;
    outs.iter()
        .map(|o| {
            let bytes: [u8; 16] = o.message.as_slice().try_into().map_err(|_| {
                OtError::Net(NetError::Malformed("correlated OT message is not 16 bytes".into()))
            })?;
            Ok(u128::from_le_bytes(bytes))
        })
        .collect()
}
