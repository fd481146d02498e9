//! Private trajectory tracking and range proofs over Boolean circuits.
//!
//! * [`fixed`]: fixed-point encoding and the plaintext reference computations.
//! * [`circuit`]: circuit IR, arithmetic builders, optimizer, evaluator and Bristol I/O.
//! * [`ot`]: Diffie-Hellman oblivious transfer and its correlated variant.
//! * [`smpc`]: two-party GMW evaluation, semi-honest or with IT-MACs.
//! * [`zkrange`]: designated-verifier zero-knowledge proofs of circuit satisfiability.
//! * [`net`]: length-prefixed framing shared by all protocols.

pub mod circuit;
pub mod fixed;
pub mod gf128;
pub mod mac;
pub mod net;
pub mod ot;
pub mod par;
pub mod smpc;
pub mod zkrange;
