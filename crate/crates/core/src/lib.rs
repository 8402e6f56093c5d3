//! Simulator for federated, locally-private conversational recommendation.
//!
//! Users hold their interaction histories on simulated devices. A factorization machine over
//! users, items and attributes is trained with privatized gradient uploads, then a small
//! policy network that decides between asking about an attribute and recommending is trained
//! the same way against a simulated user.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod corpus;
pub mod dialog;
pub mod error;
pub mod eval;
pub mod federated;
pub mod fm;
pub mod ldp;
pub mod linalg;
pub mod par;
pub mod pipeline;
pub mod policy;

pub use error::{Error, Result};

/// Random stream used everywhere in the simulator.
pub type SimRng = rand_chacha::ChaCha8Rng;

/// Splits `base` into independent per-stream seeds (SplitMix64 finalizer).
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base
        .wrapping_add(stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
