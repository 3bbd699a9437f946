//! Core of the tool-interaction policy stack.
//!
//! Everything in this crate is pure computation over `alloc` collections: the
//! object-centric world model, the symbolic transition function, word
//! embeddings with knowledge-graph retrofitting, a small reverse-mode
//! differentiation kernel, the goal-conditioned policy network, demonstration
//! corpora and the training/evaluation logic. File formats, CLIs and the
//! instruction server live in the `tango` crate.
#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod corpus;
pub mod domain;
pub mod embed;
pub mod error;
pub mod harness;
pub mod math;
pub mod nn;
pub mod policy;
pub mod sim;
pub mod world;

pub use error::{Error, Result};

/// Seeded generator used everywhere randomness is needed.
pub type Rng = rand_chacha::ChaCha8Rng;

/// Builds the crate-wide generator from a 64-bit seed.
pub fn rng_from_seed(seed: u64) -> Rng {
    use rand::SeedableRng;
    Rng::seed_from_u64(seed)
}

/// Derives an independent stream seed from a base seed and an index.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    // splitmix64 finalizer over the combined value
    let mut z = seed ^ index.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
