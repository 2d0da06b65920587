//! Deterministic random streams for sequential and parallel runs.
//!
//! Every stochastic command takes one master seed. Anything that needs its
//! own generator — a trace acquisition, a Monte Carlo block — derives a
//! stream seed as a pure function of the master seed and a stream index, so
//! results never depend on worker count, scheduling, or evaluation order.
//!
//! The derivation is the SplitMix64 sequence: stream `i` gets
//! `mix(master + (i + 1) · GOLDEN_GAMMA)`, where `mix` is the SplitMix64
//! finalizer. Distinct indices land in distinct, well-separated states of a
//! bijective avalanche, which is exactly the property the original
//! generator relies on for its `split` operation.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Weyl-sequence increment used by SplitMix64 (`2⁶⁴/φ`, rounded to odd).
pub const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer: a bijective avalanche over `u64`.
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for the `index`-th independent stream derived from `master`.
pub fn stream_seed(master: u64, index: u64) -> u64 {
    mix(master.wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}

/// Generator for the `index`-th independent stream derived from `master`.
pub fn stream_rng(master: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_seed(master, index))
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
