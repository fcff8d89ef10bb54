//! Deterministic RNG stream derivation.
//!
//! Every stochastic stage (receiver noise, scope trigger offset, swarm
//! updates) draws from a ChaCha8 stream derived from a master seed plus a
//! domain tag and an index. Streams are independent and reproducible, so
//! Monte-Carlo cells can run in any order, on any number of threads, and
//! still produce identical results.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Domain tags keep unrelated consumers of the same master seed apart.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    /// One stream per receiver acquisition.
    Acquisition = 1,
    /// One stream per (iteration, particle) loss evaluation.
    TrainingEval = 2,
    /// Swarm velocity/position updates.
    Swarm = 3,
    /// Finite-difference gradient probes.
    Gradient = 4,
}

/// splitmix64 step; used to mix seed material into stream keys.
fn splitmix64(state: &mut u64) {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    *state = z ^ (z >> 31);
}

/// Derive an independent RNG for `(master_seed, domain, index)`.
pub fn stream(master_seed: u64, domain: Domain, index: u64) -> ChaCha8Rng {
    let mut s = master_seed ^ ((domain as u64).wrapping_mul(0xa076_1d64_78bd_642f));
    splitmix64(&mut s);
    let mut rng = ChaCha8Rng::seed_from_u64(s);
    rng.set_stream(index);
    rng
}

/// Two-level index for nested loops (e.g. iteration x particle).
pub fn stream2(master_seed: u64, domain: Domain, outer: u64, inner: u64) -> ChaCha8Rng {
    stream(master_seed, domain, outer.wrapping_mul(0x1_0000_0001).wrapping_add(inner))
}

/// FNV-1a over arbitrary bytes; used to derive stable per-cell seeds from
/// the physical coordinates of a sweep cell, so results do not depend on
/// grid composition or execution order.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}
