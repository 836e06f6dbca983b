//! Deterministic substreams for reproducible parallel sampling.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent generator for the stream addressed by `(seed, path...)`.
///
/// The same seed and path always give the same generator, regardless of the
/// order in which streams are created or which thread creates them.
pub fn substream(seed: u64, path: &[u64]) -> ChaCha12Rng {
    let mut key = splitmix64(seed);
    for &p in path {
        key = splitmix64(key ^ splitmix64(p.wrapping_add(0x51ed_270b)));
    }
    ChaCha12Rng::seed_from_u64(key)
}
