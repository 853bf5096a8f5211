//! Counter-based random streams.
//!
//! Every stream is keyed by a tuple of integers (seed, sweep point, shot, ...)
//! hashed with SplitMix64 into a ChaCha8 seed, so results never depend on the
//! order in which shots are executed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags keep unrelated consumers of the same shot apart.
pub mod tag {
    pub const DETUNING: u64 = 0x6465_7475;
    pub const MEASURE: u64 = 0x6d65_6173;
    pub const INIT: u64 = 0x696e_6974;
    pub const SENSOR: u64 = 0x7365_6e73;
    pub const TOMO: u64 = 0x746f_6d6f;
    pub const BOOTSTRAP: u64 = 0x626f_6f74;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn mix(parts: &[u64]) -> u64 {
    parts.iter().fold(0x5851_f42d_4c95_7f2d, |h, &p| splitmix64(h ^ splitmix64(p)))
}

pub fn stream(parts: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(parts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: u64 = stream(&[1, 2, 3]).random();
        let b: u64 = stream(&[1, 2, 3]).random();
        let c: u64 = stream(&[1, 2, 4]).random();
        let d: u64 = stream(&[2, 1, 3]).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
    }
}
