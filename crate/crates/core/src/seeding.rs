//! Deterministic seed derivation. Every stochastic routine takes an explicit
//! seed; replication `r` of stream `s` draws from `derive(seed, s, r)`, so
//! results do not depend on execution order or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

pub fn derive(seed: u64, stream: u64, index: u64) -> u64 {
    splitmix(splitmix(splitmix(seed) ^ stream) ^ index)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Named streams so independent consumers of one seed never collide.
pub mod stream {
    pub const GRAPH: u64 = 1;
    pub const KMEANS: u64 = 2;
    pub const OMEGA: u64 = 3;
    pub const CLUSTER_K: u64 = 4;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivation_is_stable_and_spreads() {
        assert_eq!(derive(7, 1, 0), derive(7, 1, 0));
        let seen: std::collections::HashSet<u64> = (0..1000).map(|r| derive(7, 1, r)).collect();
        assert_eq!(seen.len(), 1000);
        assert_ne!(derive(7, 1, 0), derive(7, 2, 0));
        assert_ne!(derive(7, 1, 0), derive(8, 1, 0));
    }
}
