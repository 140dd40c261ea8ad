use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Derives an independent stream for a task identified by `parts`, so
/// parallel work is reproducible regardless of scheduling.
pub(crate) fn derive(seed: u64, parts: &[u64]) -> u64 {
    // splitmix64 finalizer over the parts.
    let mut h = seed ^ 0x9e37_79b9_7f4a_7c15;
    for &p in parts {
        h = mix(h ^ mix(p.wrapping_add(0x9e37_79b9_7f4a_7c15)));
    }
    h
}

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub(crate) fn rng(seed: u64, parts: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(seed, parts))
}
