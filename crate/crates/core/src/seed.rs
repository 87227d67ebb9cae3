//! Stable derivation of independent RNG streams from a root seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mix a root seed with a domain tag and identity fields into a new seed.
/// The result depends only on the inputs, never on call order.
pub fn derive_seed(root: u64, tag: &str, ids: &[u64]) -> u64 {
    let mut h = splitmix64(root);
    for b in tag.bytes() {
        h = splitmix64(h ^ u64::from(b));
    }
    for &id in ids {
        h = splitmix64(h ^ id);
    }
    h
}

pub fn stream(root: u64, tag: &str, ids: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(root, tag, ids))
}
