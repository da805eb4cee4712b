use mcoin_core::hash::sha256;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent generator for one (node, purpose) pair under a scenario seed.
pub fn stream(seed: u64, node: &str, purpose: &str) -> ChaCha8Rng {
    let mut material = seed.to_le_bytes().to_vec();
    material.extend_from_slice(node.as_bytes());
    material.push(0);
    material.extend_from_slice(purpose.as_bytes());
    ChaCha8Rng::from_seed(sha256(&material).0)
}
