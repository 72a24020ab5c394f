//! Seeded randomness. Every component draws from its own stream, forked from
//! the invocation seed with a fixed label.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// 64-bit FNV-1a over the label bytes.
fn label_hash(label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Stream for `label` under the invocation `seed`.
pub fn fork(seed: u64, label: &str) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(label_hash(label));
    rng
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngCore;

    #[test]
    fn labels_give_independent_streams() {
        let a = fork(7, "init").next_u64();
        let b = fork(7, "train").next_u64();
        assert_ne!(a, b);
        assert_eq!(a, fork(7, "init").next_u64());
    }
}
