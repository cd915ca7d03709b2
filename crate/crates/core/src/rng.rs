//! Seed and stream derivation. Every random quantity comes from a ChaCha8
//! stream selected by `(seed, stream_id)`; stream ids are FNV-1a hashes of a
//! label and a task index so that parallel tasks never share a stream.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn stream_id(label: &str, index: u64) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h = OFFSET;
    for b in label.bytes().chain(index.to_le_bytes()) {
        h ^= u64::from(b);
        h = h.wrapping_mul(PRIME);
    }
    h
}

pub fn stream(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn task_rng(seed: u64, label: &str, index: u64) -> Rng {
    stream(seed, stream_id(label, index))
}
