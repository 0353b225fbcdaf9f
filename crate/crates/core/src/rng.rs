//! Named, counter-keyed random streams.
//!
//! Every consumer of randomness asks for a stream identified by the
//! experiment seed, a static purpose tag and a tuple of counters (layer
//! index, round, client id, epoch, ...). Streams never share state, so the
//! order in which they are created or consumed cannot change any value.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fold(tag: &str) -> u64 {
    // FNV-1a
    tag.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Derive the 64-bit key of stream `(seed, tag, counters)`.
pub fn stream_key(seed: u64, tag: &str, counters: &[u64]) -> u64 {
    let mut h = mix(seed ^ GOLDEN);
    h = mix(h ^ fold(tag));
    for &c in counters {
        h = mix(h.wrapping_add(GOLDEN) ^ c);
    }
    h
}

/// Open the stream `(seed, tag, counters)`.
pub fn stream(seed: u64, tag: &str, counters: &[u64]) -> StreamRng {
    let key = stream_key(seed, tag, counters);
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(counters.len() as u64);
    rng
}
