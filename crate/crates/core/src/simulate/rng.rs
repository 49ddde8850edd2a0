//! Counter-based random streams keyed by `(base_seed, path_index, channel)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent random channel of one path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    Times = 0,
    Axes = 1,
    Magnitudes = 2,
    Signs = 3,
    Thinning = 4,
    Gaussian = 5,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent base seed for sub-experiment `label` of a run seeded with `base_seed`.
pub fn derive_seed(base_seed: u64, label: u64) -> u64 {
    splitmix64(splitmix64(base_seed) ^ splitmix64(label ^ 0x5851_f42d_4c95_7f2d))
}

/// 256-bit key of one path, derived from the base seed and path index.
fn path_key(base_seed: u64, path_index: u64) -> [u8; 32] {
    let mut state = splitmix64(splitmix64(base_seed) ^ path_index.wrapping_mul(0xd1b5_4a32_d192_ed03));
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        state = splitmix64(state);
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    key
}

/// Generator for one channel of one path.
pub fn stream(base_seed: u64, path_index: u64, channel: Channel) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::from_seed(path_key(base_seed, path_index));
    rng.set_stream(channel as u64);
    rng
}

/// All channels of one path.
pub struct PathStreams {
    pub times: ChaCha8Rng,
    pub axes: ChaCha8Rng,
    pub magnitudes: ChaCha8Rng,
    pub signs: ChaCha8Rng,
    pub thinning: ChaCha8Rng,
    pub gaussian: ChaCha8Rng,
}

impl PathStreams {
    pub fn new(base_seed: u64, path_index: u64) -> Self {
        let key = path_key(base_seed, path_index);
        let make = |channel: Channel| {
            let mut rng = ChaCha8Rng::from_seed(key);
            rng.set_stream(channel as u64);
            rng
        };
        Self {
            times: make(Channel::Times),
            axes: make(Channel::Axes),
            magnitudes: make(Channel::Magnitudes),
            signs: make(Channel::Signs),
            thinning: make(Channel::Thinning),
            gaussian: make(Channel::Gaussian),
        }
    }
}
