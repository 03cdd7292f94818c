//! Counter-based seed derivation.
//!
//! Every random stream is identified by `(root seed, purpose, indices)`. The
//! triple is folded through SplitMix64 into a 64-bit key that seeds a ChaCha8
//! generator, so stream `j` never depends on how many other streams exist.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// What a derived stream is used for. The discriminant is mixed into the key.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Realisation = 1,
    Chain = 2,
    PriorDraw = 3,
    SbcData = 4,
    SbcChain = 5,
    ContractionData = 6,
    ContractionChain = 7,
    MonteCarlo = 8,
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive_seed(root: u64, purpose: Purpose, indices: &[u64]) -> u64 {
    let mut key = splitmix64(root ^ splitmix64(purpose as u64));
    for &index in indices {
        key = splitmix64(key ^ splitmix64(index.wrapping_add(0x51_7c_c1_b7_27_22_0a_95)));
    }
    key
}

pub fn stream(root: u64, purpose: Purpose, indices: &[u64]) -> StreamRng {
    ChaCha8Rng::seed_from_u64(derive_seed(root, purpose, indices))
}
