//! Deterministic random streams.
//!
//! Every experiment has one root seed. Subsystems (environment, dropout masks,
//! ascent restarts, GAN noise, ...) draw from child streams derived by hashing
//! the root seed together with a stream tag and an index, so each subsystem can
//! be reseeded without perturbing the others.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Named child streams of an experiment seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stream {
    Environment,
    Init,
    Training,
    Selection,
    Ascent,
    Gan,
    Baseline,
}

impl Stream {
    fn tag(self) -> u64 {
        match self {
            Stream::Environment => 0x656e_7669,
            Stream::Init => 0x696e_6974,
            Stream::Training => 0x7472_6169,
            Stream::Selection => 0x7365_6c65,
            Stream::Ascent => 0x6173_6365,
            Stream::Gan => 0x6761_6e00,
            Stream::Baseline => 0x6261_7365,
        }
    }
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of child `index` of `stream` under `root`.
pub fn child_seed(root: u64, stream: Stream, index: u64) -> u64 {
    mix64(mix64(root ^ stream.tag()).wrapping_add(mix64(index)))
}

pub fn stream_rng(root: u64, stream: Stream, index: u64) -> StreamRng {
    StreamRng::seed_from_u64(child_seed(root, stream, index))
}

pub fn seeded(seed: u64) -> StreamRng {
    StreamRng::seed_from_u64(seed)
}
