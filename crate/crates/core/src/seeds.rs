//! Sub-seed derivation. Every random stream in a run is seeded from one base
//! seed via `splitmix64(base ^ splitmix64(stage))`, and each stream is a
//! ChaCha20 generator (`rand_chacha::ChaCha20Rng::seed_from_u64`).
//!
//! The base seed is the same everywhere: `SynthConfig::seed`,
//! `TrainConfig::seed` and the pipeline `seed` all take it unmodified.

/// Pipeline stages with their own random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stage {
    Synth = 1,
    Init = 2,
    Shuffle = 3,
}

/// SplitMix64 finalizer.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(base: u64, stage: Stage) -> u64 {
    splitmix64(base ^ splitmix64(stage as u64))
}
