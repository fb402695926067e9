//! Seeded random streams.
//!
//! Every independent task (a tree, a kernel entry, a sample's trajectory
//! batch) gets its own ChaCha stream derived from the root seed and the task
//! index, so results do not depend on how tasks are scheduled.

use rand::SeedableRng;
pub use rand_chacha::ChaCha8Rng as TaskRng;

/// Stream `task` of the generator seeded by `seed`.
pub fn task_rng(seed: u64, task: u64) -> TaskRng {
    let mut rng = TaskRng::seed_from_u64(seed);
    rng.set_stream(task);
    rng
}

/// Derives a child seed for a named pipeline stage.
pub fn derive_seed(seed: u64, stage: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ stage.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
