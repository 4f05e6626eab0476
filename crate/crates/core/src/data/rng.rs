use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// The generator used everywhere randomness is needed.
///
/// ChaCha20 is specified independently of platform and word size, so a
/// `(seed, stream)` pair names the same sequence on every machine.
pub type StreamRng = ChaCha20Rng;

/// Independent stream `stream` of the generator seeded with `seed`.
///
/// Generators split their work by stream index (stream 0 for categorical
/// draws, stream `1 + j` for component `j`, and so on), so changing one
/// part of a sample never shifts the draws of another.
pub fn stream_rng(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
