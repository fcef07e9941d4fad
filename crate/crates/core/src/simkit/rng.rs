use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Random stream for work item `index` under `seed`.
///
/// ChaCha is counter based: `set_stream` selects one of 2^64 independent
/// keystreams, so a stream depends only on `(seed, index)` and never on which
/// thread consumes it or in what order.
pub fn path_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}
