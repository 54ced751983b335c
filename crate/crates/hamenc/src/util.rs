/// Derives an independent 64-bit seed from a base seed and a stream id
/// (splitmix64 finalizer). Equal inputs always yield equal outputs, so
/// per-fold and per-epoch RNG streams are reproducible.
pub(crate) fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
