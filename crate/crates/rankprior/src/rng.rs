//! Deterministic, platform-stable random-number streams.
//!
//! Every stochastic routine in this crate draws from a [`ChaCha12Rng`] whose
//! 256-bit key is derived from a `(seed, stream)` pair by SplitMix64. Two
//! consequences matter for reproducibility:
//!
//! - the same `(seed, stream)` always yields the same byte stream, on every
//!   platform and architecture (ChaCha is defined bytewise);
//! - distinct stream indices yield statistically independent streams, so
//!   replicate `r` of a simulation can be regenerated in isolation without
//!   drawing through replicates `0..r`.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// One SplitMix64 step: advances the state and returns the mixed output.
#[inline]
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Build the ChaCha generator for `(seed, stream)`.
///
/// The key is the first four SplitMix64 outputs seeded with a mix of `seed`
/// and `stream`, so that neighbouring seeds or stream indices share no key
/// material.
#[must_use]
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha12Rng {
    let mut state = seed ^ stream.wrapping_mul(0xA24B_AED4_963E_E407);
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha12Rng::from_seed(key)
}

/// Draw a uniform variate in the open interval (0, 1).
///
/// `random::<f64>()` yields [0, 1); the zero (probability 2^-53) is
/// rejected so that inverse-CDF transforms never hit an endpoint.
pub fn open_unit(rng: &mut impl Rng) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}
