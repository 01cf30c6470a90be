//! Named, counter-addressed random streams.
//!
//! Every run seed owns a family of independent ChaCha streams, one per
//! [`Stream`] tag. Within a tag, the 64-bit ChaCha stream id selects a
//! per-round substream, so the draws for round `t` never depend on how many
//! numbers earlier rounds consumed. Two policies run on the same seed
//! therefore see the same arm sets, delays and preference noise even when
//! their actions differ.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Independent randomness sources of one simulated run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    /// Ground-truth preference vector.
    Theta,
    /// Per-round arm sets.
    Arms,
    /// Preference (Bernoulli) noise.
    Preference,
    /// Feedback delays.
    Delay,
    /// Network initialization.
    Init,
}

impl Stream {
    fn tag(self) -> &'static [u8; 8] {
        match self {
            Stream::Theta => b"theta\0\0\0",
            Stream::Arms => b"arms\0\0\0\0",
            Stream::Preference => b"pref\0\0\0\0",
            Stream::Delay => b"delay\0\0\0",
            Stream::Init => b"init\0\0\0\0",
        }
    }
}

/// Generator for substream `index` of `stream` under `seed`.
pub fn stream_rng(seed: u64, stream: Stream, index: u64) -> ChaCha12Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(stream.tag());
    let mut rng = ChaCha12Rng::from_seed(key);
    rng.set_stream(index);
    rng
}
