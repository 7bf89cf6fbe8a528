//! Counter-based random streams.
//!
//! Every variate is addressed by `(seed, stream, draw)`. A draw owns a short
//! private generator derived from that triple, so the value of draw `i` does
//! not depend on how many words earlier draws consumed, or on which worker
//! produced them. Replication `r` of an experiment uses `stream = r`.

use rand::RngCore;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
const STREAM_GAMMA: u64 = 0xD1B5_4A32_D192_ED03;
const DRAW_GAMMA: u64 = 0xA076_1D64_78BD_642F;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Key of one independent stream: a seed plus a stream (replication) index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey {
    seed: u64,
    stream: u64,
    key: u64,
}

impl StreamKey {
    pub fn new(seed: u64, stream: u64) -> Self {
        let key = mix64(mix64(seed ^ GOLDEN_GAMMA).wrapping_add(stream.wrapping_mul(STREAM_GAMMA)));
        Self { seed, stream, key }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// A sibling stream family for the same seed, e.g. the second sample of
    /// a decoupled pair or an oracle that must not share draws with the
    /// estimator it checks.
    pub fn salted(seed: u64, salt: u64, stream: u64) -> Self {
        Self::new(mix64(seed ^ mix64(salt)), stream)
    }

    /// Generator owning draw `draw` of this stream.
    #[inline]
    pub fn draw(&self, draw: u64) -> CounterRng {
        CounterRng {
            state: self.key.wrapping_add(draw.wrapping_mul(DRAW_GAMMA)),
        }
    }
}

/// SplitMix64 generator started at `key + draw * DRAW_GAMMA`. Used for the
/// handful of words a single draw consumes; outputs pass through the full
/// finalizer, so adjacent draws do not share structure.
#[derive(Debug, Clone)]
pub struct CounterRng {
    state: u64,
}

impl RngCore for CounterRng {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix64(self.state)
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        for chunk in dst.chunks_mut(8) {
            let bytes = self.next_u64().to_le_bytes();
            chunk.copy_from_slice(&bytes[..chunk.len()]);
        }
    }
}

/// Uniform on (0, 1] from the top 53 bits of a word.
#[inline]
pub fn open_unit(word: u64) -> f64 {
    ((word >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}
