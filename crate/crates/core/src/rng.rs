//! Counter-based randomness.
//!
//! Every random quantity in the simulations is a pure function of a key
//! derived from the run seed plus a tuple of coordinates (site, height,
//! loop index, colour, ...). Replaying a stack under a different toppling
//! order therefore reads exactly the same values, and no generator state is
//! shared between sites.
//!
//! Mixing uses the SplitMix64 finaliser. Streams of many values (random walk
//! increments) run SplitMix64 from a keyed starting point.

use rand::RngCore;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// Domain-separation tags for the different stacks.
pub mod tag {
    pub const INSTRUCTION: u64 = 0x01;
    pub const SLEEP: u64 = 0x02;
    pub const COLOUR: u64 = 0x03;
    pub const LOOP: u64 = 0x04;
    pub const ORDER: u64 = 0x05;
    pub const CONFIG: u64 = 0x06;
    pub const CELL: u64 = 0x07;
    pub const SAMPLE: u64 = 0x08;
}

#[inline(always)]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Maps a 64-bit word to a uniform double in `[0, 1)`.
#[inline(always)]
pub fn unit_f64(u: u64) -> f64 {
    (u >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform integer in `[0, n)` by multiply-shift on the high half.
#[inline(always)]
pub fn below(u: u64, n: u32) -> u32 {
    (((u >> 32) * n as u64) >> 32) as u32
}

/// A hashed position in the tree of random streams.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct StreamKey(u64);

impl StreamKey {
    pub fn new(seed: u64) -> Self {
        StreamKey(mix64(seed.wrapping_add(GOLDEN)))
    }

    /// Descends one level. Order matters: `k.child(a).child(b)` and
    /// `k.child(b).child(a)` are unrelated keys.
    #[inline(always)]
    pub fn child(self, word: u64) -> Self {
        StreamKey(mix64(self.0 ^ mix64(word.wrapping_add(GOLDEN))))
    }

    /// The `index`-th value of this key, without any sequential state.
    #[inline(always)]
    pub fn at(self, index: u64) -> u64 {
        mix64(
            self.0
                ^ mix64(
                    index
                        .wrapping_mul(GOLDEN)
                        .wrapping_add(0x632B_E59B_D9B4_E019),
                ),
        )
    }

    pub fn raw(self) -> u64 {
        self.0
    }

    pub fn rng(self) -> KeyedRng {
        KeyedRng { state: self.0 }
    }
}

/// Seed for cell `cell` of a sweep started from `master`.
pub fn cell_seed(master: u64, cell: u64) -> u64 {
    StreamKey::new(master).child(tag::CELL).at(cell)
}

/// SplitMix64 stream started at a key.
#[derive(Clone, Debug)]
pub struct KeyedRng {
    state: u64,
}

impl KeyedRng {
    #[inline(always)]
    pub fn next_word(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN);
        mix64(self.state)
    }
}

impl RngCore for KeyedRng {
    fn next_u32(&mut self) -> u32 {
        (self.next_word() >> 32) as u32
    }

    fn next_u64(&mut self) -> u64 {
        self.next_word()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        for chunk in dst.chunks_mut(8) {
            let bytes = self.next_word().to_le_bytes();
            chunk.copy_from_slice(&bytes[..chunk.len()]);
        }
    }
}

/// Bernoulli(p) decided by comparing a uniform word against a threshold.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BernoulliThreshold {
    threshold: u64,
    always: bool,
}

impl BernoulliThreshold {
    pub fn new(p: f64) -> Self {
        let p = p.clamp(0.0, 1.0);
        if p >= 1.0 {
            return BernoulliThreshold {
                threshold: u64::MAX,
                always: true,
            };
        }
        BernoulliThreshold {
            threshold: (p * 18_446_744_073_709_551_616.0) as u64,
            always: false,
        }
    }

    #[inline(always)]
    pub fn test(&self, u: u64) -> bool {
        self.always || u < self.threshold
    }
}
