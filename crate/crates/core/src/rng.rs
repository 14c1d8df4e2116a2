//! Per-component random streams derived from one master seed.
//!
//! Every consumer asks for its own ChaCha stream by [`Stream`] id, so the
//! numbers a component sees do not depend on how many draws other
//! components made before it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Stream identifiers. The numeric values are part of the reproducibility
/// contract; never renumber them.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Env = 1,
    Explore = 2,
    Nets = 3,
    Batches = 4,
    Perturb = 5,
    Eval = 6,
    Expert = 7,
    TargetNoise = 8,
    Discriminator = 9,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedTree {
    master: u64,
}

impl SeedTree {
    pub fn new(master: u64) -> Self {
        Self { master }
    }

    pub fn master(&self) -> u64 {
        self.master
    }

    pub fn stream(&self, stream: Stream) -> Rng {
        self.substream(stream, 0)
    }

    /// Independent stream for item `index` of a component (episode seeds,
    /// evaluation episodes, ...).
    pub fn substream(&self, stream: Stream, index: u64) -> Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(splitmix(self.master ^ splitmix(index)));
        rng.set_stream(stream as u64);
        rng
    }

    /// Derived 64-bit seed, for APIs that take a plain seed.
    pub fn seed(&self, stream: Stream, index: u64) -> u64 {
        splitmix(splitmix(self.master.wrapping_add(stream as u64)) ^ index)
    }
}

/// SplitMix64 finaliser.
pub fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
