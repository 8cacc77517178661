//! Named sub-stream seed derivation.
//!
//! Every random component gets its own ChaCha stream whose seed is a hash of
//! the global seed and a path of tags, e.g. `derive(seed, &["sampler", "rns"])`
//! followed by `.child(epoch)`. Streams are therefore independent of the order
//! in which components are constructed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn mix_bytes(mut h: u64, bytes: &[u8]) -> u64 {
    for chunk in bytes.chunks(8) {
        let mut buf = [0u8; 8];
        buf[..chunk.len()].copy_from_slice(chunk);
        h = splitmix(h ^ u64::from_le_bytes(buf));
    }
    splitmix(h ^ bytes.len() as u64)
}

/// A derived seed. Cheap to copy; turn it into a generator with [`SeedPath::rng`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SeedPath(u64);

impl SeedPath {
    pub fn new(seed: u64) -> Self {
        SeedPath(splitmix(seed))
    }

    pub fn tag(self, name: &str) -> Self {
        SeedPath(mix_bytes(self.0, name.as_bytes()))
    }

    pub fn child(self, index: u64) -> Self {
        SeedPath(splitmix(self.0 ^ splitmix(index.wrapping_add(1))))
    }

    pub fn value(self) -> u64 {
        self.0
    }

    pub fn rng(self) -> Rng {
        Rng::seed_from_u64(self.0)
    }
}

/// Shorthand for `SeedPath::new(seed).tag(a).tag(b)...`.
pub fn derive(seed: u64, tags: &[&str]) -> SeedPath {
    tags.iter().fold(SeedPath::new(seed), |p, t| p.tag(t))
}
