use serde::{Deserialize, Serialize};

/// 64-bit seed from which independent random streams are derived.
///
/// Derivation is a pure function of the seed and a tag path, so a stream for
/// observation `(i, j)` is the same no matter which thread draws it first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RandomSeed(pub u64);

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RandomSeed {
    pub fn derive(self, tags: &[u64]) -> RandomSeed {
        let mut h = splitmix64(self.0);
        for &t in tags {
            h = splitmix64(h ^ splitmix64(t.wrapping_add(0x632B_E59B_D9B4_E019)));
        }
        RandomSeed(h)
    }

    pub fn rng(self) -> rand_chacha::ChaCha8Rng {
        use rand::SeedableRng;
        rand_chacha::ChaCha8Rng::seed_from_u64(self.0)
    }
}

impl From<u64> for RandomSeed {
    fn from(v: u64) -> Self {
        RandomSeed(v)
    }
}
