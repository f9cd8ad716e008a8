//! Seeded random streams addressed by `(master seed, run id, component)`.
//!
//! Every run draws each of its random components from its own ChaCha8
//! stream: the master seed fixes the key, the run id selects the ChaCha
//! stream number and the component selects a disjoint 2^56-block window
//! inside it. A run's randomness therefore never depends on which worker
//! executes it or on how many other runs were drawn before.

use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::rational::Rational;

/// Independent randomness slots within one run (or one probe, toss, block).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Component {
    Schedule = 0,
    Pair = 1,
    Clock = 2,
    Source = 3,
    TimeS1 = 4,
    TimeS2 = 5,
    ParamS1 = 6,
    ParamS2 = 7,
    MessageS1 = 8,
    MessageS2 = 9,
    Coin = 10,
    Probe = 11,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct MasterSeed(pub u64);

impl MasterSeed {
    /// A fresh seed for an auxiliary experiment, derived without touching
    /// the streams of this one.
    pub fn derive(self, salt: u64) -> MasterSeed {
        let mut z = self.0 ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        MasterSeed(z ^ (z >> 31))
    }

    pub fn stream(self, index: u64, component: Component) -> StreamRng {
        StreamRng {
            seed: self,
            index,
            component,
            inner: None,
        }
    }
}

/// A lazily initialised stream; construction is free until the first draw.
#[derive(Clone, Debug)]
pub struct StreamRng {
    seed: MasterSeed,
    index: u64,
    component: Component,
    inner: Option<ChaCha8Rng>,
}

impl StreamRng {
    fn rng(&mut self) -> &mut ChaCha8Rng {
        self.inner.get_or_insert_with(|| {
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed.0);
            rng.set_stream(self.index);
            rng.set_word_pos((self.component as u128) << 60);
            rng
        })
    }
}

impl RngCore for StreamRng {
    fn next_u32(&mut self) -> u32 {
        self.rng().next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng().next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng().fill_bytes(dst)
    }
}

/// `ceil(p * 2^64)` as a threshold on a uniform 64-bit draw: `draw < t`
/// happens with probability exactly `t / 2^64`, within 2^-64 of `p`.
pub fn threshold(p: &Rational) -> u128 {
    assert!(
        !p.is_negative() && *p <= Rational::from_integer(1.into()),
        "probability outside [0,1]"
    );
    let scaled = p * Rational::from_integer(BigInt::from(1u8) << 64);
    scaled.ceil().to_integer().to_u128().expect("at most 2^64")
}

pub fn bernoulli(threshold: u128, rng: &mut dyn RngCore) -> bool {
    u128::from(rng.next_u64()) < threshold
}

/// Inverse-CDF sampler over a finite exact law.
#[derive(Clone, Debug)]
pub struct DiscreteSampler {
    cumulative: Vec<u128>,
}

impl DiscreteSampler {
    pub fn new(weights: &[Rational]) -> Self {
        let mut acc = Rational::default();
        let cumulative = weights
            .iter()
            .map(|w| {
                acc += w;
                threshold(&acc)
            })
            .collect();
        DiscreteSampler { cumulative }
    }

    pub fn sample(&self, rng: &mut dyn RngCore) -> usize {
        let u = u128::from(rng.next_u64());
        self.cumulative
            .iter()
            .position(|&c| u < c)
            .expect("weights sum to 1")
    }
}

/// Unbiased draw from `0..n` (Lemire's widening multiply with rejection).
pub fn below(n: u64, rng: &mut dyn RngCore) -> u64 {
    assert!(n > 0);
    let threshold = n.wrapping_neg() % n;
    loop {
        let m = u128::from(rng.next_u64()) * u128::from(n);
        if (m as u64) >= threshold {
            return (m >> 64) as u64;
        }
    }
}
