//! Portable, replayable random streams.
//!
//! Every experiment is driven by a single 64-bit master seed. Sample `i`
//! gets its own stream, so results do not depend on how samples are spread
//! over threads. The full construction, so other implementations can
//! reproduce identical streams:
//!
//! ```text
//! SplitMix64 (state x, GAMMA = 0x9E3779B97F4A7C15):
//!     x  <- x + GAMMA                              (mod 2^64)
//!     z  <- x
//!     z  <- (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9   (mod 2^64)
//!     z  <- (z ^ (z >> 27)) * 0x94D049BB133111EB   (mod 2^64)
//!     out  z ^ (z >> 31)
//!
//! derive_seed(master, i) = output number i+1 of SplitMix64 started at x = master
//!                        = mix(master + (i + 1) * GAMMA)
//!
//! xoshiro256** (state s0..s3), seeded with s_k = output k+1 of SplitMix64
//! started at x = seed:
//!     out  rotl(s1 * 5, 7) * 9
//!     t  <- s1 << 17
//!     s2 <- s2 ^ s0;  s3 <- s3 ^ s1;  s1 <- s1 ^ s2;  s0 <- s0 ^ s3
//!     s2 <- s2 ^ t;   s3 <- rotl(s3, 45)
//!
//! uniform [0, 1):  (out >> 11) * 2^-53
//! ```

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;

const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of the stream for sample `index` under `master`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    mix(master.wrapping_add(index.wrapping_add(1).wrapping_mul(GAMMA)))
}

#[derive(Clone, Debug)]
pub struct SampleRng(Xoshiro256StarStar);

impl SampleRng {
    pub fn seed_from_u64(seed: u64) -> Self {
        SampleRng(Xoshiro256StarStar::seed_from_u64(seed))
    }

    /// Independent stream for one sample of an experiment.
    pub fn for_sample(master: u64, index: u64) -> Self {
        Self::seed_from_u64(derive_seed(master, index))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    /// Uniform draw from `[0, 1)` with 53 bits of resolution.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform draw from `(0, 1)`; zeros are redrawn.
    pub fn next_open01(&mut self) -> f64 {
        loop {
            let u = self.next_f64();
            if u > 0.0 {
                return u;
            }
        }
    }
}
