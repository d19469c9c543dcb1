//! Seeded random streams.
//!
//! Every random draw in the crate comes from [`Xoshiro256PlusPlus`], seeded
//! through SplitMix64 (`SeedableRng::seed_from_u64`). Floats and signs are
//! extracted from raw `u64` outputs with the fixed recipes below rather than
//! through a distribution crate, so a given seed produces the same numbers on
//! every platform and across dependency upgrades:
//!
//! * uniform in `[0, 1)`: `(next_u64() >> 11) * 2^-53`
//! * uniform in `[-1, 1)`: `2 * u - 1` with `u` as above
//! * random sign: `+1` if the top bit of `next_u64()` is clear, else `-1`
//!
//! Child seeds (replicas, sweep cells) are derived with [`derive_seed`], a
//! SplitMix64 hash chain over the master seed and the integer coordinates.

use rand_xoshiro::rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

/// The generator used for all trajectories and instances.
#[derive(Clone, Debug)]
pub struct SeededRng(Xoshiro256PlusPlus);

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        SeededRng(Xoshiro256PlusPlus::seed_from_u64(seed))
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    /// Uniform in `[0, 1)` with 53 bits of resolution.
    #[inline]
    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[-1, 1)`.
    #[inline]
    pub fn symmetric(&mut self) -> f64 {
        2.0 * self.unit() - 1.0
    }

    /// `+1.0` or `-1.0` with equal probability.
    #[inline]
    pub fn sign(&mut self) -> f64 {
        if self.next_u64() >> 63 == 0 {
            1.0
        } else {
            -1.0
        }
    }
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from a master seed and a path of coordinates,
/// e.g. `derive_seed(master, &[i, j, r])` for replica `r` of sweep cell `(i, j)`.
///
/// `h = splitmix64(master)`, then `h = splitmix64(h ^ splitmix64(c + 1))` for
/// each coordinate `c` in order.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix64(master), |h, &c| {
        splitmix64(h ^ splitmix64(c.wrapping_add(1)))
    })
}
