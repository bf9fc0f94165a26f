//! Counter-based Gaussian noise.
//!
//! Every draw is a pure function of `(seed, particle, step)`, so the same
//! increment comes back no matter how the particle loop is chunked across
//! workers. This is the reproducibility contract the simulator and the
//! Monte Carlo harness rely on.

/// Deterministic stream of i.i.d. standard normal increments indexed by
/// `(particle, step)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NoiseStream {
    seed: u64,
}

// Distinct salts keep the normal, uniform and substream counters from
// ever colliding on the same mixed word.
const SALT_NORMAL_A: u64 = 0x9E37_79B9_7F4A_7C15;
const SALT_NORMAL_B: u64 = 0xD1B5_4A32_D192_ED03;
const SALT_UNIFORM: u64 = 0x2545_F491_4F6C_DD1D;
const SALT_SUBSTREAM: u64 = 0x8538_ECB5_BD45_6EA3;

/// SplitMix64 finalizer: a bijective avalanche on 64 bits.
#[inline(always)]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[inline(always)]
fn mix(seed: u64, particle: u64, step: u64, salt: u64) -> u64 {
    let mut h = mix64(seed ^ salt);
    h = mix64(h.wrapping_add(particle).wrapping_mul(0xFF51_AFD7_ED55_8CCD) ^ particle);
    h = mix64(h ^ step.wrapping_mul(0xC4CE_B9FE_1A85_EC53) ^ step);
    h
}

/// Map a mixed word to a uniform in `(0, 1]` (safe to feed into `ln`).
#[inline(always)]
fn to_open_unit(word: u64) -> f64 {
    ((word >> 11) + 1) as f64 * (1.0 / 9007199254740992.0)
}

/// Map a mixed word to a uniform in `[0, 1)`.
#[inline(always)]
fn to_half_open_unit(word: u64) -> f64 {
    (word >> 11) as f64 * (1.0 / 9007199254740992.0)
}

impl NoiseStream {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent stream derived from this one; used for Monte Carlo
    /// batches and pilot runs.
    pub fn substream(&self, label: u64) -> Self {
        Self {
            seed: mix(self.seed, label, 0, SALT_SUBSTREAM),
        }
    }

    /// Standard normal draw for `(particle, step)`, via Box-Muller on two
    /// counter-mixed words.
    #[inline]
    pub fn standard_normal(&self, particle: u64, step: u64) -> f64 {
        let u1 = to_open_unit(mix(self.seed, particle, step, SALT_NORMAL_A));
        let u2 = to_half_open_unit(mix(self.seed, particle, step, SALT_NORMAL_B));
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Uniform draw in `[lo, hi)` for `(particle, step)`.
    #[inline]
    pub fn uniform(&self, particle: u64, step: u64, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * to_half_open_unit(mix(self.seed, particle, step, SALT_UNIFORM))
    }
}
