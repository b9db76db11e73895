//! Counter-based pseudorandom source (SplitMix64 finalizer over a keyed
//! counter). Every draw is a pure function of (seed, client, role, index), so
//! generation is reproducible across platforms and independent of evaluation
//! order.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// Which stream a draw belongs to; keeps the streams for different artifacts
/// of the same client disjoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamRole {
    /// Entries of a client's data matrix.
    MatrixA = 1,
    /// Entries of a client's additive noise vector.
    Noise = 2,
    /// Globally shared vectors (e.g. the generation target).
    InitVector = 3,
    /// Pixel data for synthetic classification sets.
    Pixels = 4,
    /// Probe points for fuzz sweeps in tests and checkers.
    Probe = 5,
}

fn finalize(mut z: u64) -> u64 {
    z ^= z >> 30;
    z = z.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z ^= z >> 27;
    z = z.wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    z
}

/// Keyed counter stream: `u64_at(i)` is the SplitMix64 output at counter `i`.
#[derive(Debug, Clone, Copy)]
pub struct CounterRng {
    key: u64,
}

impl CounterRng {
    pub fn new(seed: u64, client: u64, role: StreamRole) -> Self {
        let mut key = finalize(seed.wrapping_add(GOLDEN));
        key = finalize(key ^ client.wrapping_mul(0xA076_1D64_78BD_642F));
        key = finalize(key ^ (role as u64).wrapping_mul(0xE703_7ED1_A0B4_28DB));
        Self { key }
    }

    pub fn u64_at(&self, index: u64) -> u64 {
        finalize(self.key.wrapping_add(index.wrapping_mul(GOLDEN)))
    }

    /// Uniform draw in `[0, 1)` with 53 bits of precision.
    pub fn uniform_at(&self, index: u64) -> f64 {
        (self.u64_at(index) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal draw via Box-Muller on counters `2 index` and
    /// `2 index + 1` (cosine branch).
    pub fn normal_at(&self, index: u64) -> f64 {
        let u1 = self.uniform_at(2 * index);
        let u2 = self.uniform_at(2 * index + 1);
        // 1 - u1 lies in (0, 1], so the log is finite.
        (-2.0 * (1.0 - u1).ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}
