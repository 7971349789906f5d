//! Platform-independent pseudo-random generator.
//!
//! xorshift64* (Vigna 2014): shifts (12, 25, 27), output multiplier
//! 0x2545F4914F6CDD1D. Seeds pass through one round of splitmix64
//! (increment 0x9E3779B97F4A7C15, multipliers 0xBF58476D1CE4E5B9 and
//! 0x94D049BB133111EB) so that small or zero seeds give a non-zero state.
//! Uniform reals take the top 53 bits; normals use the Box-Muller cosine
//! branch. Every consumer in this crate draws from this generator, so a
//! given seed yields the same stream on every platform.

const SPLITMIX_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(SPLITMIX_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct XorShift64Star {
    state: u64,
}

impl XorShift64Star {
    pub fn new(seed: u64) -> Self {
        let mut state = splitmix64(seed);
        if state == 0 {
            state = SPLITMIX_GAMMA;
        }
        XorShift64Star { state }
    }

    /// Independent stream for a (seed, purpose) pair.
    pub fn stream(seed: u64, purpose: u64) -> Self {
        Self::new(seed ^ splitmix64(purpose.wrapping_mul(0xD1B5_4A32_D192_ED03)))
    }

    pub fn next_u64(&mut self) -> u64 {
        let mut x = self.state;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        self.state = x;
        x.wrapping_mul(0x2545_F491_4F6C_DD1D)
    }

    /// Uniform in [0, 1).
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0);
        ((self.next_f64() * n as f64) as usize).min(n - 1)
    }

    pub fn normal(&mut self) -> f64 {
        // 1 - u keeps the log argument in (0, 1].
        let u1 = 1.0 - self.next_f64();
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}
