//! Deterministic PRNG for sample-point generation.
//!
//! Reports must be byte-reproducible across platforms for a given seed, so
//! sampling uses a fixed splitmix64 stream rather than an external RNG.

/// Deterministic seed derived from coordinate bit patterns; keeps trial
/// data independent of how points are batched across workers.
pub fn seed_from_coords(tag: u64, coords: &[f64]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325 ^ tag;
    for v in coords {
        for b in v.to_bits().to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
    }
    h
}

/// splitmix64 stream.
#[derive(Clone, Debug)]
pub struct Rng {
    state: u64,
}

impl Rng {
    pub fn new(seed: u64) -> Rng {
        Rng { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1).
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in [lo, hi).
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform in the closed euclidean ball of radius `r` (rejection from the
    /// enclosing cube).
    pub fn in_ball(&mut self, dim: usize, r: f64) -> Vec<f64> {
        loop {
            let v: Vec<f64> = (0..dim).map(|_| self.uniform(-r, r)).collect();
            let norm2: f64 = v.iter().map(|x| x * x).sum();
            if norm2 <= r * r {
                return v;
            }
        }
    }
}
