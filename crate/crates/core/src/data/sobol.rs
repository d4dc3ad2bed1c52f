//! Sobol low-discrepancy sequence in Gray-code order.
//!
//! Direction numbers are the first 21 dimensions of the Joe–Kuo
//! `new-joe-kuo-6.21201` table. Points are 32-bit binary fractions, so the
//! first `2^32` indices are available. Index 0 is the origin and is
//! normally skipped.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::DataError;

const BITS: usize = 32;
pub const MAX_SOBOL_DIM: usize = 21;

/// `(degree s, coefficient a, initial m_1..m_s)` for dimensions 2..=21.
const JOE_KUO: [(u32, u32, &[u32]); MAX_SOBOL_DIM - 1] = [
    (1, 0, &[1]),
    (2, 1, &[1, 3]),
    (3, 1, &[1, 3, 1]),
    (3, 2, &[1, 1, 1]),
    (4, 1, &[1, 1, 3, 3]),
    (4, 4, &[1, 3, 5, 13]),
    (5, 2, &[1, 1, 5, 5, 17]),
    (5, 4, &[1, 1, 5, 5, 5]),
    (5, 7, &[1, 1, 7, 11, 19]),
    (5, 11, &[1, 1, 5, 1, 1]),
    (5, 13, &[1, 1, 1, 3, 11]),
    (5, 14, &[1, 3, 5, 5, 31]),
    (6, 1, &[1, 3, 3, 9, 7, 49]),
    (6, 13, &[1, 1, 1, 15, 21, 21]),
    (6, 16, &[1, 3, 1, 13, 27, 49]),
    (6, 19, &[1, 1, 1, 15, 7, 5]),
    (6, 22, &[1, 3, 1, 15, 13, 25]),
    (6, 25, &[1, 1, 5, 5, 19, 61]),
    (7, 1, &[1, 3, 7, 11, 23, 15, 103]),
    (7, 4, &[1, 3, 7, 13, 13, 15, 69]),
];

fn direction_numbers(dim: usize) -> Vec<[u32; BITS]> {
    let mut v = Vec::with_capacity(dim);
    let mut first = [0u32; BITS];
    for (k, slot) in first.iter_mut().enumerate() {
        *slot = 1 << (BITS - 1 - k);
    }
    v.push(first);
    for &(s, a, m) in JOE_KUO.iter().take(dim.saturating_sub(1)) {
        let s = s as usize;
        let mut d = [0u32; BITS];
        for k in 0..s.min(BITS) {
            d[k] = m[k] << (BITS - 1 - k);
        }
        for k in s..BITS {
            let mut x = d[k - s] ^ (d[k - s] >> s);
            for j in 1..s {
                if (a >> (s - 1 - j)) & 1 == 1 {
                    x ^= d[k - j];
                }
            }
            d[k] = x;
        }
        v.push(d);
    }
    v
}

/// Deterministic Sobol point generator.
#[derive(Debug, Clone)]
pub struct SobolSampler {
    directions: Vec<[u32; BITS]>,
    shift: Vec<u32>,
    index: u64,
    state: Vec<u32>,
}

impl SobolSampler {
    /// Sampler whose next point is index 1 (the origin is skipped).
    pub fn new(dim: usize) -> Result<Self, DataError> {
        Self::with_scramble(dim, None)
    }

    /// With `Some(seed)`, every coordinate is XOR-ed with a seeded random
    /// digital shift. The net structure is preserved.
    pub fn with_scramble(dim: usize, seed: Option<u64>) -> Result<Self, DataError> {
        if dim == 0 || dim > MAX_SOBOL_DIM {
            return Err(DataError::SobolDimension(dim));
        }
        let shift = match seed {
            Some(s) => {
                let mut rng = ChaCha8Rng::seed_from_u64(s);
                (0..dim).map(|_| rng.random::<u32>()).collect()
            }
            None => vec![0; dim],
        };
        let mut s = Self {
            directions: direction_numbers(dim),
            shift,
            index: 0,
            state: vec![0; dim],
        };
        s.seek(1);
        Ok(s)
    }

    pub fn dim(&self) -> usize {
        self.directions.len()
    }

    /// Index of the point the next call to [`SobolSampler::next_point`] returns.
    pub fn index(&self) -> u64 {
        self.index
    }

    /// Positions the sampler at `index` in O(32 * dim).
    pub fn seek(&mut self, index: u64) {
        assert!(index < 1 << BITS, "Sobol index beyond 2^32");
        let gray = index ^ (index >> 1);
        for (j, d) in self.directions.iter().enumerate() {
            let mut x = 0u32;
            for (k, dk) in d.iter().enumerate() {
                if (gray >> k) & 1 == 1 {
                    x ^= dk;
                }
            }
            self.state[j] = x;
        }
        self.index = index;
    }

    /// The point at `index`, without moving the sampler.
    pub fn point(&self, index: u64) -> Vec<f64> {
        let mut s = self.clone();
        s.seek(index);
        s.current()
    }

    fn current(&self) -> Vec<f64> {
        const SCALE: f64 = 1.0 / 4_294_967_296.0;
        self.state
            .iter()
            .zip(&self.shift)
            .map(|(&x, &sh)| f64::from(x ^ sh) * SCALE)
            .collect()
    }

    pub fn next_point(&mut self) -> Vec<f64> {
        let out = self.current();
        let c = self.index.trailing_ones() as usize;
        assert!(c < BITS, "Sobol sequence exhausted");
        for (x, d) in self.state.iter_mut().zip(&self.directions) {
            *x ^= d[c];
        }
        self.index += 1;
        out
    }

    /// Draws `n` consecutive points.
    pub fn take(&mut self, n: usize) -> Vec<Vec<f64>> {
        (0..n).map(|_| self.next_point()).collect()
    }
}
