//! Counter-based random streams keyed by (seed, domain, index).
//!
//! Every stream is a ChaCha8 generator whose key is derived from the seed and
//! a pair of 64-bit labels, so values never depend on generation order.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Stream domains. Keeping them distinct makes replicas of different kinds
/// independent even under the same seed.
pub mod domain {
    pub const LATTICE: u64 = 1;
    pub const EXACT: u64 = 2;
    pub const POINT_PATH: u64 = 3;
    pub const BROWNIAN: u64 = 4;
    pub const CONFINEMENT: u64 = 5;
}

fn splitmix(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KeyedRng {
    seed: u64,
}

impl KeyedRng {
    pub fn new(seed: u64) -> Self {
        KeyedRng { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent generator for (domain, index).
    pub fn stream(&self, domain: u64, index: u64) -> ChaCha8Rng {
        let mut state = self.seed;
        splitmix(&mut state);
        state ^= domain.wrapping_mul(0xD6E8_FEB8_6659_FD93);
        splitmix(&mut state);
        state ^= index.wrapping_mul(0xA076_1D64_78BD_642F);
        let mut key = [0u8; 32];
        for chunk in key.chunks_mut(8) {
            chunk.copy_from_slice(&splitmix(&mut state).to_le_bytes());
        }
        ChaCha8Rng::from_seed(key)
    }

    /// Standard normals for cells start, start+1, ... of one lattice level.
    /// Each cell owns four 32-bit words of the level's stream, so any chunk
    /// can be filled independently.
    pub fn fill_cell_normals(&self, level: u64, start: u64, out: &mut [f64]) {
        let mut rng = self.stream(domain::LATTICE, level);
        rng.set_word_pos(start as u128 * 4);
        for z in out.iter_mut() {
            let u1 = ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64);
            let u2 = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
            *z = (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
        }
    }
}

/// Draws n standard normals from a stream.
pub fn normals(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cell_normals_do_not_depend_on_chunking() {
        let rng = KeyedRng::new(7);
        let mut whole = vec![0.0; 100];
        rng.fill_cell_normals(3, 0, &mut whole);
        let mut parts = vec![0.0; 100];
        for (k, chunk) in parts.chunks_mut(17).enumerate() {
            rng.fill_cell_normals(3, 17 * k as u64, chunk);
        }
        assert_eq!(whole, parts);
        let mut other = vec![0.0; 100];
        rng.fill_cell_normals(4, 0, &mut other);
        assert_ne!(whole, other);
    }

    #[test]
    fn cell_normals_have_unit_variance() {
        let mut z = vec![0.0; 200_000];
        KeyedRng::new(1).fill_cell_normals(0, 0, &mut z);
        let n = z.len() as f64;
        let mean = z.iter().sum::<f64>() / n;
        let var = z.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        assert!(mean.abs() < 4.0 / n.sqrt());
        assert!((var - 1.0).abs() < 4.0 * (2.0 / n).sqrt());
    }

    #[test]
    fn streams_differ_by_label() {
        let rng = KeyedRng::new(11);
        let a = normals(&mut rng.stream(domain::EXACT, 0), 4);
        let b = normals(&mut rng.stream(domain::EXACT, 1), 4);
        let c = normals(&mut rng.stream(domain::POINT_PATH, 0), 4);
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_eq!(a, normals(&mut rng.stream(domain::EXACT, 0), 4));
    }
}
