//! Seeding and resampling helpers shared by data generation and training.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Portable, version-stable generator used everywhere randomness is needed.
pub type Rng64 = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> Rng64 {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Mixes a base seed with a path of integers into an independent child seed.
pub fn derive_seed(base: u64, path: &[u64]) -> u64 {
    let mut h = splitmix(base ^ 0x5241_5044_5345_4544);
    for &p in path {
        h = splitmix(h ^ splitmix(p.wrapping_add(0x9E37_79B9_7F4A_7C15)));
    }
    h
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Picks `n` indices into a pool of `len` items.
///
/// Without replacement (in ascending order) when the pool is large enough;
/// otherwise every index once followed by uniform draws with replacement.
pub fn resample_indices<R: Rng + ?Sized>(len: usize, n: usize, rng: &mut R) -> Vec<usize> {
    assert!(len > 0, "cannot resample an empty pool");
    if len >= n {
        let mut idx = index::sample(rng, len, n).into_vec();
        idx.sort_unstable();
        idx
    } else {
        let mut idx: Vec<usize> = (0..len).collect();
        idx.extend((len..n).map(|_| rng.gen_range(0..len)));
        idx
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derive_seed_separates_paths() {
        assert_ne!(derive_seed(1, &[0]), derive_seed(1, &[1]));
        assert_ne!(derive_seed(1, &[0, 1]), derive_seed(1, &[1, 0]));
        assert_eq!(derive_seed(9, &[3, 4]), derive_seed(9, &[3, 4]));
    }

    #[test]
    fn resample_shapes() {
        let mut rng = rng_from_seed(0);
        let down = resample_indices(10, 4, &mut rng);
        assert_eq!(down.len(), 4);
        assert!(down.windows(2).all(|w| w[0] < w[1]));
        let up = resample_indices(3, 8, &mut rng);
        assert_eq!(&up[..3], &[0, 1, 2]);
        assert!(up.iter().all(|&i| i < 3));
    }
}
