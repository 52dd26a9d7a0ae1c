//! Reproducible random streams keyed by `(seed, stream id)`.
//!
//! Each stream is a ChaCha8 keystream whose key comes from the master seed and
//! whose 64-bit stream selector is the stream id, so chain `b` draws the same
//! numbers no matter in which order the chains are advanced.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

use crate::tensor::Tensor;

pub struct RngStream {
    seed: u64,
    id: u64,
    forks: u64,
    rng: ChaCha8Rng,
}

impl std::fmt::Debug for RngStream {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RngStream")
            .field("seed", &self.seed)
            .field("id", &self.id)
            .field("word_pos", &self.rng.get_word_pos())
            .finish()
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn new(seed: u64, id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(id);
        Self {
            seed,
            id,
            forks: 0,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    /// Derive a fresh stream with a new id; the parent keeps its own position.
    pub fn fork(&mut self) -> RngStream {
        self.forks += 1;
        let id = splitmix64(self.id ^ splitmix64(self.forks));
        RngStream::new(self.seed, id)
    }

    pub fn std_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    pub fn fill_std_normal(&mut self, out: &mut [f64]) {
        for v in out {
            *v = StandardNormal.sample(&mut self.rng);
        }
    }

    /// Uniform draw on [0, 1).
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    pub fn below(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    /// Poisson draw; a zero mean always yields zero.
    pub fn poisson(&mut self, mean: f64) -> f64 {
        if mean <= 0.0 {
            return 0.0;
        }
        Poisson::new(mean)
            .expect("poisson mean is positive and finite")
            .sample(&mut self.rng)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }
}

/// Tensor of i.i.d. standard normal draws.
pub fn sample_std_normal(rng: &mut RngStream, shape: &[usize]) -> Tensor {
    let mut t = Tensor::zeros(shape);
    rng.fill_std_normal(t.data_mut());
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_keys_equal_streams() {
        let a = sample_std_normal(&mut RngStream::new(0, 0), &[4]);
        let b = sample_std_normal(&mut RngStream::new(0, 0), &[4]);
        assert_eq!(a, b);
    }

    #[test]
    fn empty_shape_is_empty() {
        let t = sample_std_normal(&mut RngStream::new(1, 2), &[0]);
        assert!(t.is_empty());
        assert_eq!(t.shape(), &[0]);
    }

    #[test]
    fn million_draws_moments() {
        let t = sample_std_normal(&mut RngStream::new(7, 3), &[1_000_000]);
        let mean = t.mean();
        let var = t.data().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / t.len() as f64;
        assert!(mean.abs() <= 0.01, "mean {mean}");
        assert!((0.99..=1.01).contains(&var), "var {var}");
    }

    #[test]
    fn distinct_ids_uncorrelated() {
        let n = 100_000;
        let a = sample_std_normal(&mut RngStream::new(11, 0), &[n]);
        let b = sample_std_normal(&mut RngStream::new(11, 1), &[n]);
        let (ma, mb) = (a.mean(), b.mean());
        let cov: f64 = a.data().iter().zip(b.data()).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.data().iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.data().iter().map(|y| (y - mb).powi(2)).sum();
        let rho = cov / (va * vb).sqrt();
        assert!(rho.abs() < 0.01, "rho {rho}");
    }

    #[test]
    fn fork_differs_from_parent() {
        let mut parent = RngStream::new(5, 9);
        let mut child = parent.fork();
        assert_ne!(child.id(), parent.id());
        assert_ne!(child.next_u64(), parent.next_u64());
        let mut again = RngStream::new(5, 9);
        assert_eq!(again.fork().id(), child.id());
    }

    #[test]
    fn poisson_zero_mean() {
        let mut r = RngStream::new(0, 0);
        assert!((0..100).all(|_| r.poisson(0.0) == 0.0));
    }
}
