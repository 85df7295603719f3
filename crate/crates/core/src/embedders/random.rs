use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{EmbedError, Embedding, TweetEmbedder};
use crate::corpus::Tweet;
use crate::hashing::derive_seed;

/// Control representation: every tweet gets a vector drawn uniformly from
/// [-1, 1)^dim by a generator seeded from (seed, tweet id). Carries no
/// information about the text.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RandomEmbedder {
    pub dim: usize,
    pub seed: u64,
}

impl RandomEmbedder {
    pub fn new(dim: usize, seed: u64) -> Self {
        RandomEmbedder { dim, seed }
    }

    /// The vector for an arbitrary key.
    pub fn vector(&self, key: &str) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.seed, key));
        (0..self.dim).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }
}

impl TweetEmbedder for RandomEmbedder {
    fn name(&self) -> &str {
        "Random"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_tweet(&self, tweet: &Tweet) -> Result<Embedding, EmbedError> {
        Ok(Embedding::Dense(self.vector(&format!("tweet:{}", tweet.id))))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeded_and_id_dependent() {
        let r = RandomEmbedder::new(5, 3);
        let a = r.embed_tweet(&Tweet::new("1", "x")).unwrap();
        assert_eq!(a, r.embed_tweet(&Tweet::new("1", "different text")).unwrap());
        assert_ne!(a, r.embed_tweet(&Tweet::new("2", "x")).unwrap());
        assert_ne!(a, RandomEmbedder::new(5, 4).embed_tweet(&Tweet::new("1", "x")).unwrap());
    }
}
