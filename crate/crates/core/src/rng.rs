use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;

/// Seedable deterministic random stream.
///
/// Every randomized operation in this crate draws from an explicit
/// `impl Rng`; `RngHandle` is the concrete stream used by trainers and
/// the benchmark harness. Identical seeds yield identical draw
/// sequences, which is what makes whole experiments replayable.
#[derive(Debug, Clone)]
pub struct RngHandle(ChaCha12Rng);

impl RngHandle {
    pub fn from_seed(seed: u64) -> Self {
        Self(ChaCha12Rng::seed_from_u64(seed))
    }
}

impl RngCore for RngHandle {
    fn next_u32(&mut self) -> u32 {
        self.0.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.0.fill_bytes(dest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn same_seed_same_stream() {
        let mut a = RngHandle::from_seed(7);
        let mut b = RngHandle::from_seed(7);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn different_seeds_diverge() {
        let mut a = RngHandle::from_seed(1);
        let mut b = RngHandle::from_seed(2);
        let a_draws: Vec<u64> = (0..8).map(|_| a.next_u64()).collect();
        let b_draws: Vec<u64> = (0..8).map(|_| b.next_u64()).collect();
        assert_ne!(a_draws, b_draws);
    }

    #[test]
    fn usable_as_generic_rng() {
        let mut rng = RngHandle::from_seed(3);
        let x: f64 = rng.random();
        assert!((0.0..1.0).contains(&x));
    }
}
