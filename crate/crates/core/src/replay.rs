//! Ring-buffer replay storage with per-member bootstrap masks.
//!
//! Each stored transition carries one Bernoulli mask bit per ensemble member;
//! a member trains on a transition only when its bit is set. Masks are drawn
//! at collection time and stored alongside the transition, so replaying the
//! buffer replays the bootstrap assignment too. Sampling is uniform with
//! replacement.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{CoreError, Result};

/// One environment step plus its bootstrap mask vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition<A: Clone> {
    pub obs: Vec<f64>,
    pub action: A,
    pub reward: f64,
    pub next_obs: Vec<f64>,
    pub done: bool,
    /// One bit per ensemble member, each in `{0, 1}`.
    pub masks: Vec<u8>,
}

/// Fixed-capacity ring buffer; oldest entries are overwritten first.
pub struct ReplayBuffer<A: Clone> {
    capacity: usize,
    n_members: usize,
    items: Vec<Transition<A>>,
    cursor: usize,
}

impl<A: Clone> ReplayBuffer<A> {
    pub fn new(capacity: usize, n_members: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        ReplayBuffer {
            capacity,
            n_members,
            items: Vec::new(),
            cursor: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn n_members(&self) -> usize {
        self.n_members
    }

    /// Stores a transition, overwriting the oldest entry once full.
    pub fn push(&mut self, t: Transition<A>) -> Result<()> {
        if t.masks.len() != self.n_members {
            return Err(CoreError::MaskLength {
                expected: self.n_members,
                got: t.masks.len(),
            });
        }
        if !t.reward.is_finite() {
            return Err(CoreError::NonFinite {
                context: "pushed reward".into(),
            });
        }
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.cursor] = t;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
        Ok(())
    }

    /// Draws `batch` occupied slots uniformly with replacement.
    pub fn sample(
        &self,
        batch: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Vec<(&Transition<A>, usize)>> {
        if self.items.is_empty() {
            return Err(CoreError::EmptyBuffer);
        }
        Ok((0..batch)
            .map(|_| {
                let idx = rng.gen_range(0..self.items.len());
                (&self.items[idx], idx)
            })
            .collect())
    }
}

/// `n` independent Bernoulli(beta) draws, one per ensemble member.
///
/// `beta = 1` produces all ones exactly.
pub fn draw_masks(beta: f64, n: usize, rng: &mut ChaCha8Rng) -> Result<Vec<u8>> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(CoreError::OutOfRange {
            what: "mask beta",
            value: beta,
            range: "(0, 1]",
        });
    }
    Ok((0..n)
        .map(|_| u8::from(rng.gen::<f64>() < beta))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn t(id: f64, masks: Vec<u8>) -> Transition<usize> {
        Transition {
            obs: vec![id],
            action: 0,
            reward: id,
            next_obs: vec![id + 0.5],
            done: false,
            masks,
        }
    }

    #[test]
    fn beta_one_masks_are_all_ones() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..1000 {
            assert!(draw_masks(1.0, 5, &mut rng).unwrap().iter().all(|&m| m == 1));
        }
    }

    #[test]
    fn mask_mean_tracks_beta() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 100_000;
        let total: u32 = (0..n)
            .map(|_| u32::from(draw_masks(0.5, 1, &mut rng).unwrap()[0]))
            .sum();
        let mean = f64::from(total) / n as f64;
        assert!((mean - 0.5).abs() < 0.01, "mean = {mean}");
    }

    #[test]
    fn beta_out_of_range_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(draw_masks(0.0, 3, &mut rng).is_err());
        assert!(draw_masks(1.5, 3, &mut rng).is_err());
    }

    #[test]
    fn fifo_overwrite_keeps_newest_items() {
        let mut buf = ReplayBuffer::new(2, 1);
        buf.push(t(1.0, vec![1])).unwrap();
        buf.push(t(2.0, vec![1])).unwrap();
        buf.push(t(3.0, vec![0])).unwrap();
        assert_eq!(buf.len(), 2);
        let rewards: Vec<f64> = buf.items.iter().map(|x| x.reward).collect();
        assert!(rewards.contains(&2.0) && rewards.contains(&3.0));
        assert!(!rewards.contains(&1.0));
    }

    #[test]
    fn pushed_fields_round_trip_exactly() {
        let mut buf = ReplayBuffer::new(4, 3);
        let original = Transition {
            obs: vec![0.1, -0.2],
            action: 7usize,
            reward: 0.25,
            next_obs: vec![0.3, 0.4],
            done: true,
            masks: vec![1, 0, 1],
        };
        buf.push(original.clone()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let sampled = buf.sample(4, &mut rng).unwrap();
        for (item, idx) in sampled {
            assert_eq!(idx, 0);
            assert_eq!(*item, original);
        }
    }

    #[test]
    fn mask_length_mismatch_is_rejected() {
        let mut buf = ReplayBuffer::new(4, 3);
        let err = buf.push(t(1.0, vec![1, 0])).unwrap_err();
        assert!(matches!(err, CoreError::MaskLength { expected: 3, got: 2 }));
    }

    #[test]
    fn sampling_empty_buffer_is_an_error() {
        let buf: ReplayBuffer<usize> = ReplayBuffer::new(4, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(buf.sample(1, &mut rng), Err(CoreError::EmptyBuffer)));
    }

    #[test]
    fn sampling_is_uniform_over_occupied_slots() {
        let mut buf = ReplayBuffer::new(10, 1);
        for i in 0..10 {
            buf.push(t(i as f64, vec![1])).unwrap();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 100_000;
        let mut counts = [0u32; 10];
        for (_, idx) in buf.sample(n, &mut rng).unwrap() {
            counts[idx] += 1;
        }
        // 3 sigma of a Binomial(n, 0.1) frequency.
        let tol = 3.0 * (0.1 * 0.9 / n as f64).sqrt();
        for c in counts {
            let freq = f64::from(c) / n as f64;
            assert!((freq - 0.1).abs() < tol, "freq = {freq}");
        }
    }

    #[test]
    fn sampling_is_deterministic_under_a_fixed_seed() {
        let mut buf = ReplayBuffer::new(8, 1);
        for i in 0..8 {
            buf.push(t(i as f64, vec![1])).unwrap();
        }
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            buf.sample(16, &mut rng)
                .unwrap()
                .iter()
                .map(|(_, i)| *i)
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(42), draw(42));
    }
}
