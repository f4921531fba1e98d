//! Position sampling for the randomized law checkers.
//!
//! Naive uniform draws almost never land near membership boundaries, which is
//! where laws actually fail. The default sampler therefore mixes three
//! strategies: uniform draws on a payoff box, sparse-loss vectors, and
//! boundary-hugging points found by bisecting a segment across the membership
//! boundary of a target set.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::acceptance::AcceptanceSet;
use crate::scenario::{Position, ScenarioSpace};

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent RNG for one trial; merging by trial index is deterministic
/// no matter how trials are scheduled.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix64(seed ^ splitmix64(trial.wrapping_add(1))))
}

/// Mixture sampler over a payoff box `[-L, L]^n`.
#[derive(Debug, Clone)]
pub struct PositionSampler<'a> {
    space: &'a ScenarioSpace,
    half_width: f64,
}

impl<'a> PositionSampler<'a> {
    pub fn new(space: &'a ScenarioSpace, half_width: f64) -> Self {
        assert!(half_width > 0.0);
        PositionSampler { space, half_width }
    }

    pub fn space(&self) -> &ScenarioSpace {
        self.space
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    /// Uniform draw on the box.
    pub fn uniform(&self, rng: &mut impl Rng) -> Position {
        let l = self.half_width;
        let v = (0..self.space.len()).map(|_| rng.gen_range(-l..=l)).collect();
        self.space.canonicalize(v)
    }

    /// Mostly nonnegative entries with a few pronounced losses; exercises the
    /// loss-profile boundary of surplus-invariant sets.
    pub fn sparse_loss(&self, rng: &mut impl Rng) -> Position {
        let l = self.half_width;
        let n = self.space.len();
        let mut v: Vec<f64> = (0..n)
            .map(|_| if rng.gen_bool(0.5) { 0.0 } else { rng.gen_range(0.0..=l) })
            .collect();
        let losses = 1 + rng.gen_range(0..n.max(1));
        for _ in 0..losses {
            let i = rng.gen_range(0..n);
            v[i] = -rng.gen_range(0.0..=l);
        }
        self.space.canonicalize(v)
    }

    /// Nonnegative draw on `[0, L]^n`.
    pub fn nonnegative(&self, rng: &mut impl Rng) -> Position {
        let l = self.half_width;
        let v = (0..self.space.len()).map(|_| rng.gen_range(0.0..=l)).collect();
        self.space.canonicalize(v)
    }

    /// Nonnegative surplus supported on the given coordinates only.
    pub fn surplus_on(&self, rng: &mut impl Rng, allowed: &[bool]) -> Position {
        let l = self.half_width;
        let v = (0..self.space.len())
            .map(|i| if allowed[i] && rng.gen_bool(0.7) { rng.gen_range(0.0..=l) } else { 0.0 })
            .collect();
        self.space.canonicalize(v)
    }

    /// Default mixture without a target set: uniform and sparse-loss draws.
    pub fn sample(&self, rng: &mut impl Rng) -> Position {
        if rng.gen_bool(0.5) {
            self.uniform(rng)
        } else {
            self.sparse_loss(rng)
        }
    }

    /// Mixture targeted at a set: adds boundary-hugging points found by
    /// bisecting toward the membership boundary.
    pub fn sample_for_set(&self, rng: &mut impl Rng, set: &AcceptanceSet) -> Position {
        let strategy = rng.gen_range(0..4u8);
        match strategy {
            0 | 1 => self.sample(rng),
            2 => self.sparse_loss(rng),
            _ => self.near_boundary(rng, set).unwrap_or_else(|| self.uniform(rng)),
        }
    }

    /// Bisects a segment between an accepted and a rejected point and returns
    /// a jittered point near the crossing. `None` when no crossing segment is
    /// found in a few attempts.
    pub fn near_boundary(&self, rng: &mut impl Rng, set: &AcceptanceSet) -> Option<Position> {
        let inside = self.find_member(rng, set, true)?;
        let outside = self.find_member(rng, set, false)?;
        let mut lo = inside; // member
        let mut hi = outside; // non-member
        for _ in 0..40 {
            let mid = lo.add(&hi).scale(0.5);
            if set.contains(self.space, &mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let base = if rng.gen_bool(0.5) { lo } else { hi };
        let jitter = 10f64.powi(-rng.gen_range(3..8));
        let v = base
            .payoffs()
            .iter()
            .map(|x| x + rng.gen_range(-jitter..=jitter))
            .collect();
        Some(self.space.canonicalize(v))
    }

    fn find_member(&self, rng: &mut impl Rng, set: &AcceptanceSet, want: bool) -> Option<Position> {
        // Monotone sets usually accept large positive constants and reject
        // deep uniform losses; try those before random probing.
        let l = self.half_width;
        let candidates = [self.space.constant(l), self.space.constant(0.0), self.space.constant(-l)];
        for c in candidates {
            if set.contains(self.space, &c) == want {
                return Some(c);
            }
        }
        for _ in 0..16 {
            let x = self.sample(rng);
            if set.contains(self.space, &x) == want {
                return Some(x);
            }
        }
        None
    }
}
