//! Seedable generators of random MDPs, models, and policies for property
//! suites.
//!
//! Every generator draws only from the caller's RNG, so a suite seeded with
//! `ChaCha8Rng::seed_from_u64(k)` is reproducible case by case.

use rand::Rng;

use crate::error::Result;
use crate::mdp::{TabularMdp, TabularModel, TabularPolicy};

/// Shape and value ranges of [`random_mdp`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomMdpSpec {
    pub max_states: usize,
    pub max_actions: usize,
    /// Chance that a transition entry is forced to zero (at least one entry
    /// per row survives).
    pub sparsity: f64,
    pub reward_range: (f64, f64),
    pub discount_range: (f64, f64),
}

impl Default for RandomMdpSpec {
    fn default() -> Self {
        Self {
            max_states: 5,
            max_actions: 3,
            sparsity: 0.3,
            reward_range: (0.05, 2.0),
            discount_range: (0.5, 0.95),
        }
    }
}

/// A probability vector of length `n`; entries are zeroed with chance
/// `sparsity`, keeping at least one.
pub fn random_distribution<R: Rng + ?Sized>(rng: &mut R, n: usize, sparsity: f64) -> Vec<f64> {
    let keep = rng.random_range(0..n);
    let mut weights: Vec<f64> = (0..n)
        .map(|i| {
            if i != keep && rng.random::<f64>() < sparsity {
                0.0
            } else {
                rng.random_range(0.05..1.0)
            }
        })
        .collect();
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    weights
}

pub fn random_mdp<R: Rng + ?Sized>(rng: &mut R, spec: &RandomMdpSpec) -> Result<TabularMdp> {
    let ns = rng.random_range(1..=spec.max_states);
    let na = rng.random_range(1..=spec.max_actions);
    random_mdp_sized(rng, ns, na, spec)
}

pub fn random_mdp_sized<R: Rng + ?Sized>(
    rng: &mut R,
    num_states: usize,
    num_actions: usize,
    spec: &RandomMdpSpec,
) -> Result<TabularMdp> {
    let mut transition = Vec::with_capacity(num_states * num_actions * num_states);
    for _ in 0..num_states * num_actions {
        transition.extend(random_distribution(rng, num_states, spec.sparsity));
    }
    let (lo, hi) = spec.reward_range;
    let reward = (0..num_states * num_actions)
        .map(|_| rng.random_range(lo..hi))
        .collect();
    let (glo, ghi) = spec.discount_range;
    let discount = rng.random_range(glo..ghi);
    let initial = random_distribution(rng, num_states, spec.sparsity);
    TabularMdp::new(num_states, num_actions, transition, reward, discount, initial)
}

/// A model with the same support as `p` and random weights on it.
pub fn random_model_on_support<R: Rng + ?Sized>(rng: &mut R, p: &TabularModel) -> Result<TabularModel> {
    let (ns, na) = (p.num_states(), p.num_actions());
    let mut probs = Vec::with_capacity(ns * na * ns);
    for s in 0..ns {
        for a in 0..na {
            let row = p.row(s, a);
            let weights: Vec<f64> = row
                .iter()
                .map(|&x| if x > 0.0 { rng.random_range(0.05..1.0) } else { 0.0 })
                .collect();
            let total: f64 = weights.iter().sum();
            probs.extend(weights.iter().map(|w| w / total));
        }
    }
    TabularModel::new(ns, na, probs)
}

/// A fully stochastic policy with every action probability positive.
pub fn random_policy<R: Rng + ?Sized>(rng: &mut R, num_states: usize, num_actions: usize) -> Result<TabularPolicy> {
    let mut probs = Vec::with_capacity(num_states * num_actions);
    for _ in 0..num_states {
        probs.extend(random_distribution(rng, num_actions, 0.0));
    }
    TabularPolicy::new(num_states, num_actions, probs)
}

/// A two-state, two-action MDP in which state 1 is absorbing and state 0
/// either stays or moves to 1, with random rates and rewards. Under a
/// deterministic policy it has exactly `H + 1` horizon-`H` trajectories.
pub fn random_absorbing_pair<R: Rng + ?Sized>(rng: &mut R, spec: &RandomMdpSpec) -> Result<TabularMdp> {
    let (lo, hi) = spec.reward_range;
    let mut transition = Vec::with_capacity(8);
    for _ in 0..2 {
        let leave = rng.random_range(0.05..0.95);
        transition.extend([1.0 - leave, leave]);
    }
    transition.extend([0.0, 1.0, 0.0, 1.0]);
    let reward = (0..4).map(|_| rng.random_range(lo..hi)).collect();
    let (glo, ghi) = spec.discount_range;
    let discount = rng.random_range(glo..ghi);
    TabularMdp::new(2, 2, transition, reward, discount, vec![1.0, 0.0])
}
