//! Sampled returns against exact policy evaluation.

use mnm_core::environments::{build_windy_three_state, WindyConfig};
use mnm_core::mdp::{expected_return, return_variance, TabularMdp, TabularPolicy};
use mnm_core::random::{random_mdp, random_policy, RandomMdpSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const EPISODES: usize = 40_000;

fn sample_initial(mdp: &TabularMdp, rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (s, p) in mdp.initial().iter().enumerate() {
        acc += p;
        if u < acc {
            return s;
        }
    }
    mdp.num_states() - 1
}

/// Mean and variance of sampled discounted returns, truncated once the
/// remaining discount mass is negligible.
fn sampled_moments(mdp: &TabularMdp, pi: &TabularPolicy, rng: &mut ChaCha8Rng) -> (f64, f64) {
    let horizon = (0..).find(|&h| mdp.truncation_error(h) < 1e-9).unwrap();
    let mut returns = Vec::with_capacity(EPISODES);
    for _ in 0..EPISODES {
        let mut s = sample_initial(mdp, rng);
        let (mut total, mut weight) = (0.0, 1.0);
        for _ in 0..=horizon {
            let a = pi.sample(s, rng);
            total += weight * mdp.reward(s, a);
            weight *= mdp.discount();
            s = mdp.dynamics().sample(s, a, rng);
        }
        returns.push(total);
    }
    let mean = returns.iter().sum::<f64>() / EPISODES as f64;
    let var = returns.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (EPISODES - 1) as f64;
    (mean, var)
}

fn assert_matches(mdp: &TabularMdp, pi: &TabularPolicy, rng: &mut ChaCha8Rng) {
    let (mean, var) = sampled_moments(mdp, pi, rng);
    let j = expected_return(mdp, pi).unwrap();
    let exact_var = return_variance(mdp, pi).unwrap();
    let se = (exact_var / EPISODES as f64).sqrt();
    assert!((mean - j).abs() <= 5.0 * se + 1e-9, "sampled {mean} vs exact {j} (se {se})");
    if exact_var > 1e-6 {
        let rel = (var - exact_var).abs() / exact_var;
        assert!(rel < 0.1, "sampled variance {var} vs exact {exact_var}");
    }
}

#[test]
fn sampled_returns_match_exact_moments_on_random_mdps() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..5 {
        let mdp = random_mdp(&mut rng, &RandomMdpSpec::default()).unwrap();
        let pi = random_policy(&mut rng, mdp.num_states(), mdp.num_actions()).unwrap();
        assert_matches(&mdp, &pi, &mut rng);
    }
}

#[test]
fn sampled_returns_match_exact_moments_on_windy_mdp() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mdp = build_windy_three_state(&WindyConfig::default()).unwrap();
    for action in 0..mdp.num_actions() {
        let pi = TabularPolicy::deterministic(mdp.num_actions(), &vec![action; mdp.num_states()]).unwrap();
        assert_matches(&mdp, &pi, &mut rng);
    }
}
