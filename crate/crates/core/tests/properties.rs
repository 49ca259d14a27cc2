//! Randomized invariants over the public API. Instances are generated from
//! a proptest-chosen seed so shrinking reports a single reproducible seed.

use mnm_core::bounds::{
    default_horizon, log_expected_return, next_state_occupancy, objective_l, tight_objective_lgamma,
    vmbpo_objective_exact, LgammaModel, ScheduleRule,
};
use mnm_core::mdp::{
    expected_return, occupancy, policy_evaluation_with, return_variance, solve_optimal, EvalMethod, Reward,
    TabularPolicy, ValueTable, SOLVE_TOL,
};
use mnm_core::random::{random_mdp, random_model_on_support, random_policy, RandomMdpSpec};
use mnm_core::solvers::optimistic_dynamics;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TOL: f64 = 1e-8;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn lower_bound_holds_for_any_model(seed in any::<u64>()) {
        let mut r = rng(seed);
        let mdp = random_mdp(&mut r, &RandomMdpSpec::default()).unwrap();
        let q = random_model_on_support(&mut r, mdp.dynamics()).unwrap();
        let pi = random_policy(&mut r, mdp.num_states(), mdp.num_actions()).unwrap();
        let l = objective_l(&mdp, &q, &pi).unwrap();
        let log_j = log_expected_return(&mdp, &pi).unwrap();
        prop_assert!(l <= log_j + TOL, "L {l} > log J {log_j}");
    }

    #[test]
    fn bound_at_the_true_model_is_finite_and_below_log_j(seed in any::<u64>()) {
        let mut r = rng(seed);
        let mdp = random_mdp(&mut r, &RandomMdpSpec::default()).unwrap();
        let pi = random_policy(&mut r, mdp.num_states(), mdp.num_actions()).unwrap();
        let at_p = objective_l(&mdp, mdp.dynamics(), &pi).unwrap();
        let log_j = log_expected_return(&mdp, &pi).unwrap();
        prop_assert!(at_p.is_finite());
        prop_assert!(at_p <= log_j + TOL);
    }

    #[test]
    fn jensen_chain(seed in any::<u64>()) {
        let mut r = rng(seed);
        let mdp = random_mdp(&mut r, &RandomMdpSpec::default()).unwrap();
        let q = random_model_on_support(&mut r, mdp.dynamics()).unwrap();
        let pi = random_policy(&mut r, mdp.num_states(), mdp.num_actions()).unwrap();
        let l = objective_l(&mdp, &q, &pi).unwrap();
        let h = default_horizon(&mdp);
        let lg = tight_objective_lgamma(&mdp, &pi, LgammaModel::Markov(&q), ScheduleRule::Geometric, h).unwrap();
        prop_assert!(l <= lg.bound_value + lg.truncation_error + TOL, "L {l} > L_gamma {}", lg.bound_value);
        prop_assert!(lg.holds, "L_gamma {} > log J {}", lg.bound_value, lg.reference_value);
    }

    #[test]
    fn exponentiated_objective_is_an_upper_bound(seed in any::<u64>()) {
        let mut r = rng(seed);
        let mdp = random_mdp(&mut r, &RandomMdpSpec::default()).unwrap();
        let pi = random_policy(&mut r, mdp.num_states(), mdp.num_actions()).unwrap();
        let h = (0..10_000).find(|&h| mdp.truncation_error(h) < 1e-10).unwrap();
        let v = vmbpo_objective_exact(&mdp, &pi, 1.0, h).unwrap();
        let j = expected_return(&mdp, &pi).unwrap();
        prop_assert!(v.lower >= j - TOL, "objective {} < J {j}", v.lower);
        prop_assert!(v.lower <= v.upper);
    }

    #[test]
    fn geometric_horizon_identity(
        g in 0.05f64..0.99,
        x in prop::collection::vec(-1.0f64..1.0, 1..80),
    ) {
        let mut partial = 0.0;
        let mut lhs = 0.0;
        for (h, xh) in x.iter().enumerate() {
            partial += xh;
            lhs += (1.0 - g) * g.powi(h as i32) * partial;
        }
        let tail = g.powi(x.len() as i32) * partial;
        let rhs: f64 = x.iter().enumerate().map(|(t, xt)| g.powi(t as i32) * xt).sum();
        prop_assert!((lhs + tail - rhs).abs() <= 1e-12, "{lhs} + {tail} vs {rhs}");
    }

    #[test]
    fn direct_and_iterative_evaluation_agree(seed in any::<u64>()) {
        let mut r = rng(seed);
        let spec = RandomMdpSpec { max_states: 8, ..RandomMdpSpec::default() };
        let mdp = random_mdp(&mut r, &spec).unwrap();
        let pi = random_policy(&mut r, mdp.num_states(), mdp.num_actions()).unwrap();
        let reward = Reward::StateAction(mdp.rewards());
        let g = mdp.discount();
        let direct = policy_evaluation_with(mdp.dynamics(), &pi, reward, g, SOLVE_TOL, EvalMethod::Direct).unwrap();
        let iterative = policy_evaluation_with(
            mdp.dynamics(), &pi, reward, g, SOLVE_TOL, EvalMethod::Iterative { max_iters: 1_000_000 },
        ).unwrap();
        for (a, b) in direct.values().iter().zip(iterative.values()) {
            prop_assert!((a - b).abs() <= 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn occupancies_are_distributions(seed in any::<u64>()) {
        let mut r = rng(seed);
        let mdp = random_mdp(&mut r, &RandomMdpSpec::default()).unwrap();
        let pi = random_policy(&mut r, mdp.num_states(), mdp.num_actions()).unwrap();
        for rho in [occupancy(&mdp, &pi).unwrap(), next_state_occupancy(&mdp, &pi).unwrap()] {
            prop_assert!(rho.iter().all(|v| *v >= 0.0));
            prop_assert!((rho.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn tilt_keeps_support_and_orders_by_value(seed in any::<u64>()) {
        let mut r = rng(seed);
        let mdp = random_mdp(&mut r, &RandomMdpSpec::default()).unwrap();
        let ns = mdp.num_states();
        let value = ValueTable((0..ns).map(|_| r.random_range(-5.0..5.0)).collect());
        let p = mdp.dynamics();
        let q = optimistic_dynamics(p, &value, mdp.discount()).unwrap();
        for s in 0..ns {
            for a in 0..mdp.num_actions() {
                prop_assert!((q.row(s, a).iter().sum::<f64>() - 1.0).abs() <= 1e-9);
                for i in 0..ns {
                    prop_assert_eq!(p.prob(s, a, i) > 0.0, q.prob(s, a, i) > 0.0);
                    for j in 0..ns {
                        if p.prob(s, a, i) > 0.0 && p.prob(s, a, j) > 0.0 && value.get(i) < value.get(j) {
                            prop_assert!(q.prob(s, a, i) / p.prob(s, a, i) < q.prob(s, a, j) / p.prob(s, a, j));
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn optimal_policy_dominates_deterministic_policies(seed in any::<u64>()) {
        let mut r = rng(seed);
        let mdp = random_mdp(&mut r, &RandomMdpSpec::default()).unwrap();
        let best = solve_optimal(mdp.dynamics(), Reward::StateAction(mdp.rewards()), mdp.discount()).unwrap();
        let j_best = expected_return(&mdp, &best.policy).unwrap();
        for _ in 0..10 {
            let actions: Vec<usize> = (0..mdp.num_states()).map(|_| r.random_range(0..mdp.num_actions())).collect();
            let pi = TabularPolicy::deterministic(mdp.num_actions(), &actions).unwrap();
            prop_assert!(expected_return(&mdp, &pi).unwrap() <= j_best + 1e-8);
        }
    }

    #[test]
    fn return_variance_is_non_negative(seed in any::<u64>()) {
        let mut r = rng(seed);
        let mdp = random_mdp(&mut r, &RandomMdpSpec::default()).unwrap();
        let pi = random_policy(&mut r, mdp.num_states(), mdp.num_actions()).unwrap();
        prop_assert!(return_variance(&mdp, &pi).unwrap() >= -1e-9);
    }
}
