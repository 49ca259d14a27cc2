//! Randomized property suites over the bound evaluators and solvers.
//!
//! Each suite draws its instances from its own stream,
//! `seeding::stream("verify-bounds/<suite>", seed)`, so suites can be run
//! alone or in any order with the same result. A case's margin is how far it
//! is from violating its inequality (negative means violated); the report
//! keeps the smallest margin seen.
//!
//! The verbatim goal-reaching bound is carried as an informational suite:
//! its reward is positive at `q = p` wherever the goal is unreachable in
//! one step, so it fails on most random instances and does not count
//! towards the exit status. The next-state form is checked instead.

use mnm_core::bounds::{
    check_lower_bound, default_horizon, goal_bound, goal_bound_next_state, objective_l, optimal_discount,
    optimal_trajectory_model, reweight_by_return, tight_objective_lgamma, vmbpo_objective_exact,
    next_state_occupancy, BoundReport, DiscountSchedule, GoalTask, LgammaModel, ScheduleRule,
};
use mnm_core::classifier::{bayes_classifier, log_odds};
use mnm_core::environments::{build_gridworld, build_windy_three_state, preset, WindyConfig, PRESET_NAMES};
use mnm_core::mdp::{
    enumerate_trajectories, expected_return, occupancy, policy_evaluation_with, return_variance,
    EnumerationLimits, EvalMethod, Reward, TabularMdp, TabularModel, TabularPolicy, TrajectorySet, WeightedTrajectory,
    ValueTable, SOLVE_TOL,
};
use mnm_core::random::{
    random_absorbing_pair, random_distribution, random_mdp, random_mdp_sized, random_model_on_support,
    random_policy, RandomMdpSpec,
};
use mnm_core::solvers::{mnm_value_iteration, optimistic_dynamics, ClassifierSource, SolverConfig};
use mnm_core::Result;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::seeding;

/// Perturbed alternatives tried per instance by the maximizer suites.
pub const PERTURBATIONS: usize = 1000;
/// Horizon of the tightness suite.
pub const TIGHTNESS_HORIZON: usize = 50;
/// Return variance above which the exponentiated objective must be strictly above `J`.
pub const STRICT_VARIANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub name: &'static str,
    pub cases: usize,
    pub failures: usize,
    /// Smallest margin over all cases; `None` for pass/fail-only suites.
    pub worst_margin: Option<f64>,
    /// Reported but excluded from the exit status.
    pub informational: bool,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    LowerBound,
    SupportViolation,
    JensenChain,
    VmbpoUpper,
    Tightness,
    LgammaLower,
    ClosedFormOptima,
    RescalingInvariance,
    GeometricHorizon,
    EnumerationVsExact,
    TiltMaximizer,
    MnmTrace,
    GoalNextState,
    GoalVerbatim,
    ClassifierExactness,
    DirectVsIterative,
    OccupancyNormalization,
}

impl Suite {
    pub const ALL: [Suite; 17] = [
        Suite::LowerBound,
        Suite::SupportViolation,
        Suite::JensenChain,
        Suite::VmbpoUpper,
        Suite::Tightness,
        Suite::LgammaLower,
        Suite::ClosedFormOptima,
        Suite::RescalingInvariance,
        Suite::GeometricHorizon,
        Suite::EnumerationVsExact,
        Suite::TiltMaximizer,
        Suite::MnmTrace,
        Suite::GoalNextState,
        Suite::GoalVerbatim,
        Suite::ClassifierExactness,
        Suite::DirectVsIterative,
        Suite::OccupancyNormalization,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::LowerBound => "lower-bound",
            Suite::SupportViolation => "support-violation",
            Suite::JensenChain => "jensen-chain",
            Suite::VmbpoUpper => "vmbpo-upper",
            Suite::Tightness => "tightness",
            Suite::LgammaLower => "lgamma-lower",
            Suite::ClosedFormOptima => "closed-form-optima",
            Suite::RescalingInvariance => "rescaling-invariance",
            Suite::GeometricHorizon => "geometric-horizon",
            Suite::EnumerationVsExact => "enumeration-vs-exact",
            Suite::TiltMaximizer => "tilt-maximizer",
            Suite::MnmTrace => "mnm-trace",
            Suite::GoalNextState => "goal-next-state",
            Suite::GoalVerbatim => "goal-verbatim",
            Suite::ClassifierExactness => "classifier-exactness",
            Suite::DirectVsIterative => "direct-vs-iterative",
            Suite::OccupancyNormalization => "occupancy-normalization",
        }
    }

    pub fn informational(self) -> bool {
        self == Suite::GoalVerbatim
    }

    /// Runs `cases` instances drawn from this suite's stream for `seed`.
    pub fn run(self, seed: u64, cases: usize, tol: f64) -> Result<SuiteReport> {
        let mut rng = seeding::stream(&format!("verify-bounds/{}", self.name()), seed);
        let mut tally = Tally::default();
        let rng = &mut rng;
        match self {
            Suite::LowerBound => lower_bound(rng, cases, tol, &mut tally)?,
            Suite::SupportViolation => support_violation(rng, cases, &mut tally)?,
            Suite::JensenChain => jensen_chain(rng, cases, tol, &mut tally)?,
            Suite::VmbpoUpper => vmbpo_upper(rng, cases, tol, &mut tally)?,
            Suite::Tightness => tightness(rng, cases, tol, &mut tally)?,
            Suite::LgammaLower => lgamma_lower(rng, cases, tol, &mut tally)?,
            Suite::ClosedFormOptima => closed_form_optima(rng, cases, tol, &mut tally)?,
            Suite::RescalingInvariance => rescaling_invariance(rng, cases, &mut tally)?,
            Suite::GeometricHorizon => geometric_horizon(rng, cases, tol, &mut tally),
            Suite::EnumerationVsExact => enumeration_vs_exact(rng, cases, tol, &mut tally)?,
            Suite::TiltMaximizer => tilt_maximizer(rng, cases, tol, &mut tally)?,
            Suite::MnmTrace => mnm_trace(rng, cases, tol, &mut tally)?,
            Suite::GoalNextState => goal_suite(rng, cases, tol, &mut tally, false)?,
            Suite::GoalVerbatim => goal_suite(rng, cases, tol, &mut tally, true)?,
            Suite::ClassifierExactness => classifier_exactness(rng, &mut tally)?,
            Suite::DirectVsIterative => direct_vs_iterative(rng, cases, tol, &mut tally)?,
            Suite::OccupancyNormalization => occupancy_normalization(rng, cases, tol, &mut tally)?,
        }
        Ok(SuiteReport {
            name: self.name(),
            cases: tally.cases,
            failures: tally.failures,
            worst_margin: tally.worst,
            informational: self.informational(),
        })
    }
}

#[derive(Debug, Default)]
struct Tally {
    cases: usize,
    failures: usize,
    worst: Option<f64>,
}

impl Tally {
    fn margin(&mut self, margin: f64) {
        self.cases += 1;
        if !(margin >= 0.0) {
            self.failures += 1;
        }
        let m = if margin.is_nan() { f64::NEG_INFINITY } else { margin };
        self.worst = Some(self.worst.map_or(m, |w| w.min(m)));
    }

    fn flag(&mut self, ok: bool) {
        self.cases += 1;
        if !ok {
            self.failures += 1;
        }
    }
}

/// Distance of a bound from violating `bound ≤ reference + truncation + tol`.
/// A `-∞` bound holds whatever the reference.
fn report_margin(report: &BoundReport, tol: f64) -> f64 {
    if report.bound_value == f64::NEG_INFINITY {
        f64::INFINITY
    } else {
        report.slack + report.truncation_error + tol
    }
}

fn spec() -> RandomMdpSpec {
    RandomMdpSpec::default()
}

fn random_deterministic_policy(rng: &mut ChaCha8Rng, mdp: &TabularMdp) -> Result<TabularPolicy> {
    let actions: Vec<usize> = (0..mdp.num_states())
        .map(|_| rng.random_range(0..mdp.num_actions()))
        .collect();
    TabularPolicy::deterministic(mdp.num_actions(), &actions)
}

fn random_schedule(rng: &mut ChaCha8Rng, horizon: usize) -> Result<DiscountSchedule> {
    DiscountSchedule::new(random_distribution(rng, horizon + 1, 0.0), 0.0)
}

/// Multiplies each weight by `exp(σ ξ)` with `ξ ~ U(-1, 1)` and renormalizes.
fn perturb(rng: &mut ChaCha8Rng, weights: &[f64]) -> Vec<f64> {
    let sigma = rng.random_range(0.01..1.0);
    let raw: Vec<f64> = weights
        .iter()
        .map(|w| w * (sigma * rng.random_range(-1.0..1.0f64)).exp())
        .collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|w| w / total).collect()
}

/// `Σ q (log p - log q + log R)` over a trajectory set with weights `q`.
fn trajectory_objective(p: &TrajectorySet, q: &[f64]) -> f64 {
    p.entries
        .iter()
        .zip(q)
        .filter(|(_, w)| **w > 0.0)
        .map(|(e, w)| w * (e.weight.ln() - w.ln() + e.ret.ln()))
        .sum()
}

fn lower_bound(rng: &mut ChaCha8Rng, cases: usize, tol: f64, tally: &mut Tally) -> Result<()> {
    for _ in 0..cases {
        let mdp = random_mdp(rng, &spec())?;
        let q = random_model_on_support(rng, mdp.dynamics())?;
        let pi = random_policy(rng, mdp.num_states(), mdp.num_actions())?;
        let report = check_lower_bound(&mdp, &q, &pi)?;
        tally.margin(report_margin(&report, tol));
    }
    Ok(())
}

/// A model that moves mass onto a transition the true dynamics forbid, from
/// a start state, must give a lower bound of exactly `-∞`.
fn support_violation(rng: &mut ChaCha8Rng, cases: usize, tally: &mut Tally) -> Result<()> {
    let sparse = RandomMdpSpec {
        sparsity: 0.6,
        ..spec()
    };
    let mut attempts = 0;
    while tally.cases < cases && attempts < 20 * cases {
        attempts += 1;
        let ns = rng.random_range(2..=5);
        let na = rng.random_range(1..=3);
        let mdp = random_mdp_sized(rng, ns, na, &sparse)?;
        let p = mdp.dynamics();
        let hole = (0..ns)
            .filter(|&s| mdp.initial()[s] > 0.0)
            .flat_map(|s| (0..na).map(move |a| (s, a)))
            .flat_map(|(s, a)| (0..ns).map(move |n| (s, a, n)))
            .find(|&(s, a, n)| p.prob(s, a, n) == 0.0);
        let Some((hs, ha, hn)) = hole else { continue };
        let q = TabularModel::from_fn(ns, na, |s, a, n| {
            if (s, a) == (hs, ha) {
                0.5 * p.prob(s, a, n) + if n == hn { 0.5 } else { 0.0 }
            } else {
                p.prob(s, a, n)
            }
        })?;
        let pi = random_policy(rng, ns, na)?;
        let report = check_lower_bound(&mdp, &q, &pi)?;
        tally.flag(report.bound_value == f64::NEG_INFINITY && report.holds);
    }
    Ok(())
}

/// `L ≤ L_γ(geometric) ≤ log J` at a matched Markov model.
fn jensen_chain(rng: &mut ChaCha8Rng, cases: usize, tol: f64, tally: &mut Tally) -> Result<()> {
    for _ in 0..cases {
        let mdp = random_mdp(rng, &spec())?;
        let q = random_model_on_support(rng, mdp.dynamics())?;
        let pi = random_policy(rng, mdp.num_states(), mdp.num_actions())?;
        let l = objective_l(&mdp, &q, &pi)?;
        let h = default_horizon(&mdp);
        let lg = tight_objective_lgamma(&mdp, &pi, LgammaModel::Markov(&q), ScheduleRule::Geometric, h)?;
        let first = lg.bound_value + lg.truncation_error + tol - l;
        let second = report_margin(&lg, tol);
        tally.margin(first.min(second));
    }
    Ok(())
}

fn vmbpo_upper(rng: &mut ChaCha8Rng, cases: usize, tol: f64, tally: &mut Tally) -> Result<()> {
    for _ in 0..cases {
        let mdp = random_mdp(rng, &spec())?;
        let pi = random_policy(rng, mdp.num_states(), mdp.num_actions())?;
        let h = (0..10_000).find(|&h| mdp.truncation_error(h) < 1e-10).unwrap_or(10_000);
        let v = vmbpo_objective_exact(&mdp, &pi, 1.0, h)?;
        let j = expected_return(&mdp, &pi)?;
        let mut margin = v.lower - j + tol;
        if return_variance(&mdp, &pi)? > STRICT_VARIANCE {
            margin = margin.min(v.lower - j - STRICT_VARIANCE);
        }
        tally.margin(margin);
    }
    Ok(())
}

/// The horizon cut moves `J` by at most the truncation error `ε`, so in log
/// space the allowance is `log J - log(J - ε)`, which exceeds `ε` when `J < 1`.
fn log_truncation(report: &BoundReport) -> f64 {
    let j = report.reference_value.exp();
    let eps = report.truncation_error;
    if eps < j {
        (j / (j - eps)).ln().max(eps)
    } else {
        f64::INFINITY
    }
}

/// Both closed-form optima plugged in make the learned-discount bound equal
/// `log J` up to truncation.
fn tightness(rng: &mut ChaCha8Rng, cases: usize, tol: f64, tally: &mut Tally) -> Result<()> {
    for _ in 0..cases {
        let mdp = random_absorbing_pair(rng, &spec())?;
        let pi = random_deterministic_policy(rng, &mdp)?;
        let report = tight_objective_lgamma(
            &mdp,
            &pi,
            LgammaModel::Optimal,
            ScheduleRule::Optimal,
            TIGHTNESS_HORIZON,
        )?;
        tally.margin(log_truncation(&report) + tol - report.slack.abs());
    }
    Ok(())
}

/// Suboptimal trajectory models and schedules stay below `log J`.
fn lgamma_lower(rng: &mut ChaCha8Rng, cases: usize, tol: f64, tally: &mut Tally) -> Result<()> {
    for case in 0..cases {
        let report = if case % 2 == 0 {
            let h = 20;
            let mdp = random_absorbing_pair(rng, &spec())?;
            let pi = random_deterministic_policy(rng, &mdp)?;
            let star = optimal_trajectory_model(&mdp, &pi, h)?;
            let weights = perturb(rng, &star.entries.iter().map(|e| e.weight).collect::<Vec<_>>());
            let q = TrajectorySet {
                entries: star
                    .entries
                    .iter()
                    .zip(weights)
                    .map(|(e, w)| WeightedTrajectory {
                        weight: w,
                        ..e.clone()
                    })
                    .collect(),
                ..star
            };
            let schedule = random_schedule(rng, h)?;
            let rule = match rng.random_range(0..3) {
                0 => ScheduleRule::Geometric,
                1 => ScheduleRule::Optimal,
                _ => ScheduleRule::Shared(&schedule),
            };
            tight_objective_lgamma(&mdp, &pi, LgammaModel::Trajectories(&q), rule, h)?
        } else {
            let mdp = random_mdp(rng, &spec())?;
            let q = random_model_on_support(rng, mdp.dynamics())?;
            let pi = random_policy(rng, mdp.num_states(), mdp.num_actions())?;
            let h = default_horizon(&mdp);
            let schedule = random_schedule(rng, h)?;
            tight_objective_lgamma(&mdp, &pi, LgammaModel::Markov(&q), ScheduleRule::Shared(&schedule), h)?
        };
        tally.margin(report_margin(&report, tol));
    }
    Ok(())
}

/// The return-reweighted trajectory model beats random perturbations of
/// itself, and every optimal discount schedule normalizes within its tail.
fn closed_form_optima(rng: &mut ChaCha8Rng, cases: usize, tol: f64, tally: &mut Tally) -> Result<()> {
    for case in 0..cases {
        let (mdp, pi, h) = if case % 2 == 0 {
            let mdp = random_absorbing_pair(rng, &spec())?;
            let pi = random_deterministic_policy(rng, &mdp)?;
            (mdp, pi, 20)
        } else {
            let mdp = random_mdp_sized(rng, 2, 2, &spec())?;
            let pi = random_policy(rng, 2, 2)?;
            (mdp, pi, 3)
        };
        let set = enumerate_trajectories(&mdp, mdp.dynamics(), &pi, h, EnumerationLimits::default())?;
        let star: Vec<f64> = reweight_by_return(&set).entries.iter().map(|e| e.weight).collect();
        let best = trajectory_objective(&set, &star);
        let mut margin = f64::INFINITY;
        for _ in 0..PERTURBATIONS {
            let other = perturb(rng, &star);
            margin = margin.min(best - trajectory_objective(&set, &other) + tol);
        }
        for e in &set.entries {
            let schedule = optimal_discount(&e.trajectory, &mdp, h);
            margin = margin.min(schedule.tail + tol - (schedule.total() - 1.0).abs());
        }
        tally.margin(margin);
    }
    Ok(())
}

/// Scaling every reward by `c > 0` leaves both optima unchanged.
fn rescaling_invariance(rng: &mut ChaCha8Rng, cases: usize, tally: &mut Tally) -> Result<()> {
    const REL_TOL: f64 = 1e-12;
    for _ in 0..cases {
        let mdp = random_absorbing_pair(rng, &spec())?;
        let pi = random_deterministic_policy(rng, &mdp)?;
        let c = rng.random_range(0.1..10.0);
        let scaled = mdp.with_reward(mdp.rewards().iter().map(|r| c * r).collect())?;
        let a = optimal_trajectory_model(&mdp, &pi, 20)?;
        let b = optimal_trajectory_model(&scaled, &pi, 20)?;
        let close = |x: f64, y: f64| (x - y).abs() <= REL_TOL * x.abs().max(y.abs()).max(1e-300);
        let mut ok = a.entries.len() == b.entries.len();
        for (x, y) in a.entries.iter().zip(&b.entries) {
            ok &= close(x.weight, y.weight);
            let sx = optimal_discount(&x.trajectory, &mdp, 20);
            let sy = optimal_discount(&y.trajectory, &scaled, 20);
            ok &= sx.masses.iter().zip(&sy.masses).all(|(u, v)| close(*u, *v));
        }
        tally.flag(ok);
    }
    Ok(())
}

/// `Σ_{h ≤ T} (1-γ) γ^h Σ_{t ≤ h} x_t` against `Σ_{t ≤ T} γ^t x_t`.
///
/// The two differ by exactly `γ^{T+1} Σ_t x_t`, the horizon mass beyond `T`
/// times the full partial sum, so the allowance is `γ^{T+1} Σ_t |x_t|`.
fn geometric_horizon(rng: &mut ChaCha8Rng, cases: usize, tol: f64, tally: &mut Tally) {
    for case in 0..cases {
        let g: f64 = if case % 2 == 0 { 0.5 } else { 0.9 };
        let t_max = rng.random_range(0..60usize);
        let x: Vec<f64> = (0..=t_max).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut partial = 0.0;
        let mut lhs = 0.0;
        for (h, xh) in x.iter().enumerate() {
            partial += xh;
            lhs += (1.0 - g) * g.powi(h as i32) * partial;
        }
        let rhs: f64 = x.iter().enumerate().map(|(t, xt)| g.powi(t as i32) * xt).sum();
        let allowance = g.powi(t_max as i32 + 1) * x.iter().map(|v| v.abs()).sum::<f64>();
        tally.margin(allowance + tol - (lhs - rhs).abs());
    }
}

fn enumeration_vs_exact(rng: &mut ChaCha8Rng, cases: usize, tol: f64, tally: &mut Tally) -> Result<()> {
    let small = RandomMdpSpec {
        max_states: 3,
        max_actions: 2,
        ..spec()
    };
    for _ in 0..cases {
        let mdp = random_mdp(rng, &small)?;
        let pi = random_policy(rng, mdp.num_states(), mdp.num_actions())?;
        let set = enumerate_trajectories(&mdp, mdp.dynamics(), &pi, 6, EnumerationLimits::default())?;
        let j = expected_return(&mdp, &pi)?;
        tally.margin(set.truncation_error + tol - (set.expected_return() - j).abs());
    }
    Ok(())
}

/// The tilted row maximizes `Σ q (γ V + log p - log q)` on p's support.
fn tilt_maximizer(rng: &mut ChaCha8Rng, cases: usize, tol: f64, tally: &mut Tally) -> Result<()> {
    for _ in 0..cases {
        let mdp = random_mdp(rng, &spec())?;
        let (ns, na) = (mdp.num_states(), mdp.num_actions());
        let g = mdp.discount();
        let value = ValueTable((0..ns).map(|_| rng.random_range(-5.0..5.0)).collect());
        let tilt = optimistic_dynamics(mdp.dynamics(), &value, g)?;
        let (s, a) = (rng.random_range(0..ns), rng.random_range(0..na));
        let p = mdp.dynamics().row(s, a);
        let objective = |q: &[f64]| -> f64 {
            q.iter()
                .zip(p)
                .zip(value.values())
                .filter(|((qi, _), _)| **qi > 0.0)
                .map(|((qi, pi), v)| qi * (g * v + pi.ln() - qi.ln()))
                .sum()
        };
        let best_row = tilt.row(s, a);
        let mut margin = if best_row.iter().zip(p).all(|(q, p)| (*q > 0.0) == (*p > 0.0)) {
            f64::INFINITY
        } else {
            f64::NEG_INFINITY
        };
        let best = objective(best_row);
        for _ in 0..PERTURBATIONS {
            let other = perturb(rng, best_row);
            margin = margin.min(best - objective(&other) + tol);
        }
        tally.margin(margin);
    }
    Ok(())
}

/// Every iterate of the joint optimization stays below `log J`.
fn mnm_trace(rng: &mut ChaCha8Rng, cases: usize, tol: f64, tally: &mut Tally) -> Result<()> {
    let solver = SolverConfig::default();
    for _ in 0..cases {
        let mdp = random_mdp(rng, &spec())?;
        let result = mnm_value_iteration(&mdp, &solver, &ClassifierSource::Exact, None)?;
        let margin = result
            .trace
            .iter()
            .map(|r| r.log_return + tol - r.objective_l)
            .fold(f64::INFINITY, f64::min);
        tally.margin(margin);
    }
    Ok(())
}

/// Goal-reaching bounds on random four-state MDPs with random goals.
fn goal_suite(rng: &mut ChaCha8Rng, cases: usize, tol: f64, tally: &mut Tally, verbatim: bool) -> Result<()> {
    for _ in 0..cases {
        let na = rng.random_range(1..=3);
        let mdp = random_mdp_sized(rng, 4, na, &spec())?;
        let q = random_model_on_support(rng, mdp.dynamics())?;
        let pi = random_policy(rng, 4, na)?;
        let goal = GoalTask {
            goal_state: rng.random_range(0..4),
        };
        let report = if verbatim {
            goal_bound(&mdp, &q, &pi, goal)?
        } else {
            goal_bound_next_state(&mdp, &q, &pi, goal)?
        };
        tally.margin(report_margin(&report, tol));
    }
    Ok(())
}

/// Bayes log-odds equal `log p - log q` on every preset, against a random
/// model on the true support.
fn classifier_exactness(rng: &mut ChaCha8Rng, tally: &mut Tally) -> Result<()> {
    const EXACT_TOL: f64 = 1e-12;
    let mut mdps = Vec::new();
    for name in PRESET_NAMES {
        mdps.push(build_gridworld(&preset(name)?)?);
    }
    mdps.push(build_windy_three_state(&WindyConfig::default())?);
    for mdp in &mdps {
        let p = mdp.dynamics();
        let q = random_model_on_support(rng, p)?;
        let odds = log_odds(&bayes_classifier(p, &q)?);
        let mut margin = f64::INFINITY;
        for (i, (&pv, &qv)) in p.as_slice().iter().zip(q.as_slice()).enumerate() {
            if pv > 0.0 && qv > 0.0 {
                let err = (odds.as_slice()[i] - (pv.ln() - qv.ln())).abs();
                margin = margin.min(EXACT_TOL - err);
            }
        }
        tally.margin(margin);
    }
    Ok(())
}

fn direct_vs_iterative(rng: &mut ChaCha8Rng, cases: usize, tol: f64, tally: &mut Tally) -> Result<()> {
    const AGREE_TOL: f64 = 1e-8;
    let wide = RandomMdpSpec {
        max_states: 6,
        ..spec()
    };
    for _ in 0..cases {
        let mdp = random_mdp(rng, &wide)?;
        let pi = random_policy(rng, mdp.num_states(), mdp.num_actions())?;
        let reward = Reward::StateAction(mdp.rewards());
        let g = mdp.discount();
        let direct = policy_evaluation_with(mdp.dynamics(), &pi, reward, g, SOLVE_TOL, EvalMethod::Direct)?;
        let iterative = policy_evaluation_with(
            mdp.dynamics(),
            &pi,
            reward,
            g,
            SOLVE_TOL,
            EvalMethod::Iterative { max_iters: 1_000_000 },
        )?;
        let err = direct
            .values()
            .iter()
            .zip(iterative.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        tally.margin(AGREE_TOL + tol - err);
    }
    Ok(())
}

fn occupancy_normalization(rng: &mut ChaCha8Rng, cases: usize, tol: f64, tally: &mut Tally) -> Result<()> {
    for _ in 0..cases {
        let mdp = random_mdp(rng, &spec())?;
        let pi = random_policy(rng, mdp.num_states(), mdp.num_actions())?;
        let rho: f64 = occupancy(&mdp, &pi)?.iter().sum();
        let next: f64 = next_state_occupancy(&mdp, &pi)?.iter().sum();
        tally.margin(1e-9 + tol - (rho - 1.0).abs().max((next - 1.0).abs()));
    }
    Ok(())
}

/// Every suite for every seed in `seeds`, in [`Suite::ALL`] order per seed.
pub fn run_all(seeds: &[u64], cases: usize, tol: f64) -> Result<Vec<(u64, SuiteReport)>> {
    let mut out = Vec::new();
    for &seed in seeds {
        for suite in Suite::ALL {
            out.push((seed, suite.run(seed, cases, tol)?));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tally_tracks_worst_margin() {
        let mut t = Tally::default();
        t.margin(0.5);
        t.margin(-0.1);
        t.margin(f64::NAN);
        assert_eq!((t.cases, t.failures), (3, 2));
        assert_eq!(t.worst, Some(f64::NEG_INFINITY));
    }

    #[test]
    fn suites_pass_on_small_runs() {
        for suite in Suite::ALL {
            let report = suite.run(0, 8, 1e-8).unwrap();
            assert!(report.cases > 0, "{}", report.name);
            if !suite.informational() {
                assert!(report.passed(), "{report:?}");
            }
        }
    }

    #[test]
    fn suites_are_reproducible() {
        let a = Suite::LgammaLower.run(3, 6, 1e-8).unwrap();
        let b = Suite::LgammaLower.run(3, 6, 1e-8).unwrap();
        assert_eq!(a, b);
    }
}
