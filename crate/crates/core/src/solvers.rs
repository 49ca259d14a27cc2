//! Augmented rewards, optimistic dynamics, and the joint model/policy solvers.
//!
//! Every solver works on exact tables. The model update is the closed-form
//! exponential tilt `q ∝ p · exp(γ V)`; the policy update is a greedy
//! maximizer of the augmented-reward Q function under the current model.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bounds::{objective_l, vmbpo_objective_exact};
use crate::classifier::{bayes_classifier, log_odds, restrict_classifier, ClassifierTable};
use crate::environments::{
    alias_model, build_windy_three_state, AliasMap, WindyConfig, GO_LEFT, GO_RIGHT, WINDY_MIDDLE,
};
use crate::error::{MnmError, Result};
use crate::mdp::{
    argmax, expected_return, greedy_policy, sample_index, solve_optimal_from, QTable, Reward,
    RewardTable3, TabularMdp, TabularModel, TabularPolicy, ValueTable,
};

/// Which augmented reward a solver maximizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    /// `(1-γ) log r + log-odds - (1-γ) log(1-γ)`.
    Mnm,
    /// `r + log-odds`.
    NoLog,
    /// `(1-γ) log r - (1-γ) log(1-γ)`.
    NoClassifier,
    /// `η r + log-odds`.
    Vmbpo,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::Mnm,
        Variant::NoLog,
        Variant::NoClassifier,
        Variant::Vmbpo,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Mnm => "mnm",
            Variant::NoLog => "no_log",
            Variant::NoClassifier => "no_classifier",
            Variant::Vmbpo => "vmbpo",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = MnmError;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| MnmError::InvalidConfig(format!("unknown variant `{s}`")))
    }
}

/// Builds `r̃(s, a, s')` for `variant`.
///
/// Entries on transitions the model never produces are set to zero: they
/// carry no weight in any expectation under the model. An infinite entry on
/// a transition the model does produce is an error.
pub fn augmented_reward(
    mdp: &TabularMdp,
    model: &TabularModel,
    classifier: &ClassifierTable,
    variant: Variant,
    eta: f64,
) -> Result<RewardTable3> {
    let (ns, na) = (mdp.num_states(), mdp.num_actions());
    if !model.same_shape(mdp.dynamics())
        || classifier.num_states() != ns
        || classifier.num_actions() != na
    {
        return Err(MnmError::DimensionMismatch(
            "model or classifier shape differs from the MDP".into(),
        ));
    }
    let g = mdp.discount();
    let constant = (1.0 - g) * (1.0 - g).ln();
    let mut values = Vec::with_capacity(ns * na * ns);
    for s in 0..ns {
        for a in 0..na {
            let r = mdp.reward(s, a);
            for next in 0..ns {
                if model.prob(s, a, next) == 0.0 {
                    values.push(0.0);
                    continue;
                }
                let ratio = || classifier.log_odds_at(s, a, next);
                let value = match variant {
                    Variant::Mnm => (1.0 - g) * r.ln() + ratio() - constant,
                    Variant::NoLog => r + ratio(),
                    Variant::NoClassifier => (1.0 - g) * r.ln() - constant,
                    Variant::Vmbpo => eta * r + ratio(),
                };
                if !value.is_finite() {
                    return Err(MnmError::InfiniteReward {
                        state: s,
                        action: a,
                        next,
                    });
                }
                values.push(value);
            }
        }
    }
    RewardTable3::new(ns, na, values)
}

/// Exponential tilt `q*(s'|s,a) ∝ p(s'|s,a) exp(γ V(s'))`.
///
/// Computed with max-subtraction over each row's support; zero entries of
/// `p` stay zero.
pub fn optimistic_dynamics(p: &TabularModel, value: &ValueTable, discount: f64) -> Result<TabularModel> {
    let (ns, na) = (p.num_states(), p.num_actions());
    if value.values().len() != ns {
        return Err(MnmError::DimensionMismatch(
            "value table length differs from state count".into(),
        ));
    }
    if value.values().iter().any(|v| !v.is_finite()) {
        return Err(MnmError::InvalidArgument("value table must be finite".into()));
    }
    let mut probs = vec![0.0; ns * na * ns];
    for s in 0..ns {
        for a in 0..na {
            let base = (s * na + a) * ns;
            tilt_row(p.row(s, a), value.values(), discount, &mut probs[base..base + ns])
                .map_err(|_| MnmError::InvalidArgument(format!("row (s={s}, a={a}) has no mass")))?;
        }
    }
    TabularModel::new(ns, na, probs)
}

fn tilt_row(p: &[f64], value: &[f64], discount: f64, out: &mut [f64]) -> std::result::Result<(), ()> {
    let peak = p
        .iter()
        .zip(value)
        .filter(|(pp, _)| **pp > 0.0)
        .map(|(_, v)| discount * v)
        .fold(f64::NEG_INFINITY, f64::max);
    if peak == f64::NEG_INFINITY {
        return Err(());
    }
    let mut total = 0.0;
    for ((o, &pp), &v) in out.iter_mut().zip(p).zip(value) {
        *o = if pp > 0.0 {
            pp * (discount * v - peak).exp()
        } else {
            0.0
        };
        total += *o;
    }
    for o in out.iter_mut() {
        *o /= total;
    }
    Ok(())
}

// ── Value iteration ──────────────────────────────────────────────────────

/// How the model-change metric decides convergence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopRule {
    /// Largest absolute entry change below `stop_tol`.
    MaxAbs,
    /// No entry changes by more than `threshold`.
    ChangedCount { threshold: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub variant: Variant,
    /// Weight of the new candidate in the Polyak blend.
    pub polyak: f64,
    pub stop_tol: f64,
    pub max_iters: usize,
    /// Classifier label smoothing α.
    pub smoothing: f64,
    pub vmbpo_eta: f64,
    pub stop_rule: StopRule,
    /// When set, each trace record also brackets the exponentiated-return
    /// objective with this `η` at this horizon.
    pub trace_vmbpo: Option<(f64, usize)>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            variant: Variant::Mnm,
            polyak: 0.5,
            stop_tol: 1e-6,
            max_iters: 2000,
            smoothing: 0.0,
            vmbpo_eta: 1.0,
            stop_rule: StopRule::MaxAbs,
            trace_vmbpo: None,
        }
    }
}

impl SolverConfig {
    pub fn with_variant(variant: Variant) -> Self {
        Self {
            variant,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.polyak > 0.0 && self.polyak <= 1.0) {
            return Err(MnmError::InvalidConfig("polyak must lie in (0, 1]".into()));
        }
        if !(self.stop_tol > 0.0) {
            return Err(MnmError::InvalidConfig("stop_tol must be positive".into()));
        }
        if !(self.vmbpo_eta > 0.0) {
            return Err(MnmError::InvalidConfig("vmbpo_eta must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.smoothing) {
            return Err(MnmError::InvalidConfig("smoothing must lie in [0, 1)".into()));
        }
        if let StopRule::ChangedCount { threshold } = self.stop_rule {
            if !(threshold >= 0.0) {
                return Err(MnmError::InvalidConfig("changed-count threshold must be non-negative".into()));
            }
        }
        Ok(())
    }

    fn model_change(&self, old: &TabularModel, new: &TabularModel) -> (f64, bool) {
        match self.stop_rule {
            StopRule::MaxAbs => {
                let change = old.max_abs_diff(new);
                (change, change < self.stop_tol)
            }
            StopRule::ChangedCount { threshold } => {
                let count = old.count_changed(new, threshold);
                (count as f64, count == 0)
            }
        }
    }
}

/// Where the classifier comes from at each iteration.
#[derive(Debug, Clone, PartialEq)]
pub enum ClassifierSource {
    /// Bayes classifier between the true dynamics and the current model.
    Exact,
    /// Bayes classifier averaged over alias blocks.
    Restricted(AliasMap),
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Lower bound at the iterate `(q_k, π_k)`; `-∞` when the model leaves the true support.
    pub objective_l: f64,
    pub log_return: f64,
    pub model_change: f64,
    /// Bracket `[lower, upper]` of the exponentiated-return objective.
    pub vmbpo: Option<(f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    /// Greedy policy of the final iteration.
    pub policy: TabularPolicy,
    /// Polyak-averaged policy iterate.
    pub averaged_policy: TabularPolicy,
    pub model: TabularModel,
    pub value: ValueTable,
    pub q: QTable,
    pub trace: Vec<IterationRecord>,
    pub converged: bool,
}

/// Joint model/policy optimization by alternating exact maximization.
///
/// Each iteration builds the classifier for the current model, the
/// augmented reward, solves the Bellman optimality equation under the model,
/// takes the greedy policy and the tilted model as candidates, and
/// Polyak-blends both. With `model_alias`, the candidate model is projected
/// onto the block-aliased family.
pub fn mnm_value_iteration(
    mdp: &TabularMdp,
    config: &SolverConfig,
    classifier_source: &ClassifierSource,
    model_alias: Option<&AliasMap>,
) -> Result<SolveResult> {
    config.validate()?;
    let p = mdp.dynamics();
    let project = |m: TabularModel| -> Result<TabularModel> {
        match model_alias {
            Some(alias) => alias_model(&m, alias),
            None => Ok(m),
        }
    };
    let mut model = project(p.clone())?;
    let mut policy = TabularPolicy::uniform(mdp.num_states(), mdp.num_actions());
    let mut warm: Option<ValueTable> = None;
    let mut trace = Vec::new();
    let mut last = None;
    let mut converged = false;

    for iteration in 0..config.max_iters {
        let classifier = build_classifier(p, &model, classifier_source, config.smoothing)?;
        let reward = augmented_reward(mdp, &model, &classifier, config.variant, config.vmbpo_eta)?;
        let solution =
            solve_optimal_from(&model, Reward::Transition(&reward), mdp.discount(), warm.as_ref())?;
        if solution.value.values().iter().any(|v| !v.is_finite()) {
            return Err(MnmError::Divergence {
                iteration,
                reason: "value function is not finite".into(),
            });
        }
        let candidate = project(optimistic_dynamics(p, &solution.value, mdp.discount())?)?;
        let next_model = model.blend(&candidate, config.polyak);
        let next_policy = policy.blend(&solution.policy, config.polyak);
        let (change, done) = config.model_change(&model, &next_model);
        model = next_model;
        policy = next_policy;
        warm = Some(solution.value.clone());

        trace.push(IterationRecord {
            iteration,
            objective_l: objective_l(mdp, &model, &policy)?,
            log_return: expected_return(mdp, &policy)?.ln(),
            model_change: change,
            vmbpo: match config.trace_vmbpo {
                Some((eta, horizon)) => {
                    let b = vmbpo_objective_exact(mdp, &policy, eta, horizon)?;
                    Some((b.lower, b.upper))
                }
                None => None,
            },
        });
        last = Some(solution);
        if done {
            converged = true;
            break;
        }
    }
    let solution = last.ok_or_else(|| MnmError::InvalidConfig("max_iters must be positive".into()))?;
    Ok(SolveResult {
        policy: solution.policy,
        averaged_policy: policy,
        model,
        value: solution.value,
        q: solution.q,
        trace,
        converged,
    })
}

fn build_classifier(
    p: &TabularModel,
    q: &TabularModel,
    source: &ClassifierSource,
    smoothing: f64,
) -> Result<ClassifierTable> {
    let exact = bayes_classifier(p, q)?;
    let c = match source {
        ClassifierSource::Exact => exact,
        ClassifierSource::Restricted(alias) => restrict_classifier(&exact, alias)?,
    };
    c.with_smoothing(smoothing)
}

/// Augmented reward of the current model with the exact classifier; mainly
/// for callers that want to inspect `r̃` at a solver's output.
pub fn exact_augmented_reward(
    mdp: &TabularMdp,
    model: &TabularModel,
    variant: Variant,
    smoothing: f64,
    eta: f64,
) -> Result<RewardTable3> {
    let c = bayes_classifier(mdp.dynamics(), model)?.with_smoothing(smoothing)?;
    augmented_reward(mdp, model, &c, variant, eta)
}

/// Log-odds table of the exact classifier, exposed for diagnostics.
pub fn exact_log_odds(mdp: &TabularMdp, model: &TabularModel, smoothing: f64) -> Result<RewardTable3> {
    Ok(log_odds(&bayes_classifier(mdp.dynamics(), model)?.with_smoothing(smoothing)?))
}

/// Raises `reward_right` in steps of `step` until the vmbpo variant of
/// [`mnm_value_iteration`] (η = 1) goes right from the middle state, while
/// the always-left policy keeps the higher expected return.
pub fn calibrate_windy(base: WindyConfig, step: f64, max_steps: usize) -> Result<WindyConfig> {
    let left = TabularPolicy::deterministic(2, &[GO_LEFT; 3])?;
    let right = TabularPolicy::deterministic(2, &[GO_RIGHT; 3])?;
    let solver = SolverConfig::with_variant(Variant::Vmbpo);
    let mut config = base;
    for _ in 0..=max_steps {
        let mdp = build_windy_three_state(&config)?;
        if expected_return(&mdp, &left)? <= expected_return(&mdp, &right)? {
            break;
        }
        let result = mnm_value_iteration(&mdp, &solver, &ClassifierSource::Exact, None)?;
        if result.policy.mode()[WINDY_MIDDLE] == GO_RIGHT {
            return Ok(config);
        }
        config.reward_right = ((config.reward_right + step) * 1e9).round() / 1e9;
    }
    Err(MnmError::InvalidConfig(
        "no reward_right separates the risk-seeking and expected-return preferences".into(),
    ))
}

// ── Q-learning ───────────────────────────────────────────────────────────

/// When the analytically tilted sampling dynamics are refreshed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TiltRefresh {
    PerEpisode,
    PerStep,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QLearningConfig {
    pub epsilon: f64,
    pub learning_rate: f64,
    pub episodes: usize,
    pub episode_length: usize,
    pub eval_every: usize,
    /// Sample from the tilt of the true dynamics by the current greedy value.
    pub analytic_dynamics: bool,
    pub refresh: TiltRefresh,
}

impl Default for QLearningConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.5,
            learning_rate: 1e-2,
            episodes: 1000,
            episode_length: 200,
            eval_every: 10,
            analytic_dynamics: true,
            refresh: TiltRefresh::PerEpisode,
        }
    }
}

impl QLearningConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(MnmError::InvalidConfig("epsilon must lie in [0, 1]".into()));
        }
        if !(self.learning_rate >= 0.0) {
            return Err(MnmError::InvalidConfig("learning_rate must be non-negative".into()));
        }
        if self.eval_every == 0 {
            return Err(MnmError::InvalidConfig("eval_every must be positive".into()));
        }
        Ok(())
    }
}

/// Real-environment returns of the greedy policy during learning.
#[derive(Debug, Clone, PartialEq)]
pub struct LearningCurve {
    /// `(episodes completed, expected return on the real MDP)`.
    pub points: Vec<(usize, f64)>,
    pub q: QTable,
    /// Environment samples consumed.
    pub samples: usize,
}

impl LearningCurve {
    /// First evaluation point whose return reaches `threshold`.
    pub fn episodes_to_reach(&self, threshold: f64) -> Option<usize> {
        self.points.iter().find(|(_, r)| *r >= threshold).map(|(e, _)| *e)
    }

    pub fn final_return(&self) -> Option<f64> {
        self.points.last().map(|(_, r)| *r)
    }
}

/// What a Q-learning run samples and optimizes.
enum Learner<'a> {
    /// True reward, fixed sampling dynamics.
    Plain(&'a TabularModel),
    /// Augmented reward; sampling dynamics fixed, or tilted from the greedy value.
    Augmented {
        solver: &'a SolverConfig,
        fixed: Option<&'a TabularModel>,
    },
}

/// Tabular Q-learning with the true reward, sampling from the true dynamics
/// or from `dynamics_override`.
pub fn q_learning(
    mdp: &TabularMdp,
    qcfg: &QLearningConfig,
    seed: u64,
    dynamics_override: Option<&TabularModel>,
) -> Result<LearningCurve> {
    let dynamics = dynamics_override.unwrap_or(mdp.dynamics());
    run_q_learning(mdp, qcfg, seed, Learner::Plain(dynamics))
}

/// Tabular Q-learning on the augmented reward of `solver.variant`.
///
/// Transitions are sampled from `dynamics_override` when given, otherwise
/// from the tilt of the true dynamics by the current greedy value when
/// `qcfg.analytic_dynamics` is set, otherwise from the true dynamics.
pub fn mnm_q_learning(
    mdp: &TabularMdp,
    solver: &SolverConfig,
    qcfg: &QLearningConfig,
    seed: u64,
    dynamics_override: Option<&TabularModel>,
) -> Result<LearningCurve> {
    solver.validate()?;
    let fixed = match dynamics_override {
        Some(m) => Some(m),
        None if qcfg.analytic_dynamics => None,
        None => Some(mdp.dynamics()),
    };
    run_q_learning(mdp, qcfg, seed, Learner::Augmented { solver, fixed })
}

fn run_q_learning(
    mdp: &TabularMdp,
    qcfg: &QLearningConfig,
    seed: u64,
    learner: Learner<'_>,
) -> Result<LearningCurve> {
    qcfg.validate()?;
    let (ns, na) = (mdp.num_states(), mdp.num_actions());
    let g = mdp.discount();
    if let Learner::Plain(m) | Learner::Augmented { fixed: Some(m), .. } = &learner {
        if !m.same_shape(mdp.dynamics()) {
            return Err(MnmError::DimensionMismatch(
                "sampling dynamics differ in shape from the MDP".into(),
            ));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q = QTable::zeros(ns, na);
    let mut points = Vec::new();
    let mut samples = 0;
    let mut snapshot = vec![0.0; ns];
    let mut row = vec![0.0; ns];
    let constant = (1.0 - g) * (1.0 - g).ln();

    for episode in 0..qcfg.episodes {
        if qcfg.refresh == TiltRefresh::PerEpisode {
            snapshot = q.max_values().0;
        }
        let mut s = sample_index(mdp.initial(), &mut rng);
        for _ in 0..qcfg.episode_length {
            let a = if rng.random::<f64>() < qcfg.epsilon {
                rng.random_range(0..na)
            } else {
                argmax(q.row(s))
            };
            let p_row = mdp.dynamics().row(s, a);
            let (next, reward) = match &learner {
                Learner::Plain(m) => (m.sample(s, a, &mut rng), mdp.reward(s, a)),
                Learner::Augmented { solver, fixed } => {
                    let sampling: &[f64] = match fixed {
                        Some(m) => m.row(s, a),
                        None => {
                            if qcfg.refresh == TiltRefresh::PerStep {
                                snapshot = q.max_values().0;
                            }
                            tilt_row(p_row, &snapshot, g, &mut row).map_err(|_| {
                                MnmError::InvalidMdp(format!("row (s={s}, a={a}) has no mass"))
                            })?;
                            &row
                        }
                    };
                    let next = sample_index(sampling, &mut rng);
                    let ratio = match solver.variant {
                        Variant::NoClassifier => 0.0,
                        _ => smoothed_log_ratio(p_row[next], sampling[next], solver.smoothing),
                    };
                    let r = mdp.reward(s, a);
                    let value = match solver.variant {
                        Variant::Mnm => (1.0 - g) * r.ln() + ratio - constant,
                        Variant::NoLog => r + ratio,
                        Variant::NoClassifier => (1.0 - g) * r.ln() - constant,
                        Variant::Vmbpo => solver.vmbpo_eta * r + ratio,
                    };
                    if !value.is_finite() {
                        return Err(MnmError::InfiniteReward {
                            state: s,
                            action: a,
                            next,
                        });
                    }
                    (next, value)
                }
            };
            samples += 1;
            let target = reward + g * q.row(next).iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let entry = q.get_mut(s, a);
            *entry += qcfg.learning_rate * (target - *entry);
            s = next;
        }
        if (episode + 1) % qcfg.eval_every == 0 {
            let ret = expected_return(mdp, &greedy_policy(&q))?;
            points.push((episode + 1, ret));
        }
    }
    Ok(LearningCurve { points, q, samples })
}

/// Log-odds of the smoothed Bayes classifier for one transition.
fn smoothed_log_ratio(p: f64, q: f64, alpha: f64) -> f64 {
    let total = p + q;
    if total == 0.0 {
        return 0.0;
    }
    let c = (1.0 - alpha) * (p / total) + 0.5 * alpha;
    let not_c = (1.0 - alpha) * (q / total) + 0.5 * alpha;
    c.ln() - not_c.ln()
}
