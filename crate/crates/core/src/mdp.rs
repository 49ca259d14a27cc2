//! Exact finite MDPs and the solvers every other module leans on.
//!
//! Tensors are stored flat and row-major: a transition entry `(s, a, s')`
//! lives at `(s * num_actions + a) * num_states + s'`, a state-action entry
//! `(s, a)` at `s * num_actions + a`.
//!
//! Policy evaluation defaults to a direct LU solve of `(I - γ P^π) V = r^π`
//! for problems up to [`DIRECT_SOLVE_MAX_STATES`] states and falls back to
//! Bellman iteration above that.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{MnmError, Result};

/// Normalization tolerance for probability rows.
pub const PROB_TOL: f64 = 1e-9;
/// Residual target for exact policy evaluation.
pub const SOLVE_TOL: f64 = 1e-10;
/// Largest state count solved with a dense LU factorization.
pub const DIRECT_SOLVE_MAX_STATES: usize = 2000;
/// Default cap on retained trajectories during enumeration.
pub const MAX_TRAJECTORIES: usize = 10_000_000;

// ── Dynamics and policies ────────────────────────────────────────────────

/// A conditional distribution `q(s' | s, a)` over a fixed state/action space.
///
/// Used both for the true dynamics of an MDP and for learned models.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularModel {
    num_states: usize,
    num_actions: usize,
    probs: Vec<f64>,
}

impl TabularModel {
    pub fn new(num_states: usize, num_actions: usize, probs: Vec<f64>) -> Result<Self> {
        let model = Self::from_vec_unchecked(num_states, num_actions, probs)?;
        if let Some((s, a, sum)) = model.first_unnormalized_row() {
            return Err(MnmError::InvalidArgument(format!(
                "model row (s={s}, a={a}) sums to {sum}"
            )));
        }
        if model.probs.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
            return Err(MnmError::InvalidArgument(
                "model probabilities must lie in [0, 1]".into(),
            ));
        }
        Ok(model)
    }

    /// Builds a model without checking normalization. Only the shape is verified.
    pub fn from_vec_unchecked(
        num_states: usize,
        num_actions: usize,
        probs: Vec<f64>,
    ) -> Result<Self> {
        if num_states == 0 || num_actions == 0 {
            return Err(MnmError::DimensionMismatch(
                "state and action counts must be positive".into(),
            ));
        }
        if probs.len() != num_states * num_actions * num_states {
            return Err(MnmError::DimensionMismatch(format!(
                "expected {} transition entries, got {}",
                num_states * num_actions * num_states,
                probs.len()
            )));
        }
        Ok(Self {
            num_states,
            num_actions,
            probs,
        })
    }

    pub fn from_fn(
        num_states: usize,
        num_actions: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut probs = Vec::with_capacity(num_states * num_actions * num_states);
        for s in 0..num_states {
            for a in 0..num_actions {
                for next in 0..num_states {
                    probs.push(f(s, a, next));
                }
            }
        }
        Self::new(num_states, num_actions, probs)
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    #[inline]
    pub fn index(&self, s: usize, a: usize, next: usize) -> usize {
        (s * self.num_actions + a) * self.num_states + next
    }

    #[inline]
    pub fn prob(&self, s: usize, a: usize, next: usize) -> f64 {
        self.probs[self.index(s, a, next)]
    }

    #[inline]
    pub fn row(&self, s: usize, a: usize) -> &[f64] {
        let start = self.index(s, a, 0);
        &self.probs[start..start + self.num_states]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }

    pub fn same_shape(&self, other: &TabularModel) -> bool {
        self.num_states == other.num_states && self.num_actions == other.num_actions
    }

    fn first_unnormalized_row(&self) -> Option<(usize, usize, f64)> {
        for s in 0..self.num_states {
            for a in 0..self.num_actions {
                let sum: f64 = self.row(s, a).iter().sum();
                if (sum - 1.0).abs() > PROB_TOL {
                    return Some((s, a, sum));
                }
            }
        }
        None
    }

    /// Largest absolute entry-wise difference between two models.
    pub fn max_abs_diff(&self, other: &TabularModel) -> f64 {
        self.probs
            .iter()
            .zip(&other.probs)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    /// Number of entries that differ by more than `threshold`.
    pub fn count_changed(&self, other: &TabularModel, threshold: f64) -> usize {
        self.probs
            .iter()
            .zip(&other.probs)
            .filter(|(x, y)| (*x - *y).abs() > threshold)
            .count()
    }

    /// Convex blend `(1 - weight) * self + weight * target`.
    pub fn blend(&self, target: &TabularModel, weight: f64) -> TabularModel {
        let probs = self
            .probs
            .iter()
            .zip(&target.probs)
            .map(|(x, y)| (1.0 - weight) * x + weight * y)
            .collect();
        TabularModel {
            num_states: self.num_states,
            num_actions: self.num_actions,
            probs,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, s: usize, a: usize, rng: &mut R) -> usize {
        sample_index(self.row(s, a), rng)
    }
}

/// A stochastic policy `π(a | s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularPolicy {
    num_states: usize,
    num_actions: usize,
    probs: Vec<f64>,
}

impl TabularPolicy {
    pub fn new(num_states: usize, num_actions: usize, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != num_states * num_actions {
            return Err(MnmError::DimensionMismatch(format!(
                "expected {} policy entries, got {}",
                num_states * num_actions,
                probs.len()
            )));
        }
        if probs.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
            return Err(MnmError::InvalidArgument(
                "policy probabilities must lie in [0, 1]".into(),
            ));
        }
        for s in 0..num_states {
            let sum: f64 = probs[s * num_actions..(s + 1) * num_actions].iter().sum();
            if (sum - 1.0).abs() > PROB_TOL {
                return Err(MnmError::InvalidArgument(format!(
                    "policy row {s} sums to {sum}"
                )));
            }
        }
        Ok(Self {
            num_states,
            num_actions,
            probs,
        })
    }

    pub fn uniform(num_states: usize, num_actions: usize) -> Self {
        Self {
            num_states,
            num_actions,
            probs: vec![1.0 / num_actions as f64; num_states * num_actions],
        }
    }

    pub fn deterministic(num_actions: usize, actions: &[usize]) -> Result<Self> {
        let mut probs = vec![0.0; actions.len() * num_actions];
        for (s, &a) in actions.iter().enumerate() {
            if a >= num_actions {
                return Err(MnmError::InvalidArgument(format!(
                    "action {a} out of range in state {s}"
                )));
            }
            probs[s * num_actions + a] = 1.0;
        }
        Ok(Self {
            num_states: actions.len(),
            num_actions,
            probs,
        })
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    #[inline]
    pub fn prob(&self, s: usize, a: usize) -> f64 {
        self.probs[s * self.num_actions + a]
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.probs[s * self.num_actions..(s + 1) * self.num_actions]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }

    pub fn blend(&self, target: &TabularPolicy, weight: f64) -> TabularPolicy {
        let probs = self
            .probs
            .iter()
            .zip(&target.probs)
            .map(|(x, y)| (1.0 - weight) * x + weight * y)
            .collect();
        TabularPolicy {
            num_states: self.num_states,
            num_actions: self.num_actions,
            probs,
        }
    }

    /// The most probable action per state, lowest index on ties.
    pub fn mode(&self) -> Vec<usize> {
        (0..self.num_states).map(|s| argmax(self.row(s))).collect()
    }

    pub fn sample<R: Rng + ?Sized>(&self, s: usize, rng: &mut R) -> usize {
        sample_index(self.row(s), rng)
    }
}

pub(crate) fn sample_index<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w <= 0.0 {
            continue;
        }
        acc += w;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

/// Index of the largest entry; the lowest index wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

// ── MDP ──────────────────────────────────────────────────────────────────

/// A finite discounted MDP with strictly positive rewards.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp {
    dynamics: TabularModel,
    reward: Vec<f64>,
    discount: f64,
    initial: Vec<f64>,
}

/// One violated invariant found by [`validate_mdp`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    RowNotNormalized { state: usize, action: usize, sum: f64 },
    ProbabilityOutOfRange { index: usize, value: f64 },
    NonPositiveReward { state: usize, action: usize, value: f64 },
    InitialNotNormalized { sum: f64 },
    InitialOutOfRange { state: usize, value: f64 },
    DiscountOutOfRange { value: f64 },
    ShapeMismatch(String),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::RowNotNormalized { state, action, sum } => {
                write!(f, "row not normalized: (s={state}, a={action}) sums to {sum}")
            }
            Violation::ProbabilityOutOfRange { index, value } => {
                write!(f, "transition entry {index} = {value} outside [0, 1]")
            }
            Violation::NonPositiveReward {
                state,
                action,
                value,
            } => write!(
                f,
                "reward must be strictly positive: r(s={state}, a={action}) = {value}"
            ),
            Violation::InitialNotNormalized { sum } => {
                write!(f, "initial distribution not normalized: sums to {sum}")
            }
            Violation::InitialOutOfRange { state, value } => {
                write!(f, "initial probability of state {state} = {value} outside [0, 1]")
            }
            Violation::DiscountOutOfRange { value } => {
                write!(f, "discount must lie in (0, 1), got {value}")
            }
            Violation::ShapeMismatch(msg) => write!(f, "shape mismatch: {msg}"),
        }
    }
}

impl TabularMdp {
    /// Builds and validates an MDP.
    pub fn new(
        num_states: usize,
        num_actions: usize,
        transition: Vec<f64>,
        reward: Vec<f64>,
        discount: f64,
        initial: Vec<f64>,
    ) -> Result<Self> {
        let mdp = Self::new_unchecked(num_states, num_actions, transition, reward, discount, initial)?;
        let report = validate_mdp(&mdp);
        if let Some(first) = report.first() {
            return Err(MnmError::InvalidMdp(first.to_string()));
        }
        Ok(mdp)
    }

    /// Builds an MDP checking only tensor shapes; use [`validate_mdp`] to inspect it.
    pub fn new_unchecked(
        num_states: usize,
        num_actions: usize,
        transition: Vec<f64>,
        reward: Vec<f64>,
        discount: f64,
        initial: Vec<f64>,
    ) -> Result<Self> {
        let dynamics = TabularModel::from_vec_unchecked(num_states, num_actions, transition)?;
        if reward.len() != num_states * num_actions {
            return Err(MnmError::DimensionMismatch(format!(
                "expected {} reward entries, got {}",
                num_states * num_actions,
                reward.len()
            )));
        }
        if initial.len() != num_states {
            return Err(MnmError::DimensionMismatch(format!(
                "expected {num_states} initial probabilities, got {}",
                initial.len()
            )));
        }
        Ok(Self {
            dynamics,
            reward,
            discount,
            initial,
        })
    }

    pub fn from_model(
        dynamics: TabularModel,
        reward: Vec<f64>,
        discount: f64,
        initial: Vec<f64>,
    ) -> Result<Self> {
        let (s, a) = (dynamics.num_states, dynamics.num_actions);
        Self::new(s, a, dynamics.probs, reward, discount, initial)
    }

    /// Same dynamics, discount, and start distribution with a new reward table.
    pub fn with_reward(&self, reward: Vec<f64>) -> Result<Self> {
        Self::from_model(self.dynamics.clone(), reward, self.discount, self.initial.clone())
    }

    pub fn num_states(&self) -> usize {
        self.dynamics.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.dynamics.num_actions
    }

    pub fn dynamics(&self) -> &TabularModel {
        &self.dynamics
    }

    pub fn rewards(&self) -> &[f64] {
        &self.reward
    }

    #[inline]
    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.reward[s * self.num_actions() + a]
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    pub fn max_reward(&self) -> f64 {
        self.reward.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_reward(&self) -> f64 {
        self.reward.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Tail bound `γ^{H+1} max(r) / (1 - γ)` on the return beyond step `horizon`.
    pub fn truncation_error(&self, horizon: usize) -> f64 {
        self.discount.powi(horizon as i32 + 1) * self.max_reward() / (1.0 - self.discount)
    }
}

/// Lists every violated invariant of `mdp`; an empty report means valid.
pub fn validate_mdp(mdp: &TabularMdp) -> Vec<Violation> {
    let mut report = Vec::new();
    let (ns, na) = (mdp.num_states(), mdp.num_actions());
    for (index, &value) in mdp.dynamics.probs.iter().enumerate() {
        if !(0.0..=1.0).contains(&value) {
            report.push(Violation::ProbabilityOutOfRange { index, value });
        }
    }
    for s in 0..ns {
        for a in 0..na {
            let sum: f64 = mdp.dynamics.row(s, a).iter().sum();
            if (sum - 1.0).abs() > PROB_TOL {
                report.push(Violation::RowNotNormalized {
                    state: s,
                    action: a,
                    sum,
                });
            }
            let value = mdp.reward(s, a);
            if !(value > 0.0) || !value.is_finite() {
                report.push(Violation::NonPositiveReward {
                    state: s,
                    action: a,
                    value,
                });
            }
        }
    }
    for (state, &value) in mdp.initial.iter().enumerate() {
        if !(0.0..=1.0).contains(&value) {
            report.push(Violation::InitialOutOfRange { state, value });
        }
    }
    let sum: f64 = mdp.initial.iter().sum();
    if (sum - 1.0).abs() > PROB_TOL {
        report.push(Violation::InitialNotNormalized { sum });
    }
    if !(mdp.discount > 0.0 && mdp.discount < 1.0) {
        report.push(Violation::DiscountOutOfRange {
            value: mdp.discount,
        });
    }
    report
}

// ── Value tables and rewards ─────────────────────────────────────────────

/// State values, one per state.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueTable(pub Vec<f64>);

impl ValueTable {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn get(&self, s: usize) -> f64 {
        self.0[s]
    }
}

/// Action values indexed `(s, a)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    num_states: usize,
    num_actions: usize,
    values: Vec<f64>,
}

impl QTable {
    pub fn zeros(num_states: usize, num_actions: usize) -> Self {
        Self {
            num_states,
            num_actions,
            values: vec![0.0; num_states * num_actions],
        }
    }

    pub fn new(num_states: usize, num_actions: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != num_states * num_actions {
            return Err(MnmError::DimensionMismatch(format!(
                "expected {} Q entries, got {}",
                num_states * num_actions,
                values.len()
            )));
        }
        Ok(Self {
            num_states,
            num_actions,
            values,
        })
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    #[inline]
    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.values[s * self.num_actions + a]
    }

    #[inline]
    pub fn get_mut(&mut self, s: usize, a: usize) -> &mut f64 {
        &mut self.values[s * self.num_actions + a]
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.values[s * self.num_actions..(s + 1) * self.num_actions]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    /// `max_a Q(s, a)` for every state.
    pub fn max_values(&self) -> ValueTable {
        ValueTable(
            (0..self.num_states)
                .map(|s| self.row(s).iter().copied().fold(f64::NEG_INFINITY, f64::max))
                .collect(),
        )
    }

    /// `Σ_a π(a|s) Q(s, a)` for every state.
    pub fn policy_values(&self, policy: &TabularPolicy) -> ValueTable {
        ValueTable(
            (0..self.num_states)
                .map(|s| {
                    (0..self.num_actions)
                        .filter(|&a| policy.prob(s, a) > 0.0)
                        .map(|a| policy.prob(s, a) * self.get(s, a))
                        .sum()
                })
                .collect(),
        )
    }
}

/// A next-state-dependent reward `r̃(s, a, s')`.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardTable3 {
    num_states: usize,
    num_actions: usize,
    values: Vec<f64>,
}

impl RewardTable3 {
    pub fn new(num_states: usize, num_actions: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != num_states * num_actions * num_states {
            return Err(MnmError::DimensionMismatch(format!(
                "expected {} reward entries, got {}",
                num_states * num_actions * num_states,
                values.len()
            )));
        }
        Ok(Self {
            num_states,
            num_actions,
            values,
        })
    }

    pub fn from_fn(
        num_states: usize,
        num_actions: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Self {
        let mut values = Vec::with_capacity(num_states * num_actions * num_states);
        for s in 0..num_states {
            for a in 0..num_actions {
                for next in 0..num_states {
                    values.push(f(s, a, next));
                }
            }
        }
        Self {
            num_states,
            num_actions,
            values,
        }
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    #[inline]
    pub fn get(&self, s: usize, a: usize, next: usize) -> f64 {
        self.values[(s * self.num_actions + a) * self.num_states + next]
    }

    pub fn row(&self, s: usize, a: usize) -> &[f64] {
        let start = (s * self.num_actions + a) * self.num_states;
        &self.values[start..start + self.num_states]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    /// `Σ_{s'} q(s'|s,a) r̃(s,a,s')`, skipping entries the dynamics never reach.
    pub fn expected_under(&self, dynamics: &TabularModel) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_states * self.num_actions);
        for s in 0..self.num_states {
            for a in 0..self.num_actions {
                let total = dynamics
                    .row(s, a)
                    .iter()
                    .zip(self.row(s, a))
                    .filter(|(q, _)| **q > 0.0)
                    .map(|(q, r)| q * r)
                    .sum();
                out.push(total);
            }
        }
        out
    }
}

/// Reward argument accepted by the evaluators.
#[derive(Debug, Clone, Copy)]
pub enum Reward<'a> {
    /// `r(s, a)`, flat `(s, a)` layout.
    StateAction(&'a [f64]),
    /// `r̃(s, a, s')`.
    Transition(&'a RewardTable3),
}

impl Reward<'_> {
    fn expected(&self, dynamics: &TabularModel) -> Result<Vec<f64>> {
        let (ns, na) = (dynamics.num_states(), dynamics.num_actions());
        match self {
            Reward::StateAction(r) => {
                if r.len() != ns * na {
                    return Err(MnmError::DimensionMismatch(format!(
                        "reward has {} entries, dynamics expect {}",
                        r.len(),
                        ns * na
                    )));
                }
                Ok(r.to_vec())
            }
            Reward::Transition(table) => {
                if table.num_states != ns || table.num_actions != na {
                    return Err(MnmError::DimensionMismatch(
                        "transition reward shape differs from dynamics".into(),
                    ));
                }
                Ok(table.expected_under(dynamics))
            }
        }
    }
}

// ── Policy evaluation ────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EvalMethod {
    /// Direct solve up to [`DIRECT_SOLVE_MAX_STATES`], iterative above.
    Auto,
    Direct,
    Iterative { max_iters: usize },
}

/// Exact evaluation of `policy` under `dynamics` with the given reward.
///
/// Entries of `r^π` equal to `-∞` propagate: every state that reaches such a
/// state with positive probability gets value `-∞`.
pub fn policy_evaluation(
    dynamics: &TabularModel,
    policy: &TabularPolicy,
    reward: Reward<'_>,
    discount: f64,
    tol: f64,
) -> Result<ValueTable> {
    policy_evaluation_with(dynamics, policy, reward, discount, tol, EvalMethod::Auto)
}

pub fn policy_evaluation_with(
    dynamics: &TabularModel,
    policy: &TabularPolicy,
    reward: Reward<'_>,
    discount: f64,
    tol: f64,
    method: EvalMethod,
) -> Result<ValueTable> {
    if policy.num_states() != dynamics.num_states() || policy.num_actions() != dynamics.num_actions()
    {
        return Err(MnmError::DimensionMismatch(
            "policy shape differs from dynamics".into(),
        ));
    }
    if !(tol > 0.0) {
        return Err(MnmError::InvalidArgument("tolerance must be positive".into()));
    }
    if !(discount > 0.0 && discount < 1.0) {
        return Err(MnmError::InvalidArgument(format!(
            "discount must lie in (0, 1), got {discount}"
        )));
    }
    let expected = reward.expected(dynamics)?;
    let (p_pi, r_pi) = policy_matrices(dynamics, policy, &expected);
    if r_pi.iter().any(|r| r.is_nan() || *r == f64::INFINITY) {
        return Err(MnmError::InvalidArgument(
            "reward contains NaN or +∞ under the policy".into(),
        ));
    }

    let ns = dynamics.num_states();
    let doomed = reaches_negative_infinity(&p_pi, &r_pi, ns);
    let keep: Vec<usize> = (0..ns).filter(|&s| !doomed[s]).collect();
    let mut values = vec![f64::NEG_INFINITY; ns];
    if keep.is_empty() {
        return Ok(ValueTable(values));
    }

    let method = match method {
        EvalMethod::Auto if keep.len() <= DIRECT_SOLVE_MAX_STATES => EvalMethod::Direct,
        EvalMethod::Auto => EvalMethod::Iterative {
            max_iters: 1_000_000,
        },
        m => m,
    };
    let sub = match method {
        EvalMethod::Direct => solve_direct(&p_pi, &r_pi, &keep, ns, discount, tol)?,
        EvalMethod::Iterative { max_iters } => {
            solve_iterative(&p_pi, &r_pi, &keep, ns, discount, tol, max_iters)?
        }
        EvalMethod::Auto => unreachable!(),
    };
    for (i, &s) in keep.iter().enumerate() {
        values[s] = sub[i];
    }
    Ok(ValueTable(values))
}

/// State-to-state matrix `P^π` (row-major `ns × ns`) and reward vector `r^π`.
fn policy_matrices(
    dynamics: &TabularModel,
    policy: &TabularPolicy,
    expected: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let (ns, na) = (dynamics.num_states(), dynamics.num_actions());
    let mut p_pi = vec![0.0; ns * ns];
    let mut r_pi = vec![0.0; ns];
    for s in 0..ns {
        for a in 0..na {
            let w = policy.prob(s, a);
            if w <= 0.0 {
                continue;
            }
            r_pi[s] += w * expected[s * na + a];
            for (next, &p) in dynamics.row(s, a).iter().enumerate() {
                p_pi[s * ns + next] += w * p;
            }
        }
    }
    (p_pi, r_pi)
}

fn reaches_negative_infinity(p_pi: &[f64], r_pi: &[f64], ns: usize) -> Vec<bool> {
    let mut doomed: Vec<bool> = r_pi.iter().map(|r| *r == f64::NEG_INFINITY).collect();
    let mut changed = doomed.iter().any(|d| *d);
    while changed {
        changed = false;
        for s in 0..ns {
            if doomed[s] {
                continue;
            }
            if (0..ns).any(|t| doomed[t] && p_pi[s * ns + t] > 0.0) {
                doomed[s] = true;
                changed = true;
            }
        }
    }
    doomed
}

fn solve_direct(
    p_pi: &[f64],
    r_pi: &[f64],
    keep: &[usize],
    ns: usize,
    discount: f64,
    tol: f64,
) -> Result<Vec<f64>> {
    let n = keep.len();
    let a = DMatrix::from_fn(n, n, |i, j| {
        let id = if i == j { 1.0 } else { 0.0 };
        id - discount * p_pi[keep[i] * ns + keep[j]]
    });
    let b = DVector::from_iterator(n, keep.iter().map(|&s| r_pi[s]));
    let lu = a.clone().lu();
    let mut x = lu.solve(&b).ok_or(MnmError::SingularSystem)?;
    // A couple of refinement passes keep the residual at round-off level even
    // for badly scaled augmented rewards.
    for _ in 0..3 {
        let residual = &b - &a * &x;
        let worst = residual.amax();
        if worst < tol * 1e-2 {
            break;
        }
        let correction = lu.solve(&residual).ok_or(MnmError::SingularSystem)?;
        x += correction;
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(MnmError::SingularSystem);
    }
    let residual = (&b - &a * &x).amax();
    let scale = 1.0 + x.amax();
    if residual > tol * scale {
        return Err(MnmError::NonConvergence {
            iterations: 0,
            residual,
        });
    }
    Ok(x.iter().copied().collect())
}

fn solve_iterative(
    p_pi: &[f64],
    r_pi: &[f64],
    keep: &[usize],
    ns: usize,
    discount: f64,
    tol: f64,
    max_iters: usize,
) -> Result<Vec<f64>> {
    let mut v = vec![0.0; ns];
    let mut residual = f64::INFINITY;
    for iteration in 0..max_iters {
        residual = 0.0;
        let mut next = v.clone();
        for &s in keep {
            let mut total = r_pi[s];
            for &t in keep {
                let p = p_pi[s * ns + t];
                if p > 0.0 {
                    total += discount * p * v[t];
                }
            }
            residual = f64::max(residual, (total - v[s]).abs());
            next[s] = total;
        }
        v = next;
        if residual < tol {
            let _ = iteration;
            return Ok(keep.iter().map(|&s| v[s]).collect());
        }
    }
    Err(MnmError::NonConvergence {
        iterations: max_iters,
        residual,
    })
}

/// `J = Σ_s p0(s) V^π(s)` under the true dynamics and reward.
pub fn expected_return(mdp: &TabularMdp, policy: &TabularPolicy) -> Result<f64> {
    let v = policy_evaluation(
        mdp.dynamics(),
        policy,
        Reward::StateAction(mdp.rewards()),
        mdp.discount(),
        SOLVE_TOL,
    )?;
    Ok(initial_weighted(mdp.initial(), &v))
}

/// Variance of the infinite-horizon discounted return from `p0`.
///
/// The second moment `M(s) = E[G²|s_0 = s]` solves
/// `M = Σ_a π (r² + 2γ r P V) + γ² P^π M`, a policy evaluation with
/// discount `γ²`; the variance is `p0ᵀM - J²`.
pub fn return_variance(mdp: &TabularMdp, policy: &TabularPolicy) -> Result<f64> {
    let g = mdp.discount();
    let p = mdp.dynamics();
    let v = policy_evaluation(p, policy, Reward::StateAction(mdp.rewards()), g, SOLVE_TOL)?;
    let (ns, na) = (mdp.num_states(), mdp.num_actions());
    let mut second = Vec::with_capacity(ns * na);
    for s in 0..ns {
        for a in 0..na {
            let r = mdp.reward(s, a);
            let next: f64 = p.row(s, a).iter().zip(v.values()).map(|(q, x)| q * x).sum();
            second.push(r * r + 2.0 * g * r * next);
        }
    }
    let m = policy_evaluation(p, policy, Reward::StateAction(&second), g * g, SOLVE_TOL)?;
    let j = initial_weighted(mdp.initial(), &v);
    Ok((initial_weighted(mdp.initial(), &m) - j * j).max(0.0))
}

pub fn initial_weighted(initial: &[f64], values: &ValueTable) -> f64 {
    initial
        .iter()
        .zip(values.values())
        .filter(|(p, _)| **p > 0.0)
        .map(|(p, v)| p * v)
        .sum()
}

/// Normalized discounted state occupancy `ρ = (1-γ) p0ᵀ (I - γ P^π)^{-1}`.
pub fn occupancy(mdp: &TabularMdp, policy: &TabularPolicy) -> Result<Vec<f64>> {
    occupancy_under(mdp.dynamics(), policy, mdp.initial(), mdp.discount())
}

pub fn occupancy_under(
    dynamics: &TabularModel,
    policy: &TabularPolicy,
    initial: &[f64],
    discount: f64,
) -> Result<Vec<f64>> {
    let ns = dynamics.num_states();
    if initial.len() != ns {
        return Err(MnmError::DimensionMismatch(
            "initial distribution length differs from state count".into(),
        ));
    }
    let zero = vec![0.0; ns * dynamics.num_actions()];
    let (p_pi, _) = policy_matrices(dynamics, policy, &zero);
    // (I - γ P^π)ᵀ x = (1 - γ) p0
    let a = DMatrix::from_fn(ns, ns, |i, j| {
        let id = if i == j { 1.0 } else { 0.0 };
        id - discount * p_pi[j * ns + i]
    });
    let b = DVector::from_iterator(ns, initial.iter().map(|p| (1.0 - discount) * p));
    let x = a.lu().solve(&b).ok_or(MnmError::SingularSystem)?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(MnmError::SingularSystem);
    }
    Ok(x.iter().map(|v| v.max(0.0)).collect())
}

// ── Control ──────────────────────────────────────────────────────────────

/// Deterministic greedy policy; ties go to the lowest action index.
pub fn greedy_policy(q: &QTable) -> TabularPolicy {
    let actions: Vec<usize> = (0..q.num_states()).map(|s| argmax(q.row(s))).collect();
    TabularPolicy::deterministic(q.num_actions(), &actions)
        .expect("argmax is always a valid action")
}

/// One-step lookahead `Q(s,a) = E_{s'}[r + γ V(s')]`.
pub fn q_from_values(
    dynamics: &TabularModel,
    reward: Reward<'_>,
    values: &ValueTable,
    discount: f64,
) -> Result<QTable> {
    let (ns, na) = (dynamics.num_states(), dynamics.num_actions());
    if values.0.len() != ns {
        return Err(MnmError::DimensionMismatch(
            "value table length differs from state count".into(),
        ));
    }
    let expected = reward.expected(dynamics)?;
    let mut q = QTable::zeros(ns, na);
    for s in 0..ns {
        for a in 0..na {
            let future: f64 = dynamics
                .row(s, a)
                .iter()
                .zip(&values.0)
                .filter(|(p, _)| **p > 0.0)
                .map(|(p, v)| p * v)
                .sum();
            *q.get_mut(s, a) = expected[s * na + a] + discount * future;
        }
    }
    Ok(q)
}

/// Optimal policy and value of a reward/dynamics pair.
#[derive(Debug, Clone)]
pub struct OptimalSolution {
    pub policy: TabularPolicy,
    pub value: ValueTable,
    pub q: QTable,
}

/// Bellman-optimality iteration followed by exact policy iteration.
///
/// The returned policy is greedy with respect to its own exact value and
/// switches away from an incumbent action only for a strict improvement, so
/// the result is stable and optimal up to the solve tolerance.
pub fn solve_optimal(
    dynamics: &TabularModel,
    reward: Reward<'_>,
    discount: f64,
) -> Result<OptimalSolution> {
    solve_optimal_from(dynamics, reward, discount, None)
}

/// [`solve_optimal`] with the value iteration phase warm-started at `init`.
pub fn solve_optimal_from(
    dynamics: &TabularModel,
    reward: Reward<'_>,
    discount: f64,
    init: Option<&ValueTable>,
) -> Result<OptimalSolution> {
    let (ns, na) = (dynamics.num_states(), dynamics.num_actions());
    let expected = reward.expected(dynamics)?;
    let table = |v: &ValueTable| -> QTable {
        let mut q = QTable::zeros(ns, na);
        for s in 0..ns {
            for a in 0..na {
                let future: f64 = dynamics
                    .row(s, a)
                    .iter()
                    .zip(&v.0)
                    .filter(|(p, _)| **p > 0.0)
                    .map(|(p, v)| p * v)
                    .sum();
                *q.get_mut(s, a) = expected[s * na + a] + discount * future;
            }
        }
        q
    };

    let mut v = match init {
        Some(v) if v.0.len() == ns && v.0.iter().all(|x| x.is_finite()) => v.clone(),
        _ => ValueTable(vec![0.0; ns]),
    };
    for _ in 0..10_000 {
        let next = table(&v).max_values();
        let delta = next
            .0
            .iter()
            .zip(&v.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        v = next;
        if delta < 1e-12 {
            break;
        }
    }
    let mut actions: Vec<usize> = {
        let q = table(&v);
        (0..ns).map(|s| argmax(q.row(s))).collect()
    };
    for _ in 0..1000 {
        let policy = TabularPolicy::deterministic(na, &actions)?;
        let value = policy_evaluation(
            dynamics,
            &policy,
            Reward::StateAction(&expected),
            discount,
            SOLVE_TOL,
        )?;
        let q = table(&value);
        let mut changed = false;
        for s in 0..ns {
            let best = argmax(q.row(s));
            let margin = 1e-12 * (1.0 + q.get(s, actions[s]).abs());
            if q.get(s, best) > q.get(s, actions[s]) + margin {
                actions[s] = best;
                changed = true;
            }
        }
        if !changed {
            return Ok(OptimalSolution { policy, value, q });
        }
    }
    Err(MnmError::NonConvergence {
        iterations: 1000,
        residual: f64::NAN,
    })
}

/// Probability of visiting `target` within `steps` transitions from `initial`.
pub fn reach_probability(
    dynamics: &TabularModel,
    policy: &TabularPolicy,
    initial: &[f64],
    target: usize,
    steps: usize,
) -> f64 {
    let ns = dynamics.num_states();
    let na = dynamics.num_actions();
    // hit[s] = P(reach target within k steps | s)
    let mut hit: Vec<f64> = (0..ns).map(|s| if s == target { 1.0 } else { 0.0 }).collect();
    for _ in 0..steps {
        let mut next = vec![0.0; ns];
        for s in 0..ns {
            if s == target {
                next[s] = 1.0;
                continue;
            }
            let mut total = 0.0;
            for a in 0..na {
                let w = policy.prob(s, a);
                if w <= 0.0 {
                    continue;
                }
                let inner: f64 = dynamics.row(s, a).iter().zip(&hit).map(|(p, h)| p * h).sum();
                total += w * inner;
            }
            next[s] = total;
        }
        hit = next;
    }
    initial.iter().zip(&hit).map(|(p, h)| p * h).sum()
}

// ── Trajectory enumeration ───────────────────────────────────────────────

/// States `s_0..s_H` and the actions taken in each of them.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Trajectory {
    pub states: Vec<usize>,
    pub actions: Vec<usize>,
}

impl Trajectory {
    pub fn horizon(&self) -> usize {
        self.states.len().saturating_sub(1)
    }

    /// `Σ_{t ≤ H} γ^t r(s_t, a_t)`.
    pub fn discounted_return(&self, mdp: &TabularMdp) -> f64 {
        let mut total = 0.0;
        let mut weight = 1.0;
        for (&s, &a) in self.states.iter().zip(&self.actions) {
            total += weight * mdp.reward(s, a);
            weight *= mdp.discount();
        }
        total
    }

    /// `log p0(s_0) + Σ log π(a_t|s_t) + Σ log p(s_{t+1}|s_t,a_t)`.
    pub fn log_probability(
        &self,
        initial: &[f64],
        dynamics: &TabularModel,
        policy: &TabularPolicy,
    ) -> f64 {
        let mut total = initial[self.states[0]].ln();
        for t in 0..self.states.len() {
            let (s, a) = (self.states[t], self.actions[t]);
            total += policy.prob(s, a).ln();
            if t + 1 < self.states.len() {
                total += dynamics.prob(s, a, self.states[t + 1]).ln();
            }
        }
        total
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedTrajectory {
    pub trajectory: Trajectory,
    pub weight: f64,
    pub ret: f64,
}

/// Every trajectory of a fixed horizon with its probability and return.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySet {
    pub entries: Vec<WeightedTrajectory>,
    pub horizon: usize,
    pub discount: f64,
    /// Probability mass of branches dropped by `prune_below`.
    pub pruned_mass: f64,
    /// `γ^{H+1} max(r) / (1 - γ)`.
    pub truncation_error: f64,
}

impl TrajectorySet {
    pub fn total_weight(&self) -> f64 {
        self.entries.iter().map(|e| e.weight).sum()
    }

    /// `Σ_τ w(τ) R(τ)` over the retained trajectories.
    pub fn expected_return(&self) -> f64 {
        self.entries.iter().map(|e| e.weight * e.ret).sum()
    }

    /// Variance of the truncated return over the retained trajectories.
    pub fn return_variance(&self) -> f64 {
        let mass = self.total_weight();
        let mean = self.expected_return() / mass;
        self.entries
            .iter()
            .map(|e| e.weight * (e.ret - mean).powi(2))
            .sum::<f64>()
            / mass
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnumerationLimits {
    pub prune_below: f64,
    pub max_trajectories: usize,
}

impl Default for EnumerationLimits {
    fn default() -> Self {
        Self {
            prune_below: 0.0,
            max_trajectories: MAX_TRAJECTORIES,
        }
    }
}

/// Enumerates every horizon-`H` trajectory of `policy` under `dynamics`,
/// using the start distribution, reward, and discount of `mdp`.
///
/// Branches with zero probability are never expanded. Branches whose prefix
/// probability falls below `limits.prune_below` are dropped and their mass
/// is reported in [`TrajectorySet::pruned_mass`].
pub fn enumerate_trajectories(
    mdp: &TabularMdp,
    dynamics: &TabularModel,
    policy: &TabularPolicy,
    horizon: usize,
    limits: EnumerationLimits,
) -> Result<TrajectorySet> {
    if !dynamics.same_shape(mdp.dynamics())
        || policy.num_states() != mdp.num_states()
        || policy.num_actions() != mdp.num_actions()
    {
        return Err(MnmError::DimensionMismatch(
            "dynamics or policy shape differs from the MDP".into(),
        ));
    }
    if !(limits.prune_below >= 0.0) {
        return Err(MnmError::InvalidArgument("prune_below must be non-negative".into()));
    }
    let mut walker = Walker {
        mdp,
        dynamics,
        policy,
        horizon,
        limits,
        states: Vec::with_capacity(horizon + 1),
        actions: Vec::with_capacity(horizon + 1),
        entries: Vec::new(),
        pruned: 0.0,
    };
    for (s0, &p0) in mdp.initial().iter().enumerate() {
        if p0 > 0.0 {
            walker.visit_state(s0, p0, 0.0, 1.0)?;
        }
    }
    Ok(TrajectorySet {
        entries: walker.entries,
        horizon,
        discount: mdp.discount(),
        pruned_mass: walker.pruned,
        truncation_error: mdp.truncation_error(horizon),
    })
}

struct Walker<'a> {
    mdp: &'a TabularMdp,
    dynamics: &'a TabularModel,
    policy: &'a TabularPolicy,
    horizon: usize,
    limits: EnumerationLimits,
    states: Vec<usize>,
    actions: Vec<usize>,
    entries: Vec<WeightedTrajectory>,
    pruned: f64,
}

impl Walker<'_> {
    fn visit_state(&mut self, s: usize, weight: f64, ret: f64, discount_t: f64) -> Result<()> {
        if weight < self.limits.prune_below {
            self.pruned += weight;
            return Ok(());
        }
        self.states.push(s);
        for a in 0..self.mdp.num_actions() {
            let pa = self.policy.prob(s, a);
            if pa <= 0.0 {
                continue;
            }
            let w = weight * pa;
            if w < self.limits.prune_below {
                self.pruned += w;
                continue;
            }
            let r = ret + discount_t * self.mdp.reward(s, a);
            self.actions.push(a);
            if self.states.len() == self.horizon + 1 {
                if self.entries.len() >= self.limits.max_trajectories {
                    return Err(MnmError::EnumerationExplosion {
                        cap: self.limits.max_trajectories,
                    });
                }
                self.entries.push(WeightedTrajectory {
                    trajectory: Trajectory {
                        states: self.states.clone(),
                        actions: self.actions.clone(),
                    },
                    weight: w,
                    ret: r,
                });
            } else {
                for next in 0..self.mdp.num_states() {
                    let p = self.dynamics.prob(s, a, next);
                    if p > 0.0 {
                        self.visit_state(next, w * p, r, discount_t * self.mdp.discount())?;
                    }
                }
            }
            self.actions.pop();
        }
        self.states.pop();
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn single_state(reward: f64, discount: f64) -> TabularMdp {
        TabularMdp::new(1, 1, vec![1.0], vec![reward], discount, vec![1.0]).unwrap()
    }

    /// 0 -> 1 deterministically, 1 absorbing, rewards (1, 2).
    fn chain(discount: f64) -> TabularMdp {
        TabularMdp::new(
            2,
            1,
            vec![0.0, 1.0, 0.0, 1.0],
            vec![1.0, 2.0],
            discount,
            vec![1.0, 0.0],
        )
        .unwrap()
    }

    #[test]
    fn validation_reports() {
        let good = chain(0.9);
        assert!(validate_mdp(&good).is_empty());

        let zero_reward =
            TabularMdp::new_unchecked(1, 1, vec![1.0], vec![0.0], 0.9, vec![1.0]).unwrap();
        let report = validate_mdp(&zero_reward);
        assert_eq!(report.len(), 1);
        assert!(report[0].to_string().contains("reward must be strictly positive"));

        let short_row =
            TabularMdp::new_unchecked(2, 1, vec![0.5, 0.4, 0.0, 1.0], vec![1.0, 1.0], 0.9, vec![1.0, 0.0])
                .unwrap();
        let report = validate_mdp(&short_row);
        assert_eq!(report.len(), 1);
        assert!(report[0].to_string().contains("row not normalized"));

        let bad_discount =
            TabularMdp::new_unchecked(1, 1, vec![1.0], vec![1.0], 1.0, vec![1.0]).unwrap();
        assert!(matches!(
            validate_mdp(&bad_discount)[0],
            Violation::DiscountOutOfRange { .. }
        ));
        assert!(TabularMdp::new(1, 1, vec![1.0], vec![1.0], 1.0, vec![1.0]).is_err());
    }

    #[test]
    fn single_state_value_is_geometric_series() {
        let mdp = single_state(1.0, 0.5);
        let pi = TabularPolicy::uniform(1, 1);
        let v = policy_evaluation(mdp.dynamics(), &pi, Reward::StateAction(mdp.rewards()), 0.5, SOLVE_TOL)
            .unwrap();
        assert_abs_diff_eq!(v.get(0), 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(expected_return(&mdp, &pi).unwrap(), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn direct_and_iterative_agree_on_chain() {
        let mdp = chain(0.9);
        let pi = TabularPolicy::uniform(2, 1);
        let reward = Reward::StateAction(mdp.rewards());
        let direct =
            policy_evaluation_with(mdp.dynamics(), &pi, reward, 0.9, SOLVE_TOL, EvalMethod::Direct)
                .unwrap();
        // Oracle: 10,000 plain Bellman sweeps.
        let mut v = [0.0f64; 2];
        for _ in 0..10_000 {
            v = [1.0 + 0.9 * v[1], 2.0 + 0.9 * v[1]];
        }
        assert_abs_diff_eq!(direct.get(0), v[0], epsilon = 1e-8);
        assert_abs_diff_eq!(direct.get(1), v[1], epsilon = 1e-8);
        let iterative = policy_evaluation_with(
            mdp.dynamics(),
            &pi,
            reward,
            0.9,
            1e-12,
            EvalMethod::Iterative { max_iters: 100_000 },
        )
        .unwrap();
        assert_abs_diff_eq!(iterative.get(0), direct.get(0), epsilon = 1e-8);
    }

    #[test]
    fn iterative_cap_reports_nonconvergence() {
        let mdp = chain(0.99);
        let pi = TabularPolicy::uniform(2, 1);
        let err = policy_evaluation_with(
            mdp.dynamics(),
            &pi,
            Reward::StateAction(mdp.rewards()),
            0.99,
            1e-12,
            EvalMethod::Iterative { max_iters: 3 },
        )
        .unwrap_err();
        assert!(matches!(err, MnmError::NonConvergence { iterations: 3, .. }));
    }

    #[test]
    fn negative_infinity_propagates_to_predecessors() {
        // 0 -> 1 -> 1, reward of state 1 is -inf, state 2 isolated.
        let model = TabularModel::new(
            3,
            1,
            vec![0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
        )
        .unwrap();
        let r = [1.0, f64::NEG_INFINITY, 1.0];
        let pi = TabularPolicy::uniform(3, 1);
        let v = policy_evaluation(&model, &pi, Reward::StateAction(&r), 0.5, SOLVE_TOL).unwrap();
        assert_eq!(v.get(0), f64::NEG_INFINITY);
        assert_eq!(v.get(1), f64::NEG_INFINITY);
        assert_abs_diff_eq!(v.get(2), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn occupancy_examples() {
        let mdp = single_state(1.0, 0.3);
        let rho = occupancy(&mdp, &TabularPolicy::uniform(1, 1)).unwrap();
        assert_abs_diff_eq!(rho[0], 1.0, epsilon = 1e-12);

        let mdp = chain(0.5);
        let rho = occupancy(&mdp, &TabularPolicy::uniform(2, 1)).unwrap();
        assert_abs_diff_eq!(rho[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(rho[1], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn greedy_ties_and_shift_invariance() {
        let q = QTable::new(2, 2, vec![1.0, 2.0, 2.0, 2.0]).unwrap();
        let pi = greedy_policy(&q);
        assert_eq!(pi.mode(), vec![1, 0]);
        let shifted = QTable::new(2, 2, vec![11.0, 12.0, -3.0, -3.0]).unwrap();
        assert_eq!(greedy_policy(&shifted), pi);
    }

    #[test]
    fn enumeration_small_cases() {
        let mdp = chain(0.9);
        let pi = TabularPolicy::uniform(2, 1);
        let set = enumerate_trajectories(&mdp, mdp.dynamics(), &pi, 3, EnumerationLimits::default())
            .unwrap();
        assert_eq!(set.len(), 1);
        assert_abs_diff_eq!(set.entries[0].weight, 1.0, epsilon = 1e-15);
        assert_eq!(set.entries[0].trajectory.states, vec![0, 1, 1, 1]);

        let two_actions =
            TabularMdp::new(1, 2, vec![1.0, 1.0], vec![1.0, 2.0], 0.9, vec![1.0]).unwrap();
        let set = enumerate_trajectories(
            &two_actions,
            two_actions.dynamics(),
            &TabularPolicy::uniform(1, 2),
            2,
            EnumerationLimits::default(),
        )
        .unwrap();
        assert_eq!(set.len(), 8);
        for e in &set.entries {
            assert_abs_diff_eq!(e.weight, 0.125, epsilon = 1e-15);
            assert_abs_diff_eq!(e.ret, e.trajectory.discounted_return(&two_actions), epsilon = 1e-12);
        }
    }

    #[test]
    fn return_variance_matches_enumeration() {
        let mdp = TabularMdp::new(
            2,
            2,
            vec![0.3, 0.7, 0.6, 0.4, 0.5, 0.5, 0.1, 0.9],
            vec![1.0, 2.0, 0.5, 3.0],
            0.2,
            vec![0.4, 0.6],
        )
        .unwrap();
        let pi = TabularPolicy::new(2, 2, vec![0.2, 0.8, 0.5, 0.5]).unwrap();
        let set = enumerate_trajectories(&mdp, mdp.dynamics(), &pi, 9, EnumerationLimits::default()).unwrap();
        assert_abs_diff_eq!(return_variance(&mdp, &pi).unwrap(), set.return_variance(), epsilon = 1e-6);
        assert_abs_diff_eq!(return_variance(&single_state(2.0, 0.5), &TabularPolicy::uniform(1, 1)).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn enumeration_cap_and_pruning() {
        let two_actions =
            TabularMdp::new(1, 2, vec![1.0, 1.0], vec![1.0, 2.0], 0.9, vec![1.0]).unwrap();
        let pi = TabularPolicy::uniform(1, 2);
        let err = enumerate_trajectories(
            &two_actions,
            two_actions.dynamics(),
            &pi,
            4,
            EnumerationLimits {
                prune_below: 0.0,
                max_trajectories: 10,
            },
        )
        .unwrap_err();
        assert_eq!(err, MnmError::EnumerationExplosion { cap: 10 });

        let pi = TabularPolicy::new(1, 2, vec![0.9, 0.1]).unwrap();
        let set = enumerate_trajectories(
            &two_actions,
            two_actions.dynamics(),
            &pi,
            3,
            EnumerationLimits {
                prune_below: 0.005,
                max_trajectories: MAX_TRAJECTORIES,
            },
        )
        .unwrap();
        assert!(set.pruned_mass > 0.0);
        assert_abs_diff_eq!(set.total_weight() + set.pruned_mass, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn reach_probability_on_chain() {
        let mdp = chain(0.9);
        let pi = TabularPolicy::uniform(2, 1);
        assert_eq!(reach_probability(mdp.dynamics(), &pi, mdp.initial(), 1, 0), 0.0);
        assert_eq!(reach_probability(mdp.dynamics(), &pi, mdp.initial(), 1, 1), 1.0);
    }

    #[test]
    fn solve_optimal_picks_better_action() {
        // One state, two actions with rewards 1 and 3.
        let mdp = TabularMdp::new(1, 2, vec![1.0, 1.0], vec![1.0, 3.0], 0.5, vec![1.0]).unwrap();
        let sol = solve_optimal(mdp.dynamics(), Reward::StateAction(mdp.rewards()), 0.5).unwrap();
        assert_eq!(sol.policy.mode(), vec![1]);
        assert_abs_diff_eq!(sol.value.get(0), 6.0, epsilon = 1e-10);
    }
}
