//! Exact evaluators for the lower bounds on log expected return, the
//! exponentiated-return upper bound, the closed-form optimal trajectory model
//! and discount, and the goal-reaching bound.
//!
//! Evaluators that need whole-trajectory quantities enumerate trajectories
//! with [`enumerate_trajectories`]; everything Markov is computed by linear
//! solves or forward recursions instead.

use crate::error::{MnmError, Result};
use crate::mdp::{
    enumerate_trajectories, expected_return, initial_weighted, occupancy, policy_evaluation,
    EnumerationLimits, Reward, RewardTable3, TabularMdp, TabularModel, TabularPolicy, Trajectory,
    TrajectorySet, WeightedTrajectory, SOLVE_TOL,
};

/// Default tolerance of the `holds` flag.
pub const BOUND_TOL: f64 = 1e-8;
/// Largest horizon chosen by [`default_horizon`].
pub const MAX_DEFAULT_HORIZON: usize = 60;

/// A bound compared against the quantity it bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundReport {
    pub bound_value: f64,
    pub reference_value: f64,
    /// `reference - bound`.
    pub slack: f64,
    pub truncation_error: f64,
    /// `bound <= reference + truncation + tol`.
    pub holds: bool,
}

impl BoundReport {
    pub fn new(bound: f64, reference: f64, truncation_error: f64, tol: f64) -> Self {
        Self {
            bound_value: bound,
            reference_value: reference,
            slack: reference - bound,
            truncation_error,
            holds: bound <= reference + truncation_error + tol,
        }
    }
}

/// A distribution over horizons `h = 0..=H`, possibly with mass beyond `H`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscountSchedule {
    pub masses: Vec<f64>,
    /// Mass not represented in `masses`.
    pub tail: f64,
}

impl DiscountSchedule {
    pub fn new(masses: Vec<f64>, tail: f64) -> Result<Self> {
        if masses.iter().any(|m| !(*m >= 0.0)) || !(tail >= 0.0) {
            return Err(MnmError::InvalidArgument("schedule masses must be non-negative".into()));
        }
        if masses.iter().sum::<f64>() > 1.0 + 1e-9 {
            return Err(MnmError::InvalidArgument("schedule masses exceed one".into()));
        }
        Ok(Self { masses, tail })
    }

    /// `(1-γ) γ^h` for `h ≤ horizon`, tail `γ^{H+1}`.
    pub fn geometric(discount: f64, horizon: usize) -> Self {
        let masses = (0..=horizon)
            .map(|h| (1.0 - discount) * discount.powi(h as i32))
            .collect();
        Self {
            masses,
            tail: discount.powi(horizon as i32 + 1),
        }
    }

    pub fn horizon(&self) -> usize {
        self.masses.len().saturating_sub(1)
    }

    pub fn total(&self) -> f64 {
        self.masses.iter().sum()
    }

    /// `Γ(t) = Σ_{t' ≤ t} γ(t')`.
    pub fn cdf(&self, t: usize) -> f64 {
        self.masses.iter().take(t + 1).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GoalTask {
    pub goal_state: usize,
}

/// Point value and bracket of the exponentiated-return objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VmbpoValue {
    /// `log Σ_τ p(τ) exp(η R_H(τ))` over the represented trajectories.
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Smallest `H` whose truncation error `γ^{H+1} max(r) / (1-γ)` is below 1e-6,
/// capped at [`MAX_DEFAULT_HORIZON`].
pub fn default_horizon(mdp: &TabularMdp) -> usize {
    (0..MAX_DEFAULT_HORIZON)
        .find(|&h| mdp.truncation_error(h) < 1e-6)
        .unwrap_or(MAX_DEFAULT_HORIZON)
}

fn log_sum_exp(values: impl IntoIterator<Item = f64>) -> f64 {
    let values: Vec<f64> = values.into_iter().collect();
    let peak = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if peak == f64::NEG_INFINITY || peak == f64::INFINITY {
        return peak;
    }
    peak + values.iter().map(|v| (v - peak).exp()).sum::<f64>().ln()
}

fn check_shapes(mdp: &TabularMdp, model: &TabularModel, policy: &TabularPolicy) -> Result<()> {
    if !model.same_shape(mdp.dynamics())
        || policy.num_states() != mdp.num_states()
        || policy.num_actions() != mdp.num_actions()
    {
        return Err(MnmError::DimensionMismatch(
            "model or policy shape differs from the MDP".into(),
        ));
    }
    Ok(())
}

/// `log p - log q` on the model's support; `-∞` where only the model moves.
fn log_ratio(p: f64, q: f64) -> f64 {
    if p > 0.0 {
        p.ln() - q.ln()
    } else {
        f64::NEG_INFINITY
    }
}

// ── Lower bound and its reference ────────────────────────────────────────

/// The augmented reward with exact density ratios, as used by [`objective_l`].
pub fn exact_mnm_reward(mdp: &TabularMdp, model: &TabularModel) -> RewardTable3 {
    let g = mdp.discount();
    let constant = (1.0 - g) * (1.0 - g).ln();
    let p = mdp.dynamics();
    RewardTable3::from_fn(mdp.num_states(), mdp.num_actions(), |s, a, next| {
        let q = model.prob(s, a, next);
        if q == 0.0 {
            0.0
        } else {
            (1.0 - g) * mdp.reward(s, a).ln() + log_ratio(p.prob(s, a, next), q) - constant
        }
    })
}

/// Expected discounted augmented reward under the model, weighted by `p0`.
///
/// Returns `-∞` when the model reaches a transition the true dynamics forbid.
pub fn objective_l(mdp: &TabularMdp, model: &TabularModel, policy: &TabularPolicy) -> Result<f64> {
    check_shapes(mdp, model, policy)?;
    let reward = exact_mnm_reward(mdp, model);
    let v = policy_evaluation(model, policy, Reward::Transition(&reward), mdp.discount(), SOLVE_TOL)?;
    Ok(initial_weighted(mdp.initial(), &v))
}

pub fn log_expected_return(mdp: &TabularMdp, policy: &TabularPolicy) -> Result<f64> {
    Ok(expected_return(mdp, policy)?.ln())
}

/// `objective_l` against `log J`.
pub fn check_lower_bound(
    mdp: &TabularMdp,
    model: &TabularModel,
    policy: &TabularPolicy,
) -> Result<BoundReport> {
    let bound = objective_l(mdp, model, policy)?;
    let reference = log_expected_return(mdp, policy)?;
    Ok(BoundReport::new(bound, reference, 0.0, BOUND_TOL))
}

// ── Exponentiated-return objective ───────────────────────────────────────

/// `log E[exp(η R)]` by trajectory enumeration at `horizon`.
///
/// The bracket covers both pruned branches (whose returns lie between the
/// smallest and largest possible horizon-`H` returns) and the unrolled tail.
pub fn vmbpo_objective(
    mdp: &TabularMdp,
    policy: &TabularPolicy,
    eta: f64,
    horizon: usize,
    limits: EnumerationLimits,
) -> Result<VmbpoValue> {
    if !(eta > 0.0) {
        return Err(MnmError::InvalidArgument("eta must be positive".into()));
    }
    let set = enumerate_trajectories(mdp, mdp.dynamics(), policy, horizon, limits)?;
    let value = log_sum_exp(set.entries.iter().map(|e| e.weight.ln() + eta * e.ret));
    let g = mdp.discount();
    let head = (1.0 - g.powi(horizon as i32 + 1)) / (1.0 - g);
    let tail = g.powi(horizon as i32 + 1) / (1.0 - g);
    let pruned = |r: f64| {
        if set.pruned_mass > 0.0 {
            log_sum_exp([value, set.pruned_mass.ln() + eta * r * head])
        } else {
            value
        }
    };
    Ok(VmbpoValue {
        value,
        lower: pruned(mdp.min_reward()) + eta * tail * mdp.min_reward(),
        upper: pruned(mdp.max_reward()) + eta * tail * mdp.max_reward(),
    })
}

/// `log E[exp(η R)]` by a backward risk-sensitive recursion over time.
///
/// `log W_t(s) = logsumexp_{a,s'} [log π(a|s) + η γ^t r(s,a) + log p(s'|s,a) + log W_{t+1}(s')]`
/// with `W_{H+1} = 1`; the tail beyond `horizon` is bracketed by the reward range.
pub fn vmbpo_objective_exact(
    mdp: &TabularMdp,
    policy: &TabularPolicy,
    eta: f64,
    horizon: usize,
) -> Result<VmbpoValue> {
    if !(eta > 0.0) {
        return Err(MnmError::InvalidArgument("eta must be positive".into()));
    }
    check_shapes(mdp, mdp.dynamics(), policy)?;
    let (ns, na) = (mdp.num_states(), mdp.num_actions());
    let g = mdp.discount();
    let p = mdp.dynamics();
    let mut log_w = vec![0.0; ns];
    for t in (0..=horizon).rev() {
        let scale = eta * g.powi(t as i32);
        let next: Vec<f64> = (0..ns)
            .map(|s| {
                let mut terms = Vec::new();
                for a in 0..na {
                    let pa = policy.prob(s, a);
                    if pa <= 0.0 {
                        continue;
                    }
                    let base = pa.ln() + scale * mdp.reward(s, a);
                    if t == horizon {
                        terms.push(base);
                        continue;
                    }
                    for (s2, &pp) in p.row(s, a).iter().enumerate() {
                        if pp > 0.0 {
                            terms.push(base + pp.ln() + log_w[s2]);
                        }
                    }
                }
                log_sum_exp(terms)
            })
            .collect();
        log_w = next;
    }
    let value = log_sum_exp(
        mdp.initial()
            .iter()
            .zip(&log_w)
            .filter(|(p0, _)| **p0 > 0.0)
            .map(|(p0, w)| p0.ln() + w),
    );
    let tail = g.powi(horizon as i32 + 1) / (1.0 - g);
    Ok(VmbpoValue {
        value,
        lower: value + eta * tail * mdp.min_reward(),
        upper: value + eta * tail * mdp.max_reward(),
    })
}

// ── Closed-form optima ───────────────────────────────────────────────────

/// Reweights a trajectory set by return: `w(τ) ∝ p(τ) R(τ)`.
pub fn reweight_by_return(set: &TrajectorySet) -> TrajectorySet {
    let total: f64 = set.entries.iter().map(|e| e.weight * e.ret).sum();
    TrajectorySet {
        entries: set
            .entries
            .iter()
            .map(|e| WeightedTrajectory {
                trajectory: e.trajectory.clone(),
                weight: e.weight * e.ret / total,
                ret: e.ret,
            })
            .collect(),
        horizon: set.horizon,
        discount: set.discount,
        pruned_mass: 0.0,
        truncation_error: set.truncation_error,
    }
}

/// Enumerates `policy` under the true dynamics and reweights by return.
pub fn optimal_trajectory_model(
    mdp: &TabularMdp,
    policy: &TabularPolicy,
    horizon: usize,
) -> Result<TrajectorySet> {
    let set = enumerate_trajectories(mdp, mdp.dynamics(), policy, horizon, EnumerationLimits::default())?;
    Ok(reweight_by_return(&set))
}

/// `γ*(h|τ) = γ^h r(s_h, a_h) / R_H(τ)` for `h ≤ H`.
///
/// Masses sum to one over the represented horizon; `tail` bounds the mass a
/// normalization by the untruncated return would move beyond `H`.
pub fn optimal_discount(trajectory: &Trajectory, mdp: &TabularMdp, horizon: usize) -> DiscountSchedule {
    let g = mdp.discount();
    let last = horizon.min(trajectory.horizon());
    let terms: Vec<f64> = (0..=last)
        .map(|h| g.powi(h as i32) * mdp.reward(trajectory.states[h], trajectory.actions[h]))
        .collect();
    let total: f64 = terms.iter().sum();
    DiscountSchedule {
        masses: terms.iter().map(|t| t / total).collect(),
        tail: mdp.truncation_error(last) / total,
    }
}

// ── Tight bound with a learned discount ──────────────────────────────────

/// Trajectory model for [`tight_objective_lgamma`].
#[derive(Debug, Clone, Copy)]
pub enum LgammaModel<'a> {
    /// A Markov model `q(s'|s,a)`; requires a schedule shared by all trajectories.
    Markov(&'a TabularModel),
    /// An explicit distribution over full-length trajectories.
    Trajectories(&'a TrajectorySet),
    /// The return-reweighted optimum `q*(τ) ∝ p(τ) R(τ)`.
    Optimal,
}

/// Discount schedule for [`tight_objective_lgamma`].
#[derive(Debug, Clone, Copy)]
pub enum ScheduleRule<'a> {
    /// The prior `(1-γ) γ^h`.
    Geometric,
    Shared(&'a DiscountSchedule),
    /// `γ*(h|τ)` from [`optimal_discount`], per trajectory.
    Optimal,
}

/// The tight bound with a learned discount, reference `log J`.
pub fn tight_objective_lgamma(
    mdp: &TabularMdp,
    policy: &TabularPolicy,
    model: LgammaModel<'_>,
    rule: ScheduleRule<'_>,
    horizon: usize,
) -> Result<BoundReport> {
    match model {
        LgammaModel::Markov(q) => {
            let schedule = match rule {
                ScheduleRule::Geometric => DiscountSchedule::geometric(mdp.discount(), horizon),
                ScheduleRule::Shared(s) => s.clone(),
                ScheduleRule::Optimal => {
                    return Err(MnmError::InvalidArgument(
                        "per-trajectory schedules need an enumerated trajectory model".into(),
                    ))
                }
            };
            lgamma_markov(mdp, q, policy, &schedule)
        }
        LgammaModel::Trajectories(set) => lgamma_enumerated(mdp, policy, set, rule),
        LgammaModel::Optimal => {
            let set = optimal_trajectory_model(mdp, policy, horizon)?;
            lgamma_enumerated(mdp, policy, &set, rule)
        }
    }
}

/// Shared-schedule form under a Markov model.
///
/// The log-ratio of the transition into `s_t` is weighted by the schedule
/// mass at horizons `h ≥ t`, and `log r(s_h, a_h)` by `γ(h)`:
/// `Σ_t (Γ(H) - Γ(t-1)) E_q[ℓ_t] + Σ_h γ(h) (E_q[log r_h] + log p(h) - log γ(h)) - log(1-γ)`.
/// The truncation error assumes the schedule's tail decays geometrically.
pub fn lgamma_markov(
    mdp: &TabularMdp,
    model: &TabularModel,
    policy: &TabularPolicy,
    schedule: &DiscountSchedule,
) -> Result<BoundReport> {
    check_shapes(mdp, model, policy)?;
    let (ns, na) = (mdp.num_states(), mdp.num_actions());
    let g = mdp.discount();
    let p = mdp.dynamics();
    let horizon = schedule.horizon();
    let total = schedule.total();
    let mut dist = mdp.initial().to_vec();
    let mut value = 0.0;
    let mut cdf = 0.0;
    let mut max_ratio: f64 = 0.0;
    for h in 0..=horizon {
        let mass = schedule.masses[h];
        let mut log_r = 0.0;
        let mut ratio = 0.0;
        let mut next = vec![0.0; ns];
        for s in 0..ns {
            if dist[s] == 0.0 {
                continue;
            }
            for a in 0..na {
                let w = dist[s] * policy.prob(s, a);
                if w == 0.0 {
                    continue;
                }
                log_r += w * mdp.reward(s, a).ln();
                for s2 in 0..ns {
                    let qq = model.prob(s, a, s2);
                    if qq > 0.0 {
                        let l = log_ratio(p.prob(s, a, s2), qq);
                        max_ratio = max_ratio.max(l.abs());
                        ratio += w * qq * l;
                        next[s2] += w * qq;
                    }
                }
            }
        }
        if mass > 0.0 {
            let prior = (1.0 - g).ln() + h as f64 * g.ln();
            value += mass * (log_r + prior - mass.ln());
        }
        cdf += mass;
        // The transition out of step h enters every horizon beyond h.
        let weight = total - cdf;
        if weight > 0.0 {
            value += weight * ratio;
        }
        dist = next;
    }
    value -= (1.0 - g).ln();
    let max_log_r = mdp.rewards().iter().map(|r| r.ln().abs()).fold(0.0, f64::max);
    let truncation = if max_ratio.is_finite() {
        schedule.tail * (max_log_r + (1.0 - g).ln().abs() + max_ratio / (1.0 - g))
    } else {
        0.0
    };
    let reference = log_expected_return(mdp, policy)?;
    Ok(BoundReport::new(value, reference, truncation, BOUND_TOL))
}

/// Joint form over full-length trajectories:
/// `Σ_τ q(τ) Σ_h γ(h|τ) [log p(τ) + log p(h) - log q(τ) - log γ(h|τ) + log r_h] - log(1-γ)`.
pub fn lgamma_enumerated(
    mdp: &TabularMdp,
    policy: &TabularPolicy,
    q: &TrajectorySet,
    rule: ScheduleRule<'_>,
) -> Result<BoundReport> {
    check_shapes(mdp, mdp.dynamics(), policy)?;
    let g = mdp.discount();
    let geometric = DiscountSchedule::geometric(g, q.horizon);
    let mut value = 0.0;
    for entry in &q.entries {
        if entry.weight == 0.0 {
            continue;
        }
        let log_p = entry.trajectory.log_probability(mdp.initial(), mdp.dynamics(), policy);
        if log_p == f64::NEG_INFINITY {
            value = f64::NEG_INFINITY;
            break;
        }
        let per_traj;
        let schedule = match rule {
            ScheduleRule::Geometric => &geometric,
            ScheduleRule::Shared(s) => s,
            ScheduleRule::Optimal => {
                per_traj = optimal_discount(&entry.trajectory, mdp, q.horizon);
                &per_traj
            }
        };
        let mut inner = 0.0;
        for (h, &mass) in schedule.masses.iter().enumerate().take(q.horizon + 1) {
            if mass == 0.0 {
                continue;
            }
            let (s, a) = (entry.trajectory.states[h], entry.trajectory.actions[h]);
            let prior = (1.0 - g).ln() + h as f64 * g.ln();
            inner += mass * (log_p + prior - entry.weight.ln() - mass.ln() + mdp.reward(s, a).ln());
        }
        value += entry.weight * inner;
    }
    value -= (1.0 - g).ln();
    let reference = log_expected_return(mdp, policy)?;
    Ok(BoundReport::new(value, reference, mdp.truncation_error(q.horizon), BOUND_TOL))
}

// ── Goal reaching ────────────────────────────────────────────────────────

fn check_goal(mdp: &TabularMdp, goal: GoalTask) -> Result<()> {
    if goal.goal_state >= mdp.num_states() {
        return Err(MnmError::InvalidArgument(format!(
            "goal state {} out of range",
            goal.goal_state
        )));
    }
    Ok(())
}

/// Goal-reaching bound with reward
/// `(1-γ)(log p(g|s,a) - log q(g|s,a) - log(1-γ)) + log p(s'|s,a) - log q(s'|s,a)`,
/// reference `log ρ(g)` from the discounted state occupancy.
///
/// Goal terms with `p(g|s,a) = q(g|s,a) = 0` are masked to zero.
pub fn goal_bound(
    mdp: &TabularMdp,
    model: &TabularModel,
    policy: &TabularPolicy,
    goal: GoalTask,
) -> Result<BoundReport> {
    check_shapes(mdp, model, policy)?;
    check_goal(mdp, goal)?;
    let g = mdp.discount();
    let p = mdp.dynamics();
    let target = goal.goal_state;
    let reward = RewardTable3::from_fn(mdp.num_states(), mdp.num_actions(), |s, a, next| {
        let qq = model.prob(s, a, next);
        if qq == 0.0 {
            return 0.0;
        }
        let (pg, qg) = (p.prob(s, a, target), model.prob(s, a, target));
        let goal_term = match (pg > 0.0, qg > 0.0) {
            (false, false) => 0.0,
            (true, true) => pg.ln() - qg.ln(),
            (false, true) => f64::NEG_INFINITY,
            (true, false) => f64::INFINITY,
        };
        (1.0 - g) * (goal_term - (1.0 - g).ln()) + log_ratio(p.prob(s, a, next), qq)
    });
    let bound = evaluate_goal_reward(mdp, model, policy, &reward)?;
    let reference = occupancy(mdp, policy)?[target].ln();
    Ok(BoundReport::new(bound, reference, 0.0, BOUND_TOL))
}

/// Jensen form of the goal-reaching bound,
/// reward `(1-γ) log p(g|s,a) + log p(s'|s,a) - log q(s'|s,a)`,
/// reference `log` of the discounted next-state occupancy of `g`.
pub fn goal_bound_next_state(
    mdp: &TabularMdp,
    model: &TabularModel,
    policy: &TabularPolicy,
    goal: GoalTask,
) -> Result<BoundReport> {
    check_shapes(mdp, model, policy)?;
    check_goal(mdp, goal)?;
    let g = mdp.discount();
    let p = mdp.dynamics();
    let target = goal.goal_state;
    let reward = RewardTable3::from_fn(mdp.num_states(), mdp.num_actions(), |s, a, next| {
        let qq = model.prob(s, a, next);
        if qq == 0.0 {
            return 0.0;
        }
        (1.0 - g) * p.prob(s, a, target).ln() + log_ratio(p.prob(s, a, next), qq)
    });
    let bound = evaluate_goal_reward(mdp, model, policy, &reward)?;
    let reference = next_state_occupancy(mdp, policy)?[target].ln();
    Ok(BoundReport::new(bound, reference, 0.0, BOUND_TOL))
}

fn evaluate_goal_reward(
    mdp: &TabularMdp,
    model: &TabularModel,
    policy: &TabularPolicy,
    reward: &RewardTable3,
) -> Result<f64> {
    if reward.as_slice().iter().any(|v| *v == f64::INFINITY) {
        // A +∞ goal term only arises where the model rules out reaching the
        // goal that the true dynamics allow; the bound is then vacuous.
        return Ok(f64::INFINITY);
    }
    let v = policy_evaluation(model, policy, Reward::Transition(reward), mdp.discount(), SOLVE_TOL)?;
    Ok(initial_weighted(mdp.initial(), &v))
}

/// `(1-γ) Σ_t γ^t P(s_{t+1} = s)` for every state.
pub fn next_state_occupancy(mdp: &TabularMdp, policy: &TabularPolicy) -> Result<Vec<f64>> {
    let rho = occupancy(mdp, policy)?;
    let (ns, na) = (mdp.num_states(), mdp.num_actions());
    let mut out = vec![0.0; ns];
    for s in 0..ns {
        for a in 0..na {
            let w = rho[s] * policy.prob(s, a);
            if w == 0.0 {
                continue;
            }
            for (next, &pp) in mdp.dynamics().row(s, a).iter().enumerate() {
                out[next] += w * pp;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environments::{build_windy_three_state, WindyConfig, GO_RIGHT};
    use approx::assert_abs_diff_eq;

    fn single_state(r: f64, g: f64) -> TabularMdp {
        TabularMdp::new(1, 1, vec![1.0], vec![r], g, vec![1.0]).unwrap()
    }

    #[test]
    fn objective_at_true_model_single_state() {
        let mdp = single_state(std::f64::consts::E, 0.5);
        let pi = TabularPolicy::uniform(1, 1);
        let l = objective_l(&mdp, mdp.dynamics(), &pi).unwrap();
        assert_abs_diff_eq!(l, 1.0 + 2f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn objective_is_log_return_for_constant_reward() {
        // Two states, random dynamics, constant reward: every trajectory has
        // the same return, so the bound is tight at q = p.
        let mdp = TabularMdp::new(
            2,
            2,
            vec![0.3, 0.7, 0.6, 0.4, 0.5, 0.5, 0.1, 0.9],
            vec![2.0; 4],
            0.8,
            vec![0.4, 0.6],
        )
        .unwrap();
        let pi = TabularPolicy::new(2, 2, vec![0.2, 0.8, 0.5, 0.5]).unwrap();
        let l = objective_l(&mdp, mdp.dynamics(), &pi).unwrap();
        assert_abs_diff_eq!(l, (2.0f64 / 0.2).ln(), epsilon = 1e-10);
    }

    #[test]
    fn support_violation_gives_negative_infinity() {
        let mdp = TabularMdp::new(2, 1, vec![1.0, 0.0, 0.0, 1.0], vec![1.0, 1.0], 0.9, vec![1.0, 0.0]).unwrap();
        let q = TabularModel::new(2, 1, vec![0.5, 0.5, 0.0, 1.0]).unwrap();
        let report = check_lower_bound(&mdp, &q, &TabularPolicy::uniform(2, 1)).unwrap();
        assert_eq!(report.bound_value, f64::NEG_INFINITY);
        assert!(report.holds);
    }

    #[test]
    fn log_return_examples() {
        let mdp = single_state(1.0, 0.5);
        let pi = TabularPolicy::uniform(1, 1);
        assert_abs_diff_eq!(log_expected_return(&mdp, &pi).unwrap(), 2f64.ln(), epsilon = 1e-12);
        let scaled = mdp.with_reward(vec![3.0]).unwrap();
        assert_abs_diff_eq!(
            log_expected_return(&scaled, &pi).unwrap(),
            2f64.ln() + 3f64.ln(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn vmbpo_examples() {
        let mdp = single_state(1.0, 0.5);
        let pi = TabularPolicy::uniform(1, 1);
        let v = vmbpo_objective(&mdp, &pi, 1.0, 10, EnumerationLimits::default()).unwrap();
        let r_bar: f64 = (0..=10).map(|t| 0.5f64.powi(t)).sum();
        assert_abs_diff_eq!(v.value, r_bar, epsilon = 1e-12);
        let exact = vmbpo_objective_exact(&mdp, &pi, 1.0, 10).unwrap();
        assert_abs_diff_eq!(exact.value, r_bar, epsilon = 1e-12);
        assert!(exact.lower <= 2.0 && 2.0 <= exact.upper);
    }

    #[test]
    fn vmbpo_enumeration_matches_recursion_on_windy() {
        let mdp = build_windy_three_state(&WindyConfig::default()).unwrap();
        let pi = TabularPolicy::new(3, 2, vec![0.5, 0.5, 0.3, 0.7, 0.4, 0.6]).unwrap();
        let a = vmbpo_objective(&mdp, &pi, 0.7, 12, EnumerationLimits::default()).unwrap();
        let b = vmbpo_objective_exact(&mdp, &pi, 0.7, 12).unwrap();
        assert_abs_diff_eq!(a.value, b.value, epsilon = 1e-10);
    }

    #[test]
    fn vmbpo_small_eta_limit() {
        let mdp = build_windy_three_state(&WindyConfig::default()).unwrap();
        let pi = TabularPolicy::deterministic(2, &[GO_RIGHT; 3]).unwrap();
        let j = expected_return(&mdp, &pi).unwrap();
        let mut previous = f64::INFINITY;
        for eta in [1e-2, 1e-3, 1e-4] {
            let v = vmbpo_objective_exact(&mdp, &pi, eta, 400).unwrap();
            let gap = (v.value / eta - j).abs();
            assert!(gap < previous);
            assert!(gap < 200.0 * eta, "eta {eta}: gap {gap}");
            previous = gap;
        }
    }

    #[test]
    fn reweighting_examples() {
        let mdp = TabularMdp::new(3, 1, vec![0.0, 0.5, 0.5, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0], vec![1.0, 1.0, 3.0], 0.5, vec![1.0, 0.0, 0.0]).unwrap();
        let pi = TabularPolicy::uniform(3, 1);
        let set = enumerate_trajectories(&mdp, mdp.dynamics(), &pi, 1, EnumerationLimits::default()).unwrap();
        let star = reweight_by_return(&set);
        // Returns are 1.5 and 2.5 with equal probability.
        let expected = [1.5 / 4.0, 2.5 / 4.0];
        for (e, w) in star.entries.iter().zip(expected) {
            assert_abs_diff_eq!(e.weight, w, epsilon = 1e-12);
        }
    }

    #[test]
    fn optimal_discount_examples() {
        let mdp = single_state(2.0, 0.7);
        let traj = Trajectory { states: vec![0; 6], actions: vec![0; 6] };
        let schedule = optimal_discount(&traj, &mdp, 5);
        let norm = 1.0 - 0.7f64.powi(6);
        for (h, m) in schedule.masses.iter().enumerate() {
            assert_abs_diff_eq!(*m, 0.3 * 0.7f64.powi(h as i32) / norm, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(schedule.total(), 1.0, epsilon = 1e-12);

        let spike = TabularMdp::new(6, 1, {
            let mut t = vec![0.0; 36];
            for s in 0..6 { t[s * 6 + (s + 1).min(5)] = 1.0; }
            t
        }, vec![1e-12, 1e-12, 1e-12, 5.0, 1e-12, 1e-12], 0.9, vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        let traj = Trajectory { states: vec![0, 1, 2, 3, 4, 5], actions: vec![0; 6] };
        let schedule = optimal_discount(&traj, &spike, 5);
        assert!(schedule.masses[3] > 1.0 - 1e-11);
    }

    #[test]
    fn lgamma_geometric_matches_objective_at_true_model() {
        let mdp = build_windy_three_state(&WindyConfig::default()).unwrap();
        let pi = TabularPolicy::new(3, 2, vec![0.5, 0.5, 0.3, 0.7, 0.4, 0.6]).unwrap();
        let l = objective_l(&mdp, mdp.dynamics(), &pi).unwrap();
        let report = tight_objective_lgamma(&mdp, &pi, LgammaModel::Markov(mdp.dynamics()), ScheduleRule::Geometric, 400).unwrap();
        assert_abs_diff_eq!(report.bound_value, l, epsilon = 1e-9);
    }

    #[test]
    fn goal_bound_single_state() {
        let mdp = single_state(1.0, 0.9);
        let pi = TabularPolicy::uniform(1, 1);
        let report = goal_bound(&mdp, mdp.dynamics(), &pi, GoalTask { goal_state: 0 }).unwrap();
        assert_abs_diff_eq!(report.reference_value, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(report.bound_value, -(0.1f64.ln()), epsilon = 1e-10);
        let next = goal_bound_next_state(&mdp, mdp.dynamics(), &pi, GoalTask { goal_state: 0 }).unwrap();
        assert_abs_diff_eq!(next.bound_value, 0.0, epsilon = 1e-12);
        assert!(next.holds);
    }
}
