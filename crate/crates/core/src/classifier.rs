//! Classifiers that tell real transitions from model transitions.
//!
//! A classifier value `C(s, a, s')` is the probability that a transition came
//! from the real dynamics `p` rather than the model `q`. Its log-odds are the
//! density-ratio estimate `log p - log q` used by the augmented reward.
//!
//! The complement `1 - C` is stored separately: for the Bayes classifier it
//! is `q / (p + q)` computed directly, which keeps the log-odds exact when
//! `C` is close to 1.

use crate::environments::{alias_transition_table, AliasMap};
use crate::error::{MnmError, Result};
use crate::mdp::{RewardTable3, TabularModel};

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierTable {
    num_states: usize,
    num_actions: usize,
    values: Vec<f64>,
    complement: Vec<f64>,
    /// `false` where neither source ever produces the transition.
    evidence: Vec<bool>,
    smoothing: f64,
}

impl ClassifierTable {
    /// A classifier from raw values with complements `1 - C`.
    pub fn from_values(
        num_states: usize,
        num_actions: usize,
        values: Vec<f64>,
        smoothing: f64,
    ) -> Result<Self> {
        if values.len() != num_states * num_actions * num_states {
            return Err(MnmError::DimensionMismatch(format!(
                "expected {} classifier entries, got {}",
                num_states * num_actions * num_states,
                values.len()
            )));
        }
        if values.iter().any(|c| !(0.0..=1.0).contains(c)) {
            return Err(MnmError::InvalidArgument("classifier values must lie in [0, 1]".into()));
        }
        check_smoothing(smoothing)?;
        let complement = values.iter().map(|c| 1.0 - c).collect();
        let evidence = vec![true; values.len()];
        Ok(Self {
            num_states,
            num_actions,
            values,
            complement,
            evidence,
            smoothing,
        })
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn smoothing(&self) -> f64 {
        self.smoothing
    }

    pub fn with_smoothing(mut self, smoothing: f64) -> Result<Self> {
        check_smoothing(smoothing)?;
        self.smoothing = smoothing;
        Ok(self)
    }

    #[inline]
    fn index(&self, s: usize, a: usize, next: usize) -> usize {
        (s * self.num_actions + a) * self.num_states + next
    }

    /// Unsmoothed value `C(s, a, s')`.
    pub fn raw(&self, s: usize, a: usize, next: usize) -> f64 {
        self.values[self.index(s, a, next)]
    }

    /// Smoothed value `(1 - α) C + α / 2`.
    pub fn get(&self, s: usize, a: usize, next: usize) -> f64 {
        let c = self.raw(s, a, next);
        (1.0 - self.smoothing) * c + 0.5 * self.smoothing
    }

    pub fn has_evidence(&self, s: usize, a: usize, next: usize) -> bool {
        self.evidence[self.index(s, a, next)]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Smoothed log-odds of a single entry.
    pub fn log_odds_at(&self, s: usize, a: usize, next: usize) -> f64 {
        let i = self.index(s, a, next);
        let alpha = self.smoothing;
        let c = (1.0 - alpha) * self.values[i] + 0.5 * alpha;
        let not_c = (1.0 - alpha) * self.complement[i] + 0.5 * alpha;
        c.ln() - not_c.ln()
    }
}

fn check_smoothing(smoothing: f64) -> Result<()> {
    if !(0.0..1.0).contains(&smoothing) {
        return Err(MnmError::InvalidArgument(format!(
            "smoothing must lie in [0, 1), got {smoothing}"
        )));
    }
    Ok(())
}

/// The Bayes-optimal classifier `C = p / (p + q)`; `0.5` where `p = q = 0`.
pub fn bayes_classifier(p: &TabularModel, q: &TabularModel) -> Result<ClassifierTable> {
    if !p.same_shape(q) {
        return Err(MnmError::DimensionMismatch(
            "real and model dynamics have different shapes".into(),
        ));
    }
    let n = p.as_slice().len();
    let mut values = Vec::with_capacity(n);
    let mut complement = Vec::with_capacity(n);
    let mut evidence = Vec::with_capacity(n);
    for (&pp, &qq) in p.as_slice().iter().zip(q.as_slice()) {
        let total = pp + qq;
        if total > 0.0 {
            values.push(pp / total);
            complement.push(qq / total);
            evidence.push(true);
        } else {
            values.push(0.5);
            complement.push(0.5);
            evidence.push(false);
        }
    }
    Ok(ClassifierTable {
        num_states: p.num_states(),
        num_actions: p.num_actions(),
        values,
        complement,
        evidence,
        smoothing: 0.0,
    })
}

/// Count-ratio classifier `n_real / (n_real + n_model)`; `0.5` on empty cells.
pub fn empirical_classifier(
    num_states: usize,
    num_actions: usize,
    real_counts: &[u64],
    model_counts: &[u64],
) -> Result<ClassifierTable> {
    let n = num_states * num_actions * num_states;
    if real_counts.len() != n || model_counts.len() != n {
        return Err(MnmError::DimensionMismatch(format!(
            "count tables must have {n} entries"
        )));
    }
    let mut values = Vec::with_capacity(n);
    let mut complement = Vec::with_capacity(n);
    let mut evidence = Vec::with_capacity(n);
    for (&r, &m) in real_counts.iter().zip(model_counts) {
        let total = (r + m) as f64;
        if total > 0.0 {
            values.push(r as f64 / total);
            complement.push(m as f64 / total);
            evidence.push(true);
        } else {
            values.push(0.5);
            complement.push(0.5);
            evidence.push(false);
        }
    }
    Ok(ClassifierTable {
        num_states,
        num_actions,
        values,
        complement,
        evidence,
        smoothing: 0.0,
    })
}

/// Capacity-limited classifier: per-state values are averaged over each
/// alias block in relative-move coordinates, so every state of a block sees
/// the same classifier for the same relative move.
///
/// Only entries with evidence enter the averages. Smoothing is kept.
pub fn restrict_classifier(c: &ClassifierTable, alias: &AliasMap) -> Result<ClassifierTable> {
    if alias.num_states() != c.num_states {
        return Err(MnmError::DimensionMismatch(
            "alias map does not cover the classifier's states".into(),
        ));
    }
    if alias.block_size() == 1 {
        return Ok(c.clone());
    }
    let na = c.num_actions;
    let support = |s: usize, a: usize, next: usize| c.has_evidence(s, a, next);
    let values = alias_transition_table(na, &c.values, alias, support);
    let complement = alias_transition_table(na, &c.complement, alias, support);
    Ok(ClassifierTable {
        num_states: c.num_states,
        num_actions: na,
        values,
        complement,
        evidence: c.evidence.clone(),
        smoothing: c.smoothing,
    })
}

/// Smoothed log-odds `log(C' / (1 - C'))` as a transition table.
///
/// With zero smoothing, entries where `C ∈ {0, 1}` come out as `∓∞`; use
/// [`first_infinite`] to locate them.
pub fn log_odds(c: &ClassifierTable) -> RewardTable3 {
    RewardTable3::from_fn(c.num_states, c.num_actions, |s, a, next| c.log_odds_at(s, a, next))
}

/// First entry of a table that is not finite, as `(s, a, s')`.
pub fn first_infinite(table: &RewardTable3) -> Option<(usize, usize, usize)> {
    let (ns, na) = (table.num_states(), table.num_actions());
    table
        .as_slice()
        .iter()
        .position(|v| !v.is_finite())
        .map(|i| (i / (na * ns), (i / ns) % na, i % ns))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn two_state_models(p0: f64, q0: f64) -> (TabularModel, TabularModel) {
        let p = TabularModel::new(2, 1, vec![p0, 1.0 - p0, 0.0, 1.0]).unwrap();
        let q = TabularModel::new(2, 1, vec![q0, 1.0 - q0, 0.0, 1.0]).unwrap();
        (p, q)
    }

    #[test]
    fn bayes_examples() {
        let (p, q) = two_state_models(0.8, 0.2);
        let c = bayes_classifier(&p, &q).unwrap();
        assert_abs_diff_eq!(c.raw(0, 0, 0), 0.8, epsilon = 1e-15);
        assert_abs_diff_eq!(c.log_odds_at(0, 0, 0), 4f64.ln(), epsilon = 1e-12);

        let same = bayes_classifier(&p, &p).unwrap();
        assert!(same.values().iter().all(|&v| v == 0.5));

        let (p, q) = two_state_models(0.0, 0.5);
        let c = bayes_classifier(&p, &q).unwrap();
        assert_eq!(c.raw(0, 0, 0), 0.0);
        assert_eq!(c.log_odds_at(0, 0, 0), f64::NEG_INFINITY);
        assert_eq!(first_infinite(&log_odds(&c)), Some((0, 0, 0)));
        // p = q = 0 carries no evidence.
        assert_eq!(c.raw(1, 0, 0), 0.5);
        assert!(!c.has_evidence(1, 0, 0));
    }

    #[test]
    fn empirical_examples() {
        let c = empirical_classifier(1, 1, &[3], &[1]).unwrap();
        assert_eq!(c.raw(0, 0, 0), 0.75);
        let c = empirical_classifier(2, 1, &[5, 0, 2, 2], &[5, 0, 2, 2]).unwrap();
        assert!(c.values().iter().all(|&v| v == 0.5));
        assert!(empirical_classifier(2, 1, &[1], &[1]).is_err());
    }

    #[test]
    fn smoothing_examples() {
        let c = ClassifierTable::from_values(1, 1, vec![0.5], 0.0).unwrap();
        assert_eq!(log_odds(&c).get(0, 0, 0), 0.0);
        let c = ClassifierTable::from_values(1, 1, vec![0.8], 0.0).unwrap();
        assert_abs_diff_eq!(log_odds(&c).get(0, 0, 0), 1.3862943611198906, epsilon = 1e-12);
        let c = ClassifierTable::from_values(1, 1, vec![1.0], 0.7).unwrap();
        assert_abs_diff_eq!(log_odds(&c).get(0, 0, 0), (0.65f64 / 0.35).ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(log_odds(&c).get(0, 0, 0), 0.6190, epsilon = 1e-4);
        assert!(ClassifierTable::from_values(1, 1, vec![0.5], 1.0).is_err());
    }

    fn row(weights: &[f64]) -> Vec<f64> {
        let total: f64 = weights.iter().sum();
        weights.iter().map(|w| w / total).collect()
    }

    proptest! {
        #[test]
        fn log_odds_is_exact_log_ratio(
            a in prop::collection::vec(0.01f64..1.0, 4),
            b in prop::collection::vec(0.01f64..1.0, 4),
        ) {
            let p = TabularModel::new(4, 1, [row(&a), row(&a), row(&a), row(&a)].concat()).unwrap();
            let q = TabularModel::new(4, 1, [row(&b), row(&b), row(&b), row(&b)].concat()).unwrap();
            let c = bayes_classifier(&p, &q).unwrap();
            let lo = log_odds(&c);
            for next in 0..4 {
                let exact = p.prob(0, 0, next).ln() - q.prob(0, 0, next).ln();
                prop_assert!((lo.get(0, 0, next) - exact).abs() <= 1e-12);
            }
        }

        #[test]
        fn swapping_sources_negates(
            a in prop::collection::vec(0.0f64..1.0, 3),
            b in prop::collection::vec(0.01f64..1.0, 3),
        ) {
            prop_assume!(a.iter().sum::<f64>() > 0.01);
            let pa = row(&a);
            let pb = row(&b);
            let p = TabularModel::new(3, 1, [pa.clone(), pa.clone(), pa].concat()).unwrap();
            let q = TabularModel::new(3, 1, [pb.clone(), pb.clone(), pb].concat()).unwrap();
            let pq = bayes_classifier(&p, &q).unwrap();
            let qp = bayes_classifier(&q, &p).unwrap();
            for next in 0..3 {
                prop_assert!((pq.raw(0, 0, next) - (1.0 - qp.raw(0, 0, next))).abs() < 1e-15);
                let (x, y) = (pq.log_odds_at(0, 0, next), qp.log_odds_at(0, 0, next));
                if x.is_finite() {
                    prop_assert!((x + y).abs() < 1e-12);
                } else {
                    prop_assert_eq!(x, -y);
                }
            }
        }

        #[test]
        fn smoothing_shrinks_toward_zero(c in 0.0f64..=1.0, alpha in 0.0f64..0.99) {
            let raw = ClassifierTable::from_values(1, 1, vec![c], 0.0).unwrap();
            let smooth = raw.clone().with_smoothing(alpha).unwrap();
            let (x, y) = (raw.log_odds_at(0, 0, 0), smooth.log_odds_at(0, 0, 0));
            prop_assert!(y.abs() <= x.abs() + 1e-15);
            prop_assert!(x * y >= 0.0);
            if alpha > 0.0 {
                prop_assert!(y.is_finite());
            }
        }
    }
}
