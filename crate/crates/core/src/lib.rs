//! Tabular model-based RL lower bounds.
//!
//! The crate is organised bottom-up:
//!
//! * [`mdp`] holds exact finite MDPs, policy evaluation, and the brute-force
//!   trajectory enumerator used as an oracle everywhere else.
//! * [`environments`] builds gridworlds, the windy three-state MDP, and the
//!   block-aliasing transform.
//! * [`classifier`] turns a pair of dynamics into a real-vs-model classifier
//!   and its log-odds.
//! * [`solvers`] implements augmented rewards, optimistic dynamics, and the
//!   joint model/policy solvers (value iteration and Q-learning).
//! * [`bounds`] evaluates the lower and upper bounds exactly.
//! * [`random`] generates reproducible random instances for property suites.

pub mod error;
pub mod bounds;
pub mod classifier;
pub mod environments;
pub mod mdp;
pub mod random;
pub mod solvers;

pub use error::{MnmError, Result};
