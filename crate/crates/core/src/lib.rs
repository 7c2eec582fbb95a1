//! Harness for query-driven human-agent-GUI interaction.
//!
//! The crate covers the full offline loop: an action grammar with fuzzy
//! matching ([`action`]), benchmark instances ([`dataset`]), decoupled
//! training-set construction ([`metaknowledge`]), agent backends
//! ([`agents`]), the two-pass ask/answer state machine ([`interaction`]),
//! and step-wise scoring ([`evaluator`]).
//!
//! Thresholds and rates are generic over [`Scalar`]; the aliases below fix
//! the common choices.

pub mod action;
pub mod agents;
pub mod dataset;
mod error;
pub mod evaluator;
pub mod interaction;
pub mod metaknowledge;
pub mod prompt;
pub mod scalar;

pub use error::InvalidValue;
pub use scalar::Scalar;

/// Exact rational scalar.
pub type Rational = num_rational::Ratio<i64>;

pub type MatchConfig64 = action::MatchConfig<f64>;
pub type MatchConfig32 = action::MatchConfig<f32>;
pub type ExactMatchConfig = action::MatchConfig<Rational>;

pub use action::{actions_match, parse_action, serialize_action, text_similarity, Action, ScreenDims};
pub use dataset::{Dataset, Instance, ScenarioType};
