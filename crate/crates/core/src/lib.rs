//! Knowledge-base driven construction of fine-grained NER and text
//! categorization corpora.
//!
//! The pipeline reads a knowledge-base snapshot ([`kb`]), resolves one type per
//! entity into a [`gazetteer`], annotates an article dump with IOB tags by
//! crawling first- and second-order relations ([`annotator`]), optionally
//! re-types surface forms by majority vote ([`noise`]) and maps the fine types
//! to four coarse labels ([`coarse`]). [`stats`] and [`eval`] describe and score
//! the result, and [`adjudication`] holds the state behind the human review
//! service.
//!
//! Metric code is generic over [`Scalar`], so the same formulas run in `f64`
//! or in exact rational arithmetic.

pub mod adjudication;
pub mod annotator;
pub mod coarse;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod gazetteer;
pub mod kb;
pub mod matcher;
pub mod noise;
pub mod sample;
pub mod scalar;
pub mod stats;
pub mod text;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Exact rational scalar for metric hand-checks.
pub type Rational = num_rational::Ratio<i64>;

/// Per-label precision/recall/F1 in floating point.
pub type LabelScores = eval::LabelScores<f64>;
/// Per-label precision/recall/F1 as exact fractions.
pub type ExactLabelScores = eval::LabelScores<Rational>;
/// Strict / loose-macro / loose-micro F1 in floating point.
pub type TypingScores = eval::TypingScores<f64>;
/// Strict / loose-macro / loose-micro F1 as exact fractions.
pub type ExactTypingScores = eval::TypingScores<Rational>;
/// Top-k hit rates in floating point.
pub type TopK = eval::TopK<f64>;
