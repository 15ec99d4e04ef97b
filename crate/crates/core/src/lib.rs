//! Horn-clause deduction workbench.
//!
//! `hornforge` generates propositional Horn-clause problems, balances them by
//! logical depth, builds counterfactual opposite-label twins, serializes them
//! into typed token sequences with matching attention masks, and provides the
//! probe and evaluation math used to analyse models trained on them.
//!
//! Module map:
//!
//! * [`logic`]: problems, forward chaining, backward search depth.
//! * [`generators`]: RP / LP / LP* samplers and depth balancing.
//! * [`r2`]: counterfactual augmentation.
//! * [`features`]: superficial/structural statistics and Pearson audit.
//! * [`encode`]: token sequences, type sets, binary record files.
//! * [`masks`]: causal, bidirectional-prefix and isolated corrective masks.
//! * [`probe`]: Procrustes alignment and decision-trace probes.
//! * [`eval`]: answer/trace grading and significance tests.

pub mod encode;
pub mod error;
pub mod eval;
pub mod features;
pub mod generators;
pub mod logic;
pub mod masks;
pub mod probe;
pub mod r2;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
pub use logic::{DerivationResult, Predicate, PredSet, Problem, ProblemMeta, ProofTrace, Rule};
