//! Graphical checks and propensity-score estimators for the missingness
//! pattern approach to missing confounder data.
//!
//! The crate has two halves. The graph half ([`graph`], [`transforms`],
//! [`dsep`], [`assumptions`]) parses annotated causal diagrams, converts them
//! to single-world intervention templates or twin networks, and decides the
//! conditional independences the approach relies on. The statistical half
//! ([`estimators`], [`simulator`]) fits per-pattern propensity models,
//! estimates average treatment effects by inverse probability weighting and
//! generates synthetic data with known potential outcomes.

pub mod assumptions;
pub mod bundled;
pub mod dsep;
pub mod estimators;
pub mod graph;
pub mod simulator;
pub mod transforms;
