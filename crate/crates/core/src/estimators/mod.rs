//! Propensity models and inverse-probability-weighted risk differences under
//! four ways of handling missing confounders: ignoring confounding (crude),
//! complete records, one model per missingness pattern, and the missing
//! indicator method.

mod ate;
mod balance;
mod data;
mod design;
mod iptw;
mod logistic;
mod propensity;
mod spec;

use thiserror::Error;

pub use ate::{estimate_ate, render_table, AteResult};
pub use balance::{standardized_difference, standardized_differences, BalanceRow, BalanceTable};
pub use data::{Covariate, CovariateKind, CovariateSpec, Dataset, PatternMask};
pub use iptw::{iptw_ate, iptw_weights, treated_weighted_mean, weighted_risk_difference};
pub use logistic::{fit_logistic, log_likelihood, score, FitOptions, LogisticFit};
pub use propensity::{
    complete_records_propensity, constrained_mpa_propensity, missing_indicator_propensity,
    mpa_propensity, PatternFit, PropensityFit,
};
pub use spec::{
    BootstrapSection, CiKind, DataSection, Method, MethodSection, ModelSection, ModelSpec,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EstimatorError {
    #[error("data: {0}")]
    Data(String),
    #[error("model spec: {0}")]
    Spec(String),
    #[error("design has {rows} rows but {columns} columns")]
    TooFewRows { rows: usize, columns: usize },
    #[error("logistic fit did not converge in {iterations} iterations (max |score| {max_score:.3e})")]
    NonConvergence { iterations: usize, max_score: f64 },
    #[error("pattern {pattern} ({label}) has {rows} rows, fewer than min_pattern_size = {min}")]
    PatternTooSmall {
        pattern: String,
        label: String,
        rows: usize,
        min: usize,
    },
    #[error("pattern {pattern} ({label}) has no {missing_arm} rows")]
    SingleArm {
        pattern: String,
        label: String,
        missing_arm: &'static str,
    },
    #[error("pattern {pattern} ({label}): {source}")]
    PatternFit {
        pattern: String,
        label: String,
        source: Box<EstimatorError>,
    },
    /// Row numbers are 1-based.
    #[error("positivity violated: score outside (0, 1) at rows {}", list_rows(.rows))]
    Positivity { rows: Vec<usize> },
    #[error("no {0} rows")]
    EmptyArm(&'static str),
    #[error("{failed} of {total} bootstrap replicates failed (limit 5%); first failure: {first}")]
    Bootstrap {
        failed: usize,
        total: usize,
        first: String,
    },
}

fn list_rows(rows: &[usize]) -> String {
    let shown: Vec<String> = rows.iter().take(20).map(|r| r.to_string()).collect();
    if rows.len() > 20 {
        format!("{} and {} more", shown.join(", "), rows.len() - 20)
    } else {
        shown.join(", ")
    }
}
