//! Model configuration, read from TOML:
//!
//! ```toml
//! [data]
//! treatment = "Z"
//! outcome = "Y"
//! [[data.covariates]]
//! name = "X"
//! type = "binary"          # binary | categorical | continuous
//! partial = true
//!
//! [model]
//! terms = ["X"]            # default: every covariate
//! interactions = []        # pairs, e.g. [["Age", "Ihd"]]
//!
//! [method]
//! name = "mpa"             # crude | complete_records | mpa | missing_indicator
//!
//! [bootstrap]
//! replicates = 500
//! seed = 1
//! ```

use std::fmt;

use serde::{Deserialize, Serialize};

use super::data::CovariateSpec;
use super::logistic::FitOptions;
use super::EstimatorError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Crude,
    #[serde(alias = "cra")]
    CompleteRecords,
    Mpa,
    #[serde(alias = "mind")]
    MissingIndicator,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::Crude,
        Method::CompleteRecords,
        Method::Mpa,
        Method::MissingIndicator,
    ];

    /// Accepts the config names and the short forms `cra` and `mind`.
    pub fn parse(s: &str) -> Option<Method> {
        match s {
            "crude" => Some(Method::Crude),
            "cra" | "complete_records" => Some(Method::CompleteRecords),
            "mpa" => Some(Method::Mpa),
            "mind" | "missing_indicator" => Some(Method::MissingIndicator),
            _ => None,
        }
    }

    pub fn key(self) -> &'static str {
        match self {
            Method::Crude => "crude",
            Method::CompleteRecords => "complete_records",
            Method::Mpa => "mpa",
            Method::MissingIndicator => "missing_indicator",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Method::Crude => "Crude",
            Method::CompleteRecords => "Complete records",
            Method::Mpa => "MPA",
            Method::MissingIndicator => "Missing indicator",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CiKind {
    /// estimate ± 1.96 × SD of the replicates.
    #[default]
    Normal,
    /// 2.5% and 97.5% quantiles of the replicates.
    Percentile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataSection {
    pub treatment: String,
    pub outcome: String,
    #[serde(default)]
    pub covariates: Vec<CovariateSpec>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ModelSection {
    /// Main-effect terms; every declared covariate when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub terms: Option<Vec<String>>,
    #[serde(default)]
    pub interactions: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSection {
    pub name: Method,
    #[serde(default = "default_min_pattern")]
    pub min_pattern_size: usize,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    /// Upper bound on individual weights; off unless set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight_cap: Option<f64>,
}

fn default_min_pattern() -> usize {
    50
}
fn default_max_iter() -> usize {
    50
}
fn default_tolerance() -> f64 {
    1e-8
}

impl Default for MethodSection {
    fn default() -> Self {
        MethodSection {
            name: Method::Mpa,
            min_pattern_size: default_min_pattern(),
            max_iter: default_max_iter(),
            tolerance: default_tolerance(),
            weight_cap: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BootstrapSection {
    #[serde(default)]
    pub replicates: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub ci: CiKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub data: DataSection,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub method: MethodSection,
    #[serde(default)]
    pub bootstrap: BootstrapSection,
}

impl ModelSpec {
    /// Spec with every covariate as a main term, MPA, no bootstrap.
    pub fn new(treatment: &str, outcome: &str, covariates: Vec<CovariateSpec>) -> Self {
        ModelSpec {
            data: DataSection {
                treatment: treatment.into(),
                outcome: outcome.into(),
                covariates,
            },
            model: ModelSection::default(),
            method: MethodSection::default(),
            bootstrap: BootstrapSection::default(),
        }
    }

    pub fn with_method(mut self, m: Method) -> Self {
        self.method.name = m;
        self
    }

    pub fn with_bootstrap(mut self, replicates: usize, seed: u64) -> Self {
        self.bootstrap.replicates = replicates;
        self.bootstrap.seed = seed;
        self
    }

    pub fn from_toml(src: &str) -> Result<Self, EstimatorError> {
        let spec: ModelSpec =
            toml::from_str(src).map_err(|e| EstimatorError::Spec(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("model spec serializes")
    }

    pub fn validate(&self) -> Result<(), EstimatorError> {
        let declared = |n: &str| self.data.covariates.iter().any(|c| c.name == n);
        let mut seen = std::collections::BTreeSet::new();
        for c in &self.data.covariates {
            if !seen.insert(c.name.as_str()) {
                return Err(EstimatorError::Spec(format!("covariate `{}` declared twice", c.name)));
            }
            if c.name == self.data.treatment || c.name == self.data.outcome {
                return Err(EstimatorError::Spec(format!(
                    "`{}` is both a covariate and the treatment or outcome",
                    c.name
                )));
            }
            if let super::CovariateKind::Categorical { levels } = &c.kind {
                if levels.len() < 2 {
                    return Err(EstimatorError::Spec(format!(
                        "categorical `{}` needs at least two levels",
                        c.name
                    )));
                }
            }
        }
        for t in self.model.terms.iter().flatten() {
            if !declared(t) {
                return Err(EstimatorError::Spec(format!("term `{t}` is not a declared covariate")));
            }
        }
        for (a, b) in &self.model.interactions {
            for t in [a, b] {
                if !declared(t) {
                    return Err(EstimatorError::Spec(format!(
                        "interaction `{a}:{b}` references undeclared covariate `{t}`"
                    )));
                }
            }
            if a == b {
                return Err(EstimatorError::Spec(format!("interaction `{a}:{b}` repeats a covariate")));
            }
        }
        if !(self.method.tolerance > 0.0) || self.method.max_iter == 0 {
            return Err(EstimatorError::Spec("tolerance and max_iter must be positive".into()));
        }
        if let Some(cap) = self.method.weight_cap {
            if !(cap > 1.0) {
                return Err(EstimatorError::Spec("weight_cap must exceed 1".into()));
            }
        }
        Ok(())
    }

    /// Main-effect terms in declaration order.
    pub fn terms(&self) -> Vec<String> {
        match &self.model.terms {
            Some(t) => t.clone(),
            None => self.data.covariates.iter().map(|c| c.name.clone()).collect(),
        }
    }

    pub fn fit_options(&self) -> FitOptions {
        FitOptions {
            max_iter: self.method.max_iter,
            tolerance: self.method.tolerance,
            ..FitOptions::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_with_defaults_and_aliases() {
        let src = r#"
[data]
treatment = "Ace"
outcome = "Aki"
[[data.covariates]]
name = "Age"
type = "categorical"
levels = ["<50", "50-59", "60-69"]
[[data.covariates]]
name = "Ckd"
type = "binary"
partial = true

[model]
interactions = [["Age", "Ckd"]]

[method]
name = "cra"
"#;
        let s = ModelSpec::from_toml(src).unwrap();
        assert_eq!(s.method.name, Method::CompleteRecords);
        assert_eq!(s.method.min_pattern_size, 50);
        assert_eq!(s.method.tolerance, 1e-8);
        assert_eq!(s.bootstrap.replicates, 0);
        assert_eq!(s.terms(), vec!["Age", "Ckd"]);
        let back = ModelSpec::from_toml(&s.to_toml()).unwrap();
        assert_eq!(s, back);
    }

    #[test]
    fn rejects_unknown_interaction_term() {
        let src = "[data]\ntreatment='Z'\noutcome='Y'\n[model]\ninteractions=[['A','B']]\n";
        assert!(matches!(ModelSpec::from_toml(src), Err(EstimatorError::Spec(_))));
    }
}
