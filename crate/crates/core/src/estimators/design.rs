//! Expansion of covariate terms into numeric design columns.

use super::data::{CovariateKind, Dataset, PatternMask};
use super::logistic::Design;
use super::spec::ModelSpec;
use super::EstimatorError;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Factor {
    /// Covariate value minus `shift`; 0 when missing.
    Value { cov: usize, shift: f64 },
    /// 1 when the categorical covariate sits at `level`; 0 when missing.
    Level { cov: usize, level: usize },
    Missing { cov: usize },
    Pattern(PatternMask),
}

/// Product of factors; the empty product is the intercept.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Column {
    pub name: String,
    pub factors: Vec<Factor>,
}

impl Column {
    pub fn intercept() -> Self {
        Column {
            name: "(Intercept)".into(),
            factors: vec![],
        }
    }

    pub fn times(&self, other: &Column) -> Column {
        Column {
            name: format!("{}:{}", self.name, other.name),
            factors: self.factors.iter().chain(&other.factors).cloned().collect(),
        }
    }
}

/// Resolved model: covariate indices for terms and interactions, plus the
/// pattern of every row.
pub(crate) struct Context<'a> {
    pub data: &'a Dataset,
    pub spec: &'a ModelSpec,
    pub masks: Vec<PatternMask>,
    pub terms: Vec<usize>,
    pub interactions: Vec<(usize, usize)>,
}

impl<'a> Context<'a> {
    pub fn new(data: &'a Dataset, spec: &'a ModelSpec) -> Result<Self, EstimatorError> {
        spec.validate()?;
        let idx = |name: &str| {
            data.covariate_index(name).ok_or_else(|| {
                EstimatorError::Spec(format!("covariate `{name}` is not in the dataset"))
            })
        };
        let terms = spec
            .terms()
            .iter()
            .map(|t| idx(t))
            .collect::<Result<Vec<_>, _>>()?;
        let interactions = spec
            .model
            .interactions
            .iter()
            .map(|(a, b)| Ok((idx(a)?, idx(b)?)))
            .collect::<Result<Vec<_>, EstimatorError>>()?;
        Ok(Context {
            data,
            spec,
            masks: data.patterns(),
            terms,
            interactions,
        })
    }

    pub fn value(&self, f: &Factor, row: usize) -> f64 {
        match *f {
            Factor::Value { cov, shift } => match self.data.covariates[cov].values[row] {
                Some(v) => v - shift,
                None => 0.0,
            },
            Factor::Level { cov, level } => match self.data.covariates[cov].values[row] {
                Some(v) if v as usize == level => 1.0,
                _ => 0.0,
            },
            Factor::Missing { cov } => {
                f64::from(u8::from(self.data.covariates[cov].values[row].is_none()))
            }
            Factor::Pattern(m) => f64::from(u8::from(self.masks[row] == m)),
        }
    }

    pub fn design(&self, rows: &[usize], cols: &[Column]) -> Design {
        let mut x = Vec::with_capacity(rows.len() * cols.len());
        for &r in rows {
            for c in cols {
                x.push(c.factors.iter().map(|f| self.value(f, r)).product());
            }
        }
        Design {
            rows: rows.len(),
            cols: cols.len(),
            x,
        }
    }

    pub fn observed(&self, cov: usize, mask: PatternMask) -> bool {
        self.data.observed_in(cov, mask)
    }

    pub fn is_partial(&self, cov: usize) -> bool {
        self.data.covariates[cov].spec.partial
    }

    /// Columns coding covariate `cov` when observed, values shifted by `shift`.
    pub fn main(&self, cov: usize, shift: f64) -> Vec<Column> {
        let c = &self.data.covariates[cov];
        match &c.spec.kind {
            CovariateKind::Binary | CovariateKind::Continuous => vec![Column {
                name: c.name().to_string(),
                factors: vec![Factor::Value { cov, shift }],
            }],
            CovariateKind::Categorical { levels } => levels
                .iter()
                .enumerate()
                .skip(1)
                .map(|(level, l)| Column {
                    name: format!("{}[{l}]", c.name()),
                    factors: vec![Factor::Level { cov, level }],
                })
                .collect(),
        }
    }

    pub fn interaction(&self, a: &[Column], b: &[Column]) -> Vec<Column> {
        a.iter()
            .flat_map(|x| b.iter().map(move |y| x.times(y)))
            .collect()
    }

    /// Mean of the observed values of `cov` among `rows`.
    pub fn observed_mean(&self, cov: usize, rows: &[usize]) -> f64 {
        let vals = &self.data.covariates[cov].values;
        let (s, n) = rows
            .iter()
            .filter_map(|&r| vals[r])
            .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
        if n == 0 {
            0.0
        } else {
            s / n as f64
        }
    }

    /// Intercept, then the terms observed in `mask`, then interactions whose
    /// two covariates are both observed.
    pub fn pattern_columns(&self, mask: PatternMask) -> Vec<Column> {
        let mut cols = vec![Column::intercept()];
        for &t in &self.terms {
            if self.observed(t, mask) {
                cols.extend(self.main(t, 0.0));
            }
        }
        for &(a, b) in &self.interactions {
            if self.observed(a, mask) && self.observed(b, mask) {
                cols.extend(self.interaction(&self.main(a, 0.0), &self.main(b, 0.0)));
            }
        }
        cols
    }
}
