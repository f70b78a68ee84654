//! Standardized differences between treatment arms.

use serde::{Deserialize, Serialize};

use super::data::{CovariateKind, Dataset};
use super::EstimatorError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceRow {
    pub covariate: String,
    /// Category, `1` for a binary covariate, `mean` for a continuous one, or
    /// `missing`.
    pub level: String,
    pub treated_mean: f64,
    pub control_mean: f64,
    /// Percent.
    pub std_diff: f64,
    /// Both arms had zero variance; `std_diff` is reported as 0.
    pub zero_variance: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceTable {
    pub weighted: bool,
    pub rows: Vec<BalanceRow>,
}

impl BalanceTable {
    pub fn max_std_diff(&self) -> f64 {
        self.rows.iter().map(|r| r.std_diff).fold(0.0, f64::max)
    }

    /// Rows above `threshold` percent.
    pub fn imbalanced(&self, threshold: f64) -> Vec<&BalanceRow> {
        self.rows.iter().filter(|r| r.std_diff > threshold).collect()
    }

    pub fn render(&self) -> String {
        let mut out = format!(
            "{:<24} {:>10} {:>10} {:>9}\n",
            if self.weighted { "Weighted" } else { "Unweighted" },
            "treated",
            "control",
            "std diff"
        );
        for r in &self.rows {
            let name = format!("{} {}", r.covariate, r.level);
            out.push_str(&format!(
                "{name:<24} {:>10.4} {:>10.4} {:>8.2}%{}\n",
                r.treated_mean,
                r.control_mean,
                r.std_diff,
                if r.zero_variance { " (zero variance)" } else { "" }
            ));
        }
        out
    }
}

/// 100·|m1 − m0| / sqrt((v1 + v0)/2); the flag is set, and 0 returned, when
/// both variances vanish.
pub fn standardized_difference(m1: f64, v1: f64, m0: f64, v0: f64) -> (f64, bool) {
    let pooled = ((v1 + v0) / 2.0).sqrt();
    if pooled <= 0.0 {
        (0.0, true)
    } else {
        (100.0 * (m1 - m0).abs() / pooled, false)
    }
}

/// Weighted mean and variance (normalized by the weight total) of
/// `value(row)` over the rows where it is defined, per arm.
fn arm_moments(
    data: &Dataset,
    rows: &[usize],
    weights: Option<&[f64]>,
    value: impl Fn(usize) -> Option<f64>,
) -> [(f64, f64); 2] {
    let mut acc = [(0.0, 0.0, 0.0); 2];
    for (k, &r) in rows.iter().enumerate() {
        if let Some(v) = value(r) {
            let w = weights.map_or(1.0, |w| w[k]);
            let a = &mut acc[usize::from(data.z[r])];
            a.0 += w;
            a.1 += w * v;
        }
    }
    let means = acc.map(|(sw, swv, _)| if sw > 0.0 { swv / sw } else { 0.0 });
    for (k, &r) in rows.iter().enumerate() {
        if let Some(v) = value(r) {
            let w = weights.map_or(1.0, |w| w[k]);
            let arm = usize::from(data.z[r]);
            acc[arm].2 += w * (v - means[arm]).powi(2);
        }
    }
    [0, 1].map(|arm| {
        let (sw, _, ss) = acc[arm];
        (means[arm], if sw > 0.0 { ss / sw } else { 0.0 })
    })
}

pub(crate) fn balance_on(
    data: &Dataset,
    rows: &[usize],
    weights: Option<&[f64]>,
) -> Result<BalanceTable, EstimatorError> {
    if let Some(w) = weights {
        if w.len() != rows.len() {
            return Err(EstimatorError::Data("one weight per row is required".into()));
        }
        if w.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(EstimatorError::Data("weights must be positive".into()));
        }
    }
    let mut out = Vec::new();
    let mut push = |covariate: &str, level: String, m: [(f64, f64); 2]| {
        let (d, flag) = standardized_difference(m[1].0, m[1].1, m[0].0, m[0].1);
        out.push(BalanceRow {
            covariate: covariate.to_string(),
            level,
            treated_mean: m[1].0,
            control_mean: m[0].0,
            std_diff: d,
            zero_variance: flag,
        });
    };
    for c in &data.covariates {
        let vals = &c.values;
        // binary indicators of a level are computed over all rows, so a
        // missing cell counts as "not this level"
        let indicator = |pred: &dyn Fn(Option<f64>) -> bool| {
            arm_moments(data, rows, weights, |r| Some(f64::from(u8::from(pred(vals[r])))))
        };
        match &c.spec.kind {
            CovariateKind::Binary => {
                push(c.name(), "1".into(), indicator(&|v| v == Some(1.0)));
            }
            CovariateKind::Categorical { levels } => {
                for (i, l) in levels.iter().enumerate() {
                    push(c.name(), l.clone(), indicator(&|v| v == Some(i as f64)));
                }
            }
            CovariateKind::Continuous => {
                push(c.name(), "mean".into(), arm_moments(data, rows, weights, |r| vals[r]));
            }
        }
        if c.spec.partial {
            push(c.name(), "missing".into(), indicator(&|v| v.is_none()));
        }
    }
    Ok(BalanceTable {
        weighted: weights.is_some(),
        rows: out,
    })
}

/// Standardized difference for every covariate level, in percent. A partial
/// covariate's missing cells are reported as their own `missing` level.
pub fn standardized_differences(
    data: &Dataset,
    weights: Option<&[f64]>,
) -> Result<BalanceTable, EstimatorError> {
    let rows: Vec<usize> = (0..data.n_rows()).collect();
    balance_on(data, &rows, weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::{Covariate, CovariateSpec};

    fn binary(z: Vec<u8>, x: Vec<Option<f64>>) -> Dataset {
        let n = z.len();
        Dataset::new(
            "Z",
            "Y",
            z,
            vec![0; n],
            vec![Covariate {
                spec: CovariateSpec {
                    name: "X".into(),
                    kind: CovariateKind::Binary,
                    partial: true,
                },
                values: x,
            }],
        )
        .unwrap()
    }

    #[test]
    fn hand_computed_binary_difference() {
        // treated: 6 of 10 have X = 1; control: 4 of 10
        let z: Vec<u8> = [1; 10].into_iter().chain([0; 10]).collect();
        let x: Vec<Option<f64>> = (0..20)
            .map(|i| Some(f64::from(u8::from(if i < 10 { i < 6 } else { i < 14 }))))
            .collect();
        let t = standardized_differences(&binary(z, x), None).unwrap();
        let expected = 100.0 * 0.2 / ((0.24 + 0.24) / 2.0f64).sqrt();
        assert!((t.rows[0].std_diff - expected).abs() < 1e-12);
        assert_eq!(t.rows[1].level, "missing");
        assert!(t.rows[1].zero_variance);
    }

    #[test]
    fn identical_arms_are_balanced() {
        let z = vec![1, 1, 1, 0, 0, 0];
        let x = vec![Some(1.0), None, Some(0.0), Some(1.0), None, Some(0.0)];
        let t = standardized_differences(&binary(z, x), None).unwrap();
        assert!(t.rows.iter().all(|r| r.std_diff == 0.0));
    }
}
