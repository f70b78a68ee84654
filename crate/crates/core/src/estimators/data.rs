//! Analysis datasets: binary treatment and outcome plus typed covariates,
//! with missing cells allowed only in partially observed covariates.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::EstimatorError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum CovariateKind {
    Binary,
    /// Reference level is the first one.
    Categorical { levels: Vec<String> },
    Continuous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: CovariateKind,
    #[serde(default)]
    pub partial: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Covariate {
    pub spec: CovariateSpec,
    /// Binary: 0/1. Categorical: level index. Continuous: the value.
    pub values: Vec<Option<f64>>,
}

impl Covariate {
    pub fn name(&self) -> &str {
        &self.spec.name
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub treatment: String,
    pub outcome: String,
    pub z: Vec<u8>,
    pub y: Vec<u8>,
    pub covariates: Vec<Covariate>,
}

/// Missingness pattern over the partial covariates in declaration order;
/// bit `k-1-j` is set when partial covariate `j` is observed, so the
/// all-observed pattern is the largest mask.
pub type PatternMask = u32;

impl Dataset {
    pub fn new(
        treatment: impl Into<String>,
        outcome: impl Into<String>,
        z: Vec<u8>,
        y: Vec<u8>,
        covariates: Vec<Covariate>,
    ) -> Result<Self, EstimatorError> {
        let d = Dataset {
            treatment: treatment.into(),
            outcome: outcome.into(),
            z,
            y,
            covariates,
        };
        d.validate()?;
        Ok(d)
    }

    fn validate(&self) -> Result<(), EstimatorError> {
        let n = self.z.len();
        if self.y.len() != n {
            return Err(EstimatorError::Data("treatment and outcome lengths differ".into()));
        }
        if let Some(i) = self.z.iter().chain(&self.y).position(|v| *v > 1) {
            return Err(EstimatorError::Data(format!(
                "treatment and outcome must be 0/1 (row {})",
                i % n.max(1) + 1
            )));
        }
        if self.partial_indices().len() > 16 {
            return Err(EstimatorError::Data(
                "at most 16 partially observed covariates are supported".into(),
            ));
        }
        for c in &self.covariates {
            if c.values.len() != n {
                return Err(EstimatorError::Data(format!(
                    "covariate `{}` has {} values for {n} rows",
                    c.name(),
                    c.values.len()
                )));
            }
            if !c.spec.partial {
                if let Some(i) = c.values.iter().position(Option::is_none) {
                    return Err(EstimatorError::Data(format!(
                        "covariate `{}` is declared fully observed but row {} is missing",
                        c.name(),
                        i + 1
                    )));
                }
            }
            let bad = c.values.iter().flatten().position(|v| match &c.spec.kind {
                CovariateKind::Binary => *v != 0.0 && *v != 1.0,
                CovariateKind::Categorical { levels } => {
                    v.fract() != 0.0 || *v < 0.0 || *v >= levels.len() as f64
                }
                CovariateKind::Continuous => !v.is_finite(),
            });
            if bad.is_some() {
                return Err(EstimatorError::Data(format!(
                    "covariate `{}` has values outside its declared type",
                    c.name()
                )));
            }
        }
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.z.len()
    }

    pub fn covariate(&self, name: &str) -> Option<&Covariate> {
        self.covariates.iter().find(|c| c.name() == name)
    }

    pub fn covariate_index(&self, name: &str) -> Option<usize> {
        self.covariates.iter().position(|c| c.name() == name)
    }

    /// Indices of partial covariates in declaration order.
    pub fn partial_indices(&self) -> Vec<usize> {
        (0..self.covariates.len())
            .filter(|&i| self.covariates[i].spec.partial)
            .collect()
    }

    pub fn pattern_of(&self, row: usize) -> PatternMask {
        self.covariates
            .iter()
            .filter(|c| c.spec.partial)
            .fold(0, |m, c| m << 1 | PatternMask::from(c.values[row].is_some()))
    }

    /// Pattern of every row.
    pub fn patterns(&self) -> Vec<PatternMask> {
        (0..self.n_rows()).map(|r| self.pattern_of(r)).collect()
    }

    /// `1` observed, `0` missing, in partial-covariate order.
    pub fn pattern_label(&self, mask: PatternMask) -> String {
        let k = self.partial_indices().len();
        (0..k)
            .map(|j| if mask >> (k - 1 - j) & 1 == 1 { '1' } else { '0' })
            .collect()
    }

    /// Is partial covariate `cov` (a covariate index) observed in `mask`?
    pub fn observed_in(&self, cov: usize, mask: PatternMask) -> bool {
        if !self.covariates[cov].spec.partial {
            return true;
        }
        let partial = self.partial_indices();
        let k = partial.len();
        let j = partial.iter().position(|&c| c == cov).expect("partial covariate");
        mask >> (k - 1 - j) & 1 == 1
    }

    /// Rows of `rows` grouped by pattern, all-observed pattern first.
    pub fn group_by_pattern(&self, rows: &[usize]) -> Vec<(PatternMask, Vec<usize>)> {
        let mut groups: BTreeMap<std::cmp::Reverse<PatternMask>, Vec<usize>> = BTreeMap::new();
        for &r in rows {
            groups
                .entry(std::cmp::Reverse(self.pattern_of(r)))
                .or_default()
                .push(r);
        }
        groups.into_iter().map(|(m, v)| (m.0, v)).collect()
    }

    pub fn is_complete(&self, row: usize) -> bool {
        self.covariates.iter().all(|c| c.values[row].is_some())
    }

    /// Reads a comma-separated table with a header row; `NA` or an empty
    /// cell marks a missing value. Columns not named in the spec are ignored.
    pub fn from_csv<R: Read>(
        reader: R,
        treatment: &str,
        outcome: &str,
        covariates: &[CovariateSpec],
    ) -> Result<Self, EstimatorError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(reader);
        let header = rdr
            .headers()
            .map_err(|e| EstimatorError::Data(e.to_string()))?
            .clone();
        let col = |name: &str| {
            header
                .iter()
                .position(|h| h.trim() == name)
                .ok_or_else(|| EstimatorError::Data(format!("column `{name}` not found")))
        };
        let zc = col(treatment)?;
        let yc = col(outcome)?;
        let cov_cols: Vec<usize> = covariates
            .iter()
            .map(|c| col(&c.name))
            .collect::<Result<_, _>>()?;
        let mut z = Vec::new();
        let mut y = Vec::new();
        let mut values: Vec<Vec<Option<f64>>> = vec![Vec::new(); covariates.len()];
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| EstimatorError::Data(e.to_string()))?;
            let row = line + 2;
            let cell = |c: usize| rec.get(c).unwrap_or("").trim();
            let binary = |c: usize, what: &str| -> Result<u8, EstimatorError> {
                match cell(c) {
                    "0" => Ok(0),
                    "1" => Ok(1),
                    other => Err(EstimatorError::Data(format!(
                        "row {row}: {what} must be 0 or 1, found `{other}`"
                    ))),
                }
            };
            z.push(binary(zc, treatment)?);
            y.push(binary(yc, outcome)?);
            for (j, spec) in covariates.iter().enumerate() {
                let text = cell(cov_cols[j]);
                let v = if text.is_empty() || text == "NA" {
                    None
                } else {
                    Some(match &spec.kind {
                        CovariateKind::Binary => f64::from(binary(cov_cols[j], &spec.name)?),
                        CovariateKind::Categorical { levels } => levels
                            .iter()
                            .position(|l| l == text)
                            .ok_or_else(|| {
                                EstimatorError::Data(format!(
                                    "row {row}: `{text}` is not a level of `{}`",
                                    spec.name
                                ))
                            })? as f64,
                        CovariateKind::Continuous => text.parse::<f64>().map_err(|_| {
                            EstimatorError::Data(format!(
                                "row {row}: `{text}` is not a number (`{}`)",
                                spec.name
                            ))
                        })?,
                    })
                };
                values[j].push(v);
            }
        }
        let covs = covariates
            .iter()
            .cloned()
            .zip(values)
            .map(|(spec, values)| Covariate { spec, values })
            .collect();
        Dataset::new(treatment, outcome, z, y, covs)
    }

    /// Writes the table in the format [`Dataset::from_csv`] reads.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), EstimatorError> {
        let io = |e: csv::Error| EstimatorError::Data(e.to_string());
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec![self.treatment.clone(), self.outcome.clone()];
        header.extend(self.covariates.iter().map(|c| c.name().to_string()));
        w.write_record(&header).map_err(io)?;
        for i in 0..self.n_rows() {
            let mut rec = vec![self.z[i].to_string(), self.y[i].to_string()];
            for c in &self.covariates {
                rec.push(match (c.values[i], &c.spec.kind) {
                    (None, _) => "NA".to_string(),
                    (Some(v), CovariateKind::Categorical { levels }) => levels[v as usize].clone(),
                    (Some(v), CovariateKind::Binary) => format!("{}", v as u8),
                    (Some(v), CovariateKind::Continuous) => format!("{v}"),
                });
            }
            w.write_record(&rec).map_err(io)?;
        }
        w.flush().map_err(|e| EstimatorError::Data(e.to_string()))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn specs() -> Vec<CovariateSpec> {
        vec![
            CovariateSpec {
                name: "A".into(),
                kind: CovariateKind::Binary,
                partial: true,
            },
            CovariateSpec {
                name: "B".into(),
                kind: CovariateKind::Categorical {
                    levels: vec!["lo".into(), "hi".into()],
                },
                partial: true,
            },
            CovariateSpec {
                name: "C".into(),
                kind: CovariateKind::Continuous,
                partial: false,
            },
        ]
    }

    #[test]
    fn csv_round_trip_and_patterns() {
        let text = "Z,Y,A,B,C,extra\n1,0,1,hi,0.5,x\n0,1,NA,lo,-2,y\n1,1,0,NA,3.25,z\n0,0,NA,,1e-3,w\n";
        let d = Dataset::from_csv(text.as_bytes(), "Z", "Y", &specs()).unwrap();
        assert_eq!(d.n_rows(), 4);
        let labels: Vec<String> = (0..4).map(|r| d.pattern_label(d.pattern_of(r))).collect();
        assert_eq!(labels, vec!["11", "01", "10", "00"]);
        let groups = d.group_by_pattern(&[0, 1, 2, 3]);
        assert_eq!(groups.iter().map(|g| g.0).collect::<Vec<_>>(), vec![3, 2, 1, 0]);
        let mut out = Vec::new();
        d.write_csv(&mut out).unwrap();
        let back = Dataset::from_csv(out.as_slice(), "Z", "Y", &specs()).unwrap();
        assert_eq!(d, back);
    }

    #[test]
    fn rejects_missing_full_covariate_and_bad_binary() {
        let text = "Z,Y,A,B,C\n1,0,1,hi,NA\n";
        assert!(Dataset::from_csv(text.as_bytes(), "Z", "Y", &specs()).is_err());
        let text = "Z,Y,A,B,C\n2,0,1,hi,1\n";
        assert!(Dataset::from_csv(text.as_bytes(), "Z", "Y", &specs()).is_err());
    }
}
