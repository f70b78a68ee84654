//! Logistic regression by iteratively reweighted least squares.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::EstimatorError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub max_iter: usize,
    /// Convergence when the largest score component, or the largest Newton
    /// step component, falls below this.
    pub tolerance: f64,
    /// Any |coefficient| beyond this marks the fit as separated.
    pub divergence_bound: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            max_iter: 50,
            tolerance: 1e-8,
            divergence_bound: 15.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticFit {
    /// One per design column; aliased columns get 0.
    pub coefficients: Vec<f64>,
    /// `None` for aliased columns.
    pub std_errors: Vec<Option<f64>>,
    /// Indices of columns dropped as linear combinations of earlier ones.
    pub dropped: Vec<usize>,
    pub iterations: usize,
    pub converged: bool,
    pub separated: bool,
    pub deviance: f64,
}

/// Row-major design used internally.
#[derive(Debug, Clone)]
pub(crate) struct Design {
    pub rows: usize,
    pub cols: usize,
    pub x: Vec<f64>,
}

impl Design {
    pub fn from_matrix(m: &DMatrix<f64>) -> Self {
        let (rows, cols) = m.shape();
        let mut x = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                x.push(m[(i, j)]);
            }
        }
        Design { rows, cols, x }
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.cols..(i + 1) * self.cols]
    }

    pub fn linear_predictor(&self, beta: &[f64]) -> Vec<f64> {
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(beta).map(|(a, b)| a * b).sum())
            .collect()
    }

    fn gram(&self, weight: impl Fn(usize) -> f64) -> DMatrix<f64> {
        let p = self.cols;
        let mut g = DMatrix::<f64>::zeros(p, p);
        for i in 0..self.rows {
            let w = weight(i);
            if w == 0.0 {
                continue;
            }
            let r = self.row(i);
            for a in 0..p {
                let wa = w * r[a];
                if wa == 0.0 {
                    continue;
                }
                for b in a..p {
                    g[(a, b)] += wa * r[b];
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                g[(a, b)] = g[(b, a)];
            }
        }
        g
    }

    fn select(&self, keep: &[usize]) -> Design {
        let mut x = Vec::with_capacity(self.rows * keep.len());
        for i in 0..self.rows {
            let r = self.row(i);
            x.extend(keep.iter().map(|&j| r[j]));
        }
        Design {
            rows: self.rows,
            cols: keep.len(),
            x,
        }
    }
}

pub(crate) fn expit(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// log(1 + e^t) without overflow.
fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

/// Identical design rows pooled into binomial counts.
struct Grouped {
    d: Design,
    trials: Vec<f64>,
    successes: Vec<f64>,
}

fn collapse(d: &Design, y: &[u8]) -> Grouped {
    let bits: Vec<u64> = d.x.iter().map(|v| (v + 0.0).to_bits()).collect();
    let p = d.cols;
    let mut index: HashMap<&[u64], usize> = HashMap::new();
    let mut x = Vec::new();
    let mut trials = Vec::new();
    let mut successes = Vec::new();
    for i in 0..d.rows {
        let key = &bits[i * p..(i + 1) * p];
        let g = *index.entry(key).or_insert_with(|| {
            x.extend_from_slice(d.row(i));
            trials.push(0.0);
            successes.push(0.0);
            trials.len() - 1
        });
        trials[g] += 1.0;
        successes[g] += f64::from(y[i]);
    }
    Grouped {
        d: Design {
            rows: trials.len(),
            cols: p,
            x,
        },
        trials,
        successes,
    }
}

impl Grouped {
    fn loglik(&self, beta: &[f64]) -> f64 {
        self.d
            .linear_predictor(beta)
            .iter()
            .enumerate()
            .map(|(i, eta)| self.successes[i] * eta - self.trials[i] * softplus(*eta))
            .sum()
    }

    fn fitted(&self, beta: &[f64]) -> Vec<f64> {
        self.d.linear_predictor(beta).into_iter().map(expit).collect()
    }

    fn score(&self, mu: &[f64]) -> DVector<f64> {
        let mut s = DVector::<f64>::zeros(self.d.cols);
        for i in 0..self.d.rows {
            let resid = self.successes[i] - self.trials[i] * mu[i];
            for (j, v) in self.d.row(i).iter().enumerate() {
                s[j] += v * resid;
            }
        }
        s
    }

    fn information(&self, mu: &[f64]) -> DMatrix<f64> {
        self.d.gram(|i| self.trials[i] * mu[i] * (1.0 - mu[i]))
    }
}

/// Binomial log-likelihood at `beta`.
pub fn log_likelihood(x: &DMatrix<f64>, y: &[u8], beta: &[f64]) -> f64 {
    collapse(&Design::from_matrix(x), y).loglik(beta)
}

/// Gradient of [`log_likelihood`]: Xᵀ(y − μ).
pub fn score(x: &DMatrix<f64>, y: &[u8], beta: &[f64]) -> Vec<f64> {
    let g = collapse(&Design::from_matrix(x), y);
    g.score(&g.fitted(beta)).iter().copied().collect()
}

/// Columns that are (numerically) linear combinations of earlier columns,
/// found by a pivot-free Cholesky sweep over XᵀX.
fn aliased(gram: &DMatrix<f64>) -> Vec<usize> {
    let p = gram.nrows();
    let mut l = DMatrix::<f64>::zeros(p, p);
    let mut kept: Vec<usize> = Vec::new();
    let mut dropped = Vec::new();
    for j in 0..p {
        let mut row = vec![0.0; kept.len()];
        for (a, &ka) in kept.iter().enumerate() {
            let mut v = gram[(j, ka)];
            for (b, rb) in row.iter().enumerate().take(a) {
                v -= rb * l[(a, b)];
            }
            row[a] = v / l[(a, a)];
        }
        let resid = gram[(j, j)] - row.iter().map(|v| v * v).sum::<f64>();
        if gram[(j, j)] <= 0.0 || resid <= 1e-10 * gram[(j, j)] {
            dropped.push(j);
            continue;
        }
        let a = kept.len();
        for (b, v) in row.iter().enumerate() {
            l[(a, b)] = *v;
        }
        l[(a, a)] = resid.sqrt();
        kept.push(j);
    }
    dropped
}

/// IRLS on a row-major design.
pub(crate) fn fit_design(
    d: &Design,
    y: &[u8],
    opts: &FitOptions,
) -> Result<LogisticFit, EstimatorError> {
    if y.len() != d.rows {
        return Err(EstimatorError::Data("response length differs from design rows".into()));
    }
    if d.rows < d.cols {
        return Err(EstimatorError::TooFewRows {
            rows: d.rows,
            columns: d.cols,
        });
    }
    let full = collapse(d, y);
    let dropped = aliased(&full.d.gram(|i| full.trials[i]));
    let keep: Vec<usize> = (0..d.cols).filter(|j| !dropped.contains(j)).collect();
    let work = if dropped.is_empty() {
        full
    } else {
        Grouped {
            d: full.d.select(&keep),
            ..full
        }
    };

    let p = work.d.cols;
    let mut beta = vec![0.0; p];
    let mut ll = work.loglik(&beta);
    let mut converged = false;
    let mut separated = false;
    let mut iterations = 0;
    let mut max_score = f64::INFINITY;
    while iterations < opts.max_iter {
        let mu = work.fitted(&beta);
        let s = work.score(&mu);
        max_score = s.amax();
        if max_score < opts.tolerance {
            converged = true;
            break;
        }
        let Some(chol) = work.information(&mu).cholesky() else {
            // information collapses when fitted values hit 0 or 1
            separated = true;
            break;
        };
        let mut step = chol.solve(&s);
        iterations += 1;
        let mut trial: Vec<f64>;
        let mut trial_ll;
        let mut halvings = 0;
        loop {
            trial = beta.iter().zip(step.iter()).map(|(b, s)| b + s).collect();
            trial_ll = work.loglik(&trial);
            if trial_ll >= ll - 1e-12 * ll.abs().max(1.0) || halvings == 30 {
                break;
            }
            step /= 2.0;
            halvings += 1;
        }
        beta = trial;
        ll = trial_ll;
        if beta.iter().any(|b| b.abs() > opts.divergence_bound) {
            separated = true;
            break;
        }
        if step.amax() < opts.tolerance {
            converged = true;
            break;
        }
    }
    if !converged && !separated {
        max_score = work.score(&work.fitted(&beta)).amax();
        converged = max_score < opts.tolerance;
    }
    if !converged && !separated {
        return Err(EstimatorError::NonConvergence {
            iterations,
            max_score,
        });
    }

    let cov = work.information(&work.fitted(&beta)).try_inverse();
    let mut coefficients = vec![0.0; d.cols];
    let mut std_errors = vec![None; d.cols];
    for (k, &j) in keep.iter().enumerate() {
        coefficients[j] = beta[k];
        std_errors[j] = cov
            .as_ref()
            .map(|c| c[(k, k)])
            .filter(|v| *v >= 0.0 && v.is_finite())
            .map(f64::sqrt);
    }
    Ok(LogisticFit {
        coefficients,
        std_errors,
        dropped,
        iterations,
        converged,
        separated,
        deviance: -2.0 * ll,
    })
}

/// Maximum-likelihood logistic regression of `y` on the columns of `x`
/// (include an intercept column explicitly). Aliased columns are dropped and
/// listed in [`LogisticFit::dropped`]; a diverging fit is returned with
/// `separated` set rather than as an error.
pub fn fit_logistic(
    x: &DMatrix<f64>,
    y: &[u8],
    opts: &FitOptions,
) -> Result<LogisticFit, EstimatorError> {
    if y.iter().any(|v| *v > 1) {
        return Err(EstimatorError::Data("response must be 0/1".into()));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(EstimatorError::Data("design has non-finite cells".into()));
    }
    fit_design(&Design::from_matrix(x), y, opts)
}
