use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::balance::{balance_on, BalanceTable};
use super::data::Dataset;
use super::design::Context;
use super::iptw::{iptw_weights, weighted_risk_difference};
use super::propensity::{cra_on, mind_on, mpa_on, PatternFit};
use super::spec::{CiKind, Method, ModelSpec};
use super::EstimatorError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AteResult {
    pub method: Method,
    /// Risk difference, treated minus control.
    pub estimate: f64,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub ci_kind: Option<CiKind>,
    /// SD of the successful bootstrap replicates.
    pub bootstrap_sd: Option<f64>,
    pub replicates: usize,
    pub failed_replicates: usize,
    pub seed: u64,
    pub n_total: usize,
    pub n_used: usize,
    pub models: Vec<PatternFit>,
    pub balance_before: BalanceTable,
    pub balance_after: Option<BalanceTable>,
    pub notes: Vec<String>,
}

impl AteResult {
    pub fn per_1000(&self) -> String {
        format!("{:.2}", self.estimate * 1000.0)
    }

    pub fn ci_per_1000(&self) -> Option<String> {
        Some(format!(
            "({:.2}, {:.2})",
            self.ci_low? * 1000.0,
            self.ci_high? * 1000.0
        ))
    }
}

/// Aligned table: method, risk difference per 1000, 95% CI per 1000.
pub fn render_table(results: &[AteResult]) -> String {
    let mut out = format!("{:<20} {:>14}  {}\n", "Method", "RD per 1000", "95% CI");
    for r in results {
        out.push_str(&format!(
            "{:<20} {:>14}  {}\n",
            r.method.title(),
            r.per_1000(),
            r.ci_per_1000().unwrap_or_else(|| "-".into())
        ));
    }
    out
}

struct Point {
    estimate: f64,
    rows: Vec<usize>,
    weights: Option<Vec<f64>>,
    models: Vec<PatternFit>,
    notes: Vec<String>,
}

/// The whole pipeline on one set of rows (possibly with repeats).
fn point(ctx: &Context, rows: &[usize]) -> Result<Point, EstimatorError> {
    let data = ctx.data;
    let fit = match ctx.spec.method.name {
        Method::Crude => {
            let y: Vec<u8> = rows.iter().map(|&r| data.y[r]).collect();
            let z: Vec<u8> = rows.iter().map(|&r| data.z[r]).collect();
            let estimate = weighted_risk_difference(&y, &z, &vec![1.0; rows.len()])?;
            return Ok(Point {
                estimate,
                rows: rows.to_vec(),
                weights: None,
                models: vec![],
                notes: vec![],
            });
        }
        Method::CompleteRecords => cra_on(ctx, rows)?,
        Method::Mpa => mpa_on(ctx, rows)?,
        Method::MissingIndicator => mind_on(ctx, rows)?,
    };
    let y: Vec<u8> = fit.rows.iter().map(|&r| data.y[r]).collect();
    let z: Vec<u8> = fit.rows.iter().map(|&r| data.z[r]).collect();
    let w = iptw_weights(&z, &fit.scores, ctx.spec.method.weight_cap)?;
    let estimate = weighted_risk_difference(&y, &z, &w)?;
    Ok(Point {
        estimate,
        rows: fit.rows,
        weights: Some(w),
        models: fit.models,
        notes: fit.notes,
    })
}

/// Type-7 quantile of sorted values.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Estimates the risk difference with the configured method. With
/// `bootstrap.replicates > 0` the whole pipeline (propensity fits included)
/// is re-run on row resamples; replicate `b` draws from a ChaCha8 stream `b`
/// keyed by the seed, so results do not depend on thread scheduling.
pub fn estimate_ate(data: &Dataset, spec: &ModelSpec) -> Result<AteResult, EstimatorError> {
    let ctx = Context::new(data, spec)?;
    let n = data.n_rows();
    let all: Vec<usize> = (0..n).collect();
    let p = point(&ctx, &all)?;
    let balance_before = balance_on(data, &p.rows, None)?;
    let balance_after = match &p.weights {
        Some(w) => Some(balance_on(data, &p.rows, Some(w))?),
        None => None,
    };

    let b = spec.bootstrap.replicates;
    let seed = spec.bootstrap.seed;
    let mut result = AteResult {
        method: spec.method.name,
        estimate: p.estimate,
        ci_low: None,
        ci_high: None,
        ci_kind: None,
        bootstrap_sd: None,
        replicates: b,
        failed_replicates: 0,
        seed,
        n_total: n,
        n_used: p.rows.len(),
        models: p.models,
        balance_before,
        balance_after,
        notes: p.notes,
    };
    if b == 0 {
        return Ok(result);
    }

    let reps: Vec<Result<f64, EstimatorError>> = (0..b)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            point(&ctx, &rows).map(|p| p.estimate)
        })
        .collect();
    let failed = reps.iter().filter(|r| r.is_err()).count();
    let ok: Vec<f64> = reps.iter().filter_map(|r| r.as_ref().ok().copied()).collect();
    if failed * 20 > b || ok.len() < 2 {
        let first = reps
            .iter()
            .find_map(|r| r.as_ref().err())
            .map_or_else(|| "too few replicates".to_string(), |e| e.to_string());
        return Err(EstimatorError::Bootstrap {
            failed,
            total: b,
            first,
        });
    }
    let mean = ok.iter().sum::<f64>() / ok.len() as f64;
    let sd = (ok.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (ok.len() - 1) as f64).sqrt();
    let (lo, hi) = match spec.bootstrap.ci {
        CiKind::Normal => (p.estimate - 1.96 * sd, p.estimate + 1.96 * sd),
        CiKind::Percentile => {
            let mut sorted = ok.clone();
            sorted.sort_by(f64::total_cmp);
            (quantile(&sorted, 0.025), quantile(&sorted, 0.975))
        }
    };
    result.ci_low = Some(lo);
    result.ci_high = Some(hi);
    result.ci_kind = Some(spec.bootstrap.ci);
    result.bootstrap_sd = Some(sd);
    result.failed_replicates = failed;
    if failed > 0 {
        result
            .notes
            .push(format!("{failed} bootstrap replicates failed and were dropped"));
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantile_interpolates() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile(&v, 0.5), 3.0);
        assert_eq!(quantile(&v, 0.1), 1.4);
    }
}
