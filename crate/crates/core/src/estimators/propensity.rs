//! Generalized propensity scores e* = P(Z = 1 | observed confounders, pattern).

use std::cmp::Reverse;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::data::{CovariateKind, Dataset, PatternMask};
use super::design::{Column, Context, Factor};
use super::logistic::{expit, fit_design, LogisticFit};
use super::spec::{Method, ModelSpec};
use super::EstimatorError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternFit {
    /// Observed-ness bits over the partial covariates, or `pooled`.
    pub pattern: String,
    pub label: String,
    pub rows: usize,
    pub treated: usize,
    pub columns: Vec<String>,
    pub fit: LogisticFit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropensityFit {
    pub method: Method,
    /// Rows that received a score (0-based), in input order.
    pub rows: Vec<usize>,
    /// Score of each row in `rows`.
    pub scores: Vec<f64>,
    pub models: Vec<PatternFit>,
    pub notes: Vec<String>,
}

/// Human-readable pattern description, e.g. `Ckd, Eth missing`.
pub(crate) fn describe(data: &Dataset, mask: PatternMask) -> String {
    let missing: Vec<&str> = data
        .partial_indices()
        .into_iter()
        .filter(|&c| !data.observed_in(c, mask))
        .map(|c| data.covariates[c].name())
        .collect();
    if missing.is_empty() {
        "all observed".into()
    } else {
        format!("{} missing", missing.join(", "))
    }
}

/// Positions into `rows`, grouped by pattern with the all-observed first.
fn groups(ctx: &Context, rows: &[usize]) -> Vec<(PatternMask, Vec<usize>)> {
    // few distinct patterns, so a linear scan beats a map
    let mut g: Vec<(PatternMask, Vec<usize>)> = Vec::new();
    for (pos, &r) in rows.iter().enumerate() {
        let m = ctx.masks[r];
        match g.iter_mut().find(|(k, _)| *k == m) {
            Some((_, v)) => v.push(pos),
            None => g.push((m, vec![pos])),
        }
    }
    g.sort_by_key(|(m, _)| Reverse(*m));
    g
}

fn check_pattern(ctx: &Context, mask: PatternMask, rows: &[usize]) -> Result<(), EstimatorError> {
    let pattern = ctx.data.pattern_label(mask);
    let label = describe(ctx.data, mask);
    let min = ctx.spec.method.min_pattern_size;
    if rows.len() < min {
        return Err(EstimatorError::PatternTooSmall {
            pattern,
            label,
            rows: rows.len(),
            min,
        });
    }
    let treated = rows.iter().filter(|&&r| ctx.data.z[r] == 1).count();
    if treated == 0 || treated == rows.len() {
        return Err(EstimatorError::SingleArm {
            pattern,
            label,
            missing_arm: if treated == 0 { "treated" } else { "control" },
        });
    }
    Ok(())
}

/// Fits one logistic model on `rows` and returns it with the rows' scores.
fn fit_block(
    ctx: &Context,
    rows: &[usize],
    cols: &[Column],
    pattern: String,
    label: String,
) -> Result<(PatternFit, Vec<f64>), EstimatorError> {
    let design = ctx.design(rows, cols);
    let z: Vec<u8> = rows.iter().map(|&r| ctx.data.z[r]).collect();
    let fit = fit_design(&design, &z, &ctx.spec.fit_options()).map_err(|e| {
        EstimatorError::PatternFit {
            pattern: pattern.clone(),
            label: label.clone(),
            source: Box::new(e),
        }
    })?;
    let scores = design
        .linear_predictor(&fit.coefficients)
        .into_iter()
        .map(expit)
        .collect();
    let pf = PatternFit {
        pattern,
        label,
        rows: rows.len(),
        treated: z.iter().filter(|v| **v == 1).count(),
        columns: cols.iter().map(|c| c.name.clone()).collect(),
        fit,
    };
    Ok((pf, scores))
}

pub(crate) fn mpa_on(ctx: &Context, rows: &[usize]) -> Result<PropensityFit, EstimatorError> {
    let mut scores = vec![0.0; rows.len()];
    let mut models = Vec::new();
    for (mask, pos) in groups(ctx, rows) {
        let members: Vec<usize> = pos.iter().map(|&p| rows[p]).collect();
        check_pattern(ctx, mask, &members)?;
        let cols = ctx.pattern_columns(mask);
        let (pf, s) = fit_block(
            ctx,
            &members,
            &cols,
            ctx.data.pattern_label(mask),
            describe(ctx.data, mask),
        )?;
        for (p, v) in pos.iter().zip(s) {
            scores[*p] = v;
        }
        models.push(pf);
    }
    Ok(PropensityFit {
        method: Method::Mpa,
        rows: rows.to_vec(),
        scores,
        models,
        notes: vec![],
    })
}

/// Missing-indicator columns: continuous partial covariates are centred on
/// their observed mean and zero-filled; every partial covariate gets a
/// missing indicator (for a categorical one this is its `missing` level).
fn indicator_columns(ctx: &Context, rows: &[usize], notes: &mut Vec<String>) -> Vec<Column> {
    let mut shifts = BTreeMap::new();
    for &t in ctx.terms.iter().chain(ctx.interactions.iter().flat_map(|(a, b)| [a, b])) {
        let c = &ctx.data.covariates[t];
        if c.spec.partial && c.spec.kind == CovariateKind::Continuous && !shifts.contains_key(&t) {
            let m = ctx.observed_mean(t, rows);
            notes.push(format!(
                "{}: centred at its observed mean {m} before zero-filling",
                c.name()
            ));
            shifts.insert(t, m);
        }
    }
    let main = |t: usize| ctx.main(t, shifts.get(&t).copied().unwrap_or(0.0));
    let mut cols = vec![Column::intercept()];
    for &t in &ctx.terms {
        cols.extend(main(t));
        if ctx.is_partial(t) {
            cols.push(Column {
                name: format!("{}_missing", ctx.data.covariates[t].name()),
                factors: vec![Factor::Missing { cov: t }],
            });
        }
    }
    for &(a, b) in &ctx.interactions {
        cols.extend(ctx.interaction(&main(a), &main(b)));
    }
    cols
}

pub(crate) fn mind_on(ctx: &Context, rows: &[usize]) -> Result<PropensityFit, EstimatorError> {
    for (mask, pos) in groups(ctx, rows) {
        let members: Vec<usize> = pos.iter().map(|&p| rows[p]).collect();
        check_pattern(ctx, mask, &members)?;
    }
    let mut notes = Vec::new();
    let cols = indicator_columns(ctx, rows, &mut notes);
    let (pf, scores) = fit_block(ctx, rows, &cols, "pooled".into(), "all rows".into())?;
    Ok(PropensityFit {
        method: Method::MissingIndicator,
        rows: rows.to_vec(),
        scores,
        models: vec![pf],
        notes,
    })
}

pub(crate) fn constrained_on(ctx: &Context, rows: &[usize]) -> Result<PropensityFit, EstimatorError> {
    let present = groups(ctx, rows);
    for (mask, pos) in &present {
        let members: Vec<usize> = pos.iter().map(|&p| rows[p]).collect();
        check_pattern(ctx, *mask, &members)?;
    }
    let tag = |mask: PatternMask| Column {
        name: format!("pattern[{}]", ctx.data.pattern_label(mask)),
        factors: vec![Factor::Pattern(mask)],
    };
    let mut cols: Vec<Column> = present.iter().map(|(m, _)| tag(*m)).collect();
    for &t in &ctx.terms {
        if ctx.is_partial(t) {
            for (m, _) in &present {
                if ctx.observed(t, *m) {
                    cols.extend(ctx.main(t, 0.0).iter().map(|c| tag(*m).times(c)));
                }
            }
        } else {
            cols.extend(ctx.main(t, 0.0));
        }
    }
    for &(a, b) in &ctx.interactions {
        let prod = ctx.interaction(&ctx.main(a, 0.0), &ctx.main(b, 0.0));
        if ctx.is_partial(a) || ctx.is_partial(b) {
            for (m, _) in &present {
                if ctx.observed(a, *m) && ctx.observed(b, *m) {
                    cols.extend(prod.iter().map(|c| tag(*m).times(c)));
                }
            }
        } else {
            cols.extend(prod);
        }
    }
    let (pf, scores) = fit_block(ctx, rows, &cols, "pooled".into(), "all rows".into())?;
    Ok(PropensityFit {
        method: Method::Mpa,
        rows: rows.to_vec(),
        scores,
        models: vec![pf],
        notes: vec!["fully observed covariates share one coefficient across patterns".into()],
    })
}

pub(crate) fn cra_on(ctx: &Context, rows: &[usize]) -> Result<PropensityFit, EstimatorError> {
    let complete: Vec<usize> = rows
        .iter()
        .copied()
        .filter(|&r| ctx.data.is_complete(r))
        .collect();
    let treated = complete.iter().filter(|&&r| ctx.data.z[r] == 1).count();
    if treated == 0 {
        return Err(EstimatorError::EmptyArm("treated complete-record"));
    }
    if treated == complete.len() {
        return Err(EstimatorError::EmptyArm("control complete-record"));
    }
    let all = (1 << ctx.data.partial_indices().len()) - 1;
    let cols = ctx.pattern_columns(all);
    let (pf, scores) = fit_block(
        ctx,
        &complete,
        &cols,
        ctx.data.pattern_label(all),
        "complete records".into(),
    )?;
    Ok(PropensityFit {
        method: Method::CompleteRecords,
        rows: complete,
        scores,
        models: vec![pf],
        notes: vec![],
    })
}

fn all_rows(data: &Dataset) -> Vec<usize> {
    (0..data.n_rows()).collect()
}

/// One logistic model per missingness pattern, each fitted on its own rows
/// with only the covariates observed in that pattern.
pub fn mpa_propensity(data: &Dataset, spec: &ModelSpec) -> Result<PropensityFit, EstimatorError> {
    mpa_on(&Context::new(data, spec)?, &all_rows(data))
}

/// One pooled model with missing indicators.
pub fn missing_indicator_propensity(
    data: &Dataset,
    spec: &ModelSpec,
) -> Result<PropensityFit, EstimatorError> {
    mind_on(&Context::new(data, spec)?, &all_rows(data))
}

/// Pattern models fitted jointly, with each fully observed covariate sharing
/// one coefficient across patterns. With a single partial covariate this
/// spans the same columns as the missing-indicator model.
pub fn constrained_mpa_propensity(
    data: &Dataset,
    spec: &ModelSpec,
) -> Result<PropensityFit, EstimatorError> {
    constrained_on(&Context::new(data, spec)?, &all_rows(data))
}

/// Single model on the rows with every covariate observed.
pub fn complete_records_propensity(
    data: &Dataset,
    spec: &ModelSpec,
) -> Result<PropensityFit, EstimatorError> {
    cra_on(&Context::new(data, spec)?, &all_rows(data))
}
