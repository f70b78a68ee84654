//! Inverse probability of treatment weighting with normalized weights.

use super::EstimatorError;

fn check_lengths(y: &[u8], z: &[u8], other: usize) -> Result<(), EstimatorError> {
    if y.len() != z.len() || z.len() != other {
        return Err(EstimatorError::Data("outcome, treatment and score lengths differ".into()));
    }
    Ok(())
}

/// Weights 1/e for treated rows and 1/(1−e) for controls, optionally capped.
pub fn iptw_weights(z: &[u8], e: &[f64], cap: Option<f64>) -> Result<Vec<f64>, EstimatorError> {
    let bad: Vec<usize> = e
        .iter()
        .enumerate()
        .filter(|(_, v)| !(**v > 0.0 && **v < 1.0))
        .map(|(i, _)| i + 1)
        .collect();
    if !bad.is_empty() {
        return Err(EstimatorError::Positivity { rows: bad });
    }
    Ok(z.iter()
        .zip(e)
        .map(|(&zi, &ei)| {
            let w = if zi == 1 { 1.0 / ei } else { 1.0 / (1.0 - ei) };
            cap.map_or(w, |c| w.min(c))
        })
        .collect())
}

/// Difference of weighted outcome means, treated minus control.
pub fn weighted_risk_difference(y: &[u8], z: &[u8], w: &[f64]) -> Result<f64, EstimatorError> {
    check_lengths(y, z, w.len())?;
    let (mut sw1, mut swy1, mut sw0, mut swy0) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..y.len() {
        let yw = w[i] * f64::from(y[i]);
        if z[i] == 1 {
            sw1 += w[i];
            swy1 += yw;
        } else {
            sw0 += w[i];
            swy0 += yw;
        }
    }
    if sw1 == 0.0 {
        return Err(EstimatorError::EmptyArm("treated"));
    }
    if sw0 == 0.0 {
        return Err(EstimatorError::EmptyArm("control"));
    }
    Ok(swy1 / sw1 - swy0 / sw0)
}

/// Σ ZY/e / Σ Z/e − Σ (1−Z)Y/(1−e) / Σ (1−Z)/(1−e).
pub fn iptw_ate(y: &[u8], z: &[u8], e: &[f64]) -> Result<f64, EstimatorError> {
    check_lengths(y, z, e.len())?;
    let w = iptw_weights(z, e, None)?;
    weighted_risk_difference(y, z, &w)
}

/// Σ ZY/e / Σ Z/e, the weighted estimate of E[Y(1)].
pub fn treated_weighted_mean(y: &[u8], z: &[u8], e: &[f64]) -> Result<f64, EstimatorError> {
    check_lengths(y, z, e.len())?;
    let w = iptw_weights(z, e, None)?;
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..y.len() {
        if z[i] == 1 {
            num += w[i] * f64::from(y[i]);
            den += w[i];
        }
    }
    if den == 0.0 {
        return Err(EstimatorError::EmptyArm("treated"));
    }
    Ok(num / den)
}
