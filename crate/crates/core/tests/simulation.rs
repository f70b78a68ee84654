use mpa_core::assumptions::{run_framework, AssumptionSpec};
use mpa_core::estimators::*;
use mpa_core::simulator::{scenario, scenario_library, SimOutput};

fn specs(data: &Dataset) -> Vec<CovariateSpec> {
    data.covariates.iter().map(|c| c.spec.clone()).collect()
}

fn mpa(out: &SimOutput) -> AteResult {
    let d = &out.dataset;
    estimate_ate(d, &ModelSpec::new(&d.treatment, &d.outcome, specs(d))).unwrap()
}

/// Hájek estimate with the true scores minus the sample ATE, and the
/// influence-function standard error of that difference.
fn oracle_gap(out: &SimOutput) -> (f64, f64) {
    let (y, z, e) = (&out.dataset.y, &out.dataset.z, &out.true_propensity);
    let n = y.len() as f64;
    let a1 = z.iter().zip(e).map(|(&zi, ei)| f64::from(zi) / ei).sum::<f64>() / n;
    let a0 = z.iter().zip(e).map(|(&zi, ei)| f64::from(1 - zi) / (1.0 - ei)).sum::<f64>() / n;
    let m1 = treated_weighted_mean(y, z, e).unwrap();
    let est = iptw_ate(y, z, e).unwrap();
    let m0 = m1 - est;
    let psi: Vec<f64> = (0..y.len())
        .map(|i| {
            let (yi, zi) = (f64::from(y[i]), f64::from(z[i]));
            zi * (yi - m1) / e[i] / a1 - (1.0 - zi) * (yi - m0) / (1.0 - e[i]) / a0
                - (f64::from(out.y1[i]) - f64::from(out.y0[i]) - out.true_ate)
        })
        .collect();
    let mean = psi.iter().sum::<f64>() / n;
    let var = psi.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (est - out.true_ate, (var / n).sqrt())
}

#[test]
fn true_scores_recover_the_effect_in_every_scenario() {
    for spec in scenario_library() {
        let out = spec.compile().unwrap().generate_sample(100_000, 17).unwrap();
        let (gap, se) = oracle_gap(&out);
        // 38 scenarios, so allow a little beyond the usual 3 SE
        assert!(gap.abs() < 4.0 * se, "{}: gap {gap} se {se}", spec.name);
    }
}

#[test]
fn mpa_consistent_in_fig2() {
    let out = scenario("fig2").unwrap().compile().unwrap().generate(100_000, 3).unwrap();
    let r = mpa(&out);
    assert!((r.estimate - out.population_ate).abs() < 0.01, "{} vs {}", r.estimate, out.population_ate);
    let crude = weighted_risk_difference(&out.dataset.y, &out.dataset.z, &vec![1.0; out.dataset.n_rows()]).unwrap();
    assert!((crude - out.population_ate).abs() > 0.02);
}

#[test]
fn mpa_biased_in_fig1() {
    let model = scenario("fig1").unwrap().compile().unwrap();
    let bias: Vec<f64> = (0..3)
        .map(|seed| {
            let out = model.generate(100_000, seed).unwrap();
            mpa(&out).estimate - out.population_ate
        })
        .collect();
    let mean = bias.iter().sum::<f64>() / 3.0;
    let sd = (bias.iter().map(|b| (b - mean).powi(2)).sum::<f64>() / 2.0).sqrt();
    assert!(mean.abs() > 3.0 * sd / 3f64.sqrt(), "{bias:?}");
    assert!(mean.abs() > 0.02, "{bias:?}");
}

#[test]
fn weighted_treated_mean_matches_potential_outcome_mean() {
    // the normalized weighted mean among the treated targets E[Y(1)]
    let out = scenario("fig2").unwrap().compile().unwrap().generate_sample(200_000, 8).unwrap();
    let d = &out.dataset;
    let fit = mpa_propensity(d, &ModelSpec::new("Z", "Y", specs(d))).unwrap();
    let m1 = treated_weighted_mean(&d.y, &d.z, &fit.scores).unwrap();
    let truth = out.y1.iter().map(|&v| f64::from(v)).sum::<f64>() / d.n_rows() as f64;
    assert!((m1 - truth).abs() < 0.01, "{m1} vs {truth}");
}

#[test]
fn fig2_balanced_after_weighting() {
    let out = scenario("fig2").unwrap().compile().unwrap().generate_sample(100_000, 12).unwrap();
    let r = mpa(&out);
    assert!(r.balance_before.max_std_diff() > 10.0);
    assert!(r.balance_after.unwrap().max_std_diff() < 10.0);
}

#[test]
fn checker_verdicts_match_named_scenarios() {
    let expected = [
        ("null", true),
        ("fig1", false),
        ("fig2", true),
        ("dust_mite", true),
        ("violation_I", false),
        ("violation_II", false),
        ("violation_III", false),
        ("motivating", true),
    ];
    for (name, admissible) in expected {
        let s = scenario(name).unwrap();
        let spec = AssumptionSpec::new(s.raw_graph().unwrap()).with_mods(s.pattern_mods().unwrap());
        let report = run_framework(&spec).unwrap();
        assert_eq!(report.admissible, admissible, "{name}: {}", report.narrative);
    }
    let s = scenario("violation_I").unwrap();
    let report = run_framework(&AssumptionSpec::new(s.raw_graph().unwrap())).unwrap();
    assert!(report.scenario_flags.iter().any(|f| f.scenario == "I" && f.decisive));
}
