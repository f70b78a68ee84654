//! Shipped scenarios. All coefficients are synthetic: they are chosen so
//! that each qualitative claim (bias or no bias) is visible at n = 100,000.

use super::{
    Link, Mechanism, NodeKind, PatternCoefficient, ScenarioSpec, SimError, TruthMode,
};
use crate::assumptions::catalog::{catalog, CatalogEntry};
use crate::bundled;

fn pc(node: &str, parent: &str, value: f64) -> PatternCoefficient {
    PatternCoefficient {
        node: node.into(),
        parent: parent.into(),
        indicator: None,
        value,
    }
}

fn bin(name: &str, intercept: f64, coefs: &[(&str, f64)]) -> Mechanism {
    Mechanism::binary(name, intercept, coefs)
}

fn categorical(name: &str, levels: &[&str], cuts: &[f64], coefs: &[(&str, f64)]) -> Mechanism {
    Mechanism {
        name: name.into(),
        kind: NodeKind::Categorical {
            levels: levels.iter().map(|s| s.to_string()).collect(),
            cuts: cuts.to_vec(),
        },
        intercept: 0.0,
        coefficients: coefs.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
    }
}

const SKELETON_ROLES: &str = "roles {\n  treatment Z\n  outcome Y\n  confounder X partial\n  missing R of X\n";

fn spec(
    name: &str,
    description: &str,
    graph: String,
    nodes: Vec<Mechanism>,
    pattern_coefficients: Vec<PatternCoefficient>,
) -> ScenarioSpec {
    ScenarioSpec {
        name: name.into(),
        description: description.into(),
        graph,
        nodes,
        pattern_coefficients,
        truth: TruthMode::MonteCarlo,
    }
}

fn null() -> ScenarioSpec {
    let mut s = spec(
        "null",
        "No confounding: X only affects its own missingness.",
        format!("dag {{ X -> R Z -> Y }}\n{SKELETON_ROLES}}}\n"),
        vec![
            bin("X", 0.0, &[]),
            bin("R", 1.0, &[("X", 0.5)]),
            bin("Z", -0.2, &[]),
            bin("Y", -1.0, &[("Z", 0.7)]),
        ],
        vec![],
    );
    s.truth = TruthMode::Analytic;
    s
}

fn fig1() -> ScenarioSpec {
    spec(
        "fig1",
        "Unmeasured causes of missingness shared with treatment and outcome; every arrow active in both patterns. mSITA, CIT and CIO all fail.",
        bundled::FIG1.to_string(),
        vec![
            bin("X", 0.0, &[]),
            bin("R", 0.0, &[("U_Z", 2.0), ("U_Y", 2.0)]),
            bin("Z", -0.3, &[("X", 1.2), ("U_Z", 1.5)]).bounded(),
            bin("Y", -1.5, &[("X", 1.0), ("Z", 0.6), ("U_Y", 1.5)]),
        ],
        vec![],
    )
}

fn fig2() -> ScenarioSpec {
    spec(
        "fig2",
        "X affects treatment only when recorded; missingness shares a cause with treatment only. mSITA and CIT hold, CIO fails.",
        format!(
            "dag {{\n  Z <- X -> Y\n  Z -> Y\n  R <- U_Z -> Z\n  U_Y -> Y\n}}\n{SKELETON_ROLES}  latent U_Z U_Y\n}}\n"
        ),
        vec![
            bin("X", 0.0, &[]),
            bin("R", 0.5, &[("U_Z", 1.0)]),
            bin("Z", -0.3, &[("X", 1.2), ("U_Z", 0.8)]).bounded(),
            bin("Y", -1.5, &[("X", 1.0), ("Z", 0.6), ("U_Y", 0.5)]),
        ],
        vec![pc("Z", "X", 0.0)],
    )
}

fn dust_mite() -> ScenarioSpec {
    spec(
        "dust_mite",
        "X is a confounder only when measured: it affects the outcome only in the recorded subgroup. mSITA and CIO hold, CIT fails.",
        format!(
            "dag {{\n  Z <- X -> Y\n  Z -> Y\n  R <- U_Z -> Z\n}}\n{SKELETON_ROLES}  latent U_Z\n}}\n"
        ),
        vec![
            bin("X", 0.0, &[]),
            bin("R", 0.5, &[("U_Z", 1.0)]),
            bin("Z", -0.3, &[("X", 1.2), ("U_Z", 0.8)]).bounded(),
            bin("Y", -1.5, &[("X", 1.0), ("Z", 0.6)]),
        ],
        vec![pc("Y", "X", 0.0)],
    )
}

fn violation_i() -> ScenarioSpec {
    spec(
        "violation_I",
        "The outcome affects missingness of the confounder.",
        bundled::FIG6.to_string(),
        vec![
            bin("X", 0.0, &[]),
            bin("Z", -0.3, &[("X", 1.2)]),
            bin("Y", -1.0, &[("X", 1.0), ("Z", 0.6)]),
            bin("R", 0.0, &[("Y", 2.0)]),
        ],
        vec![],
    )
}

fn violation_ii() -> ScenarioSpec {
    spec(
        "violation_II",
        "Unmeasured causes of missingness shared with treatment (U_Z) and outcome (U_Y); X affects treatment only when recorded.",
        bundled::FIG1.to_string(),
        vec![
            bin("X", 0.0, &[]),
            bin("R", 0.0, &[("U_Z", 2.0), ("U_Y", 2.0)]),
            bin("Z", -0.3, &[("X", 1.2), ("U_Z", 1.5)]).bounded(),
            bin("Y", -1.5, &[("X", 1.0), ("Z", 0.6), ("U_Y", 1.5)]),
        ],
        vec![pc("Z", "X", 0.0)],
    )
}

fn violation_iii() -> ScenarioSpec {
    spec(
        "violation_III",
        "Confounder and treatment both affect the confounder's missingness, and the confounder still affects the outcome when missing.",
        format!("dag {{\n  Z <- X -> Y\n  Z -> Y\n  X -> R\n  Z -> R\n}}\n{SKELETON_ROLES}}}\n"),
        vec![
            bin("X", 0.0, &[]),
            bin("Z", -0.3, &[("X", 1.2)]),
            bin("Y", -1.5, &[("X", 1.0), ("Z", 0.6)]),
            bin("R", -0.5, &[("X", 1.5), ("Z", 1.5)]),
        ],
        vec![],
    )
}

fn motivating() -> ScenarioSpec {
    const AGE: [&str; 5] = ["<50", "50-59", "60-69", "70-79", "80+"];
    const ETH: [&str; 3] = ["white", "south_asian", "black_other"];
    spec(
        "motivating",
        "Prescribing and acute kidney injury with ethnicity and baseline CKD partially recorded; each affects prescribing only when recorded.",
        bundled::MOTIVATING.to_string(),
        vec![
            categorical("Age", &AGE, &[-1.5, -0.5, 0.5, 1.5], &[]),
            bin("Sex", 0.0, &[]),
            categorical("Eth", &ETH, &[1.5, 2.5], &[]),
            bin("Hyp", -1.0, &[("Age", 0.4), ("Sex", 0.2), ("U", 0.5)]),
            bin("Diab", -2.0, &[("Age", 0.3), ("Sex", 0.2), ("U", 0.5)]),
            bin("Ihd", -2.5, &[("Age", 0.4), ("Sex", 0.5), ("U", 0.5)]),
            bin("Arr", -2.5, &[("Age", 0.3), ("Sex", 0.2), ("Eth", 0.2), ("Ihd", 0.5), ("U", 0.5)]),
            bin("Car", -3.0, &[("Age", 0.3), ("Sex", 0.2), ("Arr", 0.6), ("Hyp", 0.5), ("Ihd", 0.6)]),
            bin(
                "Ckd",
                -2.5,
                &[("Age", 0.4), ("Sex", 0.2), ("Diab", 0.7), ("Ihd", 0.5), ("Car", 0.5), ("U", 0.5)],
            ),
            bin("Slf", 0.0, &[]),
            bin("Hosp", -1.0, &[("U", 0.5)]),
            bin("Reth", 1.0, &[("Eth", 0.2), ("Slf", 0.5), ("Hosp", -0.5)]),
            bin("Rckd", 0.5, &[("Hyp", 0.5), ("Ckd", 0.8), ("Diab", 0.6), ("Age", 0.2)]),
            bin(
                "Ace",
                -1.5,
                &[
                    ("Hyp", 1.0),
                    ("Sex", 0.2),
                    ("Diab", 0.6),
                    ("Eth", 0.3),
                    ("Ckd", 0.5),
                    ("Car", 0.5),
                    ("Ihd", 0.3),
                ],
            )
            .bounded(),
            bin(
                "Aki",
                -3.5,
                &[
                    ("Age", 0.3),
                    ("Eth", 0.2),
                    ("Sex", 0.2),
                    ("Diab", 0.4),
                    ("Ckd", 0.8),
                    ("U", 0.5),
                    ("Car", 0.5),
                    ("Ace", 0.3),
                ],
            ),
        ],
        vec![pc("Ace", "Ckd", 0.0), pc("Ace", "Eth", 0.0)],
    )
}

/// Parameterized scenario for one catalog row: every arrow gets coefficient
/// 1 except the treatment effect (0.6) and C's arrows (0.8). Arrows the
/// row removes when X is missing get coefficient 0 in that pattern, when
/// the generation order allows it.
fn from_catalog(entry: &CatalogEntry) -> ScenarioSpec {
    let g = entry.graph();
    let mut nodes = Vec::new();
    for n in g.topological_order() {
        if g.role(&n).is_some_and(|r| r.is_latent()) {
            continue;
        }
        let parents = g.parents(&n).expect("node exists");
        let coefs: Vec<(&str, f64)> = parents
            .iter()
            .map(|p| {
                let c = match (*p, n.as_str()) {
                    ("Z", "Y") => 0.6,
                    ("C", _) => 0.8,
                    _ => 1.0,
                };
                (*p, c)
            })
            .collect();
        let intercept = match n.as_str() {
            "R" => 0.5,
            "Z" => -0.3,
            "Y" => -1.5,
            _ => 0.0,
        };
        let mut m = bin(&n, intercept, &coefs);
        if n == "Z" {
            m.kind = NodeKind::Binary {
                link: Link::BoundedLogistic,
            };
        }
        nodes.push(m);
    }
    let mut pcs = Vec::new();
    for (a, b) in &entry.removed {
        let r_after = g.descendants(b).expect("node exists").contains("R");
        if !r_after {
            pcs.push(pc(b, a, 0.0));
        }
    }
    spec(
        &format!("catalog_{}", entry.id),
        &entry.description,
        entry.source(),
        nodes,
        pcs,
    )
}

/// Every shipped scenario, named scenarios first, then one per catalog row.
pub fn scenario_library() -> Vec<ScenarioSpec> {
    let mut out = vec![
        null(),
        fig1(),
        fig2(),
        dust_mite(),
        violation_i(),
        violation_ii(),
        violation_iii(),
        motivating(),
    ];
    out.extend(catalog().iter().map(from_catalog));
    out
}

pub fn scenario_names() -> Vec<String> {
    scenario_library().into_iter().map(|s| s.name).collect()
}

pub fn scenario(name: &str) -> Result<ScenarioSpec, SimError> {
    scenario_library()
        .into_iter()
        .find(|s| s.name == name)
        .ok_or_else(|| SimError::UnknownScenario {
            name: name.into(),
            available: scenario_names(),
        })
}
