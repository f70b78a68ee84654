//! Structural simulation from annotated diagrams with potential outcomes
//! recorded alongside the observed data.
//!
//! Every non-latent node needs a mechanism: a linear predictor over its
//! parents passed through a logistic link (binary), an ordered-logistic
//! threshold (categorical) or identity plus Gaussian noise (continuous).
//! Latent nodes without a mechanism are standard normal.
//!
//! A *pattern coefficient* replaces the coefficient of one parent while a
//! missingness indicator is 0, which is how "this arrow is absent when the
//! confounder is unrecorded" is realized. The indicator must then be
//! generated before the node, so it may not descend from it.

mod library;

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimators::{Covariate, CovariateKind, CovariateSpec, Dataset, EstimatorError};
use crate::graph::{parse_graph, CausalGraph, GraphError, NodeRole, ParseError, Provenance};
use crate::transforms::{merge_intervention, Pattern, PatternModification, TransformError};

pub use library::{scenario, scenario_library, scenario_names};

/// Treatment probabilities outside this band trigger a warning.
pub const POSITIVITY_BAND: (f64, f64) = (0.02, 0.98);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error(transparent)]
    Data(#[from] EstimatorError),
    #[error("scenario file: {0}")]
    Toml(String),
    #[error("scenario needs a {0}")]
    MissingRole(&'static str),
    #[error("node `{0}` has no mechanism")]
    MissingMechanism(String),
    #[error("mechanism for unknown node `{0}`")]
    UnknownNode(String),
    #[error("mechanism for `{node}` references `{parent}`, which is not a parent")]
    NotAParent { node: String, parent: String },
    #[error("edge {parent} -> {node} has no coefficient")]
    MissingCoefficient { node: String, parent: String },
    #[error("`{0}`: {1}")]
    BadMechanism(String, String),
    #[error("pattern coefficient on {parent} -> {node} needs `{indicator}` before `{node}`, but it is generated later")]
    InvalidOrder {
        node: String,
        parent: String,
        indicator: String,
    },
    #[error("analytic truth is only available when the outcome's other parents are independent discrete roots: {0}")]
    NoClosedForm(String),
    #[error("unknown scenario `{name}`; available: {}", .available.join(", "))]
    UnknownScenario { name: String, available: Vec<String> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Link {
    #[default]
    Logistic,
    /// 0.02 + 0.96·expit(η): keeps probabilities inside the positivity band.
    BoundedLogistic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum NodeKind {
    Binary {
        #[serde(default)]
        link: Link,
    },
    /// Ordered logistic: level = number of cut points below η + logistic
    /// noise. Children see the level index.
    Categorical { levels: Vec<String>, cuts: Vec<f64> },
    Continuous {
        #[serde(default = "one")]
        noise_sd: f64,
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mechanism {
    pub name: String,
    #[serde(flatten)]
    pub kind: NodeKind,
    #[serde(default)]
    pub intercept: f64,
    /// Coefficient per parent; every parent needs one.
    #[serde(default)]
    pub coefficients: BTreeMap<String, f64>,
}

impl Mechanism {
    pub fn binary(name: &str, intercept: f64, coefficients: &[(&str, f64)]) -> Self {
        Mechanism {
            name: name.into(),
            kind: NodeKind::Binary {
                link: Link::Logistic,
            },
            intercept,
            coefficients: coefficients.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        }
    }

    pub fn bounded(mut self) -> Self {
        self.kind = NodeKind::Binary {
            link: Link::BoundedLogistic,
        };
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternCoefficient {
    pub node: String,
    pub parent: String,
    /// Defaults to the parent's own missingness indicator.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub indicator: Option<String>,
    /// Coefficient used while the indicator is 0.
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruthMode {
    #[default]
    MonteCarlo,
    Analytic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub name: String,
    #[serde(default)]
    pub description: String,
    /// Diagram with roles, raw or as an intervention template.
    pub graph: String,
    #[serde(rename = "node")]
    pub nodes: Vec<Mechanism>,
    #[serde(default, rename = "pattern_coefficient")]
    pub pattern_coefficients: Vec<PatternCoefficient>,
    #[serde(default)]
    pub truth: TruthMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Oracle {
    pub scenario: String,
    pub seed: u64,
    pub n: usize,
    pub true_ate: f64,
    pub population_ate: f64,
    pub population_mode: TruthMode,
    pub y0: Vec<u8>,
    pub y1: Vec<u8>,
    pub true_propensity: Vec<f64>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutput {
    /// Observed view: partial confounders masked where their indicator is 0.
    pub dataset: Dataset,
    pub y0: Vec<u8>,
    pub y1: Vec<u8>,
    /// Mean of Y(1) − Y(0) over the generated rows.
    pub true_ate: f64,
    /// Population value: closed form, or an auxiliary draw of 10·n rows.
    pub population_ate: f64,
    pub population_mode: TruthMode,
    /// P(Z = 1 | parents of Z) for each row.
    pub true_propensity: Vec<f64>,
    /// Missingness indicators (1 = observed), by name.
    pub indicators: BTreeMap<String, Vec<u8>>,
    pub warnings: Vec<String>,
    pub scenario: String,
    pub seed: u64,
}

impl SimOutput {
    pub fn oracle(&self) -> Oracle {
        Oracle {
            scenario: self.scenario.clone(),
            seed: self.seed,
            n: self.dataset.n_rows(),
            true_ate: self.true_ate,
            population_ate: self.population_ate,
            population_mode: self.population_mode,
            y0: self.y0.clone(),
            y1: self.y1.clone(),
            true_propensity: self.true_propensity.clone(),
            warnings: self.warnings.clone(),
        }
    }
}

#[derive(Debug, Clone)]
enum Kind {
    Normal,
    Binary(Link),
    Categorical(Vec<f64>),
    Continuous(f64),
}

#[derive(Debug, Clone)]
struct CNode {
    kind: Kind,
    intercept: f64,
    /// (parent index, coefficient, optional (indicator index, value when 0))
    terms: Vec<(usize, f64, Option<(usize, f64)>)>,
}

/// A validated scenario ready for generation.
#[derive(Debug, Clone)]
pub struct Model {
    pub name: String,
    pub graph: CausalGraph,
    names: Vec<String>,
    nodes: Vec<CNode>,
    order: Vec<usize>,
    z: usize,
    y: usize,
    /// Nodes downstream of the treatment, recomputed per world.
    downstream: Vec<bool>,
    /// (node index, covariate spec, indicator index)
    covariates: Vec<(usize, CovariateSpec, Option<usize>)>,
    indicators: Vec<usize>,
    levels: Vec<Option<Vec<String>>>,
    truth: TruthMode,
}

impl ScenarioSpec {
    pub fn from_toml(src: &str) -> Result<Self, SimError> {
        let s: ScenarioSpec = toml::from_str(src).map_err(|e| SimError::Toml(e.to_string()))?;
        s.compile()?;
        Ok(s)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    /// The diagram without the intervention split.
    pub fn raw_graph(&self) -> Result<CausalGraph, SimError> {
        let g = parse_graph(&self.graph)?;
        Ok(match g.provenance() {
            Provenance::Swit => merge_intervention(&g)?,
            _ => g,
        })
    }

    /// Edges switched off (coefficient 0) in each missingness pattern, in
    /// the form the assumption checker takes. Patterns with nothing removed
    /// are omitted.
    pub fn pattern_mods(&self) -> Result<Vec<PatternModification>, SimError> {
        let g = self.raw_graph()?;
        let partial = g.partial_confounders();
        let mut out = Vec::new();
        for pattern in Pattern::enumerate(partial.len()) {
            let missing: BTreeSet<&str> = partial
                .iter()
                .zip(&pattern.0)
                .filter(|(_, obs)| !**obs)
                .filter_map(|(x, _)| g.indicator_of(x))
                .collect();
            let mut removed: Vec<(String, String)> = self
                .pattern_coefficients
                .iter()
                .filter(|pc| pc.value == 0.0)
                .filter(|pc| {
                    let ind = pc.indicator.clone().or_else(|| g.indicator_of(&pc.parent).map(str::to_string));
                    ind.is_some_and(|i| missing.contains(i.as_str()))
                })
                .map(|pc| (pc.parent.clone(), pc.node.clone()))
                .collect();
            removed.sort();
            removed.dedup();
            if !removed.is_empty() {
                out.push(PatternModification {
                    pattern,
                    removed_edges: removed,
                });
            }
        }
        Ok(out)
    }

    pub fn compile(&self) -> Result<Model, SimError> {
        let g = self.raw_graph()?;
        let z_name = g.treatment().ok_or(SimError::MissingRole("treatment"))?.to_string();
        let y_name = g.outcome().ok_or(SimError::MissingRole("outcome"))?.to_string();
        let names: Vec<String> = g.nodes().iter().map(|n| n.name.clone()).collect();
        let index = |n: &str| names.iter().position(|m| m == n);

        let mut mech: BTreeMap<&str, &Mechanism> = BTreeMap::new();
        for m in &self.nodes {
            if index(&m.name).is_none() {
                return Err(SimError::UnknownNode(m.name.clone()));
            }
            if mech.insert(&m.name, m).is_some() {
                return Err(SimError::BadMechanism(m.name.clone(), "defined twice".into()));
            }
        }

        let mut nodes = Vec::with_capacity(names.len());
        let mut levels = Vec::with_capacity(names.len());
        for name in &names {
            let role = g.role(name).expect("node exists");
            let parents = g.parents(name)?;
            let Some(m) = mech.get(name.as_str()) else {
                if !role.is_latent() {
                    return Err(SimError::MissingMechanism(name.clone()));
                }
                if !parents.is_empty() {
                    return Err(SimError::BadMechanism(
                        name.clone(),
                        "a latent node with parents needs a mechanism".into(),
                    ));
                }
                nodes.push(CNode {
                    kind: Kind::Normal,
                    intercept: 0.0,
                    terms: vec![],
                });
                levels.push(None);
                continue;
            };
            for p in m.coefficients.keys() {
                if !parents.contains(&p.as_str()) {
                    return Err(SimError::NotAParent {
                        node: name.clone(),
                        parent: p.clone(),
                    });
                }
            }
            let mut terms = Vec::new();
            for p in &parents {
                let c = *m.coefficients.get(*p).ok_or_else(|| SimError::MissingCoefficient {
                    node: name.clone(),
                    parent: p.to_string(),
                })?;
                terms.push((index(p).expect("parent exists"), c, None));
            }
            let finite = m.intercept.is_finite() && m.coefficients.values().all(|c| c.is_finite());
            if !finite {
                return Err(SimError::BadMechanism(name.clone(), "coefficients must be finite".into()));
            }
            let (kind, lv) = match &m.kind {
                NodeKind::Binary { link } => (Kind::Binary(*link), None),
                NodeKind::Continuous { noise_sd } => {
                    if !(*noise_sd >= 0.0 && noise_sd.is_finite()) {
                        return Err(SimError::BadMechanism(name.clone(), "noise_sd must be ≥ 0".into()));
                    }
                    (Kind::Continuous(*noise_sd), None)
                }
                NodeKind::Categorical { levels, cuts } => {
                    if levels.len() < 2 || cuts.len() + 1 != levels.len() {
                        return Err(SimError::BadMechanism(
                            name.clone(),
                            "a categorical node needs one cut fewer than its levels (at least two)".into(),
                        ));
                    }
                    if cuts.windows(2).any(|w| w[0] >= w[1]) || cuts.iter().any(|c| !c.is_finite()) {
                        return Err(SimError::BadMechanism(name.clone(), "cuts must increase".into()));
                    }
                    (Kind::Categorical(cuts.clone()), Some(levels.clone()))
                }
            };
            let must_be_binary = matches!(
                role,
                NodeRole::Treatment | NodeRole::Outcome | NodeRole::MissingnessIndicator { .. }
            );
            if must_be_binary && !matches!(kind, Kind::Binary(_)) {
                return Err(SimError::BadMechanism(
                    name.clone(),
                    "treatment, outcome and indicators must be binary".into(),
                ));
            }
            nodes.push(CNode {
                kind,
                intercept: m.intercept,
                terms,
            });
            levels.push(lv);
        }

        // pattern coefficients add ordering constraints indicator -> node
        let mut extra: Vec<(usize, usize)> = Vec::new();
        for pc in &self.pattern_coefficients {
            let ni = index(&pc.node).ok_or_else(|| SimError::UnknownNode(pc.node.clone()))?;
            let pi = index(&pc.parent).ok_or_else(|| SimError::UnknownNode(pc.parent.clone()))?;
            let ind_name = match &pc.indicator {
                Some(i) => i.clone(),
                None => g
                    .indicator_of(&pc.parent)
                    .ok_or_else(|| {
                        SimError::BadMechanism(
                            pc.node.clone(),
                            format!("`{}` has no missingness indicator", pc.parent),
                        )
                    })?
                    .to_string(),
            };
            let ii = index(&ind_name).ok_or_else(|| SimError::UnknownNode(ind_name.clone()))?;
            if !matches!(g.role(&ind_name), Some(NodeRole::MissingnessIndicator { .. })) {
                return Err(SimError::BadMechanism(
                    pc.node.clone(),
                    format!("`{ind_name}` is not a missingness indicator"),
                ));
            }
            if !pc.value.is_finite() {
                return Err(SimError::BadMechanism(pc.node.clone(), "coefficients must be finite".into()));
            }
            let term = nodes[ni]
                .terms
                .iter_mut()
                .find(|t| t.0 == pi)
                .ok_or_else(|| SimError::NotAParent {
                    node: pc.node.clone(),
                    parent: pc.parent.clone(),
                })?;
            term.2 = Some((ii, pc.value));
            if g.descendants(&pc.node)?.contains(&ind_name) || ii == ni {
                return Err(SimError::InvalidOrder {
                    node: pc.node.clone(),
                    parent: pc.parent.clone(),
                    indicator: ind_name,
                });
            }
            extra.push((ii, ni));
        }
        let order = ordered(&nodes, &extra).ok_or_else(|| {
            SimError::BadMechanism(
                self.name.clone(),
                "pattern coefficients create a cycle in the generation order".into(),
            )
        })?;

        let z = index(&z_name).expect("treatment exists");
        let y = index(&y_name).expect("outcome exists");
        let desc = g.descendants(&z_name)?;
        let mut downstream: Vec<bool> = names.iter().map(|n| desc.contains(n)).collect();
        // a node whose pattern coefficient reads a downstream indicator is
        // itself downstream
        for &i in &order {
            if nodes[i].terms.iter().any(|t| t.2.is_some_and(|(ind, _)| downstream[ind])) {
                downstream[i] = true;
            }
        }
        downstream[z] = false;

        let mut covariates = Vec::new();
        let conf: BTreeSet<&str> = g
            .partial_confounders()
            .into_iter()
            .chain(g.full_confounders())
            .collect();
        // declaration order of mechanisms, then any remaining confounders
        let declared: Vec<&str> = self
            .nodes
            .iter()
            .map(|m| m.name.as_str())
            .filter(|n| conf.contains(n))
            .collect();
        for name in declared {
            let i = index(name).expect("exists");
            if downstream[i] {
                return Err(SimError::BadMechanism(
                    name.to_string(),
                    "confounders may not depend on the treatment".into(),
                ));
            }
            let partial = g.role(name).is_some_and(|r| r.is_partial_confounder());
            let kind = match (&nodes[i].kind, &levels[i]) {
                (Kind::Binary(_), _) => CovariateKind::Binary,
                (Kind::Categorical(_), Some(l)) => CovariateKind::Categorical { levels: l.clone() },
                _ => CovariateKind::Continuous,
            };
            let ind = if partial {
                g.indicator_of(name).and_then(&index)
            } else {
                None
            };
            covariates.push((
                i,
                CovariateSpec {
                    name: name.to_string(),
                    kind,
                    partial,
                },
                ind,
            ));
        }
        let indicators = g.indicators().iter().filter_map(|r| index(r)).collect();

        let model = Model {
            name: self.name.clone(),
            graph: g,
            names,
            nodes,
            order,
            z,
            y,
            downstream,
            covariates,
            indicators,
            levels,
            truth: self.truth,
        };
        if self.truth == TruthMode::Analytic {
            model.analytic_ate()?;
        }
        Ok(model)
    }
}

/// Topological order over graph edges plus the extra constraints, smallest
/// index first among ready nodes.
fn ordered(nodes: &[CNode], extra: &[(usize, usize)]) -> Option<Vec<usize>> {
    let n = nodes.len();
    let mut preds: Vec<BTreeSet<usize>> = nodes
        .iter()
        .map(|c| c.terms.iter().map(|t| t.0).collect())
        .collect();
    for &(a, b) in extra {
        preds[b].insert(a);
    }
    let mut done = vec![false; n];
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let next = (0..n).find(|&i| !done[i] && preds[i].iter().all(|&p| done[p]))?;
        done[next] = true;
        out.push(next);
    }
    Some(out)
}

fn expit(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

/// Per-row noise, drawn once and shared by all worlds.
struct Noise {
    values: Vec<Vec<f64>>,
}

/// Node values in one world, column per node.
type World = Vec<Vec<f64>>;

impl Model {
    pub fn node_names(&self) -> &[String] {
        &self.names
    }

    fn draw_noise(&self, rng: &mut ChaCha8Rng, n: usize) -> Noise {
        let mut values = vec![Vec::new(); self.names.len()];
        for &i in &self.order {
            values[i] = match self.nodes[i].kind {
                Kind::Normal | Kind::Continuous(_) => {
                    (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
                }
                Kind::Binary(_) | Kind::Categorical(_) => (0..n).map(|_| rng.random::<f64>()).collect(),
            };
        }
        Noise { values }
    }

    fn eta(&self, i: usize, w: &World, r: usize) -> f64 {
        let node = &self.nodes[i];
        node.terms.iter().fold(node.intercept, |acc, &(p, c, pat)| {
            let coef = match pat {
                Some((ind, v)) if w[ind][r] == 0.0 => v,
                _ => c,
            };
            acc + coef * w[p][r]
        })
    }

    /// Probability that binary node `i` is 1 at row `r`.
    fn prob(&self, i: usize, w: &World, r: usize) -> f64 {
        let eta = self.eta(i, w, r);
        match self.nodes[i].kind {
            Kind::Binary(Link::BoundedLogistic) => 0.02 + 0.96 * expit(eta),
            _ => expit(eta),
        }
    }

    fn value(&self, i: usize, w: &World, r: usize, u: f64) -> f64 {
        match &self.nodes[i].kind {
            Kind::Normal => u,
            Kind::Continuous(sd) => self.eta(i, w, r) + sd * u,
            Kind::Binary(_) => f64::from(u8::from(u < self.prob(i, w, r))),
            Kind::Categorical(cuts) => {
                let latent = self.eta(i, w, r) + (u / (1.0 - u)).ln();
                cuts.iter().filter(|c| **c < latent).count() as f64
            }
        }
    }

    /// Factual world, or the world with the treatment set to `fixed`
    /// (sharing every non-downstream column with `base`).
    fn world(&self, noise: &Noise, n: usize, fixed: Option<(u8, &World)>) -> World {
        let mut w: World = vec![Vec::new(); self.names.len()];
        for &i in &self.order {
            w[i] = match fixed {
                Some((z, _)) if i == self.z => vec![f64::from(z); n],
                Some((_, base)) if !self.downstream[i] => base[i].clone(),
                _ => {
                    // columns of earlier nodes are complete
                    (0..n)
                        .map(|r| self.value(i, &w, r, noise.values[i][r]))
                        .collect()
                }
            };
        }
        w
    }

    /// Exact ATE by enumerating the outcome's discrete root parents.
    fn analytic_ate(&self) -> Result<f64, SimError> {
        let y = &self.nodes[self.y];
        let mut dists: Vec<(usize, Vec<f64>)> = Vec::new();
        for &(p, _, pat) in &y.terms {
            if p == self.z {
                continue;
            }
            if pat.is_some() {
                return Err(SimError::NoClosedForm("the outcome has pattern coefficients".into()));
            }
            let node = &self.nodes[p];
            if !node.terms.is_empty() || self.downstream[p] {
                return Err(SimError::NoClosedForm(format!("`{}` is not a root", self.names[p])));
            }
            let probs = match &node.kind {
                Kind::Binary(link) => {
                    let q = match link {
                        Link::Logistic => expit(node.intercept),
                        Link::BoundedLogistic => 0.02 + 0.96 * expit(node.intercept),
                    };
                    vec![1.0 - q, q]
                }
                Kind::Categorical(cuts) => {
                    let cdf: Vec<f64> = cuts.iter().map(|c| expit(c - node.intercept)).collect();
                    (0..=cuts.len())
                        .map(|k| {
                            let hi = cdf.get(k).copied().unwrap_or(1.0);
                            let lo = if k == 0 { 0.0 } else { cdf[k - 1] };
                            hi - lo
                        })
                        .collect()
                }
                _ => {
                    return Err(SimError::NoClosedForm(format!(
                        "`{}` is continuous",
                        self.names[p]
                    )))
                }
            };
            dists.push((p, probs));
        }
        let mut w: World = vec![vec![0.0]; self.names.len()];
        let mut total = 0.0;
        let combos: usize = dists.iter().map(|d| d.1.len()).product();
        for mut k in 0..combos {
            let mut pr = 1.0;
            for (p, probs) in &dists {
                let level = k % probs.len();
                k /= probs.len();
                w[*p][0] = level as f64;
                pr *= probs[level];
            }
            w[self.z][0] = 1.0;
            let p1 = self.prob(self.y, &w, 0);
            w[self.z][0] = 0.0;
            let p0 = self.prob(self.y, &w, 0);
            total += pr * (p1 - p0);
        }
        Ok(total)
    }

    /// Population ATE from `n_aux` fresh rows, averaging the outcome
    /// probability contrast (lower variance than differencing draws).
    pub fn monte_carlo_ate(&self, n_aux: usize, seed: u64) -> f64 {
        const CHUNK: usize = 50_000;
        let mut total = 0.0;
        let mut done = 0;
        let mut chunk = 0u64;
        while done < n_aux {
            let m = CHUNK.min(n_aux - done);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(1 + chunk);
            let noise = self.draw_noise(&mut rng, m);
            let base = self.world(&noise, m, None);
            let w1 = self.world(&noise, m, Some((1, &base)));
            let w0 = self.world(&noise, m, Some((0, &base)));
            for r in 0..m {
                total += self.prob(self.y, &w1, r) - self.prob(self.y, &w0, r);
            }
            done += m;
            chunk += 1;
        }
        total / n_aux as f64
    }

    pub fn population_ate(&self, n_aux: usize, seed: u64) -> f64 {
        match self.truth {
            TruthMode::Analytic => self.analytic_ate().expect("checked at compile time"),
            TruthMode::MonteCarlo => self.monte_carlo_ate(n_aux, seed),
        }
    }

    /// Draws `n` rows. The population ATE comes from 10·n auxiliary rows
    /// in Monte Carlo mode; see [`Model::generate_sample`] to skip that.
    pub fn generate(&self, n: usize, seed: u64) -> Result<SimOutput, SimError> {
        let mut out = self.generate_sample(n, seed)?;
        out.population_ate = self.population_ate(10 * n, seed);
        Ok(out)
    }

    /// As [`Model::generate`] but without the auxiliary draw;
    /// `population_ate` is NaN in Monte Carlo mode.
    pub fn generate_sample(&self, n: usize, seed: u64) -> Result<SimOutput, SimError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = self.draw_noise(&mut rng, n);
        let base = self.world(&noise, n, None);
        let w1 = self.world(&noise, n, Some((1, &base)));
        let w0 = self.world(&noise, n, Some((0, &base)));
        let bit = |v: f64| u8::from(v == 1.0);
        let y1: Vec<u8> = w1[self.y].iter().map(|v| bit(*v)).collect();
        let y0: Vec<u8> = w0[self.y].iter().map(|v| bit(*v)).collect();
        let z: Vec<u8> = base[self.z].iter().map(|v| bit(*v)).collect();
        let y: Vec<u8> = base[self.y].iter().map(|v| bit(*v)).collect();
        let true_propensity: Vec<f64> = (0..n).map(|r| self.prob(self.z, &base, r)).collect();

        let covariates = self
            .covariates
            .iter()
            .map(|(i, spec, ind)| Covariate {
                spec: spec.clone(),
                values: (0..n)
                    .map(|r| match ind {
                        Some(ri) if base[*ri][r] == 0.0 => None,
                        _ => Some(base[*i][r]),
                    })
                    .collect(),
            })
            .collect();
        let dataset = Dataset::new(
            self.names[self.z].clone(),
            self.names[self.y].clone(),
            z,
            y,
            covariates,
        )?;
        let indicators = self
            .indicators
            .iter()
            .map(|&i| (self.names[i].clone(), base[i].iter().map(|v| bit(*v)).collect()))
            .collect();

        let mut warnings = Vec::new();
        let (lo, hi) = POSITIVITY_BAND;
        let outside = true_propensity.iter().filter(|p| **p < lo || **p > hi).count();
        if outside > 0 {
            warnings.push(format!(
                "{outside} rows have a true treatment probability outside [{lo}, {hi}]"
            ));
        }
        let true_ate = if n == 0 {
            0.0
        } else {
            y1.iter().zip(&y0).map(|(a, b)| f64::from(*a) - f64::from(*b)).sum::<f64>() / n as f64
        };
        let population_ate = match self.truth {
            TruthMode::Analytic => self.analytic_ate()?,
            TruthMode::MonteCarlo => f64::NAN,
        };
        Ok(SimOutput {
            dataset,
            y0,
            y1,
            true_ate,
            population_ate,
            population_mode: self.truth,
            true_propensity,
            indicators,
            warnings,
            scenario: self.name.clone(),
            seed,
        })
    }

    /// Declared levels of a categorical node.
    pub fn levels(&self, name: &str) -> Option<&[String]> {
        let i = self.names.iter().position(|n| n == name)?;
        self.levels[i].as_deref()
    }
}

/// Compiles `spec` and draws `n` rows with the given seed.
pub fn generate(spec: &ScenarioSpec, n: usize, seed: u64) -> Result<SimOutput, SimError> {
    spec.compile()?.generate(n, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assumptions::parse_mods;
    use crate::bundled;

    #[test]
    fn library_compiles_with_unique_names() {
        let lib = scenario_library();
        assert!(lib.len() >= 38);
        let names: BTreeSet<_> = lib.iter().map(|s| s.name.clone()).collect();
        assert_eq!(names.len(), lib.len());
        for s in &lib {
            s.compile().unwrap_or_else(|e| panic!("{}: {e}", s.name));
        }
    }

    #[test]
    fn consistency_and_determinism() {
        for s in scenario_library() {
            let m = s.compile().unwrap();
            let a = m.generate_sample(2000, 5).unwrap();
            let d = &a.dataset;
            for r in 0..d.n_rows() {
                let yz = if d.z[r] == 1 { a.y1[r] } else { a.y0[r] };
                assert_eq!(d.y[r], yz, "{} row {r}", s.name);
            }
            let b = m.generate_sample(2000, 5).unwrap();
            assert_eq!(a.dataset, b.dataset);
            assert_eq!(a.y1, b.y1);
            assert!(a.warnings.is_empty(), "{}: {:?}", s.name, a.warnings);
        }
    }

    #[test]
    fn masking_follows_indicator() {
        let out = scenario("fig2").unwrap().compile().unwrap().generate_sample(500, 1).unwrap();
        let r = &out.indicators["R"];
        let x = &out.dataset.covariates[0];
        assert!(r.iter().zip(&x.values).all(|(r, v)| (*r == 1) == v.is_some()));
        assert!(r.contains(&0) && r.contains(&1));
    }

    #[test]
    fn derived_mods_match_bundled_files() {
        let fig2 = scenario("fig2").unwrap();
        let g = fig2.raw_graph().unwrap();
        assert_eq!(fig2.pattern_mods().unwrap(), parse_mods(bundled::FIG1_MODS, &g).unwrap());
        let m = scenario("motivating").unwrap();
        let g = m.raw_graph().unwrap();
        let bundled_graph = parse_graph(bundled::MOTIVATING).unwrap();
        let sorted = |mut v: Vec<PatternModification>| {
            v.sort_by(|a, b| a.pattern.0.cmp(&b.pattern.0));
            v
        };
        assert_eq!(
            sorted(m.pattern_mods().unwrap()),
            sorted(parse_mods(bundled::MOTIVATING_MODS, &bundled_graph).unwrap())
        );
        assert_eq!(
            parse_graph(&m.graph).unwrap().structure(),
            bundled_graph.structure()
        );
        assert!(g.has_edge("Ace", "Aki"));
    }

    #[test]
    fn null_truth_is_closed_form() {
        let m = scenario("null").unwrap().compile().unwrap();
        let exact = expit(-0.3) - expit(-1.0);
        assert!((m.analytic_ate().unwrap() - exact).abs() < 1e-15);
        assert!((m.monte_carlo_ate(200_000, 3) - exact).abs() < 1e-12);
    }

    #[test]
    fn scenario_toml_round_trip() {
        for name in ["fig2", "motivating", "null"] {
            let s = scenario(name).unwrap();
            assert_eq!(ScenarioSpec::from_toml(&s.to_toml()).unwrap(), s);
        }
    }

    #[test]
    fn rejects_bad_wiring() {
        let mut s = scenario("violation_III").unwrap();
        s.pattern_coefficients.push(PatternCoefficient {
            node: "Z".into(),
            parent: "X".into(),
            indicator: None,
            value: 0.0,
        });
        assert!(matches!(s.compile(), Err(SimError::InvalidOrder { .. })));
        let mut s = scenario("fig2").unwrap();
        s.nodes[1].coefficients.insert("X".into(), 1.0);
        assert!(matches!(s.compile(), Err(SimError::NotAParent { .. })));
        let mut s = scenario("fig2").unwrap();
        s.nodes.retain(|m| m.name != "R");
        assert!(matches!(s.compile(), Err(SimError::MissingMechanism(_))));
    }

    #[test]
    fn positivity_warning_for_unbounded_treatment() {
        let mut s = scenario("fig2").unwrap();
        s.nodes[2] = Mechanism::binary("Z", 0.0, &[("X", 6.0), ("U_Z", 3.0)]);
        let out = s.compile().unwrap().generate_sample(2000, 2).unwrap();
        assert_eq!(out.warnings.len(), 1);
    }
}
