//! JSON instance specs and the bundle they build.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use ksys_core::adaptive::{AdaptiveModel, FiniteAdaptiveInstance, SocialAdaptiveModel};
use ksys_core::objectives::{
    CoverageDiversityObjective, GraphCutObjective, ImageSummaryObjective, ModularObjective, SetFunction,
    SimilarityMatrix, SocialRevenueObjective,
};
use ksys_core::rng::{derive_seed, stream};
use ksys_core::systems::{
    CardinalitySystem, ExplicitSystem, IndependenceSystem, MultiLabelBoundSystem, PartitionMatroidSystem,
    SocialSeedingSystem,
};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::parse::{label_index, parse_edges, parse_features, FeatureRow};

/// Lomax scale and shape for revenue coefficients.
pub const LOMAX_SCALE: f64 = 1.0;
pub const LOMAX_SHAPE: f64 = 2.0;
pub const DEFAULT_LAMBDA: f64 = 0.2;
pub const DEFAULT_PRODUCTS: usize = 5;

fn default_lambda() -> f64 {
    DEFAULT_LAMBDA
}

fn yes() -> bool {
    true
}

fn default_products() -> usize {
    DEFAULT_PRODUCTS
}

fn default_scale() -> f64 {
    LOMAX_SCALE
}

fn default_shape() -> f64 {
    LOMAX_SHAPE
}

/// A feature table: a CSV path or inline rows without labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FeatureSource {
    File(String),
    Rows(Vec<Vec<f64>>),
}

/// An edge list: a path or inline `[u, v, w]` triples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EdgeSource {
    File(String),
    Edges(Vec<(usize, usize, f64)>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ObjectiveSpec {
    CoverageDiversity {
        features: FeatureSource,
        #[serde(default = "default_lambda")]
        lambda: f64,
        #[serde(default = "yes")]
        diversity: bool,
    },
    ImageSummary {
        features: FeatureSource,
        #[serde(default = "yes")]
        diversity: bool,
    },
    SocialRevenue {
        edges: EdgeSource,
        /// Defaults to the largest node id plus one.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        nodes: Option<usize>,
        #[serde(default = "default_products")]
        products: usize,
        /// Row-major `nodes × products`; drawn from the Lomax law when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        alpha: Option<Vec<f64>>,
    },
    Modular {
        weights: Vec<f64>,
    },
    Cut {
        n: usize,
        edges: EdgeSource,
    },
}

/// One cap for every class, or one per class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Caps {
    Uniform(usize),
    PerClass(Vec<usize>),
}

impl Caps {
    fn expand(&self, classes: usize) -> Result<Vec<usize>> {
        match self {
            Caps::Uniform(c) => Ok(vec![*c; classes]),
            Caps::PerClass(v) if v.len() >= classes => Ok(v.clone()),
            Caps::PerClass(v) => bail!("{} caps given for {classes} classes", v.len()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ConstraintSpec {
    Cardinality {
        cap: usize,
    },
    /// Categories default to each row's first label in the feature CSV.
    Partition {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        categories: Option<Vec<usize>>,
        caps: Caps,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        global_cap: Option<usize>,
    },
    /// Labels default to the feature CSV's label column.
    MultiLabel {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        labels: Option<Vec<Vec<usize>>>,
        label_caps: Caps,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        global_cap: Option<usize>,
    },
    /// Requires a social objective, which fixes nodes and products.
    Social {
        node_cap: usize,
        product_cap: usize,
    },
    Explicit {
        sets: Vec<Vec<usize>>,
        /// Take the down-closure of `sets` instead of requiring it.
        #[serde(default)]
        close: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        declared_k: Option<usize>,
    },
}

impl ConstraintSpec {
    /// The same constraint with its overall budget set to `cap`: the cap of a
    /// cardinality constraint, the global cap of partition and label
    /// constraints, the per-product cap of a social one.
    pub fn with_cap(&self, cap: usize) -> Result<Self> {
        let mut spec = self.clone();
        match &mut spec {
            ConstraintSpec::Cardinality { cap: c } => *c = cap,
            ConstraintSpec::Partition { global_cap, .. } | ConstraintSpec::MultiLabel { global_cap, .. } => {
                *global_cap = Some(cap)
            }
            ConstraintSpec::Social { product_cap, .. } => *product_cap = cap,
            ConstraintSpec::Explicit { .. } => bail!("an explicit constraint has no cap to sweep"),
        }
        Ok(spec)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum AdaptiveSpec {
    /// Independent finite priors with a state-dependent utility.
    Finite(FiniteAdaptiveInstance),
    /// Hidden Lomax revenue coefficients over the social objective's network.
    Social {
        #[serde(default = "default_scale")]
        scale: f64,
        #[serde(default = "default_shape")]
        shape: f64,
    },
}

/// Objective, constraint and optional adaptive model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub objective: ObjectiveSpec,
    pub constraint: ConstraintSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adaptive: Option<AdaptiveSpec>,
    /// Seeds weights and coefficients the files leave out.
    #[serde(default)]
    pub seed: u64,
}

/// Where named feature and edge files come from.
pub enum DataSource {
    /// Paths resolve against this directory.
    Dir(PathBuf),
    /// In-memory tables; every name resolves to them.
    Memory { features: Option<Vec<FeatureRow>>, edges: Option<Vec<(usize, usize, Option<f64>)>> },
}

impl DataSource {
    fn features(&self, name: &str) -> Result<Vec<FeatureRow>> {
        match self {
            DataSource::Dir(dir) => {
                let path = dir.join(name);
                let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
                parse_features(&text).with_context(|| format!("in {}", path.display()))
            }
            DataSource::Memory { features: Some(rows), .. } => Ok(rows.clone()),
            DataSource::Memory { .. } => bail!("no feature table named `{name}`"),
        }
    }

    fn edges(&self, name: &str) -> Result<Vec<(usize, usize, Option<f64>)>> {
        match self {
            DataSource::Dir(dir) => {
                let path = dir.join(name);
                let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
                parse_edges(&text).with_context(|| format!("in {}", path.display()))
            }
            DataSource::Memory { edges: Some(e), .. } => Ok(e.clone()),
            DataSource::Memory { .. } => bail!("no edge list named `{name}`"),
        }
    }
}

pub enum AdaptiveBundle {
    Finite(FiniteAdaptiveInstance),
    Social(SocialAdaptiveModel),
}

pub struct InstanceBundle {
    pub objective: Box<dyn SetFunction>,
    pub system: Box<dyn IndependenceSystem>,
    pub adaptive: Option<AdaptiveBundle>,
    /// Similarity matrix of feature-based objectives.
    pub similarity: Option<SimilarityMatrix>,
}

impl std::fmt::Debug for InstanceBundle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("InstanceBundle")
            .field("objective", &self.objective.kind())
            .field("system", &self.system.kind())
            .field("n", &self.objective.ground_size())
            .finish()
    }
}

impl InstanceBundle {
    pub fn ground_size(&self) -> usize {
        self.objective.ground_size()
    }

    pub fn k(&self) -> usize {
        self.system.declared_k()
    }
}

/// Reads a spec given inline (starting with `{`) or as a file path. Relative
/// data paths inside a file resolve against the file's directory.
pub fn read_json<T: for<'de> Deserialize<'de>>(arg: &str) -> Result<(T, PathBuf)> {
    if arg.trim_start().starts_with('{') {
        let spec = serde_json::from_str(arg).context("parsing inline JSON spec")?;
        Ok((spec, PathBuf::from(".")))
    } else {
        let path = Path::new(arg);
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let spec = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((spec, dir))
    }
}

/// Tables loaded on the way to the objective, reused by the constraint.
struct Loaded {
    objective: Box<dyn SetFunction>,
    rows: Option<Vec<FeatureRow>>,
    social: Option<SocialRevenueObjective>,
    similarity: Option<SimilarityMatrix>,
}

fn feature_rows(source: &FeatureSource, data: &DataSource) -> Result<Vec<FeatureRow>> {
    match source {
        FeatureSource::File(name) => data.features(name),
        FeatureSource::Rows(rows) => {
            if rows.is_empty() {
                bail!("inline feature table is empty");
            }
            Ok(rows
                .iter()
                .enumerate()
                .map(|(i, r)| FeatureRow { id: i.to_string(), labels: Vec::new(), features: r.clone() })
                .collect())
        }
    }
}

/// Weighted edges; missing weights are drawn from `U(0, 1)` under `seed`.
fn weighted_edges(source: &EdgeSource, data: &DataSource, seed: u64) -> Result<Vec<(usize, usize, f64)>> {
    let raw = match source {
        EdgeSource::File(name) => data.edges(name)?,
        EdgeSource::Edges(e) => e.iter().map(|&(u, v, w)| (u, v, Some(w))).collect(),
    };
    let mut rng = stream(derive_seed(seed, &[0x77]));
    Ok(raw.into_iter().map(|(u, v, w)| (u, v, w.unwrap_or_else(|| rng.gen_range(0.0..1.0)))).collect())
}

/// Frozen revenue coefficients drawn from the Lomax law.
pub fn lomax_coefficients(count: usize, seed: u64) -> Vec<f64> {
    let empty = SocialRevenueObjective::new(count, 1, &[], vec![0.0; count]).expect("valid empty network");
    let model = SocialAdaptiveModel::new(empty, LOMAX_SCALE, LOMAX_SHAPE).expect("valid Lomax parameters");
    model.sample_realization(&mut stream(derive_seed(seed, &[0xa1])))
}

fn build_objective(spec: &ObjectiveSpec, data: &DataSource, seed: u64) -> Result<Loaded> {
    let plain = |objective: Box<dyn SetFunction>| Loaded { objective, rows: None, social: None, similarity: None };
    Ok(match spec {
        ObjectiveSpec::CoverageDiversity { features, lambda, diversity } => {
            let rows = feature_rows(features, data)?;
            let feats: Vec<Vec<f64>> = rows.iter().map(|r| r.features.clone()).collect();
            let m = SimilarityMatrix::from_features(&feats, *lambda)?;
            let mut f = CoverageDiversityObjective::new(m.clone());
            if !diversity {
                f = f.without_diversity();
            }
            Loaded { objective: Box::new(f), rows: Some(rows), social: None, similarity: Some(m) }
        }
        ObjectiveSpec::ImageSummary { features, diversity } => {
            let rows = feature_rows(features, data)?;
            let feats: Vec<Vec<f64>> = rows.iter().map(|r| r.features.clone()).collect();
            let m = SimilarityMatrix::cosine_from_features(&feats)?;
            let mut f = ImageSummaryObjective::new(m.clone());
            if !diversity {
                f = f.without_diversity();
            }
            Loaded { objective: Box::new(f), rows: Some(rows), social: None, similarity: Some(m) }
        }
        ObjectiveSpec::SocialRevenue { edges, nodes, products, alpha } => {
            let edges = weighted_edges(edges, data, seed)?;
            let max_id = edges.iter().map(|&(u, v, _)| u.max(v) + 1).max().unwrap_or(0);
            let nodes = nodes.unwrap_or(max_id);
            if nodes < max_id {
                bail!("edge list mentions node {} but only {nodes} nodes were declared", max_id - 1);
            }
            let alpha = match alpha {
                Some(a) => a.clone(),
                None => lomax_coefficients(nodes * products, seed),
            };
            let f = SocialRevenueObjective::new(nodes, *products, &edges, alpha)?;
            Loaded { objective: Box::new(f.clone()), rows: None, social: Some(f), similarity: None }
        }
        ObjectiveSpec::Modular { weights } => plain(Box::new(ModularObjective::new(weights.clone())?)),
        ObjectiveSpec::Cut { n, edges } => {
            let edges = weighted_edges(edges, data, seed)?;
            plain(Box::new(GraphCutObjective::new(*n, &edges)?))
        }
    })
}

fn build_constraint(spec: &ConstraintSpec, loaded: &Loaded) -> Result<Box<dyn IndependenceSystem>> {
    let n = loaded.objective.ground_size();
    let labels = || -> Result<Vec<Vec<usize>>> {
        match &loaded.rows {
            Some(rows) => Ok(label_index(rows).1),
            None => bail!("this constraint needs labels, but the objective has no feature CSV"),
        }
    };
    Ok(match spec {
        ConstraintSpec::Cardinality { cap } => Box::new(CardinalitySystem::new(n, *cap)),
        ConstraintSpec::Partition { categories, caps, global_cap } => {
            let category = match categories {
                Some(c) => c.clone(),
                None => labels()?
                    .into_iter()
                    .enumerate()
                    .map(|(i, l)| l.first().copied().with_context(|| format!("row {i} has no label")))
                    .collect::<Result<_>>()?,
            };
            if category.len() != n {
                bail!("partition lists {} categories for {n} elements", category.len());
            }
            let classes = category.iter().max().map_or(0, |c| c + 1);
            Box::new(PartitionMatroidSystem::new(category, caps.expand(classes)?, global_cap.unwrap_or(n))?)
        }
        ConstraintSpec::MultiLabel { labels: given, label_caps, global_cap } => {
            let labels = match given {
                Some(l) => l.clone(),
                None => labels()?,
            };
            if labels.len() != n {
                bail!("label lists cover {} elements, objective has {n}", labels.len());
            }
            let classes = labels.iter().flatten().max().map_or(0, |c| c + 1);
            Box::new(MultiLabelBoundSystem::new(labels, label_caps.expand(classes)?, global_cap.unwrap_or(n))?)
        }
        ConstraintSpec::Social { node_cap, product_cap } => {
            let Some(social) = &loaded.social else {
                bail!("a social constraint needs a social_revenue objective");
            };
            Box::new(SocialSeedingSystem::new(social.nodes(), social.products(), *node_cap, *product_cap))
        }
        ConstraintSpec::Explicit { sets, close, declared_k } => {
            let sys = if *close { ExplicitSystem::down_closure(n, sets)? } else { ExplicitSystem::new(n, sets)? };
            match declared_k {
                Some(k) => Box::new(sys.with_declared_k(*k)?),
                None => Box::new(sys),
            }
        }
    })
}

pub fn build_instance(spec: &InstanceSpec, data: &DataSource) -> Result<InstanceBundle> {
    let loaded = build_objective(&spec.objective, data, spec.seed).context("building the objective")?;
    let system = build_constraint(&spec.constraint, &loaded).context("building the constraint")?;
    if system.ground_size() != loaded.objective.ground_size() {
        bail!(
            "objective has {} elements but the constraint has {}",
            loaded.objective.ground_size(),
            system.ground_size()
        );
    }
    let adaptive = match &spec.adaptive {
        None => None,
        Some(AdaptiveSpec::Finite(inst)) => {
            if inst.ground_size() != system.ground_size() {
                bail!("adaptive instance has {} elements, constraint has {}", inst.ground_size(), system.ground_size());
            }
            Some(AdaptiveBundle::Finite(inst.clone()))
        }
        Some(AdaptiveSpec::Social { scale, shape }) => {
            let Some(graph) = &loaded.social else {
                bail!("a social adaptive model needs a social_revenue objective");
            };
            Some(AdaptiveBundle::Social(SocialAdaptiveModel::new(graph.clone(), *scale, *shape)?))
        }
    };
    Ok(InstanceBundle { objective: loaded.objective, system, adaptive, similarity: loaded.similarity })
}

/// Builds a bundle from separate `--objective` / `--constraint` arguments,
/// each inline JSON or a file path.
pub fn load_instance(objective: &str, constraint: &str, adaptive: Option<&str>, seed: u64) -> Result<InstanceBundle> {
    let (objective, dir): (ObjectiveSpec, _) = read_json(objective)?;
    let (constraint, _): (ConstraintSpec, _) = read_json(constraint)?;
    let adaptive = adaptive.map(|a| read_json::<AdaptiveSpec>(a).map(|(s, _)| s)).transpose()?;
    build_instance(&InstanceSpec { objective, constraint, adaptive, seed }, &DataSource::Dir(dir))
}
