//! Synthetic instances shaped like the movie, image and social experiments.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use ksys_core::rng::substream;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::instance::{
    build_instance, AdaptiveSpec, Caps, ConstraintSpec, DataSource, EdgeSource, FeatureSource, InstanceBundle,
    InstanceSpec, ObjectiveSpec, DEFAULT_LAMBDA, DEFAULT_PRODUCTS,
};
use crate::parse::FeatureRow;

pub const MOVIE_LABELS: [&str; 3] = ["action", "comedy", "drama"];
pub const MOVIE_LABEL_CAP: usize = 10;
pub const MOVIE_DIM: usize = 25;
pub const IMAGE_CATEGORIES: usize = 3;
pub const IMAGE_DIM: usize = 32;
pub const SOCIAL_NODE_CAP: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Movie,
    Image,
    Social,
    RandomCut,
}

impl FromStr for Kind {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "movie" => Kind::Movie,
            "image" => Kind::Image,
            "social" => Kind::Social,
            "random-cut" => Kind::RandomCut,
            _ => bail!("unknown instance kind `{s}` (expected movie, image, social or random-cut)"),
        })
    }
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Movie => "movie",
            Kind::Image => "image",
            Kind::Social => "social",
            Kind::RandomCut => "random-cut",
        }
    }

    /// The budget used when none is given.
    pub fn default_cap(self, n: usize) -> usize {
        match self {
            Kind::Movie => 20,
            Kind::Image => 5,
            Kind::Social => 10,
            Kind::RandomCut => (n / 4).max(1),
        }
    }
}

/// A generated instance: the spec plus the tables it names.
pub struct Generated {
    pub spec: InstanceSpec,
    pub features: Option<Vec<FeatureRow>>,
    pub edges: Option<Vec<(usize, usize, Option<f64>)>>,
}

impl Generated {
    pub fn bundle(&self) -> Result<InstanceBundle> {
        let data = DataSource::Memory { features: self.features.clone(), edges: self.edges.clone() };
        build_instance(&self.spec, &data)
    }

    /// Writes `instance.json` plus `features.csv` or `edges.txt` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        if let Some(rows) = &self.features {
            let mut text = String::new();
            for r in rows {
                write!(text, "{},{}", r.id, r.labels.join(";"))?;
                for x in &r.features {
                    write!(text, ",{x}")?;
                }
                text.push('\n');
            }
            fs::write(dir.join("features.csv"), text)?;
        }
        if let Some(edges) = &self.edges {
            let mut text = String::new();
            for (u, v, w) in edges {
                match w {
                    Some(w) => writeln!(text, "{u} {v} {w}")?,
                    None => writeln!(text, "{u} {v}")?,
                }
            }
            fs::write(dir.join("edges.txt"), text)?;
        }
        let json = serde_json::to_string_pretty(&self.spec)?;
        fs::write(dir.join("instance.json"), json + "\n")?;
        Ok(())
    }
}

fn clouds(n: usize, dim: usize, clusters: usize, spread: f64, rng: &mut impl Rng) -> (Vec<usize>, Vec<Vec<f64>>) {
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let noise = Normal::new(0.0, spread).expect("positive spread");
    let centers: Vec<Vec<f64>> = (0..clusters).map(|_| (0..dim).map(|_| unit.sample(rng)).collect()).collect();
    let cluster: Vec<usize> = (0..n).map(|_| rng.gen_range(0..clusters)).collect();
    let feats = cluster.iter().map(|&c| centers[c].iter().map(|x| x + noise.sample(rng)).collect()).collect();
    (cluster, feats)
}

/// Generates an instance of `kind` over `n` items (nodes for social
/// instances). `cap` overrides the budget of [`Kind::default_cap`].
pub fn generate_instance(kind: Kind, n: usize, seed: u64, cap: Option<usize>) -> Result<Generated> {
    if n == 0 {
        bail!("an instance needs at least one element");
    }
    let mut rng = substream(seed, &[kind as u64, n as u64]);
    let cap = cap.unwrap_or_else(|| kind.default_cap(n));
    let file = |name: &str| name.to_string();
    Ok(match kind {
        Kind::Movie => {
            let (cluster, feats) = clouds(n, MOVIE_DIM, 8, 0.4, &mut rng);
            let rows = feats
                .into_iter()
                .enumerate()
                .map(|(i, features)| {
                    let main = cluster[i] % MOVIE_LABELS.len();
                    let labels = (0..MOVIE_LABELS.len())
                        .filter(|&l| l == main || rng.gen_bool(0.3))
                        .map(|l| MOVIE_LABELS[l].to_string())
                        .collect();
                    FeatureRow { id: format!("m{i}"), labels, features }
                })
                .collect();
            Generated {
                spec: InstanceSpec {
                    objective: ObjectiveSpec::CoverageDiversity {
                        features: FeatureSource::File(file("features.csv")),
                        lambda: DEFAULT_LAMBDA,
                        diversity: true,
                    },
                    constraint: ConstraintSpec::MultiLabel {
                        labels: None,
                        label_caps: Caps::Uniform(MOVIE_LABEL_CAP),
                        global_cap: Some(cap),
                    },
                    adaptive: None,
                    seed,
                },
                features: Some(rows),
                edges: None,
            }
        }
        Kind::Image => {
            let (cluster, feats) = clouds(n, IMAGE_DIM, 4 * IMAGE_CATEGORIES, 0.6, &mut rng);
            let rows = feats
                .into_iter()
                .enumerate()
                .map(|(i, features)| FeatureRow {
                    id: format!("img{i}"),
                    labels: vec![format!("c{}", cluster[i] % IMAGE_CATEGORIES)],
                    features,
                })
                .collect::<Vec<_>>();
            // Categories in a fixed order so ids do not depend on which label
            // shows up first.
            let categories = rows.iter().map(|r| r.labels[0][1..].parse().expect("generated label")).collect();
            Generated {
                spec: InstanceSpec {
                    objective: ObjectiveSpec::ImageSummary {
                        features: FeatureSource::File(file("features.csv")),
                        diversity: true,
                    },
                    constraint: ConstraintSpec::Partition {
                        categories: Some(categories),
                        caps: Caps::Uniform(cap),
                        global_cap: None,
                    },
                    adaptive: None,
                    seed,
                },
                features: Some(rows),
                edges: None,
            }
        }
        Kind::Social => {
            let mut edges = Vec::new();
            for v in 0..n {
                for _ in 0..rng.gen_range(1..=6) {
                    let u = rng.gen_range(0..n);
                    if u != v {
                        edges.push((v, u, None));
                    }
                }
            }
            if edges.is_empty() {
                edges.push((0, 0, None));
            }
            Generated {
                spec: InstanceSpec {
                    objective: ObjectiveSpec::SocialRevenue {
                        edges: EdgeSource::File(file("edges.txt")),
                        nodes: Some(n),
                        products: DEFAULT_PRODUCTS,
                        alpha: None,
                    },
                    constraint: ConstraintSpec::Social { node_cap: SOCIAL_NODE_CAP, product_cap: cap },
                    adaptive: Some(AdaptiveSpec::Social {
                        scale: crate::instance::LOMAX_SCALE,
                        shape: crate::instance::LOMAX_SHAPE,
                    }),
                    seed,
                },
                features: None,
                edges: Some(edges),
            }
        }
        Kind::RandomCut => {
            let p = (8.0 / n as f64).min(0.5);
            let edges: Vec<(usize, usize, Option<f64>)> = (0..n)
                .flat_map(|u| (u + 1..n).map(move |v| (u, v)))
                .filter_map(|(u, v)| rng.gen_bool(p).then(|| (u, v, Some(rng.gen_range(0.0..1.0)))))
                .collect();
            let edges = if edges.is_empty() { vec![(0, 0, Some(0.0))] } else { edges };
            Generated {
                spec: InstanceSpec {
                    objective: ObjectiveSpec::Cut { n, edges: EdgeSource::File(file("edges.txt")) },
                    constraint: ConstraintSpec::Cardinality { cap },
                    adaptive: None,
                    seed,
                },
                features: None,
                edges: Some(edges),
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kinds_parse() {
        for k in [Kind::Movie, Kind::Image, Kind::Social, Kind::RandomCut] {
            assert_eq!(k.name().parse::<Kind>().unwrap(), k);
        }
        assert!("films".parse::<Kind>().is_err());
    }

    #[test]
    fn defaults_match_the_experiment_settings() {
        let g = generate_instance(Kind::Social, 30, 1, None).unwrap();
        match &g.spec.objective {
            ObjectiveSpec::SocialRevenue { products, .. } => assert_eq!(*products, 5),
            other => panic!("{other:?}"),
        }
        match &g.spec.constraint {
            ConstraintSpec::Social { node_cap, .. } => assert_eq!(*node_cap, 3),
            other => panic!("{other:?}"),
        }
        let b = g.bundle().unwrap();
        assert_eq!(b.ground_size(), 150);
        assert!(b.adaptive.is_some());

        let g = generate_instance(Kind::Movie, 40, 1, None).unwrap();
        match &g.spec.constraint {
            ConstraintSpec::MultiLabel { label_caps, .. } => assert_eq!(*label_caps, Caps::Uniform(10)),
            other => panic!("{other:?}"),
        }
        let rows = g.features.as_ref().unwrap();
        assert!(rows.iter().all(|r| !r.labels.is_empty() && r.features.len() == 25));
        let labels: std::collections::BTreeSet<_> = rows.iter().flat_map(|r| r.labels.clone()).collect();
        assert_eq!(labels.len(), 3);
    }

    #[test]
    fn every_kind_builds() {
        for k in [Kind::Movie, Kind::Image, Kind::Social, Kind::RandomCut] {
            for n in [1, 2, 25] {
                let b = generate_instance(k, n, 7, None).unwrap().bundle().unwrap();
                assert!(b.ground_size() >= n);
            }
        }
        assert!(generate_instance(Kind::Movie, 0, 1, None).is_err());
    }
}
