//! Non-negative submodular value oracles.
//!
//! [`SetFunction::evaluate`] is the stateless reference path. Algorithms grow
//! candidate solutions through a [`GainState`], which lets each objective keep
//! running sums so a marginal gain costs O(n) (or less) rather than a full
//! re-evaluation.

use serde::{Deserialize, Serialize};

use crate::error::{check_ids, Error, Result};

/// Running state for one growing set: its members, its value and an
/// objective-specific accumulator.
#[derive(Debug, Clone, PartialEq)]
pub struct GainState {
    members: Vec<usize>,
    value: f64,
    acc: Vec<f64>,
}

impl GainState {
    pub fn new(value: f64, acc: Vec<f64>) -> Self {
        Self { members: Vec::new(), value, acc }
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    fn with_member(&self, u: usize) -> Vec<usize> {
        let mut set = self.members.clone();
        set.push(u);
        set
    }
}

/// A set function `f: 2^N → ℝ≥0` over the ground set `0..n`.
pub trait SetFunction: Send + Sync {
    fn ground_size(&self) -> usize;

    /// Stateless evaluation of `f(set)`. Ids are assumed in range and distinct.
    fn evaluate(&self, set: &[usize]) -> f64;

    fn kind(&self) -> &'static str;

    fn empty_state(&self) -> GainState {
        GainState::new(self.evaluate(&[]), Vec::new())
    }

    /// `f(u | S)` for the set held by `state`; `u` must not be a member.
    fn gain(&self, state: &GainState, u: usize) -> f64 {
        self.evaluate(&state.with_member(u)) - state.value
    }

    /// Adds `u` to the set held by `state`.
    fn commit(&self, state: &mut GainState, u: usize) {
        state.value = self.evaluate(&state.with_member(u));
        state.members.push(u);
    }
}

/// Builds the running state of `set` by committing its members in order.
pub fn state_of(f: &dyn SetFunction, set: &[usize]) -> GainState {
    let mut st = f.empty_state();
    for &u in set {
        f.commit(&mut st, u);
    }
    st
}

/// Dense `n × n` matrix of non-negative similarities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityMatrix {
    n: usize,
    data: Vec<f64>,
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn check_dims(features: &[Vec<f64>]) -> Result<()> {
    if let Some(first) = features.first() {
        let d = first.len();
        if let Some((u, row)) = features.iter().enumerate().find(|(_, r)| r.len() != d) {
            return Err(Error::InvalidInput(format!(
                "feature vector {u} has dimension {}, expected {d}",
                row.len()
            )));
        }
    }
    Ok(())
}

impl SimilarityMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if let Some(u) = rows.iter().position(|r| r.len() != n) {
            return Err(Error::InvalidInput(format!("row {u} is not of length {n}")));
        }
        let data: Vec<f64> = rows.into_iter().flatten().collect();
        if data.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::InvalidInput("similarities must be finite and non-negative".into()));
        }
        Ok(Self { n, data })
    }

    /// `M[u][v] = exp(−λ · ‖t_u − t_v‖₂)`.
    pub fn from_features(features: &[Vec<f64>], lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidInput(format!("decay rate must be positive, got {lambda}")));
        }
        check_dims(features)?;
        let n = features.len();
        let mut data = vec![0.0; n * n];
        for u in 0..n {
            data[u * n + u] = 1.0;
            for v in u + 1..n {
                let m = (-lambda * euclidean(&features[u], &features[v])).exp();
                data[u * n + v] = m;
                data[v * n + u] = m;
            }
        }
        Ok(Self { n, data })
    }

    /// Cosine similarity, clamped below at 0. Zero vectors get similarity 1
    /// with themselves and 0 with everything else.
    pub fn cosine_from_features(features: &[Vec<f64>]) -> Result<Self> {
        check_dims(features)?;
        let n = features.len();
        let norms: Vec<f64> = features.iter().map(|t| t.iter().map(|x| x * x).sum::<f64>().sqrt()).collect();
        let mut data = vec![0.0; n * n];
        for u in 0..n {
            data[u * n + u] = 1.0;
            for v in u + 1..n {
                let denom = norms[u] * norms[v];
                let s = if denom > 0.0 {
                    let dot: f64 = features[u].iter().zip(&features[v]).map(|(a, b)| a * b).sum();
                    (dot / denom).clamp(0.0, 1.0)
                } else {
                    0.0
                };
                data[u * n + v] = s;
                data[v * n + u] = s;
            }
        }
        Ok(Self { n, data })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, u: usize, v: usize) -> f64 {
        self.data[u * self.n + v]
    }

    pub fn row(&self, u: usize) -> &[f64] {
        &self.data[u * self.n..(u + 1) * self.n]
    }
}

/// `f(S) = Σ_{u∈N} Σ_{v∈S} M[u][v] − Σ_{u∈S} Σ_{v∈S} M[u][v]`.
///
/// The first term rewards covering the ground set, the second penalizes
/// redundancy inside `S`.
#[derive(Debug, Clone)]
pub struct CoverageDiversityObjective {
    m: SimilarityMatrix,
    col_sums: Vec<f64>,
    diversity: f64,
}

impl CoverageDiversityObjective {
    pub fn new(m: SimilarityMatrix) -> Self {
        let n = m.len();
        let col_sums = (0..n).map(|v| (0..n).map(|u| m.get(u, v)).sum()).collect();
        Self { m, col_sums, diversity: 1.0 }
    }

    /// Drops the redundancy term, leaving a monotone (modular) coverage score.
    pub fn without_diversity(mut self) -> Self {
        self.diversity = 0.0;
        self
    }

    pub fn matrix(&self) -> &SimilarityMatrix {
        &self.m
    }
}

impl SetFunction for CoverageDiversityObjective {
    fn ground_size(&self) -> usize {
        self.m.len()
    }

    fn evaluate(&self, set: &[usize]) -> f64 {
        let coverage: f64 = set.iter().map(|&v| self.col_sums[v]).sum();
        let redundancy: f64 = set.iter().flat_map(|&u| set.iter().map(move |&v| (u, v))).map(|(u, v)| self.m.get(u, v)).sum();
        coverage - self.diversity * redundancy
    }

    fn kind(&self) -> &'static str {
        "coverage_diversity"
    }

    // acc[x] = Σ_{s∈S} (M[s][x] + M[x][s])
    fn empty_state(&self) -> GainState {
        GainState::new(0.0, vec![0.0; self.m.len()])
    }

    fn gain(&self, state: &GainState, u: usize) -> f64 {
        self.col_sums[u] - self.diversity * (state.acc[u] + self.m.get(u, u))
    }

    fn commit(&self, state: &mut GainState, u: usize) {
        state.value += self.gain(state, u);
        for x in 0..self.m.len() {
            state.acc[x] += self.m.get(u, x) + self.m.get(x, u);
        }
        state.members.push(u);
    }
}

/// `f(S) = Σ_{u∈N} max_{v∈S} s[u][v] − (1/n) Σ_{u∈S} Σ_{v∈S} s[u][v]`,
/// with the maximum over `∅` taken as 0.
#[derive(Debug, Clone)]
pub struct ImageSummaryObjective {
    s: SimilarityMatrix,
    redundancy: f64,
}

impl ImageSummaryObjective {
    pub fn new(s: SimilarityMatrix) -> Self {
        let redundancy = 1.0 / s.len().max(1) as f64;
        Self { s, redundancy }
    }

    /// Drops the redundancy term, leaving a monotone facility-location score.
    pub fn without_diversity(mut self) -> Self {
        self.redundancy = 0.0;
        self
    }

    fn scale(&self) -> f64 {
        self.redundancy
    }
}

impl SetFunction for ImageSummaryObjective {
    fn ground_size(&self) -> usize {
        self.s.len()
    }

    fn evaluate(&self, set: &[usize]) -> f64 {
        let n = self.s.len();
        let representation: f64 = (0..n)
            .map(|u| set.iter().map(|&v| self.s.get(u, v)).fold(0.0, f64::max))
            .sum();
        let redundancy: f64 = set.iter().flat_map(|&u| set.iter().map(move |&v| (u, v))).map(|(u, v)| self.s.get(u, v)).sum();
        representation - self.scale() * redundancy
    }

    fn kind(&self) -> &'static str {
        "image_summary"
    }

    // acc[..n] = best similarity to S per row, acc[n..] = Σ_{v∈S} (s[x][v] + s[v][x])
    fn empty_state(&self) -> GainState {
        GainState::new(0.0, vec![0.0; 2 * self.s.len()])
    }

    fn gain(&self, state: &GainState, x: usize) -> f64 {
        let n = self.s.len();
        let best = &state.acc[..n];
        let representation: f64 = (0..n).map(|u| (self.s.get(u, x) - best[u]).max(0.0)).sum();
        representation - self.scale() * (state.acc[n + x] + self.s.get(x, x))
    }

    fn commit(&self, state: &mut GainState, x: usize) {
        state.value += self.gain(state, x);
        let n = self.s.len();
        for u in 0..n {
            let s_ux = self.s.get(u, x);
            if s_ux > state.acc[u] {
                state.acc[u] = s_ux;
            }
            state.acc[n + u] += self.s.get(u, x) + self.s.get(x, u);
        }
        state.members.push(x);
    }
}

/// Multi-product revenue over a weighted social graph. Elements are
/// (node, product) pairs with id `node · products + product`; `H_i` is the
/// set of nodes seeded with product `i`.
///
/// `f(H) = Σ_i Σ_{u∉H_i} α[u][i] · sqrt(Σ_{v∈H_i} w(v, u))`.
#[derive(Debug, Clone)]
pub struct SocialRevenueObjective {
    nodes: usize,
    products: usize,
    out_edges: Vec<Vec<(usize, f64)>>,
    alpha: Vec<f64>,
}

impl SocialRevenueObjective {
    /// `edges` are directed `(v, u, w)` triples meaning `v` influences `u`
    /// with strength `w`. Self-loops are dropped and parallel edges summed.
    /// `alpha` is `nodes × products`, row-major.
    pub fn new(nodes: usize, products: usize, edges: &[(usize, usize, f64)], alpha: Vec<f64>) -> Result<Self> {
        if products == 0 {
            return Err(Error::InvalidInput("at least one product is required".into()));
        }
        if alpha.len() != nodes * products {
            return Err(Error::InvalidInput(format!(
                "expected {} revenue coefficients, got {}",
                nodes * products,
                alpha.len()
            )));
        }
        if alpha.iter().any(|a| !a.is_finite() || *a < 0.0) {
            return Err(Error::InvalidInput("revenue coefficients must be non-negative".into()));
        }
        let mut out_edges: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nodes];
        for &(v, u, w) in edges {
            if v >= nodes || u >= nodes {
                return Err(Error::ElementOutOfRange { id: v.max(u), n: nodes });
            }
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::InvalidInput(format!("edge ({v}, {u}) has invalid weight {w}")));
            }
            if v != u {
                out_edges[v].push((u, w));
            }
        }
        for list in &mut out_edges {
            list.sort_by_key(|&(u, _)| u);
            list.dedup_by(|next, kept| {
                if next.0 == kept.0 {
                    kept.1 += next.1;
                    true
                } else {
                    false
                }
            });
        }
        Ok(Self { nodes, products, out_edges, alpha })
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn products(&self) -> usize {
        self.products
    }

    pub fn out_edges(&self, v: usize) -> &[(usize, f64)] {
        &self.out_edges[v]
    }

    pub fn alpha(&self, u: usize, i: usize) -> f64 {
        self.alpha[u * self.products + i]
    }

    /// `f(id | H)` for the seeding held by `state`, under coefficients `alpha`.
    /// Only `alpha` entries of out-neighbors of the node of `id`, and of that
    /// node itself when it already receives influence, are read.
    pub fn gain_with(&self, state: &GainState, id: usize, alpha: &[f64]) -> f64 {
        let d = self.products;
        let nd = self.nodes * d;
        let (v, i) = (id / d, id % d);
        let mut g = if state.acc[id] > 0.0 { -alpha[id] * state.acc[id].sqrt() } else { 0.0 };
        for &(u, w) in &self.out_edges[v] {
            let j = u * d + i;
            if state.acc[nd + j] == 0.0 {
                let before = state.acc[j];
                g += alpha[j] * ((before + w).sqrt() - before.sqrt());
            }
        }
        g
    }

    /// Revenue of the seeding `set` under coefficients `alpha` (`nodes × products`).
    pub fn revenue_with(&self, set: &[usize], alpha: &[f64]) -> f64 {
        let d = self.products;
        let mut weight = vec![0.0; self.nodes * d];
        let mut seeded = vec![false; self.nodes * d];
        for &id in set {
            let (v, i) = (id / d, id % d);
            seeded[v * d + i] = true;
            for &(u, w) in &self.out_edges[v] {
                weight[u * d + i] += w;
            }
        }
        (0..self.nodes * d)
            .filter(|&j| !seeded[j] && weight[j] > 0.0)
            .map(|j| alpha[j] * weight[j].sqrt())
            .sum()
    }
}

impl SetFunction for SocialRevenueObjective {
    fn ground_size(&self) -> usize {
        self.nodes * self.products
    }

    fn evaluate(&self, set: &[usize]) -> f64 {
        self.revenue_with(set, &self.alpha)
    }

    fn kind(&self) -> &'static str {
        "social_revenue"
    }

    // acc[..nd] = incoming seeded weight per (node, product), acc[nd..] = seeded flag
    fn empty_state(&self) -> GainState {
        GainState::new(0.0, vec![0.0; 2 * self.nodes * self.products])
    }

    fn gain(&self, state: &GainState, id: usize) -> f64 {
        self.gain_with(state, id, &self.alpha)
    }

    fn commit(&self, state: &mut GainState, id: usize) {
        state.value += self.gain(state, id);
        let d = self.products;
        let nd = self.nodes * d;
        let (v, i) = (id / d, id % d);
        state.acc[nd + id] = 1.0;
        for &(u, w) in &self.out_edges[v] {
            state.acc[u * d + i] += w;
        }
        state.members.push(id);
    }
}

/// `f(S) = Σ_{u∈S} w_u` with `w_u ≥ 0`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModularObjective {
    weights: Vec<f64>,
}

impl ModularObjective {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidInput("modular weights must be non-negative".into()));
        }
        Ok(Self { weights })
    }

    pub fn weight(&self, u: usize) -> f64 {
        self.weights[u]
    }
}

impl SetFunction for ModularObjective {
    fn ground_size(&self) -> usize {
        self.weights.len()
    }

    fn evaluate(&self, set: &[usize]) -> f64 {
        set.iter().map(|&u| self.weights[u]).sum()
    }

    fn kind(&self) -> &'static str {
        "modular"
    }

    fn gain(&self, _state: &GainState, u: usize) -> f64 {
        self.weights[u]
    }

    fn commit(&self, state: &mut GainState, u: usize) {
        state.value += self.weights[u];
        state.members.push(u);
    }
}

/// Weighted undirected cut: `f(S) = Σ_{(u,v)∈E, |{u,v}∩S|=1} w_uv`.
#[derive(Debug, Clone)]
pub struct GraphCutObjective {
    adj: Vec<Vec<(usize, f64)>>,
    degree: Vec<f64>,
}

impl GraphCutObjective {
    pub fn new(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let mut adj = vec![Vec::new(); n];
        for &(u, v, w) in edges {
            if u >= n || v >= n {
                return Err(Error::ElementOutOfRange { id: u.max(v), n });
            }
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::InvalidInput(format!("edge ({u}, {v}) has invalid weight {w}")));
            }
            if u != v {
                adj[u].push((v, w));
                adj[v].push((u, w));
            }
        }
        let degree = adj.iter().map(|l| l.iter().map(|&(_, w)| w).sum()).collect();
        Ok(Self { adj, degree })
    }
}

impl SetFunction for GraphCutObjective {
    fn ground_size(&self) -> usize {
        self.adj.len()
    }

    fn evaluate(&self, set: &[usize]) -> f64 {
        let mut inside = vec![false; self.adj.len()];
        for &u in set {
            inside[u] = true;
        }
        set.iter()
            .flat_map(|&u| self.adj[u].iter())
            .filter(|&&(v, _)| !inside[v])
            .map(|&(_, w)| w)
            .sum()
    }

    fn kind(&self) -> &'static str {
        "graph_cut"
    }

    // acc[x] = total weight between x and S
    fn empty_state(&self) -> GainState {
        GainState::new(0.0, vec![0.0; self.adj.len()])
    }

    fn gain(&self, state: &GainState, u: usize) -> f64 {
        self.degree[u] - 2.0 * state.acc[u]
    }

    fn commit(&self, state: &mut GainState, u: usize) {
        state.value += self.gain(state, u);
        for &(v, w) in &self.adj[u] {
            state.acc[v] += w;
        }
        state.members.push(u);
    }
}

/// `f(u | S) = f(S ∪ {u}) − f(S)` from scratch (two evaluations).
pub fn marginal_gain(f: &dyn SetFunction, u: usize, set: &[usize]) -> Result<f64> {
    let n = f.ground_size();
    check_ids(set, n)?;
    check_ids(&[u], n)?;
    if set.contains(&u) {
        return Err(Error::InvalidInput(format!("element {u} is already in the set")));
    }
    let mut with_u = set.to_vec();
    with_u.push(u);
    Ok(f.evaluate(&with_u) - f.evaluate(set))
}
