//! Stochastic states and the adaptive random greedy policy.
//!
//! Each element has a hidden state revealed only once the element is
//! selected. A model supplies realizations, the utility `f(Y, φ)` and the
//! conditional expected marginal gain `Δ(u | ψ)`, where `ψ` is what the
//! selected elements have revealed so far.

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use rand_distr::Pareto;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_ids, Error, Result};
use crate::objectives::{state_of, SocialRevenueObjective};
use crate::rng::{derive_seed, stream, substream, StreamRng};
use crate::systems::IndependenceSystem;
use crate::verify::mean_stderr;
use crate::GAIN_TOLERANCE;

pub trait AdaptiveModel: Send + Sync {
    /// A full assignment of states.
    type Realization: Clone + Send + Sync;
    /// What selecting one element reveals.
    type State: Clone + std::fmt::Debug + Serialize + Send;

    fn ground_size(&self) -> usize;

    fn sample_realization(&self, rng: &mut StreamRng) -> Self::Realization;

    /// `f(Y, φ)`.
    fn utility(&self, selected: &[usize], phi: &Self::Realization) -> f64;

    fn observe(&self, u: usize, phi: &Self::Realization) -> Self::State;

    /// `Δ(u | ψ)` for each candidate, where `ψ` is what `selected` reveals of
    /// `phi`. Implementations read nothing else from `phi`.
    fn expected_gains(&self, candidates: &[usize], selected: &[usize], phi: &Self::Realization) -> Vec<f64>;
}

/// How `Δ(u | ψ)` is computed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GainMode {
    Exact,
    MonteCarlo { samples: usize, seed: u64 },
}

/// Observed states of the selected elements, in selection order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartialRealization {
    observed: Vec<(usize, usize)>,
}

impl PartialRealization {
    pub fn new() -> Self {
        Self::default()
    }

    /// The restriction of `phi` to `domain`.
    pub fn restrict(phi: &[usize], domain: &[usize]) -> Self {
        Self { observed: domain.iter().map(|&u| (u, phi[u])).collect() }
    }

    pub fn domain(&self) -> Vec<usize> {
        self.observed.iter().map(|&(u, _)| u).collect()
    }

    pub fn len(&self) -> usize {
        self.observed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observed.is_empty()
    }

    pub fn state(&self, u: usize) -> Option<usize> {
        self.observed.iter().find(|&&(v, _)| v == u).map(|&(_, z)| z)
    }

    pub fn contains(&self, u: usize) -> bool {
        self.state(u).is_some()
    }

    pub fn insert(&mut self, u: usize, z: usize) -> Result<()> {
        if self.contains(u) {
            return Err(Error::InvalidInput(format!("state of element {u} is already observed")));
        }
        self.observed.push((u, z));
        Ok(())
    }

    /// `self ⊆ other`.
    pub fn is_subrealization_of(&self, other: &PartialRealization) -> bool {
        self.observed.iter().all(|&(u, z)| other.state(u) == Some(z))
    }

    pub fn is_consistent_with(&self, phi: &[usize]) -> bool {
        self.observed.iter().all(|&(u, z)| phi.get(u) == Some(&z))
    }

    pub fn entries(&self) -> &[(usize, usize)] {
        &self.observed
    }
}

/// State-dependent utility over finitely many states per element. Every term
/// reads only the states of selected elements:
///
/// `f(Y, φ) = c + Σ_{u∈Y} m[u][φ_u] + Σ_{a∈Y, b∉Y} w[a][b]·s[a][φ_a] + Σ_t q_t·[t covered by Y under φ]`
///
/// Each term is submodular in `Y` for fixed `φ` and non-negative.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StateUtility {
    #[serde(default)]
    pub constant: f64,
    /// `m[u][z]`; empty for none.
    #[serde(default)]
    pub modular: Vec<Vec<f64>>,
    /// Directed weights `w[a][b]`; empty for none.
    #[serde(default)]
    pub cut: Vec<Vec<f64>>,
    /// State scale `s[a][z]` of the cut term.
    #[serde(default)]
    pub cut_scale: Vec<Vec<f64>>,
    /// Items covered by `u` in state `z`; empty for none.
    #[serde(default)]
    pub coverage: Vec<Vec<Vec<usize>>>,
    #[serde(default)]
    pub item_weights: Vec<f64>,
}

#[derive(Deserialize)]
struct FiniteAdaptiveSpec {
    priors: Vec<Vec<f64>>,
    utility: StateUtility,
}

impl TryFrom<FiniteAdaptiveSpec> for FiniteAdaptiveInstance {
    type Error = Error;

    fn try_from(spec: FiniteAdaptiveSpec) -> Result<Self> {
        Self::new(spec.priors, spec.utility)
    }
}

/// A finite adaptive instance with independent per-element priors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FiniteAdaptiveSpec")]
pub struct FiniteAdaptiveInstance {
    priors: Vec<Vec<f64>>,
    utility: StateUtility,
    #[serde(skip)]
    samplers: Vec<Option<WeightedIndex<f64>>>,
}

fn nonneg(values: impl IntoIterator<Item = f64>) -> bool {
    values.into_iter().all(|x| x.is_finite() && x >= 0.0)
}

impl FiniteAdaptiveInstance {
    pub fn new(priors: Vec<Vec<f64>>, utility: StateUtility) -> Result<Self> {
        let n = priors.len();
        for (u, p) in priors.iter().enumerate() {
            if p.is_empty() || !nonneg(p.iter().copied()) || (p.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidInput(format!(
                    "prior of element {u} must be a non-empty probability vector"
                )));
            }
        }
        let states = |u: usize| priors[u].len();
        let bad = |what: &str| Err(Error::InvalidInput(format!("utility term `{what}` does not match the priors")));
        let u = &utility;
        if !(u.constant.is_finite() && u.constant >= 0.0) {
            return bad("constant");
        }
        if !u.modular.is_empty()
            && (u.modular.len() != n
                || (0..n).any(|v| u.modular[v].len() != states(v))
                || !nonneg(u.modular.iter().flatten().copied()))
        {
            return bad("modular");
        }
        if !u.cut.is_empty()
            && (u.cut.len() != n
                || u.cut.iter().any(|r| r.len() != n)
                || u.cut_scale.len() != n
                || (0..n).any(|v| u.cut_scale[v].len() != states(v))
                || !nonneg(u.cut.iter().flatten().copied())
                || !nonneg(u.cut_scale.iter().flatten().copied()))
        {
            return bad("cut");
        }
        if !u.coverage.is_empty()
            && (u.coverage.len() != n
                || (0..n).any(|v| u.coverage[v].len() != states(v))
                || u.coverage.iter().flatten().flatten().any(|&t| t >= u.item_weights.len())
                || !nonneg(u.item_weights.iter().copied()))
        {
            return bad("coverage");
        }
        let mut inst = Self { priors, utility, samplers: Vec::new() };
        inst.build_samplers();
        Ok(inst)
    }

    fn build_samplers(&mut self) {
        self.samplers = self
            .priors
            .iter()
            .map(|p| if p.len() > 1 { WeightedIndex::new(p).ok() } else { None })
            .collect();
    }

    /// Random fixture with up to `max_states` states per element. With
    /// `monotone` the cut term is left out, which makes every gain
    /// non-negative.
    pub fn random(n: usize, max_states: usize, monotone: bool, rng: &mut StreamRng) -> Self {
        let max_states = max_states.max(1);
        let states: Vec<usize> = (0..n).map(|_| rng.gen_range(1..=max_states)).collect();
        let priors = states
            .iter()
            .map(|&z| {
                let raw: Vec<f64> = (0..z).map(|_| rng.gen_range(0.2..1.0)).collect();
                let total: f64 = raw.iter().sum();
                raw.into_iter().map(|x| x / total).collect()
            })
            .collect();
        let items = 2 * n.max(1);
        let mut utility = StateUtility {
            modular: states.iter().map(|&z| (0..z).map(|_| rng.gen_range(0.0..1.0)).collect()).collect(),
            coverage: states
                .iter()
                .map(|&z| (0..z).map(|_| (0..items).filter(|_| rng.gen_bool(0.3)).collect()).collect())
                .collect(),
            item_weights: (0..items).map(|_| rng.gen_range(0.0..1.0)).collect(),
            ..Default::default()
        };
        if !monotone {
            utility.cut = (0..n)
                .map(|a| (0..n).map(|b| if a != b && rng.gen_bool(0.6) { rng.gen_range(0.0..2.0) } else { 0.0 }).collect())
                .collect();
            utility.cut_scale = states.iter().map(|&z| (0..z).map(|_| rng.gen_range(0.0..2.0)).collect()).collect();
            // Keep the modular part small so the cut term, which loses mass
            // as Y grows, produces negative gains.
            for u in 0..n {
                for m in &mut utility.modular[u] {
                    *m *= 0.2;
                }
            }
        }
        Self::new(priors, utility).expect("generated fixture is valid")
    }

    pub fn ground_size(&self) -> usize {
        self.priors.len()
    }

    pub fn priors(&self) -> &[Vec<f64>] {
        &self.priors
    }

    pub fn states(&self, u: usize) -> usize {
        self.priors[u].len()
    }

    pub fn max_states(&self) -> usize {
        self.priors.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn utility_spec(&self) -> &StateUtility {
        &self.utility
    }

    fn sample_state(&self, u: usize, rng: &mut StreamRng) -> usize {
        match &self.samplers[u] {
            Some(w) => w.sample(rng),
            None => 0,
        }
    }

    /// `f(Y, φ)` where `state(u)` gives `φ_u` for `u ∈ Y`.
    pub fn value_with(&self, selected: &[usize], state: impl Fn(usize) -> usize) -> f64 {
        let u = &self.utility;
        let mut total = u.constant;
        if !u.modular.is_empty() {
            total += selected.iter().map(|&a| u.modular[a][state(a)]).sum::<f64>();
        }
        if !u.cut.is_empty() {
            let mut inside = vec![false; self.ground_size()];
            for &a in selected {
                inside[a] = true;
            }
            for &a in selected {
                let scale = u.cut_scale[a][state(a)];
                let out: f64 = u.cut[a].iter().enumerate().filter(|&(b, _)| !inside[b]).map(|(_, w)| w).sum();
                total += scale * out;
            }
        }
        if !u.coverage.is_empty() {
            let mut covered = vec![false; u.item_weights.len()];
            for &a in selected {
                for &t in &u.coverage[a][state(a)] {
                    covered[t] = true;
                }
            }
            total += covered.iter().zip(&u.item_weights).filter(|(c, _)| **c).map(|(_, w)| w).sum::<f64>();
        }
        total
    }

    /// `f(dom(ψ), ψ)`: the utility reads only the observed states.
    pub fn value_of(&self, psi: &PartialRealization) -> f64 {
        self.value_with(&psi.domain(), |a| psi.state(a).expect("selected elements are observed"))
    }

    /// `Δ(u | ψ)`.
    pub fn expected_marginal_gain(&self, u: usize, psi: &PartialRealization, mode: GainMode) -> Result<f64> {
        check_ids(&[u], self.ground_size())?;
        check_ids(&psi.domain(), self.ground_size())?;
        if psi.contains(u) {
            return Err(Error::InvalidInput(format!("element {u} is already in dom(ψ)")));
        }
        let mut with_u = psi.domain();
        with_u.push(u);
        let base = self.value_of(psi);
        match mode {
            GainMode::Exact => Ok(self.priors[u]
                .iter()
                .enumerate()
                .filter(|(_, &p)| p > 0.0)
                .map(|(z, &p)| {
                    let after = self.value_with(&with_u, |a| if a == u { z } else { psi.state(a).unwrap() });
                    p * (after - base)
                })
                .sum()),
            GainMode::MonteCarlo { samples, seed } => {
                if samples == 0 {
                    return Err(Error::InvalidConfig("Monte-Carlo estimation needs at least one sample".into()));
                }
                let mut rng = stream(seed);
                let mut total = 0.0;
                for _ in 0..samples {
                    let mut phi = self.sample_realization(&mut rng);
                    for &(a, z) in psi.entries() {
                        phi[a] = z;
                    }
                    total += self.utility(&with_u, &phi) - self.utility(&psi.domain(), &phi);
                }
                Ok(total / samples as f64)
            }
        }
    }
}

impl AdaptiveModel for FiniteAdaptiveInstance {
    type Realization = Vec<usize>;
    type State = usize;

    fn ground_size(&self) -> usize {
        self.priors.len()
    }

    fn sample_realization(&self, rng: &mut StreamRng) -> Vec<usize> {
        (0..self.ground_size()).map(|u| self.sample_state(u, rng)).collect()
    }

    fn utility(&self, selected: &[usize], phi: &Vec<usize>) -> f64 {
        self.value_with(selected, |a| phi[a])
    }

    fn observe(&self, u: usize, phi: &Vec<usize>) -> usize {
        phi[u]
    }

    fn expected_gains(&self, candidates: &[usize], selected: &[usize], phi: &Vec<usize>) -> Vec<f64> {
        let psi = PartialRealization::restrict(phi, selected);
        candidates
            .iter()
            .map(|&u| self.expected_marginal_gain(u, &psi, GainMode::Exact).expect("candidates lie outside dom(ψ)"))
            .collect()
    }
}

/// Adaptive multi-product seeding. Revenue coefficients `α` are hidden and
/// drawn i.i.d. from a Lomax (Pareto type II) law; seeding node `v` with any
/// product reveals the coefficients of every out-neighbor of `v`.
#[derive(Debug, Clone)]
pub struct SocialAdaptiveModel {
    graph: SocialRevenueObjective,
    scale: f64,
    shape: f64,
}

impl SocialAdaptiveModel {
    /// `graph` supplies the network and product count; its own coefficients
    /// are ignored. Requires `shape > 1` so the coefficients have a mean.
    pub fn new(graph: SocialRevenueObjective, scale: f64, shape: f64) -> Result<Self> {
        if !(scale > 0.0 && shape > 1.0 && scale.is_finite() && shape.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "Lomax parameters need scale > 0 and shape > 1, got scale {scale}, shape {shape}"
            )));
        }
        Ok(Self { graph, scale, shape })
    }

    pub fn graph(&self) -> &SocialRevenueObjective {
        &self.graph
    }

    pub fn mean_alpha(&self) -> f64 {
        self.scale / (self.shape - 1.0)
    }

    fn draw(&self, rng: &mut StreamRng) -> f64 {
        let pareto = Pareto::new(self.scale, self.shape).expect("validated parameters");
        pareto.sample(rng) - self.scale
    }

    /// Nodes whose coefficients `selected` reveals.
    pub fn revealed_nodes(&self, selected: &[usize]) -> Vec<bool> {
        let d = self.graph.products();
        let mut revealed = vec![false; self.graph.nodes()];
        for &id in selected {
            for &(u, _) in self.graph.out_edges(id / d) {
                revealed[u] = true;
            }
        }
        revealed
    }

    fn posterior_alpha(&self, selected: &[usize], phi: &[f64]) -> Vec<f64> {
        let d = self.graph.products();
        let revealed = self.revealed_nodes(selected);
        (0..phi.len()).map(|j| if revealed[j / d] { phi[j] } else { self.mean_alpha() }).collect()
    }

    /// `Δ(id | ψ)` by resampling the unrevealed coefficients.
    pub fn monte_carlo_gain(&self, id: usize, selected: &[usize], phi: &[f64], samples: usize, seed: u64) -> f64 {
        let d = self.graph.products();
        let revealed = self.revealed_nodes(selected);
        let st = state_of(&self.graph, selected);
        let mut rng = stream(seed);
        let mut alpha = phi.to_vec();
        let mut total = 0.0;
        for _ in 0..samples {
            for (j, a) in alpha.iter_mut().enumerate() {
                if !revealed[j / d] {
                    *a = self.draw(&mut rng);
                }
            }
            total += self.graph.gain_with(&st, id, &alpha);
        }
        total / samples.max(1) as f64
    }
}

impl AdaptiveModel for SocialAdaptiveModel {
    type Realization = Vec<f64>;
    /// `(node, coefficients per product)` for each revealed out-neighbor.
    type State = Vec<(usize, Vec<f64>)>;

    fn ground_size(&self) -> usize {
        self.graph.nodes() * self.graph.products()
    }

    fn sample_realization(&self, rng: &mut StreamRng) -> Vec<f64> {
        (0..self.ground_size()).map(|_| self.draw(rng)).collect()
    }

    fn utility(&self, selected: &[usize], phi: &Vec<f64>) -> f64 {
        self.graph.revenue_with(selected, phi)
    }

    fn observe(&self, id: usize, phi: &Vec<f64>) -> Self::State {
        let d = self.graph.products();
        self.graph
            .out_edges(id / d)
            .iter()
            .map(|&(u, _)| (u, phi[u * d..(u + 1) * d].to_vec()))
            .collect()
    }

    // Unrevealed coefficients enter the gain linearly, so replacing them by
    // their mean gives the exact conditional expectation.
    fn expected_gains(&self, candidates: &[usize], selected: &[usize], phi: &Vec<f64>) -> Vec<f64> {
        let alpha = self.posterior_alpha(selected, phi);
        let st = state_of(&self.graph, selected);
        candidates.iter().map(|&id| self.graph.gain_with(&st, id, &alpha)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRecord<S> {
    pub element: usize,
    pub expected_gain: f64,
    pub accepted: bool,
    /// Observed only on acceptance.
    pub state: Option<S>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolicyTrace<S> {
    pub records: Vec<TraceRecord<S>>,
    pub selected: Vec<usize>,
    pub value: f64,
    /// Number of `Δ` evaluations.
    pub gain_queries: u64,
}

/// Runs the adaptive random greedy policy against the hidden realization
/// `phi`. `coins` drives acceptance only.
pub fn adapt_random_greedy<M: AdaptiveModel>(
    model: &M,
    sys: &dyn IndependenceSystem,
    p: f64,
    coins: &mut StreamRng,
    phi: &M::Realization,
) -> Result<PolicyTrace<M::State>> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::InvalidConfig(format!("acceptance probability must lie in (0, 1], got {p}")));
    }
    let n = model.ground_size();
    if sys.ground_size() != n {
        return Err(Error::InvalidInput(format!(
            "model has {n} elements but the constraint has {}",
            sys.ground_size()
        )));
    }
    let mut pool = vec![true; n];
    let mut sel = sys.empty_selection();
    let mut records = Vec::new();
    let mut gain_queries = 0u64;
    loop {
        let candidates: Vec<usize> = (0..n).filter(|&u| pool[u] && sys.can_extend(&sel, u)).collect();
        if candidates.is_empty() {
            break;
        }
        let gains = model.expected_gains(&candidates, sel.members(), phi);
        gain_queries += candidates.len() as u64;
        // Strict comparison keeps the lowest id among ties.
        let (mut best, mut best_gain) = (candidates[0], gains[0]);
        for (&u, &g) in candidates.iter().zip(&gains).skip(1) {
            if g > best_gain {
                best = u;
                best_gain = g;
            }
        }
        if best_gain <= GAIN_TOLERANCE {
            break;
        }
        pool[best] = false;
        let accepted = coins.gen::<f64>() < p;
        let state = if accepted {
            sys.extend(&mut sel, best);
            Some(model.observe(best, phi))
        } else {
            None
        };
        records.push(TraceRecord { element: best, expected_gain: best_gain, accepted, state });
    }
    let selected = sel.members().to_vec();
    let value = model.utility(&selected, phi);
    Ok(PolicyTrace { records, selected, value, gain_queries })
}

/// Monte-Carlo estimate of `f_avg` for a policy: trial `t` draws `φ` and a
/// coin stream from independent substreams of `seed`. Returns `(mean, stderr)`.
pub fn policy_average_value<M, P>(model: &M, trials: usize, seed: u64, policy: P) -> Result<(f64, f64)>
where
    M: AdaptiveModel,
    P: Fn(&M::Realization, &mut StreamRng) -> Result<f64> + Sync,
{
    if trials == 0 {
        return Err(Error::InvalidConfig("at least one trial is required".into()));
    }
    let values = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let phi = model.sample_realization(&mut substream(seed, &[t, 0]));
            let mut coins = stream(derive_seed(seed, &[t, 1]));
            policy(&phi, &mut coins)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(mean_stderr(&values))
}

/// Average value of [`adapt_random_greedy`] over `trials` realizations.
pub fn adapt_random_greedy_average<M: AdaptiveModel>(
    model: &M,
    sys: &dyn IndependenceSystem,
    p: f64,
    trials: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    policy_average_value(model, trials, seed, |phi, coins| {
        Ok(adapt_random_greedy(model, sys, p, coins, phi)?.value)
    })
}

/// `(pk + 1) / (p(1 − p))`.
pub fn adaptive_ratio_bound(p: f64, k: usize) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidInput(format!("the adaptive bound needs 0 < p < 1, got {p}")));
    }
    if k == 0 {
        return Err(Error::InvalidInput("k must be positive".into()));
    }
    Ok((p * k as f64 + 1.0) / (p * (1.0 - p)))
}

/// `(1 + √(k+1))⁻¹`, the minimizer of [`adaptive_ratio_bound`].
pub fn adaptive_default_p(k: usize) -> f64 {
    1.0 / (1.0 + ((k + 1) as f64).sqrt())
}
