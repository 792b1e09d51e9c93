//! Brute-force and statistical oracles for small instances.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adaptive::FiniteAdaptiveInstance;
use crate::error::{Error, Result};
use crate::objectives::{
    CoverageDiversityObjective, GainState, GraphCutObjective, ImageSummaryObjective, SetFunction, SimilarityMatrix,
};
use crate::rng::{derive_seed, substream, StreamRng};
use crate::systems::{members_of, selection_of, ExplicitSystem, IndependenceSystem, PartitionMatroidSystem, Selection};

/// Largest ground set [`exhaustive_max`] accepts.
pub const EXHAUSTIVE_MAX_N: usize = 20;
/// Limits of [`exhaustive_optimal_policy`].
pub const POLICY_MAX_N: usize = 5;
pub const POLICY_MAX_STATES: usize = 3;

/// Smallest `k ≥ 1` such that for every `Y ⊆ N` and bases `X₁, X₂` of `Y`,
/// `|X₁| ≤ k·|X₂|`. `table` must be down-closed.
///
/// Enumerates every (Y, X ⊆ Y) pair, so the cost is `3^n`.
pub fn measured_k_of_table(n: usize, table: &[bool]) -> usize {
    let size = 1usize << n;
    // ext[x]: elements outside x that extend it
    let ext: Vec<usize> = (0..size)
        .map(|x| {
            if !table[x] {
                return 0;
            }
            (0..n).filter(|&u| x >> u & 1 == 0 && table[x | 1 << u]).fold(0, |m, u| m | 1 << u)
        })
        .collect();
    let mut k = 1;
    for y in 0..size {
        let (mut lo, mut hi) = (u32::MAX, 0u32);
        let mut x = y;
        loop {
            if table[x] && ext[x] & y == 0 {
                let c = x.count_ones();
                lo = lo.min(c);
                hi = hi.max(c);
            }
            if x == 0 {
                break;
            }
            x = (x - 1) & y;
        }
        if lo > 0 {
            k = k.max(hi.div_ceil(lo) as usize);
        }
    }
    k
}

pub fn measured_k(sys: &ExplicitSystem) -> usize {
    measured_k_of_table(sys.ground_size(), sys.table())
}

/// Measures `k` of any small system by encoding it explicitly. Fails with a
/// contract error when the family is not down-closed.
pub fn measured_k_of(sys: &dyn IndependenceSystem) -> Result<usize> {
    Ok(measured_k(&ExplicitSystem::encode(sys)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExhaustiveResult {
    pub optimum: Vec<usize>,
    pub value: f64,
    /// Independent sets visited, including `∅`.
    pub enumerated: u64,
}

/// `max{f(S) : S ∈ I}` by depth-first enumeration of independent sets in
/// increasing id order. A set that cannot be extended by `u` prunes every
/// superset through `u`, which is sound for down-closed families.
pub fn exhaustive_max(f: &dyn SetFunction, sys: &dyn IndependenceSystem) -> Result<ExhaustiveResult> {
    let n = sys.ground_size();
    if f.ground_size() != n {
        return Err(Error::InvalidInput(format!(
            "objective has {} elements but the constraint has {n}",
            f.ground_size()
        )));
    }
    if n > EXHAUSTIVE_MAX_N {
        return Err(Error::Refused(format!("exhaustive search is limited to n ≤ {EXHAUSTIVE_MAX_N}, got n = {n}")));
    }
    let mut search = Search { f, sys, n, best_value: f.evaluate(&[]), best: Vec::new(), enumerated: 1 };
    search.visit(0, &f.empty_state(), &sys.empty_selection());
    let value = f.evaluate(&search.best);
    Ok(ExhaustiveResult { optimum: search.best, value, enumerated: search.enumerated })
}

struct Search<'a> {
    f: &'a dyn SetFunction,
    sys: &'a dyn IndependenceSystem,
    n: usize,
    best_value: f64,
    best: Vec<usize>,
    enumerated: u64,
}

impl Search<'_> {
    fn visit(&mut self, start: usize, state: &GainState, sel: &Selection) {
        for u in start..self.n {
            if !self.sys.can_extend(sel, u) {
                continue;
            }
            let mut st = state.clone();
            self.f.commit(&mut st, u);
            let mut next = sel.clone();
            self.sys.extend(&mut next, u);
            self.enumerated += 1;
            if st.value() > self.best_value {
                self.best_value = st.value();
                self.best = st.members().to_vec();
            }
            self.visit(u + 1, &st, &next);
        }
    }
}

/// `f_avg` of an optimal adaptive policy, by dynamic programming over
/// partial realizations. A policy may stop at any point, collecting
/// `f(dom(ψ), ψ)`, or select a feasible element and observe its state.
pub fn exhaustive_optimal_policy(inst: &FiniteAdaptiveInstance, sys: &dyn IndependenceSystem) -> Result<f64> {
    let n = inst.ground_size();
    if sys.ground_size() != n {
        return Err(Error::InvalidInput(format!(
            "instance has {n} elements but the constraint has {}",
            sys.ground_size()
        )));
    }
    if n > POLICY_MAX_N || inst.max_states() > POLICY_MAX_STATES {
        return Err(Error::Refused(format!(
            "optimal policies are limited to n ≤ {POLICY_MAX_N} and at most {POLICY_MAX_STATES} states, \
             got n = {n} and {} states",
            inst.max_states()
        )));
    }
    let mut memo = HashMap::new();
    Ok(policy_value(inst, sys, 0, 0, &mut memo))
}

// States are packed two bits per element into `code`.
fn policy_value(
    inst: &FiniteAdaptiveInstance,
    sys: &dyn IndependenceSystem,
    mask: usize,
    code: usize,
    memo: &mut HashMap<(usize, usize), f64>,
) -> f64 {
    if let Some(&v) = memo.get(&(mask, code)) {
        return v;
    }
    let dom = members_of(mask);
    let mut best = inst.value_with(&dom, |a| code >> (2 * a) & 3);
    let sel = selection_of(sys, &dom);
    for u in (0..inst.ground_size()).filter(|&u| mask >> u & 1 == 0) {
        if !sys.can_extend(&sel, u) {
            continue;
        }
        let expected: f64 = inst.priors()[u]
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(z, &p)| p * policy_value(inst, sys, mask | 1 << u, code | z << (2 * u), memo))
            .sum();
        best = best.max(expected);
    }
    memo.insert((mask, code), best);
    best
}

/// Sample mean and standard error of the mean.
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let t = values.len();
    if t == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / t as f64;
    if t == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (t - 1) as f64;
    (mean, (var / t as f64).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioCheckReport {
    pub algorithm: String,
    pub trials: usize,
    pub mean: f64,
    pub stderr: f64,
    pub optimum: f64,
    pub bound: f64,
    /// `optimum / bound`.
    pub target: f64,
    pub pass: bool,
}

/// Runs `run(seed_t)` for `trials` derived seeds and checks
/// `mean ≥ optimum / bound − 3·stderr`.
pub fn monte_carlo_ratio_check<F>(
    algorithm: &str,
    optimum: f64,
    bound: f64,
    trials: usize,
    seed: u64,
    run: F,
) -> Result<RatioCheckReport>
where
    F: Fn(u64) -> Result<f64> + Sync,
{
    if trials < 100 {
        return Err(Error::InvalidConfig(format!("a ratio check needs at least 100 trials, got {trials}")));
    }
    if !(bound > 0.0) {
        return Err(Error::InvalidConfig(format!("bound must be positive, got {bound}")));
    }
    let values = (0..trials as u64)
        .into_par_iter()
        .map(|t| run(derive_seed(seed, &[t])))
        .collect::<Result<Vec<f64>>>()?;
    let (mean, stderr) = mean_stderr(&values);
    let target = optimum / bound;
    Ok(RatioCheckReport {
        algorithm: algorithm.to_string(),
        trials,
        mean,
        stderr,
        optimum,
        bound,
        target,
        pass: mean >= target - 3.0 * stderr,
    })
}

fn random_subset(rng: &mut StreamRng, n: usize) -> Vec<usize> {
    (0..n).filter(|_| rng.gen_bool(0.5)).collect()
}

/// Samples `(X, Y)` pairs for `f(X) + f(Y) ≥ f(X∪Y) + f(X∩Y)` and
/// `(X ⊆ Y, x ∉ Y)` triples for `f(x|Y) ≤ f(x|X)`. False on any violation
/// beyond `1e-9`.
pub fn submodularity_check(f: &dyn SetFunction, samples: usize, rng: &mut StreamRng) -> bool {
    const TOL: f64 = 1e-9;
    let n = f.ground_size();
    for _ in 0..samples {
        let x = random_subset(rng, n);
        let y = random_subset(rng, n);
        let union: Vec<usize> = (0..n).filter(|u| x.contains(u) || y.contains(u)).collect();
        let inter: Vec<usize> = x.iter().copied().filter(|u| y.contains(u)).collect();
        if f.evaluate(&x) + f.evaluate(&y) < f.evaluate(&union) + f.evaluate(&inter) - TOL {
            return false;
        }
        let outside: Vec<usize> = (0..n).filter(|u| !union.contains(u)).collect();
        if let Some(&e) = outside.choose(rng) {
            let gain = |set: &[usize]| {
                let mut with = set.to_vec();
                with.push(e);
                f.evaluate(&with) - f.evaluate(set)
            };
            if gain(&union) > gain(&x) + TOL {
                return false;
            }
        }
    }
    true
}

/// Intersection of `k` random partition matroids over `n` elements, each
/// with 2 to 4 categories of capacity 1 or 2.
pub fn random_partition_intersection(n: usize, k: usize, rng: &mut StreamRng) -> Result<ExplicitSystem> {
    let matroids: Vec<PartitionMatroidSystem> = (0..k)
        .map(|_| {
            let c = rng.gen_range(2..=4);
            let category = (0..n).map(|_| rng.gen_range(0..c)).collect();
            let caps = (0..c).map(|_| rng.gen_range(1..=2)).collect();
            PartitionMatroidSystem::new(category, caps, n).expect("categories are in range")
        })
        .collect();
    let table = (0..1usize << n)
        .map(|m| {
            let set = members_of(m);
            matroids.iter().all(|p| p.contains(&set))
        })
        .collect();
    ExplicitSystem::from_table(n, table)
}

/// A random explicit system whose measured `k` equals `k`.
pub fn random_k_system(n: usize, k: usize, rng: &mut StreamRng) -> Result<ExplicitSystem> {
    if k == 0 {
        return Err(Error::InvalidInput("k must be positive".into()));
    }
    for _ in 0..500 {
        let sys = random_partition_intersection(n, k, rng)?;
        if sys.declared_k() == k {
            return Ok(sys);
        }
    }
    Err(Error::InvalidInput(format!("could not generate a system with measured k = {k} over {n} elements")))
}

/// One exhaustively solved instance of a ratio suite.
pub struct SuiteInstance {
    pub label: String,
    pub system: ExplicitSystem,
    pub objective: Box<dyn SetFunction>,
    pub optimum: ExhaustiveResult,
}

impl SuiteInstance {
    pub fn k(&self) -> usize {
        self.system.declared_k()
    }
}

fn random_features(n: usize, dim: usize, rng: &mut StreamRng) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect()
}

/// `count` instances with `n ∈ [8, 12]`, cycling through `ks`. Non-monotone
/// suites alternate coverage–diversity and cut objectives; monotone suites
/// alternate facility location and pure coverage.
pub fn ratio_suite(count: usize, ks: &[usize], monotone: bool, seed: u64) -> Result<Vec<SuiteInstance>> {
    (0..count)
        .map(|i| {
            let mut rng = substream(seed, &[i as u64]);
            let k = ks[i % ks.len()];
            let n = rng.gen_range(8..=12);
            let system = random_k_system(n, k, &mut rng)?;
            let (name, objective): (&str, Box<dyn SetFunction>) = match (monotone, i / ks.len() % 2) {
                (false, 0) => {
                    let m = SimilarityMatrix::from_features(&random_features(n, 5, &mut rng), 0.2)?;
                    ("coverage_diversity", Box::new(CoverageDiversityObjective::new(m)))
                }
                (false, _) => {
                    let edges: Vec<(usize, usize, f64)> = (0..n)
                        .flat_map(|u| (u + 1..n).map(move |v| (u, v)))
                        .filter_map(|(u, v)| rng.gen_bool(0.4).then(|| (u, v, rng.gen_range(0.0..1.0))))
                        .collect();
                    ("cut", Box::new(GraphCutObjective::new(n, &edges)?))
                }
                (true, 0) => {
                    let pos: Vec<Vec<f64>> =
                        random_features(n, 5, &mut rng).into_iter().map(|r| r.into_iter().map(f64::abs).collect()).collect();
                    let s = SimilarityMatrix::cosine_from_features(&pos)?;
                    ("facility_location", Box::new(ImageSummaryObjective::new(s).without_diversity()))
                }
                (true, _) => {
                    let m = SimilarityMatrix::from_features(&random_features(n, 5, &mut rng), 0.2)?;
                    ("coverage", Box::new(CoverageDiversityObjective::new(m).without_diversity()))
                }
            };
            let optimum = exhaustive_max(objective.as_ref(), &system)?;
            Ok(SuiteInstance { label: format!("#{i} {name} n={n} k={k}"), system, objective, optimum })
        })
        .collect()
}

/// One adaptive fixture with its optimal policy value.
pub struct AdaptiveFixture {
    pub label: String,
    pub instance: FiniteAdaptiveInstance,
    pub system: ExplicitSystem,
    /// `f_avg` of the optimal policy.
    pub optimum: f64,
}

/// `count` fixtures with `n ∈ [3, 4]`, at most 3 states per element, cycling
/// through `ks`.
pub fn adaptive_suite(count: usize, ks: &[usize], monotone: bool, seed: u64) -> Result<Vec<AdaptiveFixture>> {
    (0..count)
        .map(|i| {
            let mut rng = substream(seed, &[i as u64]);
            let k = ks[i % ks.len()];
            let n = rng.gen_range(3..=4);
            let instance = FiniteAdaptiveInstance::random(n, POLICY_MAX_STATES, monotone, &mut rng);
            let system = random_k_system(n, k, &mut rng)?;
            let optimum = exhaustive_optimal_policy(&instance, &system)?;
            Ok(AdaptiveFixture { label: format!("#{i} n={n} k={k}"), instance, system, optimum })
        })
        .collect()
}
