//! Multi-solution random greedy and its relatives.
//!
//! [`random_multi_greedy`] grows `ℓ` candidate solutions side by side. Each
//! step takes the feasible (element, solution) pair of largest marginal gain,
//! adds the element to that solution with probability `p`, and retires the
//! element either way. [`accelerated_random_multi_greedy`] finds the same kind
//! of pair from per-solution priority lists with stale upper bounds.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objectives::{GainState, SetFunction};
use crate::oracle::{IndependenceOracle, ValueOracle};
use crate::report::RunReport;
use crate::rng::{stream, StreamRng};
use crate::systems::{IndependenceSystem, Selection};
use crate::{debug_asserts_from_env, GAIN_TOLERANCE};

const CHECK_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MultiGreedyConfig {
    /// Number of candidate solutions `ℓ`.
    pub l: usize,
    /// Acceptance probability.
    pub p: f64,
    /// Lazy-evaluation slack (accelerated variant only).
    pub epsilon: f64,
    pub seed: u64,
    /// Re-scan invariants after every step. Also enabled by `KSYS_DEBUG_ASSERT=1`.
    pub debug_checks: bool,
}

impl MultiGreedyConfig {
    pub fn new(l: usize, p: f64) -> Self {
        Self { l, p, epsilon: 0.1, seed: 0, debug_checks: false }
    }

    /// `ℓ = 2`, `p = 2/(1+√k)`: the randomized setting with ratio `(1+√k)²`.
    pub fn randomized(k: usize) -> Self {
        Self::new(2, 2.0 / (1.0 + (k.max(1) as f64).sqrt()))
    }

    /// `ℓ = ⌈√k⌉ + 1`, `p = 1`: the deterministic setting.
    pub fn deterministic(k: usize) -> Self {
        Self::new(ceil_sqrt(k.max(1)) + 1, 1.0)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_debug_checks(mut self, on: bool) -> Self {
        self.debug_checks = on;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.l == 0 {
            return Err(Error::InvalidConfig("ℓ must be at least 1".into()));
        }
        if !(self.p > 0.0 && self.p <= 1.0) {
            return Err(Error::InvalidConfig(format!("p must lie in (0, 1], got {}", self.p)));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidConfig(format!("ε must be non-negative, got {}", self.epsilon)));
        }
        Ok(())
    }

    fn checks(&self) -> bool {
        self.debug_checks || debug_asserts_from_env()
    }
}

/// Exact integer `⌈√k⌉`.
pub fn ceil_sqrt(k: usize) -> usize {
    let mut r = (k as f64).sqrt() as usize;
    while r * r < k {
        r += 1;
    }
    while r > 0 && (r - 1) * (r - 1) >= k {
        r -= 1;
    }
    r
}

fn check_sizes(f: &dyn SetFunction, sys: &dyn IndependenceSystem) -> Result<()> {
    if f.ground_size() != sys.ground_size() {
        return Err(Error::InvalidInput(format!(
            "objective has {} elements but the constraint has {}",
            f.ground_size(),
            sys.ground_size()
        )));
    }
    Ok(())
}

/// The candidate solutions a multi-greedy run ends with.
struct Outcome {
    states: Vec<GainState>,
    steps: u64,
}

fn best_of(states: &[GainState]) -> &GainState {
    states.iter().fold(&states[0], |best, s| if s.value() > best.value() { s } else { best })
}

fn report(name: &str, state: &GainState, val: &ValueOracle, ind: &IndependenceOracle, steps: u64, seed: u64) -> RunReport {
    RunReport {
        algorithm: name.to_string(),
        solution: state.members().to_vec(),
        value: state.value(),
        value_queries: val.queries(),
        independence_queries: ind.queries(),
        steps,
        seed,
        rounds: None,
        wall_ms: None,
    }
}

fn contract(msg: String) -> Error {
    Error::Contract(msg)
}

fn with_member(set: &[usize], u: usize) -> Vec<usize> {
    let mut s = set.to_vec();
    s.push(u);
    s
}

fn exact_gain(f: &dyn SetFunction, set: &[usize], u: usize) -> f64 {
    f.evaluate(&with_member(set, u)) - f.evaluate(set)
}

fn multi_greedy_core(
    val: &ValueOracle,
    ind: &IndependenceOracle,
    cfg: &MultiGreedyConfig,
    rng: &mut StreamRng,
) -> Result<Outcome> {
    let n = ind.ground_size();
    let empty = val.empty_state();
    let mut states = vec![empty; cfg.l];
    let mut sels: Vec<Selection> = (0..cfg.l).map(|_| ind.empty_selection()).collect();
    let mut pool = vec![true; n];
    let checks = cfg.checks();
    let mut steps = 0;
    loop {
        let mut best: Option<(usize, usize, f64)> = None;
        for u in (0..n).filter(|&u| pool[u]) {
            for i in 0..cfg.l {
                if !ind.can_extend(&sels[i], u) {
                    continue;
                }
                let g = val.gain(&states[i], u);
                // Strict comparison keeps the lowest element id, then the
                // lowest solution index, among ties.
                if best.is_none_or(|(_, _, b)| g > b) {
                    best = Some((u, i, g));
                }
            }
        }
        let Some((u, i, g)) = best.filter(|&(_, _, g)| g > GAIN_TOLERANCE) else {
            break;
        };
        if checks {
            check_dominance(val.function(), ind.system(), &states, &pool, g)?;
        }
        steps += 1;
        pool[u] = false;
        if rng.gen::<f64>() < cfg.p {
            val.commit(&mut states[i], u);
            ind.extend(&mut sels[i], u);
            if checks {
                check_solutions(ind.system(), &states)?;
            }
        }
    }
    Ok(Outcome { states, steps })
}

/// Every remaining feasible pair has gain at most `chosen`.
fn check_dominance(
    f: &dyn SetFunction,
    sys: &dyn IndependenceSystem,
    states: &[GainState],
    pool: &[bool],
    chosen: f64,
) -> Result<()> {
    for (i, st) in states.iter().enumerate() {
        for u in (0..pool.len()).filter(|&u| pool[u]) {
            if sys.contains(&with_member(st.members(), u)) {
                let g = exact_gain(f, st.members(), u);
                if g > chosen + CHECK_TOL {
                    return Err(contract(format!(
                        "greedy step chose gain {chosen} but ({u}, S_{i}) offers {g}"
                    )));
                }
            }
        }
    }
    Ok(())
}

/// Every candidate solution is independent and pairwise disjoint.
fn check_solutions(sys: &dyn IndependenceSystem, states: &[GainState]) -> Result<()> {
    let mut owner = vec![usize::MAX; sys.ground_size()];
    for (i, st) in states.iter().enumerate() {
        if !sys.contains(st.members()) {
            return Err(contract(format!("solution S_{i} = {:?} is not independent", st.members())));
        }
        for &u in st.members() {
            if owner[u] != usize::MAX {
                return Err(contract(format!("element {u} appears in S_{} and S_{i}", owner[u])));
            }
            owner[u] = i;
        }
    }
    Ok(())
}

/// Random multi-solution greedy. Returns the best of the `ℓ` solutions.
pub fn random_multi_greedy(
    f: &dyn SetFunction,
    sys: &dyn IndependenceSystem,
    cfg: &MultiGreedyConfig,
) -> Result<RunReport> {
    cfg.validate()?;
    check_sizes(f, sys)?;
    let val = ValueOracle::new(f);
    let ind = IndependenceOracle::new(sys);
    let out = multi_greedy_core(&val, &ind, cfg, &mut stream(cfg.seed))?;
    let name = if cfg.l == 1 && cfg.p == 1.0 { "greedy" } else { "rmg" };
    Ok(report(name, best_of(&out.states), &val, &ind, out.steps, cfg.seed))
}

/// Plain greedy: [`random_multi_greedy`] with `ℓ = 1`, `p = 1`.
pub fn standard_greedy(f: &dyn SetFunction, sys: &dyn IndependenceSystem) -> Result<RunReport> {
    random_multi_greedy(f, sys, &MultiGreedyConfig::new(1, 1.0))
}

#[derive(Debug, Clone, Copy)]
struct Entry {
    weight: f64,
    u: usize,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

// Max-heap on weight, then on lower id.
impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.weight.total_cmp(&other.weight).then_with(|| other.u.cmp(&self.u))
    }
}

/// Priority list `A_i` for one candidate solution.
struct LazyList {
    heap: BinaryHeap<Entry>,
    in_list: Vec<bool>,
    weight: Vec<f64>,
    /// Size of `S_i` when `weight[u]` was computed.
    computed_at: Vec<usize>,
    updates: Vec<u32>,
}

/// Lazy-evaluation state shared by all lists.
struct Lazy<'o, 'a> {
    val: &'o ValueOracle<'a>,
    ind: &'o IndependenceOracle<'a>,
    lists: Vec<LazyList>,
    states: Vec<GainState>,
    sels: Vec<Selection>,
    epsilon: f64,
    cap: u32,
}

impl Lazy<'_, '_> {
    /// Pops `A_i` until an element whose fresh gain is within `1/(1+ε)` of
    /// its cached weight appears.
    fn choose(&mut self, i: usize) -> Option<usize> {
        let list = &mut self.lists[i];
        let version = self.states[i].len();
        while let Some(Entry { u, .. }) = list.heap.pop() {
            if !list.in_list[u] {
                continue;
            }
            list.in_list[u] = false;
            if list.computed_at[u] == version {
                return Some(u);
            }
            if !self.ind.can_extend(&self.sels[i], u) {
                continue;
            }
            let old = list.weight[u];
            list.updates[u] += 1;
            let new = self.val.gain(&self.states[i], u);
            list.weight[u] = new;
            list.computed_at[u] = version;
            if new <= GAIN_TOLERANCE {
                continue;
            }
            if new >= old / (1.0 + self.epsilon) {
                return Some(u);
            }
            if list.updates[u] as u64 <= self.cap as u64 {
                list.in_list[u] = true;
                list.heap.push(Entry { weight: new, u });
            }
        }
        None
    }

    fn remove_everywhere(&mut self, u: usize) {
        for list in &mut self.lists {
            list.in_list[u] = false;
        }
    }

    /// `(1+ε)·f(v|S_i) ≥ f(u|S_i)` for every feasible `u` still in `A_i`.
    fn check_soundness(&self, i: usize, v: usize) -> Result<()> {
        let f = self.val.function();
        let sys = self.ind.system();
        let members = self.states[i].members();
        let gv = exact_gain(f, members, v);
        let list = &self.lists[i];
        for u in (0..list.in_list.len()).filter(|&u| list.in_list[u]) {
            if sys.contains(&with_member(members, u)) {
                let gu = exact_gain(f, members, u);
                if gu > (1.0 + self.epsilon) * gv + CHECK_TOL {
                    return Err(contract(format!(
                        "lazy choice {v} for S_{i} has gain {gv} but {u} offers {gu}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// `⌈log_{1+ε}(ℓ·r̂/ε)⌉`, at least 1.
pub fn lazy_update_cap(l: usize, rank: usize, epsilon: f64) -> u32 {
    let x = (l * rank.max(1)) as f64 / epsilon;
    (x.ln() / epsilon.ln_1p()).ceil().max(1.0) as u32
}

/// Random multi-greedy with lazy evaluation. Requires `ε > 0`. The answer is
/// the best of the `ℓ` solutions and the best feasible singleton.
pub fn accelerated_random_multi_greedy(
    f: &dyn SetFunction,
    sys: &dyn IndependenceSystem,
    cfg: &MultiGreedyConfig,
) -> Result<RunReport> {
    cfg.validate()?;
    check_sizes(f, sys)?;
    if cfg.epsilon <= 0.0 {
        return Err(Error::InvalidConfig("the accelerated variant needs ε > 0".into()));
    }
    let val = ValueOracle::new(f);
    let ind = IndependenceOracle::new(sys);
    let (candidates, singleton, steps) = accelerated_core(&val, &ind, cfg, &mut stream(cfg.seed))?;
    let mut best = best_of(&candidates);
    if let Some(s0) = singleton.as_ref() {
        if s0.value() > best.value() {
            best = s0;
        }
    }
    Ok(report("ramg", best, &val, &ind, steps, cfg.seed))
}

type AcceleratedOutcome = (Vec<GainState>, Option<GainState>, u64);

fn accelerated_core(
    val: &ValueOracle,
    ind: &IndependenceOracle,
    cfg: &MultiGreedyConfig,
    rng: &mut StreamRng,
) -> Result<AcceleratedOutcome> {
    let n = ind.ground_size();
    let l = cfg.l;
    let empty = val.empty_state();
    let empty_sel = ind.empty_selection();
    let cap = lazy_update_cap(l, ind.system().rank_upper_bound(), cfg.epsilon);

    // Initial weights f(u|∅) are shared by every list.
    let mut weight = vec![0.0; n];
    let mut admitted = vec![false; n];
    let mut singleton: Option<(usize, f64)> = None;
    for u in 0..n {
        if !ind.can_extend(&empty_sel, u) {
            continue;
        }
        let g = val.gain(&empty, u);
        weight[u] = g;
        admitted[u] = g > GAIN_TOLERANCE;
        if singleton.is_none_or(|(_, b)| g > b) {
            singleton = Some((u, g));
        }
    }
    let heap: BinaryHeap<Entry> = (0..n).filter(|&u| admitted[u]).map(|u| Entry { weight: weight[u], u }).collect();
    let list = LazyList {
        heap,
        in_list: admitted,
        weight,
        computed_at: vec![0; n],
        updates: vec![0; n],
    };
    let mut lazy = Lazy {
        val,
        ind,
        lists: (0..l)
            .map(|_| LazyList {
                heap: list.heap.clone(),
                in_list: list.in_list.clone(),
                weight: list.weight.clone(),
                computed_at: list.computed_at.clone(),
                updates: list.updates.clone(),
            })
            .collect(),
        states: vec![empty.clone(); l],
        sels: vec![empty_sel; l],
        epsilon: cfg.epsilon,
        cap,
    };
    let checks = cfg.checks();

    let mut v: Vec<Option<usize>> = (0..l).map(|i| lazy.choose(i)).collect();
    let mut steps = 0;
    loop {
        // Largest cached gain; ties go to the lowest element id, then the
        // lowest solution index.
        let mut pick: Option<(usize, usize, f64)> = None;
        for (i, vi) in v.iter().enumerate() {
            if let Some(u) = *vi {
                let g = lazy.lists[i].weight[u];
                let better = match pick {
                    None => true,
                    Some((bu, _, bg)) => g > bg || (g == bg && u < bu),
                };
                if better {
                    pick = Some((u, i, g));
                }
            }
        }
        let Some((u, i, _)) = pick else { break };
        if checks {
            lazy.check_soundness(i, u)?;
        }
        lazy.remove_everywhere(u);
        steps += 1;
        if rng.gen::<f64>() < cfg.p {
            val.commit(&mut lazy.states[i], u);
            ind.extend(&mut lazy.sels[i], u);
            if checks {
                check_solutions(ind.system(), &lazy.states)?;
            }
        }
        for (j, vj) in v.iter_mut().enumerate() {
            if *vj == Some(u) {
                *vj = lazy.choose(j);
            }
        }
    }

    let singleton = singleton.map(|(u, _)| {
        let mut s = empty.clone();
        val.commit(&mut s, u);
        s
    });
    Ok((lazy.states, singleton, steps))
}

/// Randomized double greedy over `set`: `X` grows from `∅`, `Y` shrinks from
/// `set`, and each element joins `X` with probability `a⁺/(a⁺+b⁺)`
/// (probability 1 when both clamp to 0).
pub fn usm_double_greedy(val: &ValueOracle, set: &[usize], rng: &mut StreamRng) -> Result<Vec<usize>> {
    let mut x = val.empty_state();
    let mut y: Vec<usize> = set.to_vec();
    let mut fy = val.value(&y)?;
    for &u in set {
        let a = val.gain(&x, u).max(0.0);
        let without: Vec<usize> = y.iter().copied().filter(|&v| v != u).collect();
        let f_without = val.value(&without)?;
        let b = (f_without - fy).max(0.0);
        let prob = if a + b == 0.0 { 1.0 } else { a / (a + b) };
        if rng.gen::<f64>() < prob {
            val.commit(&mut x, u);
        } else {
            y = without;
            fy = f_without;
        }
    }
    Ok(x.members().to_vec())
}

/// Greedy over the elements marked in `pool`, stopping at the first
/// non-positive best gain.
fn greedy_on(val: &ValueOracle, ind: &IndependenceOracle, pool: &[bool]) -> GainState {
    let mut st = val.empty_state();
    let mut sel = ind.empty_selection();
    let mut left = pool.to_vec();
    loop {
        let mut best: Option<(usize, f64)> = None;
        for u in (0..left.len()).filter(|&u| left[u]) {
            if !ind.can_extend(&sel, u) {
                continue;
            }
            let g = val.gain(&st, u);
            if best.is_none_or(|(_, b)| g > b) {
                best = Some((u, g));
            }
        }
        match best {
            Some((u, g)) if g > GAIN_TOLERANCE => {
                left[u] = false;
                val.commit(&mut st, u);
                ind.extend(&mut sel, u);
            }
            _ => return st,
        }
    }
}

/// Repeated greedy baseline: `ℓ` greedy passes over the elements not used by
/// earlier passes, each followed by double greedy on its output.
pub fn repeated_greedy(f: &dyn SetFunction, sys: &dyn IndependenceSystem, l: usize, seed: u64) -> Result<RunReport> {
    if l == 0 {
        return Err(Error::InvalidConfig("ℓ must be at least 1".into()));
    }
    check_sizes(f, sys)?;
    let val = ValueOracle::new(f);
    let ind = IndependenceOracle::new(sys);
    let mut rng = stream(seed);
    let mut pool = vec![true; f.ground_size()];
    let mut best = val.empty_state();
    for _ in 0..l {
        let s = greedy_on(&val, &ind, &pool);
        for &u in s.members() {
            pool[u] = false;
        }
        let refined = usm_double_greedy(&val, s.members(), &mut rng)?;
        let refined_value = val.value(&refined)?;
        if s.value() > best.value() {
            best = s.clone();
        }
        if refined_value > best.value() {
            best = crate::objectives::state_of(f, &refined);
        }
    }
    Ok(report("repg", &best, &val, &ind, l as u64, seed))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Variant {
    Plain,
    Accelerated { epsilon: f64 },
    Monotone,
}

/// Approximation ratio `f(O)/E[f(S*)]` guaranteed for the given parameters:
/// `ℓ(k + ℓ/p − 1)/(ℓ − p)`, times `(1+ε)` for the accelerated variant, and
/// `k + 1` for monotone objectives with `ℓ = p = 1`.
pub fn ratio_bound(l: usize, p: f64, k: usize, variant: Variant) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidInput("k must be positive".into()));
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::InvalidInput(format!("p must lie in (0, 1], got {p}")));
    }
    let (lf, kf) = (l as f64, k as f64);
    match variant {
        Variant::Monotone => {
            if l != 1 || p != 1.0 {
                return Err(Error::InvalidInput("the monotone bound needs ℓ = 1 and p = 1".into()));
            }
            Ok(kf + 1.0)
        }
        Variant::Plain | Variant::Accelerated { .. } => {
            if lf <= p {
                return Err(Error::InvalidInput(format!("the bound needs ℓ > p, got ℓ = {l}, p = {p}")));
            }
            let plain = lf * (kf + lf / p - 1.0) / (lf - p);
            match variant {
                Variant::Accelerated { epsilon } if epsilon >= 0.0 => Ok((1.0 + epsilon) * plain),
                Variant::Accelerated { epsilon } => Err(Error::InvalidInput(format!("ε must be non-negative, got {epsilon}"))),
                _ => Ok(plain),
            }
        }
    }
}
