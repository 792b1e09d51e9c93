//! Threshold-sweep random greedy with batched, low-adaptivity rounds.
//!
//! Queries are issued in synchronized batches and the [`RoundLedger`] counts
//! one round per batch, so adaptivity can be measured without real
//! parallelism. The simulator runs each batch sequentially.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_ids, Error, Result};
use crate::objectives::{GainState, SetFunction};
use crate::oracle::{IndependenceOracle, ValueOracle};
use crate::report::{RoundLedger, RunReport};
use crate::rng::{stream, StreamRng};
use crate::systems::{selection_of, IndependenceSystem, Selection};
use crate::{debug_asserts_from_env, GAIN_TOLERANCE};

const CHECK_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatchedConfig {
    /// Acceptance probability for a drawn prefix.
    pub p: f64,
    /// Threshold decay and batch shrink factor.
    pub epsilon: f64,
    pub seed: u64,
    /// Re-scan invariants after every batch. Also enabled by `KSYS_DEBUG_ASSERT=1`.
    pub debug_checks: bool,
}

impl BatchedConfig {
    pub fn new(p: f64, epsilon: f64) -> Self {
        Self { p, epsilon, seed: 0, debug_checks: false }
    }

    /// `p = 1/(1+√(k+1))`, `ε = 0.1`.
    pub fn for_k(k: usize) -> Self {
        Self::new(batched_default_p(k), 0.1)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_debug_checks(mut self, on: bool) -> Self {
        self.debug_checks = on;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p > 0.0 && self.p <= 1.0) {
            return Err(Error::InvalidConfig(format!("p must lie in (0, 1], got {}", self.p)));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidConfig(format!("ε must be positive, got {}", self.epsilon)));
        }
        Ok(())
    }

    fn checks(&self) -> bool {
        self.debug_checks || debug_asserts_from_env()
    }
}

pub fn batched_default_p(k: usize) -> f64 {
    1.0 / (1.0 + ((k.max(1) + 1) as f64).sqrt())
}

/// `((1+ε)²k + 1/p + ε) / (1−p)`. Infinite at `p = 1`.
pub fn batched_ratio_bound(p: f64, epsilon: f64, k: usize) -> Result<f64> {
    if !(p > 0.0 && p <= 1.0) || !(epsilon > 0.0) || k == 0 {
        return Err(Error::InvalidConfig(format!("no bound for p={p}, ε={epsilon}, k={k}")));
    }
    let e1 = 1.0 + epsilon;
    Ok((e1 * e1 * k as f64 + 1.0 / p + epsilon) / (1.0 - p))
}

/// Random sequence of `c` that is maximal for `s`: no leftover `u ∈ c` can be
/// appended to `s ∪ A`.
pub fn rand_seq(sys: &dyn IndependenceSystem, s: &[usize], c: &[usize], rng: &mut StreamRng) -> Result<Vec<usize>> {
    let n = sys.ground_size();
    check_ids(s, n)?;
    check_ids(c, n)?;
    if !sys.contains(s) {
        return Err(Error::Contract(format!("S = {s:?} is not independent")));
    }
    let sel = selection_of(sys, s);
    if let Some(&u) = c.iter().find(|&&u| !sys.can_extend(&sel, u)) {
        return Err(Error::Contract(format!("candidate {u} cannot extend S")));
    }
    let ind = IndependenceOracle::new(sys);
    let mut ledger = RoundLedger::default();
    Ok(rand_seq_core(&ind, &sel, c.to_vec(), rng, &mut ledger))
}

fn rand_seq_core(
    ind: &IndependenceOracle,
    sel: &Selection,
    mut c: Vec<usize>,
    rng: &mut StreamRng,
    ledger: &mut RoundLedger,
) -> Vec<usize> {
    let mut a = Vec::new();
    let mut grown = sel.clone();
    while !c.is_empty() {
        c.shuffle(rng);
        // Prefix feasibility is monotone, so the scan may stop at the first
        // failure. All prefixes belong to one batch.
        let mut scan = 0;
        let mut prefix = grown.clone();
        let mut taken = 0;
        for &z in &c {
            scan += 1;
            if !ind.can_extend(&prefix, z) {
                break;
            }
            ind.extend(&mut prefix, z);
            taken += 1;
        }
        ledger.batch(0, scan);
        a.extend_from_slice(&c[..taken]);
        grown = prefix;
        let rest = c.split_off(taken);
        ledger.batch(0, rest.len() as u64);
        c = rest.into_iter().filter(|&u| ind.can_extend(&grown, u)).collect();
    }
    a
}

/// `C_i`: the members of `c` that remain feasible and keep gain at least `tau`
/// once `prefix` joins `s`. Returns `(|C_i|, C_i)`.
pub fn survivor_count(
    f: &dyn SetFunction,
    sys: &dyn IndependenceSystem,
    s: &[usize],
    prefix: &[usize],
    c: &[usize],
    tau: f64,
) -> Result<(usize, Vec<usize>)> {
    let n = sys.ground_size();
    if f.ground_size() != n {
        return Err(Error::InvalidInput("objective and constraint sizes differ".into()));
    }
    check_ids(s, n)?;
    check_ids(prefix, n)?;
    check_ids(c, n)?;
    let mut base: Vec<usize> = s.to_vec();
    base.extend_from_slice(prefix);
    if !sys.contains(&base) {
        return Err(Error::Contract(format!("S ∪ prefix = {base:?} is not independent")));
    }
    let val = ValueOracle::new(f);
    let ind = IndependenceOracle::new(sys);
    let mut st = val.empty_state();
    let mut sel = ind.empty_selection();
    for &u in &base {
        val.commit(&mut st, u);
        ind.extend(&mut sel, u);
    }
    let survivors = survivors(&val, &ind, &st, &sel, c, tau, &mut RoundLedger::default());
    Ok((survivors.len(), survivors))
}

fn survivors(
    val: &ValueOracle,
    ind: &IndependenceOracle,
    st: &GainState,
    sel: &Selection,
    c: &[usize],
    tau: f64,
    ledger: &mut RoundLedger,
) -> Vec<usize> {
    let mut out = Vec::new();
    let mut vq = 0;
    let mut iq = 0;
    for &u in c {
        if st.members().contains(&u) {
            continue;
        }
        iq += 1;
        if !ind.can_extend(sel, u) {
            continue;
        }
        vq += 1;
        let g = val.gain(st, u);
        if g >= tau {
            out.push(u);
        }
    }
    ledger.batch(vq, iq);
    out
}

/// Smallest `j ∈ [1, d]` with `probe(j).len()·(1+ε) < total`. The caller
/// guarantees the predicate holds at `d`, which is never probed. Returns `j`
/// and `C_j` when it was probed.
pub fn first_shrinking_prefix<F>(total: usize, d: usize, epsilon: f64, mut probe: F) -> (usize, Option<Vec<usize>>)
where
    F: FnMut(usize) -> Vec<usize>,
{
    let shrinks = |len: usize| (len as f64) * (1.0 + epsilon) < total as f64;
    let (mut lo, mut hi) = (1, d.max(1));
    let mut at_hi = None;
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        let c_mid = probe(mid);
        if shrinks(c_mid.len()) {
            hi = mid;
            at_hi = Some(c_mid);
        } else {
            lo = mid + 1;
        }
    }
    (lo, at_hi)
}

pub fn batched_random_greedy(
    f: &dyn SetFunction,
    sys: &dyn IndependenceSystem,
    cfg: &BatchedConfig,
) -> Result<RunReport> {
    cfg.validate()?;
    let n = sys.ground_size();
    if f.ground_size() != n {
        return Err(Error::InvalidInput(format!(
            "objective has {} elements but the constraint has {}",
            f.ground_size(),
            n
        )));
    }
    let val = ValueOracle::new(f);
    let ind = IndependenceOracle::new(sys);
    let mut rng = stream(cfg.seed);
    let mut ledger = RoundLedger::default();
    let checks = cfg.checks();
    let eps = cfg.epsilon;

    let mut st = val.empty_state();
    let mut sel = ind.empty_selection();
    let mut bound: Vec<f64> = (0..n).map(|u| val.gain(&st, u)).collect();
    ledger.batch(n as u64 + 1, 0);
    // Solution size at which bound[u] was computed exactly.
    let mut bound_at = vec![0usize; n];
    let mut dead = vec![false; n];
    let mut considered = vec![false; n];
    let tau_max = bound.iter().copied().fold(0.0, f64::max);
    let mut steps = 0;

    if tau_max > GAIN_TOLERANCE {
        let tau_min = eps * tau_max / sys.rank_upper_bound() as f64;
        let mut tau = tau_max;
        while tau >= tau_min * (1.0 - 1e-12) {
            let mut c = build_candidates(
                &val, &ind, &st, &sel, tau, &mut bound, &mut bound_at, &mut dead, &considered, &mut ledger,
            );
            while !c.is_empty() {
                steps += 1;
                let a = rand_seq_core(&ind, &sel, c.clone(), &mut rng, &mut ledger);
                let d = a.len();
                let total = c.len();
                let (j, probed) = first_shrinking_prefix(total, d, eps, |i| {
                    let (pst, psel) = extended(&val, &ind, &st, &sel, &a[..i]);
                    survivors(&val, &ind, &pst, &psel, &c, tau, &mut ledger)
                });
                // C_d is empty: A is maximal and members of A gain nothing.
                let c_j = probed.unwrap_or_default();
                if checks {
                    check_rand_seq(sys, sel.members(), &c, &a)?;
                    check_survivors(f, sys, sel.members(), &a, &c, tau)?;
                }
                for &u in &a[..j] {
                    considered[u] = true;
                }
                if rng.gen::<f64>() < cfg.p {
                    for &u in &a[..j] {
                        val.commit(&mut st, u);
                        ind.extend(&mut sel, u);
                    }
                    if checks && (c_j.len() as f64) * (1.0 + eps) >= total as f64 {
                        return Err(Error::Contract(format!(
                            "candidate set shrank only from {total} to {}",
                            c_j.len()
                        )));
                    }
                    c = c_j;
                } else {
                    // C₀ equals C: S is unchanged and every member of C was
                    // checked against it.
                    c.retain(|&u| !considered[u]);
                }
            }
            if checks {
                check_exhausted(f, sys, sel.members(), &considered, tau)?;
            }
            tau /= 1.0 + eps;
        }
    }

    if checks && !sys.contains(sel.members()) {
        return Err(Error::Contract(format!("solution {:?} is not independent", sel.members())));
    }
    Ok(RunReport {
        algorithm: "brg".to_string(),
        solution: st.members().to_vec(),
        value: st.value(),
        value_queries: val.queries(),
        independence_queries: ind.queries(),
        steps,
        seed: cfg.seed,
        rounds: Some(ledger),
        wall_ms: None,
    })
}

fn extended(
    val: &ValueOracle,
    ind: &IndependenceOracle,
    st: &GainState,
    sel: &Selection,
    prefix: &[usize],
) -> (GainState, Selection) {
    let mut st = st.clone();
    let mut sel = sel.clone();
    for &u in prefix {
        val.commit(&mut st, u);
        ind.extend(&mut sel, u);
    }
    (st, sel)
}

/// `{u ∉ U : S ∪ {u} ∈ I, f(u | S) ≥ τ}`. `bound[u]` is exact at solution size
/// `bound_at[u]`; the solution only grows, so it stays an upper bound after.
/// Elements whose bound is below
/// `τ` cannot qualify and are not queried; an empty query set costs no round.
#[allow(clippy::too_many_arguments)]
fn build_candidates(
    val: &ValueOracle,
    ind: &IndependenceOracle,
    st: &GainState,
    sel: &Selection,
    tau: f64,
    bound: &mut [f64],
    bound_at: &mut [usize],
    dead: &mut [bool],
    considered: &[bool],
    ledger: &mut RoundLedger,
) -> Vec<usize> {
    let size = sel.len();
    let mut c = Vec::new();
    let (mut vq, mut iq) = (0, 0);
    for u in 0..bound.len() {
        if considered[u] || dead[u] || bound[u] < tau || st.members().contains(&u) {
            continue;
        }
        iq += 1;
        if !ind.can_extend(sel, u) {
            dead[u] = true;
            continue;
        }
        if bound_at[u] != size {
            vq += 1;
            bound[u] = val.gain(st, u);
            bound_at[u] = size;
        }
        if bound[u] >= tau {
            c.push(u);
        }
    }
    ledger.batch(vq, iq);
    c
}

fn check_rand_seq(sys: &dyn IndependenceSystem, s: &[usize], c: &[usize], a: &[usize]) -> Result<()> {
    let mut grown = s.to_vec();
    grown.extend_from_slice(a);
    if !sys.contains(&grown) {
        return Err(Error::Contract(format!("sequence {a:?} is not feasible with S")));
    }
    for &u in c.iter().filter(|u| !a.contains(u)) {
        grown.push(u);
        let ok = sys.contains(&grown);
        grown.pop();
        if ok {
            return Err(Error::Contract(format!("sequence {a:?} is not maximal: {u} still fits")));
        }
    }
    Ok(())
}

fn check_survivors(
    f: &dyn SetFunction,
    sys: &dyn IndependenceSystem,
    s: &[usize],
    a: &[usize],
    c: &[usize],
    tau: f64,
) -> Result<()> {
    let mut last = usize::MAX;
    for i in 0..=a.len() {
        let (len, _) = survivor_count(f, sys, s, &a[..i], c, tau)?;
        if len > last {
            return Err(Error::Contract(format!("|C_{i}| = {len} exceeds |C_{}| = {last}", i - 1)));
        }
        last = len;
    }
    Ok(())
}

fn check_exhausted(f: &dyn SetFunction, sys: &dyn IndependenceSystem, s: &[usize], considered: &[bool], tau: f64) -> Result<()> {
    let base = f.evaluate(s);
    let mut with = s.to_vec();
    for u in (0..considered.len()).filter(|&u| !considered[u] && !s.contains(&u)) {
        with.push(u);
        if sys.contains(&with) {
            let g = f.evaluate(&with) - base;
            if g >= tau + CHECK_TOL {
                return Err(Error::Contract(format!("threshold {tau} left {u} with gain {g}")));
            }
        }
        with.pop();
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::ModularObjective;
    use crate::rng::derive_seed;
    use crate::systems::{CardinalitySystem, PartitionMatroidSystem};

    fn modular(w: &[f64]) -> ModularObjective {
        ModularObjective::new(w.to_vec()).unwrap()
    }

    #[test]
    fn binary_search_on_hand_counts() {
        let counts = [4usize, 4, 3, 1];
        let mut probes = Vec::new();
        let (j, set) = first_shrinking_prefix(4, 3, 0.1, |i| {
            probes.push(i);
            vec![0; counts[i]]
        });
        assert_eq!(j, 2);
        assert_eq!(set.map(|s| s.len()), Some(3));
        assert!(!probes.contains(&3));
    }

    #[test]
    fn binary_search_single_prefix_needs_no_probe() {
        let (j, set) = first_shrinking_prefix(5, 1, 0.1, |_| panic!("probed"));
        assert_eq!((j, set), (1, None));
    }

    #[test]
    fn rand_seq_edge_cases() {
        let sys = CardinalitySystem::new(6, 10);
        let mut rng = stream(1);
        assert!(rand_seq(&sys, &[], &[], &mut rng).unwrap().is_empty());
        let mut a = rand_seq(&sys, &[0], &[1, 2, 3, 4], &mut rng).unwrap();
        a.sort_unstable();
        assert_eq!(a, vec![1, 2, 3, 4]);
    }

    #[test]
    fn rand_seq_rejects_bad_preconditions() {
        let sys = CardinalitySystem::new(4, 1);
        let mut rng = stream(1);
        assert!(matches!(rand_seq(&sys, &[0, 1], &[2], &mut rng), Err(Error::Contract(_))));
        assert!(matches!(rand_seq(&sys, &[0], &[2], &mut rng), Err(Error::Contract(_))));
    }

    #[test]
    fn rand_seq_first_pick_is_uniform() {
        let sys = CardinalitySystem::new(3, 1);
        let mut hits = [0u32; 3];
        for t in 0..3000 {
            let a = rand_seq(&sys, &[], &[0, 1, 2], &mut stream(derive_seed(17, &[t]))).unwrap();
            assert_eq!(a.len(), 1);
            hits[a[0]] += 1;
        }
        let chi2: f64 = hits.iter().map(|&h| (h as f64 - 1000.0).powi(2) / 1000.0).sum();
        // 99.9th percentile of χ² with 2 degrees of freedom.
        assert!(chi2 < 13.82, "hits {hits:?}, χ² {chi2}");
    }

    #[test]
    fn rand_seq_is_maximal_on_partition_matroid() {
        let sys = PartitionMatroidSystem::new(vec![0, 0, 0, 1, 1, 2], vec![2, 1, 1], 10).unwrap();
        for seed in 0..50 {
            let a = rand_seq(&sys, &[5], &[0, 1, 2, 3, 4], &mut stream(seed)).unwrap();
            check_rand_seq(&sys, &[5], &[0, 1, 2, 3, 4], &a).unwrap();
            assert_eq!(a.len(), 3);
        }
    }

    #[test]
    fn survivor_counts_shrink_with_feasibility_alone() {
        let f = modular(&[1.0; 5]);
        let sys = CardinalitySystem::new(5, 3);
        let c = [0, 1, 2, 3, 4];
        let counts: Vec<usize> = (0..=3)
            .map(|i| survivor_count(&f, &sys, &[], &c[..i], &c, 0.5).unwrap().0)
            .collect();
        assert_eq!(counts, vec![5, 4, 3, 0]);
        let (len, set) = survivor_count(&f, &sys, &[], &[], &c, 2.0).unwrap();
        assert_eq!((len, set), (0, vec![]));
    }

    #[test]
    fn modular_cardinality_two() {
        let f = modular(&[5.0, 4.0, 3.0, 1.0]);
        let sys = CardinalitySystem::new(4, 2);
        for seed in 0..20 {
            let cfg = BatchedConfig::new(1.0, 0.1).with_seed(seed).with_debug_checks(true);
            let r = batched_random_greedy(&f, &sys, &cfg).unwrap();
            assert_eq!(r.sorted_solution(), vec![0, 1]);
            assert_eq!(r.value, 9.0);
        }
    }

    #[test]
    fn zero_function_returns_empty() {
        let f = modular(&[0.0; 4]);
        let sys = CardinalitySystem::new(4, 2);
        let r = batched_random_greedy(&f, &sys, &BatchedConfig::new(0.5, 0.1)).unwrap();
        assert!(r.solution.is_empty());
        assert_eq!(r.value, 0.0);
        assert_eq!(r.steps, 0);
    }

    #[test]
    fn ledger_matches_oracle_tallies() {
        let w: Vec<f64> = (0..30).map(|i| 1.0 + (i * 7 % 11) as f64).collect();
        let f = modular(&w);
        let sys = PartitionMatroidSystem::new((0..30).map(|i| i % 4).collect(), vec![3, 2, 4, 1], 30).unwrap();
        for seed in 0..10 {
            let cfg = BatchedConfig::for_k(1).with_seed(seed).with_debug_checks(true);
            let r = batched_random_greedy(&f, &sys, &cfg).unwrap();
            let l = r.rounds.unwrap();
            assert_eq!(l.total_value_queries, r.value_queries);
            assert_eq!(l.total_independence_queries, r.independence_queries);
            assert!(l.value_query_rounds <= l.total_value_queries);
            assert!(sys.contains(&r.solution));
        }
    }

    #[test]
    fn ratio_bound_values() {
        let p = batched_default_p(1);
        let b = batched_ratio_bound(p, 0.1, 1).unwrap();
        assert!((b - (1.21 + 1.0 / p + 0.1) / (1.0 - p)).abs() < 1e-12);
        assert!(batched_ratio_bound(1.0, 0.1, 1).unwrap().is_infinite());
        assert!(batched_ratio_bound(0.5, 0.0, 1).is_err());
    }
}
