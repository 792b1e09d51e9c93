//! Algorithm ids and dispatch.

use std::fmt;
use std::str::FromStr;

use anyhow::{bail, Result};
use ksys_core::adaptive::{adapt_random_greedy, adaptive_default_p, AdaptiveModel};
use ksys_core::batched::{batched_default_p, batched_random_greedy, BatchedConfig};
use ksys_core::greedy::{
    accelerated_random_multi_greedy, ceil_sqrt, random_multi_greedy, repeated_greedy, standard_greedy,
    MultiGreedyConfig,
};
use ksys_core::rng::{derive_seed, stream, substream};
use ksys_core::RunReport;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::instance::{AdaptiveBundle, InstanceBundle};

pub const DEFAULT_EPSILON: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AlgorithmId {
    /// Accelerated random multi-greedy.
    Ramg,
    /// Plain random multi-greedy.
    Rmg,
    /// Accelerated, with `p` drawn from `(0.9, 1)` per run.
    RamgPlus,
    Greedy,
    /// Repeated greedy with a double-greedy pass on each candidate.
    Repg,
    /// Batched random greedy.
    Brg,
    /// Adaptive random greedy.
    Arg,
}

pub const ALL_ALGORITHMS: [AlgorithmId; 7] = [
    AlgorithmId::Ramg,
    AlgorithmId::Rmg,
    AlgorithmId::RamgPlus,
    AlgorithmId::Greedy,
    AlgorithmId::Repg,
    AlgorithmId::Brg,
    AlgorithmId::Arg,
];

impl AlgorithmId {
    pub fn name(self) -> &'static str {
        match self {
            AlgorithmId::Ramg => "ramg",
            AlgorithmId::Rmg => "rmg",
            AlgorithmId::RamgPlus => "ramg+",
            AlgorithmId::Greedy => "greedy",
            AlgorithmId::Repg => "repg",
            AlgorithmId::Brg => "brg",
            AlgorithmId::Arg => "arg",
        }
    }
}

impl fmt::Display for AlgorithmId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AlgorithmId {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match ALL_ALGORITHMS.iter().find(|a| a.name() == s) {
            Some(a) => Ok(*a),
            None => {
                let valid: Vec<&str> = ALL_ALGORITHMS.iter().map(|a| a.name()).collect();
                bail!("unknown algorithm `{s}`; valid ids: {}", valid.join(", "))
            }
        }
    }
}

/// Overrides for the per-algorithm defaults, which are derived from `k`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub l: Option<usize>,
    pub p: Option<f64>,
    pub epsilon: Option<f64>,
}

/// Runs `alg` once. For `arg` the seed draws one realization and one coin
/// stream, and the report's value is the realized utility.
pub fn run_algorithm(bundle: &InstanceBundle, alg: AlgorithmId, params: &Params, seed: u64) -> Result<RunReport> {
    let f = bundle.objective.as_ref();
    let sys = bundle.system.as_ref();
    let k = bundle.k();
    let eps = params.epsilon.unwrap_or(DEFAULT_EPSILON);
    let multi = |default: MultiGreedyConfig| {
        let mut cfg = default.with_seed(seed).with_epsilon(eps);
        cfg.l = params.l.unwrap_or(cfg.l);
        cfg.p = params.p.unwrap_or(cfg.p);
        cfg
    };
    let report = match alg {
        AlgorithmId::Ramg => accelerated_random_multi_greedy(f, sys, &multi(MultiGreedyConfig::randomized(k)))?,
        AlgorithmId::Rmg => random_multi_greedy(f, sys, &multi(MultiGreedyConfig::randomized(k)))?,
        AlgorithmId::RamgPlus => {
            let mut cfg = multi(MultiGreedyConfig::randomized(k));
            if params.p.is_none() {
                cfg.p = stream(derive_seed(seed, &[0x9])).gen_range(0.9..1.0);
            }
            let mut r = accelerated_random_multi_greedy(f, sys, &cfg)?;
            r.algorithm = alg.name().to_string();
            r
        }
        AlgorithmId::Greedy => standard_greedy(f, sys)?,
        AlgorithmId::Repg => repeated_greedy(f, sys, params.l.unwrap_or(ceil_sqrt(k) + 1), seed)?,
        AlgorithmId::Brg => {
            let cfg = BatchedConfig::new(params.p.unwrap_or(batched_default_p(k)), eps).with_seed(seed);
            batched_random_greedy(f, sys, &cfg)?
        }
        AlgorithmId::Arg => run_adaptive(bundle, params.p.unwrap_or(adaptive_default_p(k)), seed)?,
    };
    if !sys.contains(&report.solution) {
        bail!("{alg} returned {:?}, which violates the constraint", report.solution);
    }
    Ok(report)
}

fn adaptive_report<M: AdaptiveModel>(model: &M, bundle: &InstanceBundle, p: f64, seed: u64) -> Result<RunReport> {
    let phi = model.sample_realization(&mut substream(seed, &[0]));
    let mut coins = stream(derive_seed(seed, &[1]));
    let trace = adapt_random_greedy(model, bundle.system.as_ref(), p, &mut coins, &phi)?;
    Ok(RunReport {
        algorithm: AlgorithmId::Arg.name().to_string(),
        solution: trace.selected,
        value: trace.value,
        value_queries: trace.gain_queries,
        independence_queries: 0,
        steps: trace.records.len() as u64,
        seed,
        rounds: None,
        wall_ms: None,
    })
}

fn run_adaptive(bundle: &InstanceBundle, p: f64, seed: u64) -> Result<RunReport> {
    match &bundle.adaptive {
        Some(AdaptiveBundle::Finite(inst)) => adaptive_report(inst, bundle, p, seed),
        Some(AdaptiveBundle::Social(model)) => adaptive_report(model, bundle, p, seed),
        None => bail!("algorithm arg needs an instance with an adaptive model"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_round_trip() {
        for a in ALL_ALGORITHMS {
            assert_eq!(a.name().parse::<AlgorithmId>().unwrap(), a);
        }
        let err = "fast".parse::<AlgorithmId>().unwrap_err().to_string();
        assert!(err.contains("ramg, rmg, ramg+, greedy, repg, brg, arg"), "{err}");
    }
}
