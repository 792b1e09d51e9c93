//! Sweep × trial grids, JSON-lines run logs and aggregated CSV.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use ksys_core::rng::derive_seed;
use ksys_core::verify::mean_stderr;
use ksys_core::RoundLedger;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algorithms::{run_algorithm, AlgorithmId, Params};
use crate::generate::{generate_instance, Kind};
use crate::instance::{build_instance, DataSource, InstanceBundle, InstanceSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepVar {
    /// The constraint's overall budget.
    Cap,
    /// Size of a generated instance.
    N,
    P,
    Epsilon,
    L,
}

impl SweepVar {
    pub fn name(self) -> &'static str {
        match self {
            SweepVar::Cap => "cap",
            SweepVar::N => "n",
            SweepVar::P => "p",
            SweepVar::Epsilon => "epsilon",
            SweepVar::L => "l",
        }
    }

    fn integral(self) -> bool {
        matches!(self, SweepVar::Cap | SweepVar::N | SweepVar::L)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub var: SweepVar,
    pub values: Vec<f64>,
}

impl FromStr for Sweep {
    type Err = anyhow::Error;

    /// `name=lo:hi:step`, inclusive of `hi`.
    fn from_str(s: &str) -> Result<Self> {
        let Some((name, range)) = s.split_once('=') else {
            bail!("sweep must look like name=lo:hi:step, got `{s}`");
        };
        let var = match name.trim() {
            "cap" | "m" => SweepVar::Cap,
            "n" => SweepVar::N,
            "p" => SweepVar::P,
            "epsilon" | "eps" => SweepVar::Epsilon,
            "l" => SweepVar::L,
            other => bail!("unknown sweep variable `{other}` (expected cap, n, p, epsilon or l)"),
        };
        let parts: Vec<f64> = range
            .split(':')
            .map(|x| x.trim().parse::<f64>().with_context(|| format!("bad sweep bound `{x}`")))
            .collect::<Result<_>>()?;
        let [lo, hi, step] = parts[..] else {
            bail!("sweep range must be lo:hi:step, got `{range}`");
        };
        if !(step > 0.0) || lo > hi || !lo.is_finite() || !hi.is_finite() {
            bail!("sweep range `{range}` is empty or has a non-positive step");
        }
        let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
        let values: Vec<f64> = (0..count).map(|i| lo + i as f64 * step).collect();
        if var.integral() && values.iter().any(|v| v.fract() != 0.0 || *v < 0.0) {
            bail!("sweep over {} needs non-negative integer values", var.name());
        }
        Ok(Sweep { var, values })
    }
}

/// Where an experiment's instance comes from.
#[derive(Debug, Clone)]
pub enum Source {
    Spec { spec: Box<InstanceSpec>, dir: PathBuf },
    Generated { kind: Kind, n: usize, cap: Option<usize> },
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub source: Source,
    pub algorithms: Vec<AlgorithmId>,
    pub params: Params,
    pub seed: u64,
    pub trials: usize,
    pub sweep: Option<Sweep>,
    /// Record wall-clock time per run. Off by default so that replays are
    /// byte-identical.
    pub timing: bool,
}

/// One line of `runs.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub algorithm: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep_value: Option<f64>,
    pub trial: usize,
    pub seed: u64,
    pub value: f64,
    pub value_queries: u64,
    pub independence_queries: u64,
    pub steps: u64,
    pub solution: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rounds: Option<RoundLedger>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_ms: Option<f64>,
}

/// One row of `summary.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub algorithm: String,
    pub sweep: String,
    pub sweep_value: Option<f64>,
    pub trials: usize,
    pub mean_value: f64,
    pub stderr_value: f64,
    pub mean_value_queries: f64,
    pub stderr_value_queries: f64,
    pub mean_independence_queries: f64,
    pub mean_value_rounds: Option<f64>,
    pub mean_wall_ms: Option<f64>,
}

fn bundle_for(cfg: &ExperimentConfig, point: Option<(SweepVar, f64)>) -> Result<InstanceBundle> {
    match &cfg.source {
        Source::Spec { spec, dir } => {
            let mut spec = (**spec).clone();
            match point {
                Some((SweepVar::Cap, v)) => spec.constraint = spec.constraint.with_cap(v as usize)?,
                Some((SweepVar::N, _)) => bail!("sweeping n needs a generated instance"),
                _ => {}
            }
            build_instance(&spec, &DataSource::Dir(dir.clone()))
        }
        Source::Generated { kind, n, cap } => {
            let (n, cap) = match point {
                Some((SweepVar::N, v)) => (v as usize, *cap),
                Some((SweepVar::Cap, v)) => (*n, Some(v as usize)),
                _ => (*n, *cap),
            };
            generate_instance(*kind, n, cfg.seed, cap)?.bundle()
        }
    }
}

fn params_for(base: &Params, point: Option<(SweepVar, f64)>) -> Params {
    let mut p = *base;
    match point {
        Some((SweepVar::P, v)) => p.p = Some(v),
        Some((SweepVar::Epsilon, v)) => p.epsilon = Some(v),
        Some((SweepVar::L, v)) => p.l = Some(v as usize),
        _ => {}
    }
    p
}

/// Runs the grid. Cell `(sweep value, trial)` gets its own seed, shared by all
/// algorithms, so results do not depend on scheduling.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<RunRecord>> {
    if cfg.trials == 0 {
        bail!("at least one trial is required");
    }
    if cfg.algorithms.is_empty() {
        bail!("no algorithm selected");
    }
    let points: Vec<Option<(SweepVar, f64)>> = match &cfg.sweep {
        Some(s) => s.values.iter().map(|&v| Some((s.var, v))).collect(),
        None => vec![None],
    };
    let bundles: Vec<InstanceBundle> = points.iter().map(|&pt| bundle_for(cfg, pt)).collect::<Result<_>>()?;
    let cells: Vec<(usize, AlgorithmId, usize)> = (0..points.len())
        .flat_map(|i| cfg.algorithms.iter().flat_map(move |&a| (0..cfg.trials).map(move |t| (i, a, t))))
        .collect();
    cells
        .par_iter()
        .map(|&(i, alg, trial)| {
            let point = points[i];
            let seed = derive_seed(cfg.seed, &[point.map_or(0, |(_, v)| v.to_bits()), trial as u64]);
            let started = Instant::now();
            let report = run_algorithm(&bundles[i], alg, &params_for(&cfg.params, point), seed)
                .with_context(|| format!("{alg}, trial {trial}"))?;
            let wall_ms = cfg.timing.then(|| started.elapsed().as_secs_f64() * 1e3);
            let solution = report.sorted_solution();
            Ok(RunRecord {
                algorithm: report.algorithm,
                sweep: point.map(|(v, _)| v.name().to_string()),
                sweep_value: point.map(|(_, v)| v),
                trial,
                seed,
                value: report.value,
                value_queries: report.value_queries,
                independence_queries: report.independence_queries,
                steps: report.steps,
                solution,
                rounds: report.rounds,
                wall_ms,
            })
        })
        .collect()
}

/// `(√k/ε²)·log(r̂/ε)·log n·log r̂` for one instance, the scale that batched
/// round counts are compared against. Logs are natural and floored at 1.
pub fn round_scale(bundle: &InstanceBundle, epsilon: f64) -> f64 {
    let n = bundle.ground_size().max(2) as f64;
    let r = bundle.system.rank_upper_bound().max(2) as f64;
    let k = bundle.k() as f64;
    (k.sqrt() / (epsilon * epsilon)) * (r / epsilon).ln().max(1.0) * n.ln().max(1.0) * r.ln().max(1.0)
}

/// Smallest `c` with `rounds ≤ c·scale` over every `brg` record of `records`.
pub fn fitted_round_constant(cfg: &ExperimentConfig, records: &[RunRecord]) -> Result<Option<f64>> {
    let mut c: Option<f64> = None;
    let points: Vec<Option<(SweepVar, f64)>> = match &cfg.sweep {
        Some(s) => s.values.iter().map(|&v| Some((s.var, v))).collect(),
        None => vec![None],
    };
    for pt in points {
        let here: Vec<&RunRecord> = records
            .iter()
            .filter(|r| r.algorithm == "brg" && r.sweep_value.map(f64::to_bits) == pt.map(|(_, v)| v.to_bits()))
            .collect();
        if here.is_empty() {
            continue;
        }
        let eps = params_for(&cfg.params, pt).epsilon.unwrap_or(crate::algorithms::DEFAULT_EPSILON);
        let scale = round_scale(&bundle_for(cfg, pt)?, eps);
        for r in here {
            if let Some(l) = r.rounds {
                let ratio = l.value_query_rounds as f64 / scale;
                c = Some(c.map_or(ratio, |c: f64| c.max(ratio)));
            }
        }
    }
    Ok(c)
}

fn mean_of(values: impl Iterator<Item = f64>) -> (f64, f64) {
    mean_stderr(&values.collect::<Vec<_>>())
}

/// Mean and standard error per (algorithm, sweep value), in first-seen order.
pub fn summarize(records: &[RunRecord]) -> Vec<SummaryRow> {
    let mut keys: Vec<(String, Option<u64>)> = Vec::new();
    for r in records {
        let key = (r.algorithm.clone(), r.sweep_value.map(f64::to_bits));
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.into_iter()
        .map(|(alg, sv)| {
            let group: Vec<&RunRecord> =
                records.iter().filter(|r| r.algorithm == alg && r.sweep_value.map(f64::to_bits) == sv).collect();
            let (mean_value, stderr_value) = mean_of(group.iter().map(|r| r.value));
            let (mean_vq, se_vq) = mean_of(group.iter().map(|r| r.value_queries as f64));
            let (mean_iq, _) = mean_of(group.iter().map(|r| r.independence_queries as f64));
            let rounds: Vec<f64> =
                group.iter().filter_map(|r| r.rounds.map(|l| l.value_query_rounds as f64)).collect();
            let walls: Vec<f64> = group.iter().filter_map(|r| r.wall_ms).collect();
            SummaryRow {
                algorithm: alg,
                sweep: group[0].sweep.clone().unwrap_or_default(),
                sweep_value: sv.map(f64::from_bits),
                trials: group.len(),
                mean_value,
                stderr_value,
                mean_value_queries: mean_vq,
                stderr_value_queries: se_vq,
                mean_independence_queries: mean_iq,
                mean_value_rounds: (rounds.len() == group.len()).then(|| mean_stderr(&rounds).0),
                mean_wall_ms: (!walls.is_empty()).then(|| mean_stderr(&walls).0),
            }
        })
        .collect()
}

/// Writes `runs.jsonl` and `summary.csv` into `out`.
pub fn write_outputs(records: &[RunRecord], out: &Path) -> Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut runs = fs::File::create(out.join("runs.jsonl"))?;
    for r in records {
        serde_json::to_writer(&mut runs, r)?;
        runs.write_all(b"\n")?;
    }
    let mut csv = csv::Writer::from_path(out.join("summary.csv"))?;
    for row in summarize(records) {
        csv.serialize(row)?;
    }
    csv.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_parsing() {
        let s: Sweep = "cap=10:50:10".parse().unwrap();
        assert_eq!(s.var, SweepVar::Cap);
        assert_eq!(s.values, vec![10.0, 20.0, 30.0, 40.0, 50.0]);
        let s: Sweep = "p=0.1:0.3:0.1".parse().unwrap();
        assert_eq!(s.values.len(), 3);
        for bad in ["cap", "cap=1:2", "cap=5:1:1", "cap=1:5:0", "q=1:2:1", "n=1.5:3:1"] {
            assert!(bad.parse::<Sweep>().is_err(), "{bad}");
        }
    }

    fn record(alg: &str, v: f64, value: f64) -> RunRecord {
        RunRecord {
            algorithm: alg.into(),
            sweep: Some("cap".into()),
            sweep_value: Some(v),
            trial: 0,
            seed: 0,
            value,
            value_queries: value as u64,
            independence_queries: 0,
            steps: 0,
            solution: vec![],
            rounds: None,
            wall_ms: None,
        }
    }

    #[test]
    fn summary_groups_by_algorithm_and_point() {
        let recs = vec![record("a", 1.0, 2.0), record("a", 1.0, 4.0), record("b", 1.0, 1.0), record("a", 2.0, 5.0)];
        let rows = summarize(&recs);
        assert_eq!(rows.len(), 3);
        assert_eq!((rows[0].trials, rows[0].mean_value, rows[0].stderr_value), (2, 3.0, 1.0));
        assert_eq!(rows[2].sweep_value, Some(2.0));
        assert_eq!(rows[0].mean_value_rounds, None);
    }
}
