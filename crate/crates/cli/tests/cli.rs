use std::fs;
use std::process::Command;

use ksys_cli::algorithms::{AlgorithmId, Params};
use ksys_cli::experiment::{run_experiment, summarize, write_outputs, ExperimentConfig, RunRecord, Source};
use ksys_cli::generate::{generate_instance, Kind};
use ksys_cli::instance::{build_instance, load_instance, DataSource, InstanceSpec};

fn ksys(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_ksys")).args(args).env_remove("RUST_BACKTRACE").output().unwrap()
}

fn stdout(out: &std::process::Output) -> String {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn three_row_csv_gives_a_unit_diagonal_matrix() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("f.csv"), "a,x,1,0\nb,x,0,1\nc,y,1,1\n").unwrap();
    let objective = format!(
        r#"{{"type":"coverage_diversity","features":"{}","lambda":0.2}}"#,
        dir.path().join("f.csv").display()
    );
    let b = load_instance(&objective, r#"{"type":"cardinality","cap":2}"#, None, 0).unwrap();
    assert_eq!(b.ground_size(), 3);
    let pts = [[1.0f64, 0.0], [0.0, 1.0], [1.0, 1.0]];
    let hand = |u: usize, v: usize| {
        let d = ((pts[u][0] - pts[v][0]).powi(2) + (pts[u][1] - pts[v][1]).powi(2)).sqrt();
        (-0.2 * d).exp()
    };
    let m = b.similarity.as_ref().unwrap();
    assert_eq!(m.len(), 3);
    for u in 0..3 {
        assert_eq!(m.get(u, u), 1.0);
        for v in 0..3 {
            if u != v {
                assert!((m.get(u, v) - hand(u, v)).abs() < 1e-12, "M[{u}][{v}]");
            }
        }
    }
    // f({a}) = Σ_v M[v][a] − M[a][a].
    assert!((b.objective.evaluate(&[0]) - hand(1, 0) - hand(2, 0)).abs() < 1e-12);
}

#[test]
fn two_line_edge_list_gives_two_nodes_times_products() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("e.txt"), "0 1 4\n1 0 4\n").unwrap();
    let objective = format!(r#"{{"type":"social_revenue","edges":"{}"}}"#, dir.path().join("e.txt").display());
    let b = load_instance(&objective, r#"{"type":"social","node_cap":3,"product_cap":2}"#, None, 0).unwrap();
    assert_eq!(b.ground_size(), 2 * 5);
}

#[test]
fn empty_files_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("empty"), "").unwrap();
    let path = dir.path().join("empty").display().to_string();
    let cap = r#"{"type":"cardinality","cap":2}"#;
    assert!(load_instance(&format!(r#"{{"type":"image_summary","features":"{path}"}}"#), cap, None, 0).is_err());
    assert!(load_instance(&format!(r#"{{"type":"cut","n":3,"edges":"{path}"}}"#), cap, None, 0).is_err());
}

#[test]
fn malformed_lines_are_reported_by_number() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("e.txt"), "0 1\n0 1\n2 q\n").unwrap();
    let objective = format!(r#"{{"type":"cut","n":3,"edges":"{}"}}"#, dir.path().join("e.txt").display());
    let err = format!("{:#}", load_instance(&objective, r#"{"type":"cardinality","cap":1}"#, None, 0).unwrap_err());
    assert!(err.contains("line 3"), "{err}");
}

#[test]
fn gen_is_byte_identical_under_a_seed() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for kind in ["movie", "image", "social", "random-cut"] {
        for dir in [&a, &b] {
            let out = dir.path().join(kind);
            stdout(&ksys(&["gen", kind, "--n", "40", "--seed", "9", "--out", out.to_str().unwrap()]));
        }
        for file in ["instance.json", "features.csv", "edges.txt"] {
            let (x, y) = (a.path().join(kind).join(file), b.path().join(kind).join(file));
            if x.exists() {
                assert_eq!(fs::read(&x).unwrap(), fs::read(&y).unwrap(), "{kind}/{file}");
            }
        }
    }
}

#[test]
fn generated_files_rebuild_the_same_instance() {
    let dir = tempfile::tempdir().unwrap();
    let g = generate_instance(Kind::Image, 30, 4, None).unwrap();
    g.write(dir.path()).unwrap();
    let spec: InstanceSpec = serde_json::from_str(&fs::read_to_string(dir.path().join("instance.json")).unwrap()).unwrap();
    let from_disk = build_instance(&spec, &DataSource::Dir(dir.path().to_path_buf())).unwrap();
    let in_memory = g.bundle().unwrap();
    let set = [0, 3, 7, 11];
    assert!((from_disk.objective.evaluate(&set) - in_memory.objective.evaluate(&set)).abs() < 1e-9);
}

#[test]
fn run_outputs_replay_byte_for_byte() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for dir in [&a, &b] {
        let out = dir.path().to_str().unwrap();
        let args = ["run", "--generate", "movie", "--n", "60", "--algorithm", "ramg,brg,greedy", "--trials", "3"];
        stdout(&ksys(&[&args[..], &["--sweep", "cap=5:15:5", "--seed", "4", "--out", out]].concat()));
    }
    for file in ["runs.jsonl", "summary.csv"] {
        assert_eq!(fs::read(a.path().join(file)).unwrap(), fs::read(b.path().join(file)).unwrap(), "{file}");
    }
}

#[test]
fn one_trial_of_greedy_is_one_json_line() {
    let out = stdout(&ksys(&["run", "--generate", "random-cut", "--n", "30", "--algorithm", "greedy", "--trials", "1"]));
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 1);
    let rec: RunRecord = serde_json::from_str(lines[0]).unwrap();
    assert_eq!(rec.algorithm, "greedy");
    assert!(rec.value_queries > 0);
}

#[test]
fn unknown_algorithm_lists_valid_ids() {
    let out = ksys(&["run", "--generate", "movie", "--algorithm", "fast"]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("ramg, rmg, ramg+, greedy, repg, brg, arg"), "{err}");
}

#[test]
fn csv_means_match_jsonl_means() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        source: Source::Generated { kind: Kind::Movie, n: 50, cap: None },
        algorithms: vec![AlgorithmId::Ramg, AlgorithmId::Rmg],
        params: Params::default(),
        seed: 2,
        trials: 7,
        sweep: Some("cap=4:12:4".parse().unwrap()),
        timing: false,
    };
    let records = run_experiment(&cfg).unwrap();
    write_outputs(&records, dir.path()).unwrap();
    let lines = fs::read_to_string(dir.path().join("runs.jsonl")).unwrap();
    let parsed: Vec<RunRecord> = lines.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(parsed, records);
    let mut csv = csv::Reader::from_path(dir.path().join("summary.csv")).unwrap();
    let mut rows = 0;
    for row in csv.deserialize::<ksys_cli::experiment::SummaryRow>() {
        let row = row.unwrap();
        let group: Vec<f64> = parsed
            .iter()
            .filter(|r| r.algorithm == row.algorithm && r.sweep_value == row.sweep_value)
            .map(|r| r.value)
            .collect();
        let mean = group.iter().sum::<f64>() / group.len() as f64;
        assert_eq!(group.len(), 7);
        assert!((mean - row.mean_value).abs() <= 1e-12 * mean.abs().max(1.0), "{mean} vs {}", row.mean_value);
        rows += 1;
    }
    assert_eq!(rows, 6);
    assert_eq!(summarize(&records).len(), 6);
}

#[test]
fn adaptive_runs_default_to_twenty_realizations() {
    let out = stdout(&ksys(&["run", "--generate", "social", "--n", "15", "--algorithm", "arg"]));
    assert_eq!(out.lines().count(), 20);
    let out = stdout(&ksys(&["adaptive", "--generate", "social", "--n", "15"]));
    let v: serde_json::Value = serde_json::from_str(out.trim()).unwrap();
    assert_eq!(v["trials"], 20);
}

#[test]
fn every_emitted_solution_is_feasible() {
    let cfg = ExperimentConfig {
        source: Source::Generated { kind: Kind::Social, n: 20, cap: Some(4) },
        algorithms: ksys_cli::algorithms::ALL_ALGORITHMS.to_vec(),
        params: Params::default(),
        seed: 5,
        trials: 2,
        sweep: None,
        timing: false,
    };
    let bundle = generate_instance(Kind::Social, 20, 5, Some(4)).unwrap().bundle().unwrap();
    for r in run_experiment(&cfg).unwrap() {
        assert!(bundle.system.contains(&r.solution), "{} {:?}", r.algorithm, r.solution);
    }
}

#[test]
fn verify_emits_ratio_reports() {
    let out = stdout(&ksys(&["verify", "--algorithm", "rmg", "--instances", "2", "--trials", "100"]));
    for line in out.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(v["pass"], true);
        assert!(v["target"].as_f64().unwrap() <= v["optimum"].as_f64().unwrap());
    }
}
