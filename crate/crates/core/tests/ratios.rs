use ksys_core::adaptive::{adapt_random_greedy_average, adaptive_default_p, FiniteAdaptiveInstance};
use ksys_core::batched::{batched_random_greedy, BatchedConfig};
use ksys_core::greedy::{random_multi_greedy, standard_greedy, MultiGreedyConfig};
use ksys_core::objectives::{CoverageDiversityObjective, ModularObjective, SimilarityMatrix};
use ksys_core::rng::stream;
use ksys_core::systems::CardinalitySystem;
use ksys_core::verify::{exhaustive_max, exhaustive_optimal_policy, monte_carlo_ratio_check, random_k_system};
use rand::Rng;

fn matroid_fixture(seed: u64) -> (CoverageDiversityObjective, ksys_core::systems::ExplicitSystem) {
    let mut rng = stream(seed);
    let sys = random_k_system(8, 1, &mut rng).unwrap();
    let feats: Vec<Vec<f64>> = (0..8).map(|_| (0..5).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect();
    let f = CoverageDiversityObjective::new(SimilarityMatrix::from_features(&feats, 0.2).unwrap());
    (f, sys)
}

#[test]
fn multi_greedy_meets_bound_four_on_a_matroid() {
    let (f, sys) = matroid_fixture(11);
    let opt = exhaustive_max(&f, &sys).unwrap().value;
    let report = monte_carlo_ratio_check("rmg", opt, 4.0, 5000, 3, |seed| {
        Ok(random_multi_greedy(&f, &sys, &MultiGreedyConfig::randomized(1).with_seed(seed))?.value)
    })
    .unwrap();
    assert!(report.pass, "{report:?}");
}

#[test]
fn batched_meets_its_bound_on_a_matroid() {
    let (f, sys) = matroid_fixture(12);
    let opt = exhaustive_max(&f, &sys).unwrap().value;
    let p = 1.0 / (1.0 + 2f64.sqrt());
    let bound = 1.1f64.powi(2) * (1.0 + 2f64.sqrt()).powi(2);
    let report = monte_carlo_ratio_check("brg", opt, bound, 5000, 4, |seed| {
        Ok(batched_random_greedy(&f, &sys, &BatchedConfig::new(p, 0.1).with_seed(seed))?.value)
    })
    .unwrap();
    assert!(report.pass, "{report:?}");
}

#[test]
fn greedy_and_batched_agree_with_brute_force_on_modular_cardinality() {
    let f = ModularObjective::new(vec![5.0, 4.0, 3.0, 1.0]).unwrap();
    let sys = CardinalitySystem::new(4, 2);
    let opt = exhaustive_max(&f, &sys).unwrap();
    assert_eq!(opt.value, 9.0);
    assert_eq!(standard_greedy(&f, &sys).unwrap().value, opt.value);
    let cfg = MultiGreedyConfig::new(2, 1.0);
    assert_eq!(random_multi_greedy(&f, &sys, &cfg).unwrap().value, opt.value);
    let r = batched_random_greedy(&f, &sys, &BatchedConfig::new(1.0, 0.1)).unwrap();
    assert_eq!(r.value, opt.value);
}

#[test]
fn optimal_policy_dominates_adaptive_greedy() {
    for i in 0..10u64 {
        let mut rng = stream(100 + i);
        let n = rng.gen_range(3..=4);
        let inst = FiniteAdaptiveInstance::random(n, 3, false, &mut rng);
        let sys = random_k_system(n, 1 + i as usize % 2, &mut rng).unwrap();
        let best = exhaustive_optimal_policy(&inst, &sys).unwrap();
        for p in [adaptive_default_p(1), 1.0] {
            let (mean, se) = adapt_random_greedy_average(&inst, &sys, p, 2000, i).unwrap();
            assert!(mean <= best + 3.0 * se + 1e-9, "fixture {i}: policy {mean} beats optimum {best}");
        }
    }
}

#[test]
fn monotone_adaptive_greedy_meets_k_plus_one() {
    for i in 0..10u64 {
        let mut rng = stream(200 + i);
        let n = rng.gen_range(3..=4);
        let inst = FiniteAdaptiveInstance::random(n, 3, true, &mut rng);
        let k = 1 + i as usize % 2;
        let sys = random_k_system(n, k, &mut rng).unwrap();
        let best = exhaustive_optimal_policy(&inst, &sys).unwrap();
        let (mean, se) = adapt_random_greedy_average(&inst, &sys, 1.0, 2000, i).unwrap();
        assert!(mean >= best / (k as f64 + 1.0) - 3.0 * se, "fixture {i}: {mean} vs {best}");
    }
}
