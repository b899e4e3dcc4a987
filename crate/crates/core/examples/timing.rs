use bilevel_core::driver::*;
use bilevel_core::instances::*;
use bilevel_core::model::PhiCache;
use bilevel_core::rules::*;
use std::time::{Duration, Instant};

fn main() {
    for seed in [8000u64, 8003, 8007] {
        let inst = gen_facility(&FacilityGenConfig::new(4, seed)).unwrap();
        let oracle = brute_force_solve(&inst).unwrap();
        let mut cache = PhiCache::new();
        let s = seed % 10;
        let samples = sample_training_data(&inst, 200, s, &mut cache).unwrap();
        let trained = train_rule(&samples, inst.n_x, &default_widths(inst.n_x), inst.binary_idx().len(),
            &TrainConfig { epochs: 1000, learning_rate: 0.01, decay: 0.001, seed: s }).unwrap();
        let t = Instant::now();
        let sol = solve_bilevel(&inst, &Strategy::LearnedReplace,
            &SolveConfig { rule: Some(trained.rule), node_limit: Some(20_000),
                           time_limit: Some(Duration::from_secs(120)), ..Default::default() }).unwrap();
        let lb = sol.replace_lower_bound.unwrap();
        println!("seed {seed}: oracle {:.6} lb {:.6} ub {:.6} status {:?} ok={} ({:?})",
            oracle.objective, lb, sol.objective, sol.status,
            lb <= oracle.objective + 1e-6 && sol.objective >= oracle.objective - 1e-6,
            t.elapsed());
    }
}
