//! Fixtures shared by the benchmarks.

use relay_bargain::{
    generate_scenario, solve, DedicatorSet, NetworkInstance, ScenarioConfig, SolverConfig, Strategy,
};

/// Reference network with `num_pairs` pairs and fixed relay cost `e0`.
pub fn instance(num_pairs: usize, e0: f64, seed: u64) -> NetworkInstance {
    let mut sc = ScenarioConfig::table_one();
    sc.num_pairs = num_pairs;
    sc.params.relay_fixed_cost_rate = e0;
    generate_scenario(&sc, seed).expect("valid scenario")
}

/// A solved instance: the best dedicator set and strategy, used to build
/// realistic block subproblems. Panics if `seed` is infeasible.
pub fn solved(num_pairs: usize, e0: f64, seed: u64) -> (NetworkInstance, DedicatorSet, Strategy) {
    let inst = instance(num_pairs, e0, seed);
    let r = solve(&inst, &SolverConfig::default()).expect("solve runs");
    let set = r.best_set.expect("feasible seed");
    let strategy = r.best_strategy.expect("feasible seed");
    (inst, set, strategy)
}
