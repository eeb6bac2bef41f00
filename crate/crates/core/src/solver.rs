//! Bargaining solver: outer loop over dedicator sets, inner alternation
//! between the relay-power block and the time-division block.

use serde::{Deserialize, Serialize};

use crate::dedicators::{apply_dedicators, candidate_sets, DedicatorSet, EnumerationMode};
use crate::error::{Error, Result};
use crate::network::NetworkInstance;
use crate::power::{power_coefficients, solve_relay_power, source_powers_from_relay, PowerMode};
use crate::time::{
    refine_hop_split, solve_time_division_from, time_coefficients, TimeAllocation, TimeMode,
};
use crate::utility::{evaluate, nash_product, Phi, Strategy, UtilityReport};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Relative change of the Nash product that ends the alternation.
    pub epsilon: f64,
    /// Relay-power tolerance, mW.
    pub epsilon1: f64,
    /// Time-fraction tolerance.
    pub epsilon2: f64,
    /// Iteration cap of each block solver.
    pub max_inner_iterations: usize,
    /// Cap on power/time alternations per dedicator set.
    pub max_alternations: usize,
    pub enumeration_mode: EnumerationMode,
    pub power_mode: PowerMode,
    pub time_mode: TimeMode,
    /// Smallest harvest fraction the time block may use.
    pub alpha_min: f64,
    /// Re-split each pair's data time between its hops after the time block.
    pub split_refinement: bool,
    /// Use the harvested-energy constant without channel gains in the power
    /// block.
    pub literal_k1: bool,
    /// Scan the power objective and fail if it has several peaks.
    pub check_unimodal: bool,
    /// Dual-ascent power step `c / sqrt(t)` uses `c = power_step_scale * ub`.
    pub power_step_scale: f64,
    /// Dual-ascent time step `kappa0 / sqrt(t)` uses this `kappa0`.
    pub time_step_scale: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-4,
            epsilon1: 1e-6,
            epsilon2: 1e-6,
            max_inner_iterations: 10_000,
            max_alternations: 10_000,
            enumeration_mode: EnumerationMode::Pruned,
            power_mode: PowerMode::GoldenSection,
            time_mode: TimeMode::Substitution,
            alpha_min: 1e-6,
            split_refinement: true,
            literal_k1: false,
            check_unimodal: false,
            power_step_scale: 0.1,
            time_step_scale: 0.01,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("epsilon", self.epsilon),
            ("epsilon1", self.epsilon1),
            ("epsilon2", self.epsilon2),
            ("alpha_min", self.alpha_min),
            ("power_step_scale", self.power_step_scale),
            ("time_step_scale", self.time_step_scale),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        if self.max_inner_iterations == 0 || self.max_alternations == 0 {
            return Err(Error::InvalidParameter("iteration caps must be at least 1".into()));
        }
        if self.alpha_min >= 1.0 {
            return Err(Error::InvalidParameter("alpha_min must be below 1".into()));
        }
        Ok(())
    }
}

/// One alternation: Nash product after the power block and after the time
/// block.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub phi_power: Phi,
    pub phi_time: Phi,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InnerResult {
    /// Best strategy found; `None` when the set admits no feasible start.
    pub strategy: Option<Strategy>,
    pub phi: Phi,
    pub trace: Vec<TraceEntry>,
    /// Number of completed alternations.
    pub alternations: usize,
    pub converged: bool,
}

impl InnerResult {
    fn infeasible() -> Self {
        Self {
            strategy: None,
            phi: Phi::Infeasible,
            trace: Vec::new(),
            alternations: 0,
            converged: false,
        }
    }

    pub fn is_feasible(&self) -> bool {
        self.phi.is_feasible()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SetResult {
    pub set: DedicatorSet,
    pub result: InnerResult,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub best_phi: Phi,
    pub best_set: Option<DedicatorSet>,
    pub best_strategy: Option<Strategy>,
    pub utilities: Option<UtilityReport>,
    pub per_set_results: Vec<SetResult>,
    pub feasible: bool,
    /// Alternations summed over every evaluated set.
    pub total_iterations: usize,
}

/// Starting point of the alternation: the harvest fraction makes the
/// harvested energy twice the fixed relay cost (kept well inside the QoS
/// limit), the remainder is shared equally among all hops.
fn initial_allocation(
    instance: &NetworkInstance,
    dedicators: &DedicatorSet,
    alpha_min: f64,
) -> Option<TimeAllocation> {
    let n = instance.num_pairs;
    let p = &instance.params;
    let energy = apply_dedicators(instance, dedicators);
    let f1: f64 = (0..n)
        .filter(|&i| dedicators.contains(i))
        .map(|i| p.conversion_efficiency * energy[i] * instance.source_relay_gains[i])
        .sum();
    let f2 = p.relay_fixed_cost_rate * p.block_time;
    if !(f1 > 0.0) {
        return None;
    }
    let floor = f2 / f1;
    let ceiling = 1.0 - n as f64 * p.min_pair_time_fraction;
    if !(floor < ceiling) {
        return None;
    }
    let span = ceiling - floor;
    let alpha = (2.0 * f2 / f1)
        .clamp(floor + 0.1 * span, floor + 0.5 * span)
        .max(alpha_min);
    let share = (1.0 - alpha) / (2 * n) as f64;
    Some(TimeAllocation {
        harvest_fraction: alpha,
        uplink_fraction: vec![share; n],
        downlink_fraction: vec![share; n],
    })
}

/// Relative change `|a - b| / b` of two Nash products given as logs.
fn relative_change(new: Phi, old: Phi) -> f64 {
    match (new, old) {
        (Phi::Feasible { ln: a }, Phi::Feasible { ln: b }) => (a - b).exp_m1().abs(),
        (Phi::Infeasible, Phi::Infeasible) => 0.0,
        _ => f64::INFINITY,
    }
}

struct Alternation<'a> {
    instance: &'a NetworkInstance,
    dedicators: &'a DedicatorSet,
    cfg: &'a SolverConfig,
    energy_power: Vec<f64>,
}

impl Alternation<'_> {
    /// Relay-power block from `current`. Returns the better of the new point
    /// and `current`.
    fn power_step(&self, current: &Strategy, phi: Phi) -> Result<(Strategy, Phi)> {
        let time = TimeAllocation::from_strategy(current);
        let coeffs = power_coefficients(self.instance, self.dedicators, &time, self.cfg.literal_k1)?;
        let sol = solve_relay_power(&coeffs, self.cfg)?;
        if !sol.phi.is_feasible() {
            return Ok((current.clone(), phi));
        }
        let data_power = source_powers_from_relay(sol.relay_power, self.instance, &time)?;
        let next = time.to_strategy(
            self.dedicators,
            self.energy_power.clone(),
            data_power,
            sol.relay_power,
        );
        let next_phi = nash_product(self.instance, &next)?;
        Ok(if next_phi > phi { (next, next_phi) } else { (current.clone(), phi) })
    }

    /// Time-division block, then the hop-split pass.
    fn time_step(&self, current: &Strategy, phi: Phi) -> Result<(Strategy, Phi)> {
        let coeffs = time_coefficients(
            self.instance,
            self.dedicators,
            &current.data_power,
            current.relay_power,
        )?;
        let start = TimeAllocation::from_strategy(current);
        let sol = solve_time_division_from(&coeffs, &start, self.cfg)?;
        let (mut best, mut best_phi) = (current.clone(), phi);
        if sol.phi.is_feasible() {
            let next = sol.allocation.to_strategy(
                self.dedicators,
                self.energy_power.clone(),
                current.data_power.clone(),
                current.relay_power,
            );
            let next_phi = nash_product(self.instance, &next)?;
            if next_phi > best_phi {
                best = next;
                best_phi = next_phi;
            }
        }
        if self.cfg.split_refinement {
            let mut refined = best.clone();
            if refine_hop_split(self.instance, &mut refined) {
                let refined_phi = nash_product(self.instance, &refined)?;
                if refined_phi > best_phi {
                    best = refined;
                    best_phi = refined_phi;
                }
            }
        }
        Ok((best, best_phi))
    }

    fn run(&self, mut strategy: Strategy, mut phi: Phi, warm: bool) -> Result<InnerResult> {
        let mut trace = Vec::new();
        let mut prev = if warm { Some((phi, phi)) } else { None };
        let mut converged = false;
        for k in 0..self.cfg.max_alternations {
            let (s1, phi1) = self.power_step(&strategy, phi)?;
            let (s2, phi2) = self.time_step(&s1, phi1)?;
            strategy = s2;
            phi = phi2;
            trace.push(TraceEntry {
                iteration: k + 1,
                phi_power: phi1,
                phi_time: phi2,
            });
            if !phi.is_feasible() {
                break;
            }
            if let Some((p1, p2)) = prev {
                if relative_change(phi1, p1).max(relative_change(phi2, p2)) < self.cfg.epsilon {
                    converged = true;
                    break;
                }
            }
            prev = Some((phi1, phi2));
        }
        if !phi.is_feasible() {
            return Ok(InnerResult {
                trace,
                ..InnerResult::infeasible()
            });
        }
        Ok(InnerResult {
            strategy: Some(strategy),
            phi,
            alternations: trace.len(),
            trace,
            converged,
        })
    }
}

/// Runs the alternation for one dedicator set from the default start.
pub fn solve_inner(
    instance: &NetworkInstance,
    dedicators: &DedicatorSet,
    cfg: &SolverConfig,
) -> Result<InnerResult> {
    check_inputs(instance, dedicators, cfg)?;
    let Some(time) = initial_allocation(instance, dedicators, cfg.alpha_min) else {
        return Ok(InnerResult::infeasible());
    };
    let energy_power = apply_dedicators(instance, dedicators);
    let alt = Alternation {
        instance,
        dedicators,
        cfg,
        energy_power: energy_power.clone(),
    };
    // the start has no relay power yet; the first power block supplies it
    let start = time.to_strategy(dedicators, energy_power, vec![0.0; instance.num_pairs], 0.0);
    alt.run(start, Phi::Infeasible, false)
}

/// Runs the alternation from a feasible strategy. The stopping rule compares
/// the first alternation against the starting point, so a converged start
/// returns after one alternation.
pub fn solve_inner_from(
    instance: &NetworkInstance,
    dedicators: &DedicatorSet,
    start: &Strategy,
    cfg: &SolverConfig,
) -> Result<InnerResult> {
    check_inputs(instance, dedicators, cfg)?;
    let phi = nash_product(instance, start)?;
    if !phi.is_feasible() {
        return solve_inner(instance, dedicators, cfg);
    }
    let energy_power = apply_dedicators(instance, dedicators);
    let alt = Alternation {
        instance,
        dedicators,
        cfg,
        energy_power,
    };
    alt.run(start.clone(), phi, true)
}

fn check_inputs(instance: &NetworkInstance, dedicators: &DedicatorSet, cfg: &SolverConfig) -> Result<()> {
    cfg.validate()?;
    if dedicators.len() != instance.num_pairs {
        return Err(Error::LengthMismatch {
            what: "dedicator indicator",
            expected: instance.num_pairs,
            got: dedicators.len(),
        });
    }
    if dedicators.count() == 0 {
        return Err(Error::InvalidParameter("dedicator set is empty".into()));
    }
    Ok(())
}

/// Solves the bargaining problem over the candidate dedicator sets.
///
/// Pruned mode walks K = N down to 1 and stops at the first infeasible K;
/// exhaustive mode evaluates every non-empty subset. Ties in the Nash product
/// go to the set visited first.
pub fn solve(instance: &NetworkInstance, cfg: &SolverConfig) -> Result<SolveResult> {
    instance.validate()?;
    cfg.validate()?;
    let sets = candidate_sets(instance, cfg.enumeration_mode)?;
    let mut per_set_results = Vec::with_capacity(sets.len());
    let mut best: Option<usize> = None;
    for set in sets {
        let result = solve_inner(instance, &set, cfg)?;
        let feasible = result.is_feasible();
        per_set_results.push(SetResult { set, result });
        let idx = per_set_results.len() - 1;
        if feasible {
            let better = match best {
                None => true,
                Some(b) => per_set_results[idx].result.phi > per_set_results[b].result.phi,
            };
            if better {
                best = Some(idx);
            }
        } else if cfg.enumeration_mode == EnumerationMode::Pruned {
            break;
        }
    }
    let total_iterations = per_set_results.iter().map(|r| r.result.alternations).sum();
    let Some(b) = best else {
        return Ok(SolveResult {
            best_phi: Phi::Infeasible,
            best_set: None,
            best_strategy: None,
            utilities: None,
            per_set_results,
            feasible: false,
            total_iterations,
        });
    };
    let winner = &per_set_results[b];
    let strategy = winner.result.strategy.clone().expect("feasible result has a strategy");
    let utilities = evaluate(instance, &strategy)?;
    Ok(SolveResult {
        best_phi: winner.result.phi,
        best_set: Some(winner.set.clone()),
        utilities: Some(utilities),
        best_strategy: Some(strategy),
        per_set_results,
        feasible: true,
        total_iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{generate_scenario, FadingModel, PhysicalParams, ScenarioConfig};
    use crate::utility::{check_feasible, is_balanced};

    #[test]
    fn table_one_instance_converges_monotonically() {
        let inst = generate_scenario(&ScenarioConfig::table_one(), 3).unwrap();
        let cfg = SolverConfig::default();
        let r = solve_inner(&inst, &DedicatorSet::all(7), &cfg).unwrap();
        assert!(r.is_feasible());
        assert!(r.converged);
        let mut last = Phi::Infeasible;
        for e in &r.trace {
            assert!(e.phi_power >= last);
            assert!(e.phi_time >= e.phi_power);
            last = e.phi_time;
        }
        let s = r.strategy.unwrap();
        assert!(check_feasible(&inst, &s).feasible, "{:?}", check_feasible(&inst, &s));
        assert!(is_balanced(&inst, &s));
    }

    #[test]
    fn warm_start_stops_after_one_alternation() {
        let inst = generate_scenario(&ScenarioConfig::table_one(), 4).unwrap();
        let cfg = SolverConfig::default();
        let set = DedicatorSet::all(7);
        let first = solve_inner(&inst, &set, &cfg).unwrap();
        let again = solve_inner_from(&inst, &set, first.strategy.as_ref().unwrap(), &cfg).unwrap();
        assert_eq!(again.alternations, 1);
        assert!(again.converged);
        let change = (again.phi.ln() - first.phi.ln()).exp_m1();
        assert!((0.0..cfg.epsilon).contains(&change), "{change}");
    }

    #[test]
    fn single_dedicator_with_high_cost_is_infeasible() {
        let mut cfg = ScenarioConfig::table_one();
        cfg.params.relay_fixed_cost_rate = 0.2;
        let inst = generate_scenario(&cfg, 1).unwrap();
        let r = solve_inner(&inst, &DedicatorSet::from_members(7, &[0]).unwrap(), &SolverConfig::default())
            .unwrap();
        assert!(!r.is_feasible());
    }

    #[test]
    fn single_pair_evaluates_one_set() {
        let mut cfg = ScenarioConfig::table_one();
        cfg.num_pairs = 1;
        cfg.params.relay_fixed_cost_rate = 0.0;
        let inst = generate_scenario(&cfg, 2).unwrap();
        let r = solve(&inst, &SolverConfig::default()).unwrap();
        assert_eq!(r.per_set_results.len(), 1);
        assert!(r.feasible);
    }

    #[test]
    fn symmetric_pair_modes_agree() {
        let inst = NetworkInstance::from_gains(
            vec![0.02, 0.02],
            vec![0.02, 0.02],
            PhysicalParams::table_one().with_relay_fixed_cost_rate(0.01),
        )
        .unwrap();
        let pruned = solve(&inst, &SolverConfig::default()).unwrap();
        let cfg = SolverConfig {
            enumeration_mode: EnumerationMode::Exhaustive,
            ..SolverConfig::default()
        };
        let exhaustive = solve(&inst, &cfg).unwrap();
        assert_eq!(pruned.best_set, exhaustive.best_set);
        assert!(pruned.best_phi <= exhaustive.best_phi);
    }

    #[test]
    fn best_phi_dominates_every_set() {
        let mut cfg = ScenarioConfig::table_one();
        cfg.num_pairs = 4;
        cfg.fading_model = FadingModel::Rayleigh;
        let inst = generate_scenario(&cfg, 11).unwrap();
        let solver = SolverConfig {
            enumeration_mode: EnumerationMode::Exhaustive,
            ..SolverConfig::default()
        };
        let r = solve(&inst, &solver).unwrap();
        assert_eq!(r.per_set_results.len(), 15);
        for s in &r.per_set_results {
            assert!(r.best_phi >= s.result.phi);
        }
    }

    #[test]
    fn rejects_empty_set() {
        let inst = generate_scenario(&ScenarioConfig::table_one(), 1).unwrap();
        let r = solve_inner(&inst, &DedicatorSet::new(vec![false; 7]), &SolverConfig::default());
        assert!(r.is_err());
    }
}
