//! Brute-force checks: a grid oracle for one or two pairs and one-dimensional
//! scans that probe the shape of the Nash product.

use serde::{Deserialize, Serialize};

use crate::dedicators::{apply_dedicators, DedicatorSet};
use crate::error::{Error, Result};
use crate::network::NetworkInstance;
use crate::power::{data_power_for_balance, power_coefficients};
use crate::search::{count_local_maxima, linspace};
use crate::time::TimeAllocation;
use crate::utility::{nash_product, Phi, Strategy};

/// Relative tolerance under which neighbouring samples form one plateau.
pub const PLATEAU_TOL: f64 = 1e-12;
/// The relay-power axis of the grid oracle spans this many decades below the cap.
const RELAY_POWER_DECADES: f64 = 6.0;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScanReport {
    pub axis: String,
    pub grid: usize,
    pub argmax_index: usize,
    pub local_maxima_count: usize,
    pub is_unimodal: bool,
    pub is_endpoint_argmax: bool,
}

impl ScanReport {
    fn from_values(axis: String, values: &[f64]) -> Self {
        let (count, argmax) = count_local_maxima(values, PLATEAU_TOL);
        let grid = values.len();
        let best = values.get(argmax).copied().unwrap_or(f64::NEG_INFINITY);
        let at_end = |k: usize| {
            let v = values[k];
            v == best || (best.is_finite() && (best - v).abs() <= PLATEAU_TOL * best.abs())
        };
        let is_endpoint_argmax =
            grid == 0 || argmax == 0 || argmax + 1 == grid || at_end(0) || at_end(grid - 1);
        Self {
            axis,
            grid,
            argmax_index: argmax,
            local_maxima_count: count,
            is_unimodal: count <= 1,
            is_endpoint_argmax,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub best_phi: Phi,
    pub best_point: Option<Strategy>,
    /// Samples per axis.
    pub grid_resolution: Vec<usize>,
    pub evaluations: usize,
    pub feasible_points: usize,
}

/// Grid points `u_k = k / n` for `k = 1..=n`; the grid for `2n` contains the
/// grid for `n`.
fn unit_axis(n: usize) -> Vec<f64> {
    (1..=n).map(|k| k as f64 / n as f64).collect()
}

/// Relay powers spread logarithmically over six decades up to the cap.
fn relay_axis(cap: f64, n: usize) -> Vec<f64> {
    unit_axis(n)
        .into_iter()
        .map(|u| cap * 10f64.powf(-RELAY_POWER_DECADES * (1.0 - u)))
        .collect()
}

/// Best grid point so far: relay power, alpha, ln Phi and per-pair (beta, gamma).
type GridPoint = (f64, f64, f64, Vec<(f64, f64)>);

/// Per-pair data of one grid point.
struct PairTime {
    beta: f64,
    gamma: f64,
}

/// Fast ln Phi for the oracle with balanced hops; `None` if infeasible.
struct Evaluator<'a> {
    instance: &'a NetworkInstance,
    energy_power: Vec<f64>,
    harvest_gain: f64,
}

impl<'a> Evaluator<'a> {
    fn new(instance: &'a NetworkInstance, dedicators: &DedicatorSet) -> Self {
        let p = &instance.params;
        let energy_power = apply_dedicators(instance, dedicators);
        let harvest_gain = (0..instance.num_pairs)
            .map(|i| p.conversion_efficiency * energy_power[i] * instance.source_relay_gains[i])
            .sum();
        Self {
            instance,
            energy_power,
            harvest_gain,
        }
    }

    /// `lg[i]` is ln(1 + P^r |g_i|^2 / sigma^2).
    fn log_phi(&self, relay_power: f64, alpha: f64, lg: &[f64], times: &[PairTime]) -> f64 {
        let inst = self.instance;
        let p = &inst.params;
        let mut relay = self.harvest_gain * alpha - p.relay_fixed_cost_rate;
        let mut total = 0.0;
        for (i, t) in times.iter().enumerate() {
            if !(t.beta > 0.0 && t.gamma > 0.0) {
                return f64::NEG_INFINITY;
            }
            let data = p.noise_power / inst.source_relay_gains[i] * (t.gamma / t.beta * lg[i]).exp_m1();
            if data > p.source_power_cap {
                return f64::NEG_INFINITY;
            }
            relay -= t.gamma * relay_power;
            let bits = t.gamma * lg[i] / std::f64::consts::LN_2;
            let alpha_i = if self.energy_power[i] > 0.0 { alpha } else { 0.0 };
            total += bits.ln() - (alpha_i * self.energy_power[i] + t.beta * data).ln();
        }
        if !(relay > 0.0) {
            return f64::NEG_INFINITY;
        }
        total + relay.ln()
    }

    fn strategy(&self, dedicators: &DedicatorSet, relay_power: f64, alpha: f64, times: &[PairTime]) -> Strategy {
        let time = TimeAllocation {
            harvest_fraction: alpha,
            uplink_fraction: times.iter().map(|t| t.beta).collect(),
            downlink_fraction: times.iter().map(|t| t.gamma).collect(),
        };
        let data = (0..times.len())
            .map(|i| data_power_for_balance(self.instance, i, relay_power, times[i].gamma / times[i].beta))
            .collect();
        time.to_strategy(dedicators, self.energy_power.clone(), data, relay_power)
    }
}

/// Grid oracle with `resolution` samples on every axis.
pub fn grid_oracle(instance: &NetworkInstance, dedicators: &DedicatorSet, resolution: usize) -> Result<OracleResult> {
    let axes = match instance.num_pairs {
        1 => 3,
        2 => 5,
        n => return Err(Error::UnsupportedSize(n)),
    };
    grid_oracle_axes(instance, dedicators, &vec![resolution; axes])
}

/// Exhaustive grid search of the Nash product with hop balance enforced.
///
/// One pair: axes (P^r, alpha, s) with gamma = s (1 - alpha) and
/// beta = (1 - s)(1 - alpha). Two pairs: axes (P^r, alpha, s, q1, q2) where
/// `s` shares the data time between the pairs above their QoS minimum and
/// `q_i` splits pair i's time into downlink and uplink. P^r is log-spaced
/// over six decades up to the cap; the other axes use `k / n`, `k = 1..=n`.
/// Data powers follow from balance and points needing more than the source
/// cap are skipped. Ties keep the lowest linear index.
pub fn grid_oracle_axes(
    instance: &NetworkInstance,
    dedicators: &DedicatorSet,
    resolution: &[usize],
) -> Result<OracleResult> {
    let n = instance.num_pairs;
    let expected = match n {
        1 => 3,
        2 => 5,
        _ => return Err(Error::UnsupportedSize(n)),
    };
    if resolution.len() != expected {
        return Err(Error::LengthMismatch {
            what: "oracle resolution",
            expected,
            got: resolution.len(),
        });
    }
    if resolution.contains(&0) {
        return Err(Error::InvalidParameter("oracle resolution must be positive".into()));
    }
    let p = &instance.params;
    let theta0 = p.min_pair_time_fraction;
    let eval = Evaluator::new(instance, dedicators);
    let relay = relay_axis(p.relay_power_cap, resolution[0]);
    let alphas: Vec<f64> = unit_axis(resolution[1])
        .into_iter()
        .map(|u| u * (1.0 - n as f64 * theta0))
        .collect();

    let mut best: Option<GridPoint> = None;
    let mut best_ln = f64::NEG_INFINITY;
    let mut evaluations = 0;
    let mut feasible_points = 0;
    let mut lg = vec![0.0; n];
    let mut times: Vec<PairTime> = (0..n).map(|_| PairTime { beta: 0.0, gamma: 0.0 }).collect();

    for &pr in &relay {
        for (i, l) in lg.iter_mut().enumerate() {
            *l = (pr * instance.downlink_snr_per_mw(i)).ln_1p();
        }
        for &alpha in &alphas {
            let data_time = 1.0 - alpha;
            let mut visit = |times: &[PairTime]| {
                evaluations += 1;
                let v = eval.log_phi(pr, alpha, &lg, times);
                if v > f64::NEG_INFINITY {
                    feasible_points += 1;
                }
                if v > best_ln {
                    best_ln = v;
                    best = Some((pr, alpha, v, times.iter().map(|t| (t.beta, t.gamma)).collect()));
                }
            };
            if n == 1 {
                for s in unit_axis(resolution[2]) {
                    times[0] = PairTime {
                        gamma: s * data_time,
                        beta: (1.0 - s) * data_time,
                    };
                    visit(&times);
                }
            } else {
                let spare = data_time - 2.0 * theta0;
                for s in unit_axis(resolution[2]) {
                    let tau0 = theta0 + s * spare;
                    let tau1 = data_time - tau0;
                    for q0 in unit_axis(resolution[3]) {
                        times[0] = PairTime {
                            gamma: q0 * tau0,
                            beta: (1.0 - q0) * tau0,
                        };
                        for q1 in unit_axis(resolution[4]) {
                            times[1] = PairTime {
                                gamma: q1 * tau1,
                                beta: (1.0 - q1) * tau1,
                            };
                            visit(&times);
                        }
                    }
                }
            }
        }
    }

    let (best_phi, best_point) = match best {
        Some((pr, alpha, ln, bg)) => {
            let times: Vec<PairTime> = bg.into_iter().map(|(beta, gamma)| PairTime { beta, gamma }).collect();
            (Phi::from_ln(ln), Some(eval.strategy(dedicators, pr, alpha, &times)))
        }
        None => (Phi::Infeasible, None),
    };
    Ok(OracleResult {
        best_phi,
        best_point,
        grid_resolution: resolution.to_vec(),
        evaluations,
        feasible_points,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScanAxis {
    RelayPower,
    HarvestFraction,
}

impl ScanAxis {
    pub fn name(self) -> &'static str {
        match self {
            ScanAxis::RelayPower => "relay_power",
            ScanAxis::HarvestFraction => "harvest_fraction",
        }
    }
}

fn phi_value(phi: Phi) -> f64 {
    phi.value().unwrap_or(f64::NEG_INFINITY)
}

/// Dedicators implied by a strategy: sources with positive energy power.
fn dedicators_of(strategy: &Strategy) -> DedicatorSet {
    DedicatorSet::new(strategy.energy_power.iter().map(|&e| e > 0.0).collect())
}

/// Samples the Nash product along one axis with everything else fixed.
///
/// The relay-power axis covers the power block's box and re-balances every
/// pair's data power at each sample. The harvest-fraction axis runs from 0 to
/// the largest alpha that keeps QoS after scaling every beta and gamma by
/// the same factor so the budget stays exact.
pub fn unimodality_scan(
    instance: &NetworkInstance,
    strategy: &Strategy,
    axis: ScanAxis,
    grid: usize,
) -> Result<ScanReport> {
    let set = dedicators_of(strategy);
    let values: Vec<f64> = match axis {
        ScanAxis::RelayPower => {
            let time = TimeAllocation::from_strategy(strategy);
            let coeffs = power_coefficients(instance, &set, &time, false)?;
            linspace(0.0, coeffs.upper_bound, grid)
                .into_iter()
                .map(|p| {
                    let ln = coeffs.log_objective(p);
                    if ln == f64::NEG_INFINITY {
                        ln
                    } else {
                        ln.exp()
                    }
                })
                .collect()
        }
        ScanAxis::HarvestFraction => {
            let alpha0 = strategy.harvest_time();
            let theta0 = instance.params.min_pair_time_fraction;
            let min_tau = (0..instance.num_pairs)
                .map(|i| strategy.uplink_fraction[i] + strategy.downlink_fraction[i])
                .fold(f64::INFINITY, f64::min);
            let alpha_max = 1.0 - theta0 * (1.0 - alpha0) / min_tau;
            linspace(0.0, alpha_max, grid)
                .into_iter()
                .map(|alpha| {
                    let scale = (1.0 - alpha) / (1.0 - alpha0);
                    let mut s = strategy.clone();
                    for i in 0..instance.num_pairs {
                        if set.contains(i) {
                            s.harvest_fraction[i] = alpha;
                        }
                        s.uplink_fraction[i] *= scale;
                        s.downlink_fraction[i] *= scale;
                    }
                    nash_product(instance, &s).map(phi_value)
                })
                .collect::<Result<_>>()?
        }
    };
    Ok(ScanReport::from_values(axis.name().to_string(), &values))
}

/// Samples the Nash product over source `i`'s energy power on `[0, P0^s]`
/// with the source harvesting for the strategy's common harvest time.
pub fn endpoint_scan_energy_power(
    instance: &NetworkInstance,
    strategy: &Strategy,
    i: usize,
    grid: usize,
) -> Result<ScanReport> {
    if i >= instance.num_pairs {
        return Err(Error::InvalidParameter(format!("source {i} out of range")));
    }
    let mut s = strategy.clone();
    s.harvest_fraction[i] = strategy.harvest_time();
    let values = linspace(0.0, instance.params.source_power_cap, grid)
        .into_iter()
        .map(|e| {
            s.energy_power[i] = e;
            nash_product(instance, &s).map(phi_value)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ScanReport::from_values(format!("energy_power({i})"), &values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::PhysicalParams;
    use crate::solver::{solve_inner, SolverConfig};
    use crate::utility::check_feasible;

    fn one_pair(e0: f64) -> NetworkInstance {
        NetworkInstance::from_gains(
            vec![0.02],
            vec![0.02],
            PhysicalParams::table_one().with_relay_fixed_cost_rate(e0),
        )
        .unwrap()
    }

    #[test]
    fn evaluator_matches_nash_product() {
        let inst = one_pair(0.005);
        let set = DedicatorSet::all(1);
        let r = grid_oracle(&inst, &set, 20).unwrap();
        let s = r.best_point.unwrap();
        let phi = nash_product(&inst, &s).unwrap();
        assert!((phi.ln() - r.best_phi.ln()).abs() < 1e-12);
        assert!(check_feasible(&inst, &s).feasible);
        assert_eq!(r.evaluations, 20 * 20 * 20);
    }

    #[test]
    fn infeasible_grid() {
        let inst = one_pair(1e3);
        let r = grid_oracle(&inst, &DedicatorSet::all(1), 10).unwrap();
        assert_eq!(r.feasible_points, 0);
        assert_eq!(r.best_phi, Phi::Infeasible);
        assert!(r.best_point.is_none());
    }

    #[test]
    fn refinement_never_hurts() {
        let inst = one_pair(0.005);
        let set = DedicatorSet::all(1);
        let mut last = Phi::Infeasible;
        for res in [25, 50, 100] {
            let r = grid_oracle(&inst, &set, res).unwrap();
            assert!(r.best_phi >= last);
            last = r.best_phi;
        }
    }

    #[test]
    fn rejects_three_pairs() {
        let inst = NetworkInstance::from_gains(vec![0.02; 3], vec![0.02; 3], PhysicalParams::table_one())
            .unwrap();
        assert!(matches!(
            grid_oracle(&inst, &DedicatorSet::all(3), 5),
            Err(Error::UnsupportedSize(3))
        ));
    }

    #[test]
    fn solver_reaches_oracle_on_one_pair() {
        let inst = one_pair(0.005);
        let set = DedicatorSet::all(1);
        let oracle = grid_oracle(&inst, &set, 100).unwrap();
        let r = solve_inner(&inst, &set, &SolverConfig::default()).unwrap();
        assert!(r.phi.ln() >= oracle.best_phi.ln() + 0.95f64.ln());
    }

    #[test]
    fn scans_on_a_solution() {
        let inst = NetworkInstance::from_gains(
            vec![0.03, 0.01],
            vec![0.01, 0.04],
            PhysicalParams::table_one().with_relay_fixed_cost_rate(0.01),
        )
        .unwrap();
        let set = DedicatorSet::new(vec![true, false]);
        let s = solve_inner(&inst, &set, &SolverConfig::default()).unwrap().strategy.unwrap();
        for axis in [ScanAxis::RelayPower, ScanAxis::HarvestFraction] {
            let r = unimodality_scan(&inst, &s, axis, 1000).unwrap();
            assert!(r.is_unimodal, "{r:?}");
        }
        for i in 0..2 {
            let r = endpoint_scan_energy_power(&inst, &s, i, 201).unwrap();
            assert!(r.is_endpoint_argmax, "{r:?}");
        }
    }

    #[test]
    fn flat_scan_is_unimodal_and_endpoint() {
        let r = ScanReport::from_values("x".into(), &[1.0; 10]);
        assert!(r.is_unimodal);
        assert!(r.is_endpoint_argmax);
        assert_eq!(r.argmax_index, 0);
    }

    #[test]
    fn scans_are_deterministic() {
        let inst = one_pair(0.005);
        let set = DedicatorSet::all(1);
        let s = solve_inner(&inst, &set, &SolverConfig::default()).unwrap().strategy.unwrap();
        let a = unimodality_scan(&inst, &s, ScanAxis::RelayPower, 500).unwrap();
        let b = unimodality_scan(&inst, &s, ScanAxis::RelayPower, 500).unwrap();
        assert_eq!(a, b);
    }
}
