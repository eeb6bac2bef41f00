//! Relay-power block: with the time division fixed, pick P^r and recover each
//! source's data power from hop balance.

use serde::{Deserialize, Serialize};

use crate::dedicators::{apply_dedicators, DedicatorSet};
use crate::error::{Error, Result};
use crate::network::NetworkInstance;
use crate::search::{count_local_maxima, golden_section_max, linspace};
use crate::solver::SolverConfig;
use crate::time::TimeAllocation;
use crate::utility::Phi;

/// The box end is kept this far below the relay-utility pole K1/K2.
const POLE_MARGIN: f64 = 1e-9;
/// Samples used by the optional unimodality self-check.
const UNIMODAL_CHECK_POINTS: usize = 1000;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PowerMode {
    #[default]
    GoldenSection,
    DualAscent,
}

/// Coefficients of the relay-power objective.
///
/// With every hop balanced the log Nash product, as a function of P^r alone,
/// is
///
/// ```text
/// sum_i [ ln(gamma_i log2(1 + L1_i P)) - ln(L3_i ((1 + L1_i P)^L2_i - 1) + L4_i) ]
///     + ln(K1 - K2 P)
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerCoefficients {
    /// |g_i|^2 / sigma^2.
    pub l1: Vec<f64>,
    /// gamma_i / beta_i.
    pub l2: Vec<f64>,
    /// beta_i sigma^2 / |h_i|^2.
    pub l3: Vec<f64>,
    /// alpha_i P_i^{s1}.
    pub l4: Vec<f64>,
    /// gamma_i, the constant capacity scale of each pair.
    pub downlink_fraction: Vec<f64>,
    /// Harvested energy minus the fixed relay cost.
    pub k1: f64,
    /// sum_i gamma_i.
    pub k2: f64,
    /// Largest admissible P^r.
    pub upper_bound: f64,
}

impl PowerCoefficients {
    pub fn num_pairs(&self) -> usize {
        self.l1.len()
    }

    pub fn is_feasible(&self) -> bool {
        self.k1 > 0.0 && self.upper_bound > 0.0
    }

    /// Right end of the domain where the relay utility stays positive.
    pub fn domain_end(&self) -> f64 {
        if self.k1 > 0.0 {
            (1.0 - POLE_MARGIN) * self.k1 / self.k2
        } else {
            0.0
        }
    }

    /// ln Phi as a function of P^r; -inf outside `(0, K1/K2)`.
    pub fn log_objective(&self, p: f64) -> f64 {
        let relay = self.k1 - self.k2 * p;
        if !(p > 0.0) || !(relay > 0.0) {
            return f64::NEG_INFINITY;
        }
        let mut total = relay.ln();
        for i in 0..self.num_pairs() {
            let lg = (self.l1[i] * p).ln_1p();
            let bits = self.downlink_fraction[i] * lg / std::f64::consts::LN_2;
            let energy = self.l3[i] * (self.l2[i] * lg).exp_m1() + self.l4[i];
            total += bits.ln() - energy.ln();
        }
        total
    }

    /// d ln Phi / dP^r.
    pub fn log_objective_derivative(&self, p: f64) -> f64 {
        let mut total = -self.k2 / (self.k1 - self.k2 * p);
        for i in 0..self.num_pairs() {
            let (l1, l2, l3, l4) = (self.l1[i], self.l2[i], self.l3[i], self.l4[i]);
            let lg = (l1 * p).ln_1p();
            let energy = l3 * (l2 * lg).exp_m1() + l4;
            total += l1 / ((1.0 + l1 * p) * lg)
                - l3 * l2 * l1 * ((l2 - 1.0) * lg).exp() / energy;
        }
        total
    }
}

/// Builds the coefficients for the given dedicators and time division.
///
/// With `literal_k1` the harvested energy omits the channel gains, which
/// matches a different reading of the model; it exists for comparison only.
pub fn power_coefficients(
    instance: &NetworkInstance,
    dedicators: &DedicatorSet,
    time: &TimeAllocation,
    literal_k1: bool,
) -> Result<PowerCoefficients> {
    let n = instance.num_pairs;
    time.check_len(n)?;
    let p = &instance.params;
    let sigma2 = p.noise_power;
    let energy_power = apply_dedicators(instance, dedicators);

    let mut c = PowerCoefficients {
        l1: Vec::with_capacity(n),
        l2: Vec::with_capacity(n),
        l3: Vec::with_capacity(n),
        l4: Vec::with_capacity(n),
        downlink_fraction: time.downlink_fraction.clone(),
        k1: -p.relay_fixed_cost_rate * p.block_time,
        k2: 0.0,
        upper_bound: p.relay_power_cap,
    };
    for i in 0..n {
        let (beta, gamma) = (time.uplink_fraction[i], time.downlink_fraction[i]);
        if !(beta > 0.0 && gamma > 0.0) {
            return Err(Error::DegenerateTime { pair: i });
        }
        let h = instance.source_relay_gains[i];
        let g = instance.relay_destination_gains[i];
        let alpha_i = if dedicators.contains(i) { time.harvest_fraction } else { 0.0 };

        c.l1.push(g / sigma2);
        c.l2.push(gamma / beta);
        c.l3.push(beta * p.block_time * sigma2 / h);
        c.l4.push(alpha_i * p.block_time * energy_power[i]);
        let gain = if literal_k1 { 1.0 } else { h };
        c.k1 += p.conversion_efficiency * alpha_i * energy_power[i] * p.block_time * gain;
        c.k2 += gamma * p.block_time;

        // relay power at which pair i needs the full source power
        let cap = sigma2 / g * ((beta / gamma) * (p.source_power_cap * h / sigma2).ln_1p()).exp_m1();
        c.upper_bound = c.upper_bound.min(cap);
    }
    c.upper_bound = c.upper_bound.min(c.domain_end()).max(0.0);
    Ok(c)
}

/// Output of the relay-power block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerSolution {
    pub relay_power: f64,
    /// Nash product at `relay_power` with balanced hops.
    pub phi: Phi,
    pub iterations: usize,
}

/// Maximizes the relay-power objective over `[0, upper_bound]`.
pub fn solve_relay_power(coeffs: &PowerCoefficients, cfg: &SolverConfig) -> Result<PowerSolution> {
    if !coeffs.is_feasible() {
        return Ok(PowerSolution {
            relay_power: 0.0,
            phi: Phi::Infeasible,
            iterations: 0,
        });
    }
    let ub = coeffs.upper_bound;
    if cfg.check_unimodal {
        let values: Vec<f64> = linspace(0.0, ub, UNIMODAL_CHECK_POINTS)
            .into_iter()
            .map(|p| coeffs.log_objective(p))
            .collect();
        let (maxima, _) = count_local_maxima(&values, 1e-12);
        if maxima > 1 {
            return Err(Error::NonUnimodal {
                maxima,
                lo: 0.0,
                hi: ub,
            });
        }
    }
    let tol = cfg.epsilon1 * ub.min(1.0);
    let (relay_power, iterations) = match cfg.power_mode {
        PowerMode::GoldenSection => {
            let r = golden_section_max(|p| coeffs.log_objective(p), 0.0, ub, tol, cfg.max_inner_iterations);
            (r.x, r.evaluations)
        }
        PowerMode::DualAscent => dual_ascent(coeffs, cfg, tol),
    };
    Ok(PowerSolution {
        relay_power,
        phi: Phi::from_ln(coeffs.log_objective(relay_power)),
        iterations,
    })
}

/// Lagrangian dual ascent on the box constraints `0 <= P <= ub`.
///
/// Each iteration maximizes `ln Phi(P) + rho1 P - rho2 (P - ub)` over the
/// positive-relay-utility domain, then moves the multipliers along the
/// constraint residuals with step `c / sqrt(t)`. The best box-clipped primal
/// iterate is returned.
fn dual_ascent(coeffs: &PowerCoefficients, cfg: &SolverConfig, tol: f64) -> (f64, usize) {
    let ub = coeffs.upper_bound;
    let end = coeffs.domain_end();
    let c = cfg.power_step_scale * ub;
    let (mut rho1, mut rho2) = (0.0_f64, 0.0_f64);
    let mut best = (0.0, f64::NEG_INFINITY);
    let mut prev = f64::NAN;
    let mut t = 0;
    while t < cfg.max_inner_iterations {
        t += 1;
        let step = c / (t as f64).sqrt();
        let shift = rho1 - rho2;
        let p = golden_section_max(
            |p| coeffs.log_objective(p) + shift * p,
            0.0,
            end,
            tol,
            cfg.max_inner_iterations,
        )
        .x;
        let clipped = p.clamp(0.0, ub);
        let value = coeffs.log_objective(clipped);
        if value > best.1 {
            best = (clipped, value);
        }
        rho1 = (rho1 - step * p).max(0.0);
        rho2 = (rho2 + step * (p - ub)).max(0.0);
        if (p - prev).abs() < cfg.epsilon1 {
            break;
        }
        prev = p;
    }
    (best.0, t)
}

/// Data powers that balance every pair's hops for relay power `relay_power`.
pub fn source_powers_from_relay(
    relay_power: f64,
    instance: &NetworkInstance,
    time: &TimeAllocation,
) -> Result<Vec<f64>> {
    time.check_len(instance.num_pairs)?;
    let p = &instance.params;
    (0..instance.num_pairs)
        .map(|i| {
            let (beta, gamma) = (time.uplink_fraction[i], time.downlink_fraction[i]);
            if !(beta > 0.0) {
                return Err(Error::DegenerateTime { pair: i });
            }
            let power = data_power_for_balance(instance, i, relay_power, gamma / beta);
            if power > p.source_power_cap * (1.0 + 1e-9) {
                return Err(Error::CapViolation {
                    pair: i,
                    power,
                    cap: p.source_power_cap,
                });
            }
            Ok(power.min(p.source_power_cap))
        })
        .collect()
}

/// P_i^{s0} such that `beta log(1 + P^{s0}|h|^2/s2) = gamma log(1 + P^r|g|^2/s2)`
/// with `ratio = gamma / beta`.
pub(crate) fn data_power_for_balance(
    instance: &NetworkInstance,
    i: usize,
    relay_power: f64,
    ratio: f64,
) -> f64 {
    let sigma2 = instance.params.noise_power;
    let lg = (relay_power * instance.downlink_snr_per_mw(i)).ln_1p();
    sigma2 / instance.source_relay_gains[i] * (ratio * lg).exp_m1()
}
