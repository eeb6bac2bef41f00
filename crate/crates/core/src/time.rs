//! Time-division block: with every power fixed, choose the harvest fraction
//! and the per-pair downlink fractions. Uplink fractions follow from hop
//! balance, `beta_i = D5_i gamma_i`.

use serde::{Deserialize, Serialize};

use crate::dedicators::{apply_dedicators, DedicatorSet};
use crate::error::{Error, Result};
use crate::network::NetworkInstance;
use crate::power::data_power_for_balance;
use crate::search::golden_section_max;
use crate::solver::SolverConfig;
use crate::utility::{log2_1p, relay_utility, Phi, Strategy};

/// Armijo sufficient-increase constant.
const ARMIJO: f64 = 1e-4;
/// Grid used to bracket the best hop split before golden refinement.
const SPLIT_SCAN_POINTS: usize = 48;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimeMode {
    /// Eliminate alpha through the budget and run projected gradient ascent.
    #[default]
    Substitution,
    /// Multiplier form with diminishing steps along the budget hyperplane.
    DualAscent,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeAllocation {
    /// Common harvest fraction alpha of every dedicator.
    pub harvest_fraction: f64,
    /// beta_i.
    pub uplink_fraction: Vec<f64>,
    /// gamma_i.
    pub downlink_fraction: Vec<f64>,
}

impl TimeAllocation {
    /// Reads the time division of `strategy`.
    pub fn from_strategy(strategy: &Strategy) -> Self {
        Self {
            harvest_fraction: strategy.harvest_time(),
            uplink_fraction: strategy.uplink_fraction.clone(),
            downlink_fraction: strategy.downlink_fraction.clone(),
        }
    }

    pub fn num_pairs(&self) -> usize {
        self.downlink_fraction.len()
    }

    /// alpha + sum_i (beta_i + gamma_i) - 1.
    pub fn budget_residual(&self) -> f64 {
        self.harvest_fraction
            + self
                .uplink_fraction
                .iter()
                .zip(&self.downlink_fraction)
                .map(|(b, g)| b + g)
                .sum::<f64>()
            - 1.0
    }

    pub(crate) fn check_len(&self, n: usize) -> Result<()> {
        for (what, len) in [
            ("uplink_fraction", self.uplink_fraction.len()),
            ("downlink_fraction", self.downlink_fraction.len()),
        ] {
            if len != n {
                return Err(Error::LengthMismatch {
                    what,
                    expected: n,
                    got: len,
                });
            }
        }
        Ok(())
    }

    /// Full strategy with this time division. Enjoyers get a zero harvest
    /// fraction.
    pub fn to_strategy(
        &self,
        dedicators: &DedicatorSet,
        energy_power: Vec<f64>,
        data_power: Vec<f64>,
        relay_power: f64,
    ) -> Strategy {
        Strategy {
            energy_power,
            data_power,
            relay_power,
            harvest_fraction: (0..self.num_pairs())
                .map(|i| if dedicators.contains(i) { self.harvest_fraction } else { 0.0 })
                .collect(),
            uplink_fraction: self.uplink_fraction.clone(),
            downlink_fraction: self.downlink_fraction.clone(),
        }
    }
}

/// Coefficients of the time-division objective
///
/// ```text
/// sum_i [ ln(D1_i gamma_i) - ln(D2_i alpha + D3_i gamma_i) ]
///     + ln(F1 alpha - F2 - sum_i D4_i gamma_i)
/// ```
/// under `alpha + sum_i (1 + D5_i) gamma_i = 1` and
/// `(1 + D5_i) gamma_i >= theta0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeCoefficients {
    /// Downlink rate log2(1 + P^r |g_i|^2 / sigma^2), bits per unit time.
    pub d1: Vec<f64>,
    /// Energy-transfer power P_i^{s1}.
    pub d2: Vec<f64>,
    /// P_i^{s0} D5_i.
    pub d3: Vec<f64>,
    /// Relay power P^r.
    pub d4: Vec<f64>,
    /// Downlink rate over uplink rate.
    pub d5: Vec<f64>,
    /// eta sum over dedicators of P_i^{s1} |h_i|^2.
    pub f1: f64,
    /// Fixed relay cost E0.
    pub f2: f64,
    pub theta0: f64,
}

impl TimeCoefficients {
    pub fn num_pairs(&self) -> usize {
        self.d1.len()
    }

    /// Budget weights `1 + D5_i`.
    pub fn weights(&self) -> Vec<f64> {
        self.d5.iter().map(|d| 1.0 + d).collect()
    }

    /// Relay utility at `(alpha, gamma)`.
    pub fn relay_residual(&self, alpha: f64, gamma: &[f64]) -> f64 {
        self.f1 * alpha
            - self.f2
            - self.d4.iter().zip(gamma).map(|(d, g)| d * g).sum::<f64>()
    }

    /// ln Phi at `(alpha, gamma)`; -inf where some factor is not positive.
    pub fn log_objective(&self, alpha: f64, gamma: &[f64]) -> f64 {
        let r = self.relay_residual(alpha, gamma);
        if !(r > 0.0) || gamma.iter().any(|&g| !(g > 0.0)) {
            return f64::NEG_INFINITY;
        }
        let mut total = r.ln();
        for i in 0..self.num_pairs() {
            total += (self.d1[i] * gamma[i]).ln() - (self.d2[i] * alpha + self.d3[i] * gamma[i]).ln();
        }
        total
    }

    /// Partial derivatives of `log_objective` with alpha and every gamma_i
    /// treated as independent.
    pub fn log_gradient(&self, alpha: f64, gamma: &[f64]) -> (f64, Vec<f64>) {
        let r = self.relay_residual(alpha, gamma);
        let mut d_alpha = self.f1 / r;
        let d_gamma = (0..self.num_pairs())
            .map(|i| {
                let e = self.d2[i] * alpha + self.d3[i] * gamma[i];
                d_alpha -= self.d2[i] / e;
                1.0 / gamma[i] - self.d3[i] / e - self.d4[i] / r
            })
            .collect();
        (d_alpha, d_gamma)
    }

    /// ln Phi with alpha eliminated through the budget.
    pub fn reduced_objective(&self, gamma: &[f64]) -> f64 {
        self.log_objective(self.alpha_of(gamma), gamma)
    }

    /// Gradient of `reduced_objective`.
    pub fn reduced_gradient(&self, gamma: &[f64]) -> Vec<f64> {
        let alpha = self.alpha_of(gamma);
        let (da, mut dg) = self.log_gradient(alpha, gamma);
        for (g, d5) in dg.iter_mut().zip(&self.d5) {
            *g -= (1.0 + d5) * da;
        }
        dg
    }

    /// alpha implied by the budget equality.
    pub fn alpha_of(&self, gamma: &[f64]) -> f64 {
        1.0 - gamma
            .iter()
            .zip(&self.d5)
            .map(|(g, d)| (1.0 + d) * g)
            .sum::<f64>()
    }

    fn allocation(&self, alpha: f64, gamma: Vec<f64>) -> TimeAllocation {
        TimeAllocation {
            harvest_fraction: alpha,
            uplink_fraction: gamma.iter().zip(&self.d5).map(|(g, d)| d * g).collect(),
            downlink_fraction: gamma,
        }
    }
}

/// Time-division coefficients for fixed powers.
pub fn time_coefficients(
    instance: &NetworkInstance,
    dedicators: &DedicatorSet,
    data_power: &[f64],
    relay_power: f64,
) -> Result<TimeCoefficients> {
    let n = instance.num_pairs;
    if data_power.len() != n {
        return Err(Error::LengthMismatch {
            what: "data_power",
            expected: n,
            got: data_power.len(),
        });
    }
    let p = &instance.params;
    let energy_power = apply_dedicators(instance, dedicators);
    let mut c = TimeCoefficients {
        d1: Vec::with_capacity(n),
        d2: energy_power.iter().map(|e| e * p.block_time).collect(),
        d3: Vec::with_capacity(n),
        d4: vec![relay_power * p.block_time; n],
        d5: Vec::with_capacity(n),
        f1: 0.0,
        f2: p.relay_fixed_cost_rate * p.block_time,
        theta0: p.min_pair_time_fraction,
    };
    for i in 0..n {
        if !(data_power[i] > 0.0 && relay_power > 0.0) {
            return Err(Error::DegeneratePower { pair: i });
        }
        let down = log2_1p(relay_power * instance.downlink_snr_per_mw(i));
        let up = log2_1p(data_power[i] * instance.uplink_snr_per_mw(i));
        let d5 = down / up;
        c.d1.push(p.block_time * down);
        c.d3.push(data_power[i] * p.block_time * d5);
        c.d5.push(d5);
        if dedicators.contains(i) {
            c.f1 += p.conversion_efficiency * energy_power[i] * p.block_time * instance.source_relay_gains[i];
        }
    }
    Ok(c)
}

/// Output of the time-division block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeSolution {
    pub allocation: TimeAllocation,
    pub phi: Phi,
    pub iterations: usize,
    pub converged: bool,
}

/// Interior starting point: every pair gets the same total slot time
/// (1 - alpha) / N, and alpha harvests enough to cover twice the relay cost
/// of that schedule. `None` when no such schedule gives the relay positive
/// utility.
pub fn initial_time_allocation(coeffs: &TimeCoefficients, alpha_min: f64) -> Option<TimeAllocation> {
    let w = coeffs.weights();
    let n = coeffs.num_pairs() as f64;
    // relay cost per unit of shared time, gamma_i = (1 - alpha) / (N w_i)
    let cost_per_share = coeffs.d4.iter().zip(&w).map(|(d, w)| d / w).sum::<f64>() / n;
    let alpha_floor = (coeffs.f2 + cost_per_share) / (coeffs.f1 + cost_per_share);
    let alpha_ceiling = 1.0 - n * coeffs.theta0;
    if !(coeffs.f1 > 0.0) || !(alpha_floor < alpha_ceiling) || alpha_ceiling <= alpha_min {
        return None;
    }
    let span = alpha_ceiling - alpha_floor;
    let alpha = (2.0 * (coeffs.f2 + cost_per_share) / (coeffs.f1 + 2.0 * cost_per_share))
        .clamp(alpha_floor + 0.1 * span, alpha_floor + 0.5 * span)
        .max(alpha_min);
    let gamma = w.iter().map(|w| (1.0 - alpha) / (n * w)).collect();
    Some(coeffs.allocation(alpha, gamma))
}

/// Solves the block from the default starting point.
pub fn solve_time_division(coeffs: &TimeCoefficients, cfg: &SolverConfig) -> Result<TimeSolution> {
    check_room(coeffs, cfg)?;
    match initial_time_allocation(coeffs, cfg.alpha_min) {
        Some(start) => solve_time_division_from(coeffs, &start, cfg),
        None => Ok(infeasible(coeffs)),
    }
}

/// Solves the block starting from `start`, which must satisfy the budget.
/// A start with non-positive relay utility falls back to the default point.
pub fn solve_time_division_from(
    coeffs: &TimeCoefficients,
    start: &TimeAllocation,
    cfg: &SolverConfig,
) -> Result<TimeSolution> {
    check_room(coeffs, cfg)?;
    start.check_len(coeffs.num_pairs())?;
    let mut gamma = project(coeffs, &start.downlink_fraction, cfg.alpha_min);
    if coeffs.reduced_objective(&gamma) == f64::NEG_INFINITY {
        match initial_time_allocation(coeffs, cfg.alpha_min) {
            Some(a) => gamma = a.downlink_fraction,
            None => return Ok(infeasible(coeffs)),
        }
    }
    let (gamma, iterations, converged) = match cfg.time_mode {
        TimeMode::Substitution => spectral_projected_gradient(coeffs, gamma, cfg),
        TimeMode::DualAscent => hyperplane_ascent(coeffs, gamma, cfg),
    };
    let alpha = coeffs.alpha_of(&gamma);
    let phi = Phi::from_ln(coeffs.log_objective(alpha, &gamma));
    Ok(TimeSolution {
        allocation: coeffs.allocation(alpha, gamma),
        phi,
        iterations,
        converged,
    })
}

fn check_room(coeffs: &TimeCoefficients, cfg: &SolverConfig) -> Result<()> {
    let n = coeffs.num_pairs();
    if n as f64 * coeffs.theta0 >= 1.0 - cfg.alpha_min {
        return Err(Error::InfeasibleTime {
            num_pairs: n,
            theta0: coeffs.theta0,
        });
    }
    Ok(())
}

fn infeasible(coeffs: &TimeCoefficients) -> TimeSolution {
    let n = coeffs.num_pairs();
    let gamma: Vec<f64> = coeffs.weights().iter().map(|w| coeffs.theta0 / w).collect();
    let alpha = coeffs.alpha_of(&gamma);
    TimeSolution {
        allocation: coeffs.allocation(alpha, gamma),
        phi: Phi::Infeasible,
        iterations: 0,
        converged: n == 0,
    }
}

/// Euclidean projection onto `{gamma_i >= theta0 / w_i, w . gamma <= 1 - alpha_min}`.
fn project(coeffs: &TimeCoefficients, y: &[f64], alpha_min: f64) -> Vec<f64> {
    let w = coeffs.weights();
    let lb: Vec<f64> = w.iter().map(|wi| coeffs.theta0 / wi).collect();
    let cap = 1.0 - alpha_min;
    let clip = |lambda: f64| -> Vec<f64> {
        y.iter()
            .zip(&w)
            .zip(&lb)
            .map(|((yi, wi), li)| (yi - lambda * wi).max(*li))
            .collect()
    };
    let load = |x: &[f64]| x.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
    let x = clip(0.0);
    if load(&x) <= cap {
        return x;
    }
    // load(clip(lambda)) is non-increasing in lambda
    let (mut lo, mut hi) = (0.0, 1.0);
    while load(&clip(hi)) > cap {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if load(&clip(mid)) > cap {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-16 * hi.max(1.0) {
            break;
        }
    }
    clip(hi)
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Size of the projected unit gradient step, zero exactly at stationary points.
fn stationarity(coeffs: &TimeCoefficients, x: &[f64], g: &[f64], alpha_min: f64) -> f64 {
    let trial: Vec<f64> = x.iter().zip(g).map(|(xi, gi)| xi + gi).collect();
    max_abs_diff(&project(coeffs, &trial, alpha_min), x)
}

/// Spectral (Barzilai-Borwein) projected gradient with Armijo backtracking on
/// the reduced objective. Stops when both alpha and every gamma move by less
/// than `epsilon2` in one accepted step and the projected gradient is that
/// small as well.
fn spectral_projected_gradient(
    coeffs: &TimeCoefficients,
    mut x: Vec<f64>,
    cfg: &SolverConfig,
) -> (Vec<f64>, usize, bool) {
    let w = coeffs.weights();
    let mut f = coeffs.reduced_objective(&x);
    let mut g = coeffs.reduced_gradient(&x);
    let gmax = g.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let mut lambda = if gmax > 0.0 { (1e-2 / gmax).clamp(1e-12, 1e6) } else { 1.0 };

    for it in 1..=cfg.max_inner_iterations {
        let trial: Vec<f64> = x.iter().zip(&g).map(|(xi, gi)| xi + lambda * gi).collect();
        let d: Vec<f64> = project(coeffs, &trial, cfg.alpha_min)
            .iter()
            .zip(&x)
            .map(|(p, xi)| p - xi)
            .collect();
        let slope = dot(&g, &d);
        if !(slope > 0.0) {
            return (x, it, true);
        }
        let mut t = 1.0;
        let (xn, fnew) = loop {
            let xn: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + t * di).collect();
            let fnew = coeffs.reduced_objective(&xn);
            if fnew >= f + ARMIJO * t * slope {
                break (xn, fnew);
            }
            t *= 0.5;
            if t < 1e-20 {
                return (x, it, true);
            }
        };
        let gn = coeffs.reduced_gradient(&xn);
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        lambda = if sy < 0.0 { (dot(&s, &s) / -sy).clamp(1e-12, 1e6) } else { 1e6 };
        let step = max_abs_diff(&xn, &x).max(dot(&w, &s).abs());
        x = xn;
        f = fnew;
        g = gn;
        if step < cfg.epsilon2 && stationarity(coeffs, &x, &g, cfg.alpha_min) < cfg.epsilon2 {
            return (x, it, true);
        }
    }
    (x, cfg.max_inner_iterations, false)
}

/// Multiplier-form ascent: gradient steps on (alpha, gamma) projected onto the
/// budget hyperplane, with QoS bounds held by an active set and step sizes
/// `kappa0 / sqrt(t)` shrunk until the step stays feasible and improves.
/// Stops once a step moves less than `epsilon2` and an undiminished step
/// `kappa0` would too.
fn hyperplane_ascent(
    coeffs: &TimeCoefficients,
    mut gamma: Vec<f64>,
    cfg: &SolverConfig,
) -> (Vec<f64>, usize, bool) {
    let n = coeffs.num_pairs();
    let w = coeffs.weights();
    let lb: Vec<f64> = w.iter().map(|wi| coeffs.theta0 / wi).collect();
    let mut alpha = coeffs.alpha_of(&gamma);
    let mut f = coeffs.log_objective(alpha, &gamma);

    for t in 1..=cfg.max_inner_iterations {
        let (ga, gg) = coeffs.log_gradient(alpha, &gamma);
        let mut free: Vec<bool> = (0..n).map(|i| gamma[i] > lb[i] * (1.0 + 1e-12)).collect();
        let (mut da, mut dg) = (0.0, vec![0.0; n]);
        // free coordinates move along the hyperplane; pinned ones stay put
        for _ in 0..=n {
            let norm = 1.0 + (0..n).filter(|&i| free[i]).map(|i| w[i] * w[i]).sum::<f64>();
            let mu = (ga + (0..n).filter(|&i| free[i]).map(|i| w[i] * gg[i]).sum::<f64>()) / norm;
            da = ga - mu;
            for i in 0..n {
                dg[i] = if free[i] { gg[i] - mu * w[i] } else { 0.0 };
            }
            let mut changed = false;
            for i in 0..n {
                let at_bound = gamma[i] <= lb[i] * (1.0 + 1e-12);
                if !free[i] && at_bound && gg[i] - mu * w[i] > 0.0 {
                    free[i] = true;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }

        let mut step = cfg.time_step_scale / (t as f64).sqrt();
        for i in 0..n {
            if dg[i] < 0.0 {
                step = step.min((gamma[i] - lb[i]) / -dg[i]);
            }
        }
        if da < 0.0 {
            step = step.min((alpha - cfg.alpha_min) / -da);
        }
        let accepted = loop {
            if !(step > 1e-300) {
                break None;
            }
            let gn: Vec<f64> = (0..n).map(|i| (gamma[i] + step * dg[i]).max(lb[i])).collect();
            let an = coeffs.alpha_of(&gn);
            let fnew = coeffs.log_objective(an, &gn);
            if an >= cfg.alpha_min && fnew > f {
                break Some((an, gn, fnew));
            }
            step *= 0.5;
        };
        let Some((an, gn, fnew)) = accepted else {
            return (gamma, t, true);
        };
        let moved = (an - alpha).abs().max(max_abs_diff(&gn, &gamma));
        let full_step = cfg.time_step_scale * dg.iter().fold(da.abs(), |m, v| m.max(v.abs()));
        alpha = an;
        gamma = gn;
        f = fnew;
        if moved < cfg.epsilon2 && full_step < cfg.epsilon2 {
            return (gamma, t, true);
        }
    }
    (gamma, cfg.max_inner_iterations, false)
}

/// Re-splits each pair's data time between its two hops.
///
/// The time block keeps every uplink/downlink ratio at the value the power
/// block left it, and the power block in turn balances the hops for the
/// ratio it is given, so alternating the two alone never changes the ratio.
/// This pass holds P^r, the harvest fraction and each pair's total data time
/// fixed and moves the split, re-balancing the data power. A new split is
/// kept only if the Nash product increases. Returns whether any pair moved.
pub fn refine_hop_split(instance: &NetworkInstance, strategy: &mut Strategy) -> bool {
    let pr = strategy.relay_power;
    if !(pr > 0.0) {
        return false;
    }
    let p = &instance.params;
    let mut improved = false;
    for i in 0..instance.num_pairs {
        let tau = strategy.uplink_fraction[i] + strategy.downlink_fraction[i];
        let base_energy = strategy.harvest_fraction[i] * strategy.energy_power[i];
        let relay_rest = relay_utility(instance, strategy) + strategy.downlink_fraction[i] * pr;
        let down_rate = log2_1p(pr * instance.downlink_snr_per_mw(i));
        let max_ratio = (p.source_power_cap * instance.uplink_snr_per_mw(i)).ln_1p()
            / (pr * instance.downlink_snr_per_mw(i)).ln_1p();
        let gamma_max = tau * max_ratio / (1.0 + max_ratio);

        let local = |gamma: f64| -> f64 {
            let beta = tau - gamma;
            let r = relay_rest - gamma * pr;
            if !(gamma > 0.0 && beta > 0.0 && r > 0.0) {
                return f64::NEG_INFINITY;
            }
            let data = data_power_for_balance(instance, i, pr, gamma / beta);
            (gamma * down_rate).ln() - (base_energy + beta * data).ln() + r.ln()
        };

        let current = local(strategy.downlink_fraction[i]);
        let grid: Vec<f64> = (1..=SPLIT_SCAN_POINTS)
            .map(|k| gamma_max * k as f64 / SPLIT_SCAN_POINTS as f64)
            .collect();
        let (k_best, _) = grid
            .iter()
            .enumerate()
            .map(|(k, &g)| (k, local(g)))
            .fold((0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
        let lo = if k_best == 0 { 0.0 } else { grid[k_best - 1] };
        let hi = grid[(k_best + 1).min(SPLIT_SCAN_POINTS - 1)];
        let best = golden_section_max(local, lo, hi, 1e-12 * tau, 200);
        if best.value > current && best.x > 0.0 {
            let gamma = best.x;
            let beta = tau - gamma;
            let data = data_power_for_balance(instance, i, pr, gamma / beta);
            if data > p.source_power_cap {
                continue;
            }
            strategy.downlink_fraction[i] = gamma;
            strategy.uplink_fraction[i] = beta;
            strategy.data_power[i] = data;
            improved = true;
        }
    }
    improved
}
