//! Model quantities: hop capacities, pair and relay utilities, the Nash
//! product, and constraint checks for a full strategy.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::NetworkInstance;

/// Absolute tolerance on the time-budget equality.
pub const TIME_BUDGET_TOL: f64 = 1e-9;
/// Relative tolerance on hop balance.
pub const BALANCE_TOL: f64 = 1e-6;

/// Every variable of the bargaining problem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Strategy {
    /// P_i^{s1}, mW.
    pub energy_power: Vec<f64>,
    /// P_i^{s0}, mW.
    pub data_power: Vec<f64>,
    /// P^r, mW.
    pub relay_power: f64,
    /// alpha_i.
    pub harvest_fraction: Vec<f64>,
    /// beta_i.
    pub uplink_fraction: Vec<f64>,
    /// gamma_i.
    pub downlink_fraction: Vec<f64>,
}

impl Strategy {
    pub fn num_pairs(&self) -> usize {
        self.energy_power.len()
    }

    /// The harvest phase length, max_i alpha_i.
    pub fn harvest_time(&self) -> f64 {
        self.harvest_fraction.iter().copied().fold(0.0, f64::max)
    }

    /// max_i alpha_i + sum_i (beta_i + gamma_i).
    pub fn time_used(&self) -> f64 {
        self.harvest_time()
            + self
                .uplink_fraction
                .iter()
                .zip(&self.downlink_fraction)
                .map(|(b, g)| b + g)
                .sum::<f64>()
    }

    fn check_lengths(&self, n: usize) -> Result<()> {
        for (what, len) in [
            ("energy_power", self.energy_power.len()),
            ("data_power", self.data_power.len()),
            ("harvest_fraction", self.harvest_fraction.len()),
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
}

/// Value of the Nash product. Infeasible points (some utility not strictly
/// positive) carry a marker that ranks below every feasible value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum Phi {
    Infeasible,
    Feasible {
        /// Natural log of the product.
        ln: f64,
    },
}

impl Phi {
    pub fn from_ln(ln: f64) -> Self {
        if ln.is_nan() || ln == f64::NEG_INFINITY {
            Phi::Infeasible
        } else {
            Phi::Feasible { ln }
        }
    }

    pub fn is_feasible(&self) -> bool {
        matches!(self, Phi::Feasible { .. })
    }

    /// ln Phi, or -inf when infeasible.
    pub fn ln(&self) -> f64 {
        match *self {
            Phi::Infeasible => f64::NEG_INFINITY,
            Phi::Feasible { ln } => ln,
        }
    }

    pub fn value(&self) -> Option<f64> {
        match *self {
            Phi::Infeasible => None,
            Phi::Feasible { ln } => Some(ln.exp()),
        }
    }
}

impl PartialOrd for Phi {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match (self, other) {
            (Phi::Infeasible, Phi::Infeasible) => Some(Ordering::Equal),
            (Phi::Infeasible, _) => Some(Ordering::Less),
            (_, Phi::Infeasible) => Some(Ordering::Greater),
            (Phi::Feasible { ln: a }, Phi::Feasible { ln: b }) => a.partial_cmp(b),
        }
    }
}

impl fmt::Display for Phi {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.value() {
            None => write!(f, "infeasible"),
            Some(v) => write!(f, "{v:.6e}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UtilityReport {
    /// C_i, bits per block.
    pub pair_capacities: Vec<f64>,
    /// U_i^S, bits per mW per block.
    pub pair_utilities: Vec<f64>,
    /// E, mW per block.
    pub harvested_energy: f64,
    /// phi, mW per block.
    pub relay_cost: f64,
    /// U^R = E - phi.
    pub relay_utility: f64,
    pub nash_product: Phi,
}

impl UtilityReport {
    pub fn sum_capacity(&self) -> f64 {
        self.pair_capacities.iter().sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub label: String,
    /// Signed amount by which the constraint is missed.
    pub residual: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub feasible: bool,
    pub violations: Vec<Violation>,
}

impl FeasibilityReport {
    pub fn has(&self, label: &str) -> bool {
        self.violations.iter().any(|v| v.label == label)
    }
}

/// log2(1 + x) with good accuracy for small x.
#[inline]
pub(crate) fn log2_1p(x: f64) -> f64 {
    x.ln_1p() / std::f64::consts::LN_2
}

/// Bits pushed over the source-relay hop, beta_i log2(1 + P_i^{s0}|h_i|^2/sigma^2).
pub fn uplink_bits(instance: &NetworkInstance, strategy: &Strategy, i: usize) -> f64 {
    strategy.uplink_fraction[i] * log2_1p(strategy.data_power[i] * instance.uplink_snr_per_mw(i))
}

/// Bits pushed over the relay-destination hop, gamma_i log2(1 + P^r|g_i|^2/sigma^2).
pub fn downlink_bits(instance: &NetworkInstance, strategy: &Strategy, i: usize) -> f64 {
    strategy.downlink_fraction[i] * log2_1p(strategy.relay_power * instance.downlink_snr_per_mw(i))
}

/// C_i, the end-to-end decode-and-forward capacity of pair `i`.
pub fn pair_capacity(instance: &NetworkInstance, strategy: &Strategy, i: usize) -> f64 {
    uplink_bits(instance, strategy, i).min(downlink_bits(instance, strategy, i))
}

/// U_i^S, bits delivered per unit of source energy.
pub fn pair_utility(instance: &NetworkInstance, strategy: &Strategy, i: usize) -> Result<f64> {
    let energy = strategy.energy_power[i] * strategy.harvest_fraction[i]
        + strategy.data_power[i] * strategy.uplink_fraction[i];
    if !(energy > 0.0) {
        return Err(Error::DegenerateStrategy { pair: i });
    }
    Ok(pair_capacity(instance, strategy, i) / energy)
}

/// Energy harvested at the relay over one block.
pub fn harvested_energy(instance: &NetworkInstance, strategy: &Strategy) -> f64 {
    let p = &instance.params;
    p.conversion_efficiency
        * (0..instance.num_pairs)
            .map(|i| {
                strategy.harvest_fraction[i]
                    * p.block_time
                    * strategy.energy_power[i]
                    * instance.source_relay_gains[i]
            })
            .sum::<f64>()
}

/// Forwarding plus fixed decoding cost at the relay.
pub fn relay_cost(instance: &NetworkInstance, strategy: &Strategy) -> f64 {
    let p = &instance.params;
    strategy
        .downlink_fraction
        .iter()
        .map(|g| g * p.block_time * strategy.relay_power)
        .sum::<f64>()
        + p.relay_fixed_cost_rate * p.block_time
}

/// U^R, residual harvested energy.
pub fn relay_utility(instance: &NetworkInstance, strategy: &Strategy) -> f64 {
    harvested_energy(instance, strategy) - relay_cost(instance, strategy)
}

/// Phi = (prod_i U_i^S) U^R, evaluated in the log domain.
pub fn nash_product(instance: &NetworkInstance, strategy: &Strategy) -> Result<Phi> {
    strategy.check_lengths(instance.num_pairs)?;
    let mut ln = 0.0;
    let mut feasible = true;
    for i in 0..instance.num_pairs {
        let u = pair_utility(instance, strategy, i)?;
        if u > 0.0 {
            ln += u.ln();
        } else {
            feasible = false;
        }
    }
    let ur = relay_utility(instance, strategy);
    if !(ur > 0.0) || !feasible {
        return Ok(Phi::Infeasible);
    }
    Ok(Phi::from_ln(ln + ur.ln()))
}

/// Uplink minus downlink bits; zero when the relay forwards exactly what it
/// receives.
pub fn balance_gap(instance: &NetworkInstance, strategy: &Strategy, i: usize) -> f64 {
    uplink_bits(instance, strategy, i) - downlink_bits(instance, strategy, i)
}

/// True when `|balance_gap| <= BALANCE_TOL * max(1, C_i)` for every pair.
pub fn is_balanced(instance: &NetworkInstance, strategy: &Strategy) -> bool {
    (0..instance.num_pairs).all(|i| {
        balance_gap(instance, strategy, i).abs()
            <= BALANCE_TOL * pair_capacity(instance, strategy, i).max(1.0)
    })
}

pub fn evaluate(instance: &NetworkInstance, strategy: &Strategy) -> Result<UtilityReport> {
    strategy.check_lengths(instance.num_pairs)?;
    let n = instance.num_pairs;
    let pair_capacities = (0..n)
        .map(|i| pair_capacity(instance, strategy, i))
        .collect();
    let pair_utilities = (0..n)
        .map(|i| pair_utility(instance, strategy, i))
        .collect::<Result<Vec<_>>>()?;
    let harvested = harvested_energy(instance, strategy);
    let cost = relay_cost(instance, strategy);
    Ok(UtilityReport {
        pair_capacities,
        pair_utilities,
        harvested_energy: harvested,
        relay_cost: cost,
        relay_utility: harvested - cost,
        nash_product: nash_product(instance, strategy)?,
    })
}

/// Lists every violated constraint of the bargaining problem.
pub fn check_feasible(instance: &NetworkInstance, strategy: &Strategy) -> FeasibilityReport {
    let mut violations = Vec::new();
    let mut push = |label: String, residual: f64| violations.push(Violation { label, residual });
    if strategy.check_lengths(instance.num_pairs).is_err() {
        push("shape".into(), f64::NAN);
        return FeasibilityReport {
            feasible: false,
            violations,
        };
    }
    let p = &instance.params;
    let cap_tol = |cap: f64| cap * (1.0 + TIME_BUDGET_TOL);

    let budget = strategy.time_used() - 1.0;
    if budget.abs() > TIME_BUDGET_TOL || !budget.is_finite() {
        push("time_budget".into(), budget);
    }

    if !(strategy.relay_power >= 0.0) {
        push("relay_power_nonneg".into(), strategy.relay_power);
    }
    if strategy.relay_power > cap_tol(p.relay_power_cap) {
        push(
            "relay_power_cap".into(),
            strategy.relay_power - p.relay_power_cap,
        );
    }

    for i in 0..instance.num_pairs {
        let qos = strategy.uplink_fraction[i] + strategy.downlink_fraction[i]
            - p.min_pair_time_fraction;
        if qos < -TIME_BUDGET_TOL {
            push(format!("qos({i})"), qos);
        }
        for (name, value) in [
            ("energy_power", strategy.energy_power[i]),
            ("data_power", strategy.data_power[i]),
        ] {
            if !(value >= 0.0) {
                push(format!("{name}_nonneg({i})"), value);
            }
            if value > cap_tol(p.source_power_cap) {
                push(format!("{name}_cap({i})"), value - p.source_power_cap);
            }
        }
        for (name, value) in [
            ("harvest_fraction", strategy.harvest_fraction[i]),
            ("uplink_fraction", strategy.uplink_fraction[i]),
            ("downlink_fraction", strategy.downlink_fraction[i]),
        ] {
            if !(value >= 0.0) {
                push(format!("{name}_nonneg({i})"), value);
            }
        }
        match pair_utility(instance, strategy, i) {
            Ok(u) if u > 0.0 => {}
            Ok(u) => push(format!("pair_utility({i})"), u),
            Err(_) => push(format!("pair_utility({i})"), f64::NAN),
        }
    }

    let ur = relay_utility(instance, strategy);
    if !(ur > 0.0) {
        push("relay_utility".into(), ur);
    }

    FeasibilityReport {
        feasible: violations.is_empty(),
        violations,
    }
}
