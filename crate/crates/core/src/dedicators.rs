//! Dedicator sets: which sources beam energy to the relay at full power.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::NetworkInstance;
use crate::utility::{nash_product, Strategy};

/// Largest network for which the exhaustive 2^N enumeration is offered.
pub const MAX_EXHAUSTIVE_PAIRS: usize = 10;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnumerationMode {
    /// Top-K sources by uplink gain for K = N down to 1.
    #[default]
    Pruned,
    /// Every non-empty subset.
    Exhaustive,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DedicatorSet {
    pub indicator: Vec<bool>,
}

impl DedicatorSet {
    pub fn new(indicator: Vec<bool>) -> Self {
        Self { indicator }
    }

    /// Set containing exactly the listed (0-based) sources.
    pub fn from_members(num_pairs: usize, members: &[usize]) -> Result<Self> {
        let mut indicator = vec![false; num_pairs];
        for &i in members {
            if i >= num_pairs {
                return Err(Error::InvalidParameter(format!(
                    "source {i} out of range for {num_pairs} pairs"
                )));
            }
            indicator[i] = true;
        }
        Ok(Self { indicator })
    }

    pub fn all(num_pairs: usize) -> Self {
        Self::new(vec![true; num_pairs])
    }

    pub fn len(&self) -> usize {
        self.indicator.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indicator.is_empty()
    }

    pub fn count(&self) -> usize {
        self.indicator.iter().filter(|&&b| b).count()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indicator[i]
    }

    /// 0-based indices of the dedicators, ascending.
    pub fn members(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.indicator[i]).collect()
    }

    /// Bit-string label, one character per source: `1` dedicator, `0` enjoyer.
    pub fn label(&self) -> String {
        self.indicator
            .iter()
            .map(|&b| if b { '1' } else { '0' })
            .collect()
    }
}

impl fmt::Display for DedicatorSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// Energy-transfer power per source: the cap for dedicators, zero otherwise.
pub fn apply_dedicators(instance: &NetworkInstance, set: &DedicatorSet) -> Vec<f64> {
    let cap = instance.params.source_power_cap;
    set.indicator
        .iter()
        .map(|&d| if d { cap } else { 0.0 })
        .collect()
}

/// Source indices sorted by uplink gain, strongest first; ties keep index order.
pub fn gain_order(instance: &NetworkInstance) -> Vec<usize> {
    let mut order: Vec<usize> = (0..instance.num_pairs).collect();
    order.sort_by(|&a, &b| {
        instance.source_relay_gains[b]
            .total_cmp(&instance.source_relay_gains[a])
            .then(a.cmp(&b))
    });
    order
}

/// Candidate sets in the order the outer loop visits them.
///
/// Pruned mode yields the top-K sets for K = N, N-1, ..., 1. Exhaustive mode
/// yields every non-empty subset, larger sets first and, within a size,
/// in lexicographic order of their strongest-first member ranks.
pub fn candidate_sets(instance: &NetworkInstance, mode: EnumerationMode) -> Result<Vec<DedicatorSet>> {
    let n = instance.num_pairs;
    let order = gain_order(instance);
    match mode {
        EnumerationMode::Pruned => Ok((1..=n)
            .rev()
            .map(|k| DedicatorSet::from_members(n, &order[..k]).expect("indices in range"))
            .collect()),
        EnumerationMode::Exhaustive => {
            if n > MAX_EXHAUSTIVE_PAIRS {
                return Err(Error::InvalidParameter(format!(
                    "exhaustive enumeration supports at most {MAX_EXHAUSTIVE_PAIRS} pairs, got {n}"
                )));
            }
            let mut masks: Vec<u32> = (1..(1u32 << n)).collect();
            // bit r of a mask stands for the source of rank r
            masks.sort_by(|a, b| {
                b.count_ones()
                    .cmp(&a.count_ones())
                    .then(a.reverse_bits().cmp(&b.reverse_bits()).reverse())
            });
            Ok(masks
                .into_iter()
                .map(|m| {
                    let members: Vec<usize> =
                        (0..n).filter(|r| m & (1 << r) != 0).map(|r| order[r]).collect();
                    DedicatorSet::from_members(n, &members).expect("indices in range")
                })
                .collect())
        }
    }
}

/// Swaps the roles of sources `i` and `j` in `shared` (making `i` the
/// dedicator and `j` the enjoyer, then the reverse) and reports whether the
/// first assignment scores at least as well. Both use the strategy's common
/// harvest time and full source power.
pub fn dedicator_ordering_check(
    instance: &NetworkInstance,
    i: usize,
    j: usize,
    shared: &Strategy,
) -> Result<bool> {
    let alpha = shared.harvest_time();
    let cap = instance.params.source_power_cap;
    let assign = |ded: usize, enj: usize| {
        let mut s = shared.clone();
        s.energy_power[ded] = cap;
        s.harvest_fraction[ded] = alpha;
        s.energy_power[enj] = 0.0;
        s.harvest_fraction[enj] = 0.0;
        s
    };
    let phi_i = nash_product(instance, &assign(i, j))?;
    let phi_j = nash_product(instance, &assign(j, i))?;
    Ok(match (phi_i.is_feasible(), phi_j.is_feasible()) {
        (_, false) => true,
        (false, true) => false,
        _ => phi_i.ln() >= phi_j.ln() - 1e-12 * phi_j.ln().abs().max(1.0),
    })
}
