//! Configuration files.
//!
//! A file lists the physical setup in the units engineers quote (noise in
//! dBm, powers in mW) plus the seed and fading model:
//!
//! ```toml
//! region_length_m = 20.0
//! region_width_m = 20.0
//! num_pairs = 7
//! source_power_cap_mw = 10.0
//! relay_power_cap_mw = 10.0
//! noise_dbm = -95.0
//! e0_per_t_mw = 0.12
//! conversion_efficiency = 0.5
//! theta0 = 0.05
//! epsilon = 1e-4
//! seed = 0
//! fading_model = "rayleigh"
//!
//! [solver]
//! enumeration_mode = "exhaustive"
//! ```
//!
//! Missing keys take the reference values. The optional `[solver]` table
//! accepts every `SolverConfig` field; a top-level `epsilon` overrides the
//! one inside it.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::network::{dbm_to_mw, FadingModel, PhysicalParams, ScenarioConfig};
use crate::solver::SolverConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub region_length_m: f64,
    pub region_width_m: f64,
    pub num_pairs: usize,
    pub source_power_cap_mw: f64,
    pub relay_power_cap_mw: f64,
    pub noise_dbm: f64,
    pub e0_per_t_mw: f64,
    pub conversion_efficiency: f64,
    pub theta0: f64,
    pub epsilon: Option<f64>,
    pub seed: u64,
    pub fading_model: FadingModel,
    pub solver: SolverConfig,
}

impl Default for ConfigFile {
    fn default() -> Self {
        let p = PhysicalParams::table_one();
        let s = ScenarioConfig::table_one();
        Self {
            region_length_m: s.region_length,
            region_width_m: s.region_width,
            num_pairs: s.num_pairs,
            source_power_cap_mw: p.source_power_cap,
            relay_power_cap_mw: p.relay_power_cap,
            noise_dbm: -95.0,
            e0_per_t_mw: p.relay_fixed_cost_rate,
            conversion_efficiency: p.conversion_efficiency,
            theta0: p.min_pair_time_fraction,
            epsilon: None,
            seed: 0,
            fading_model: s.fading_model,
            solver: SolverConfig::default(),
        }
    }
}

impl ConfigFile {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    /// Scenario in internal units, validated.
    pub fn scenario(&self) -> Result<ScenarioConfig> {
        let scenario = ScenarioConfig {
            region_length: self.region_length_m,
            region_width: self.region_width_m,
            num_pairs: self.num_pairs,
            fading_model: self.fading_model,
            params: PhysicalParams {
                noise_power: dbm_to_mw(self.noise_dbm),
                conversion_efficiency: self.conversion_efficiency,
                relay_fixed_cost_rate: self.e0_per_t_mw,
                min_pair_time_fraction: self.theta0,
                source_power_cap: self.source_power_cap_mw,
                relay_power_cap: self.relay_power_cap_mw,
                block_time: 1.0,
            },
        };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn solver_config(&self) -> Result<SolverConfig> {
        let mut cfg = self.solver.clone();
        if let Some(eps) = self.epsilon {
            cfg.epsilon = eps;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}
