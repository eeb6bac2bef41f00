//! Network scenarios: geometry, channel power gains and physical constants.
//!
//! All powers are stored in mW, time in fractions of a block of length 1, and
//! energies in mW per block. Conversion from dBm happens once, when a
//! configuration is loaded.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Nodes drawn closer than this to the relay are redrawn.
const MIN_RELAY_DISTANCE: f64 = 1e-6;

pub type Point = [f64; 2];

/// Converts a power level in dBm to mW.
pub fn dbm_to_mw(level: f64) -> f64 {
    10f64.powf(level / 10.0)
}

/// Mean power gain of the distance^-2 path-loss law.
pub fn mean_path_gain(distance: f64) -> Result<f64> {
    if !(distance > 0.0) || !distance.is_finite() {
        return Err(Error::NonPositiveDistance(distance));
    }
    Ok(distance.powi(-2))
}

fn distance(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    /// Receiver noise power sigma^2 (mW).
    pub noise_power: f64,
    /// RF-to-DC conversion efficiency eta.
    pub conversion_efficiency: f64,
    /// Relay decoding/re-encoding cost per block, E0/T (mW).
    pub relay_fixed_cost_rate: f64,
    /// Minimum data time per pair, theta0.
    pub min_pair_time_fraction: f64,
    /// Per-source power cap for both energy and data transmission (mW).
    pub source_power_cap: f64,
    /// Relay power cap (mW).
    pub relay_power_cap: f64,
    /// Block length T. Every formula assumes 1.
    pub block_time: f64,
}

impl PhysicalParams {
    /// Reference physical constants with E0/T = 0.12 mW.
    pub fn table_one() -> Self {
        Self {
            noise_power: dbm_to_mw(-95.0),
            conversion_efficiency: 0.5,
            relay_fixed_cost_rate: 0.12,
            min_pair_time_fraction: 0.05,
            source_power_cap: 10.0,
            relay_power_cap: 10.0,
            block_time: 1.0,
        }
    }

    pub fn with_relay_fixed_cost_rate(mut self, e0: f64) -> Self {
        self.relay_fixed_cost_rate = e0;
        self
    }

    pub fn validate(&self, num_pairs: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(self.conversion_efficiency > 0.0 && self.conversion_efficiency < 1.0) {
            return bad(format!(
                "conversion efficiency must lie in (0, 1), got {}",
                self.conversion_efficiency
            ));
        }
        if !(self.noise_power > 0.0) || !self.noise_power.is_finite() {
            return bad(format!("noise power must be positive, got {}", self.noise_power));
        }
        if !(self.source_power_cap > 0.0 && self.relay_power_cap > 0.0) {
            return bad("power caps must be positive".into());
        }
        if !(self.relay_fixed_cost_rate >= 0.0) {
            return bad(format!(
                "relay fixed cost must be non-negative, got {}",
                self.relay_fixed_cost_rate
            ));
        }
        if !(self.min_pair_time_fraction > 0.0) {
            return bad("theta0 must be positive".into());
        }
        if num_pairs as f64 * self.min_pair_time_fraction >= 1.0 {
            return Err(Error::InfeasibleTime {
                num_pairs,
                theta0: self.min_pair_time_fraction,
            });
        }
        if (self.block_time - 1.0).abs() > 1e-12 {
            return bad(format!("block time must be 1, got {}", self.block_time));
        }
        Ok(())
    }
}

impl Default for PhysicalParams {
    fn default() -> Self {
        Self::table_one()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FadingModel {
    /// Unit-mean exponential power fading on top of the mean path gain.
    Rayleigh,
    /// Mean path gain only.
    Deterministic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub region_length: f64,
    pub region_width: f64,
    pub num_pairs: usize,
    pub fading_model: FadingModel,
    pub params: PhysicalParams,
}

impl ScenarioConfig {
    pub fn table_one() -> Self {
        Self {
            region_length: 20.0,
            region_width: 20.0,
            num_pairs: 7,
            fading_model: FadingModel::Rayleigh,
            params: PhysicalParams::table_one(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.region_length > 0.0 && self.region_width > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "region must have positive size, got {} x {}",
                self.region_length, self.region_width
            )));
        }
        if self.num_pairs == 0 {
            return Err(Error::InvalidParameter("need at least one pair".into()));
        }
        self.params.validate(self.num_pairs)
    }

    pub fn relay_position(&self) -> Point {
        [self.region_length / 2.0, self.region_width / 2.0]
    }
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self::table_one()
    }
}

/// One realization of the network: who sits where and what each hop's
/// channel power gain is for the current block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkInstance {
    pub num_pairs: usize,
    pub source_positions: Vec<Point>,
    pub destination_positions: Vec<Point>,
    pub relay_position: Point,
    /// |h_i|^2, source i to relay.
    pub source_relay_gains: Vec<f64>,
    /// |g_i|^2, relay to destination i.
    pub relay_destination_gains: Vec<f64>,
    pub params: PhysicalParams,
    pub seed: u64,
}

impl NetworkInstance {
    /// Builds an instance directly from channel gains. Positions are left at
    /// the relay; they carry no meaning for the solver.
    pub fn from_gains(
        source_relay_gains: Vec<f64>,
        relay_destination_gains: Vec<f64>,
        params: PhysicalParams,
    ) -> Result<Self> {
        let n = source_relay_gains.len();
        let instance = Self {
            num_pairs: n,
            source_positions: vec![[0.0, 0.0]; n],
            destination_positions: vec![[0.0, 0.0]; n],
            relay_position: [0.0, 0.0],
            source_relay_gains,
            relay_destination_gains,
            params,
            seed: 0,
        };
        instance.validate()?;
        Ok(instance)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_pairs;
        for (what, len) in [
            ("source_relay_gains", self.source_relay_gains.len()),
            ("relay_destination_gains", self.relay_destination_gains.len()),
            ("source_positions", self.source_positions.len()),
            ("destination_positions", self.destination_positions.len()),
        ] {
            if len != n {
                return Err(Error::LengthMismatch {
                    what,
                    expected: n,
                    got: len,
                });
            }
        }
        if n == 0 {
            return Err(Error::InvalidParameter("need at least one pair".into()));
        }
        let gains = self
            .source_relay_gains
            .iter()
            .chain(&self.relay_destination_gains);
        for &g in gains {
            if !(g > 0.0) || !g.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "channel gains must be positive and finite, got {g}"
                )));
            }
        }
        self.params.validate(n)
    }

    /// Uplink SNR per mW of source power, |h_i|^2 / sigma^2.
    pub fn uplink_snr_per_mw(&self, i: usize) -> f64 {
        self.source_relay_gains[i] / self.params.noise_power
    }

    /// Downlink SNR per mW of relay power, |g_i|^2 / sigma^2.
    pub fn downlink_snr_per_mw(&self, i: usize) -> f64 {
        self.relay_destination_gains[i] / self.params.noise_power
    }

    pub fn to_toml_string(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let instance: Self = toml::from_str(text)?;
        instance.validate()?;
        Ok(instance)
    }
}

fn uniform_point<R: Rng>(rng: &mut R, lo: Point, hi: Point, avoid: Point) -> Point {
    loop {
        let p = [
            lo[0] + (hi[0] - lo[0]) * rng.random::<f64>(),
            lo[1] + (hi[1] - lo[1]) * rng.random::<f64>(),
        ];
        if distance(p, avoid) >= MIN_RELAY_DISTANCE {
            return p;
        }
    }
}

/// Draws a network: sources in the lower-left quadrant, destinations in the
/// upper-right one, relay at the center. Pure function of `(config, seed)`.
pub fn generate_scenario(config: &ScenarioConfig, seed: u64) -> Result<NetworkInstance> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (l, w) = (config.region_length, config.region_width);
    let relay = config.relay_position();
    let n = config.num_pairs;

    let mut sources = Vec::with_capacity(n);
    let mut destinations = Vec::with_capacity(n);
    let mut h = Vec::with_capacity(n);
    let mut g = Vec::with_capacity(n);
    for _ in 0..n {
        let s = uniform_point(&mut rng, [0.0, 0.0], relay, relay);
        let d = uniform_point(&mut rng, relay, [l, w], relay);
        let (fh, fg) = match config.fading_model {
            FadingModel::Rayleigh => {
                let a: f64 = Exp1.sample(&mut rng);
                let b: f64 = Exp1.sample(&mut rng);
                (a, b)
            }
            FadingModel::Deterministic => (1.0, 1.0),
        };
        h.push(mean_path_gain(distance(s, relay))? * fh);
        g.push(mean_path_gain(distance(relay, d))? * fg);
        sources.push(s);
        destinations.push(d);
    }

    let instance = NetworkInstance {
        num_pairs: n,
        source_positions: sources,
        destination_positions: destinations,
        relay_position: relay,
        source_relay_gains: h,
        relay_destination_gains: g,
        params: config.params.clone(),
        seed,
    };
    instance.validate()?;
    Ok(instance)
}
