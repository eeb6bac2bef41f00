//! Nash bargaining resource allocation for a relay network powered by the
//! energy its sources beam to it.
//!
//! Sources either dedicate full power to charging the relay or transmit no
//! energy at all; the solver enumerates these roles, then alternates between
//! the relay transmit power and the time division until the Nash product of
//! all utilities stops improving.

// `!(x > 0.0)` is used on purpose so that NaN takes the rejecting branch
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod config;
pub mod dedicators;
pub mod error;
pub mod experiments;
pub mod network;
pub mod oracle;
pub mod power;
pub mod search;
pub mod solver;
pub mod time;
pub mod utility;

pub use config::ConfigFile;
pub use dedicators::{
    apply_dedicators, candidate_sets, dedicator_ordering_check, DedicatorSet, EnumerationMode,
};
pub use error::{Error, Result};
pub use experiments::{
    run_dedicator_sweep, run_experiment, run_oracle_compare, run_scans, run_theorem_checks,
    run_trace, run_utility_distribution, CheckRow, Experiment, ExperimentOutput, ExperimentSpec,
};
pub use network::{
    dbm_to_mw, generate_scenario, mean_path_gain, FadingModel, NetworkInstance, PhysicalParams,
    ScenarioConfig,
};
pub use oracle::{
    endpoint_scan_energy_power, grid_oracle, grid_oracle_axes, unimodality_scan, OracleResult,
    ScanAxis, ScanReport,
};
pub use power::{
    power_coefficients, solve_relay_power, source_powers_from_relay, PowerCoefficients, PowerMode,
    PowerSolution,
};
pub use solver::{
    solve, solve_inner, solve_inner_from, InnerResult, SetResult, SolveResult, SolverConfig,
    TraceEntry,
};
pub use time::{
    refine_hop_split, solve_time_division, solve_time_division_from, time_coefficients,
    TimeAllocation, TimeCoefficients, TimeMode, TimeSolution,
};
pub use utility::{
    balance_gap, check_feasible, evaluate, nash_product, pair_capacity, pair_utility,
    relay_utility, FeasibilityReport, Phi, Strategy, UtilityReport, Violation,
};
