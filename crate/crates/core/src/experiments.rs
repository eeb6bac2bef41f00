//! Batch experiments producing plot-ready CSV tables.
//!
//! Every table is a pure function of its inputs: numbers are written with 12
//! significant digits in a locale-independent format, and infeasible Nash
//! products leave the value cell empty.

use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dedicators::{
    candidate_sets, dedicator_ordering_check, gain_order, DedicatorSet, EnumerationMode,
};
use crate::error::{Error, Result};
use crate::network::{generate_scenario, NetworkInstance, ScenarioConfig};
use crate::oracle::{endpoint_scan_energy_power, grid_oracle_axes, unimodality_scan, ScanAxis};
use crate::solver::{solve, solve_inner, SolveResult, SolverConfig};
use crate::utility::{balance_gap, check_feasible, evaluate, pair_capacity, Phi, Strategy};

pub const TRACE_HEADER: [&str; 4] = ["seed", "iteration", "phase", "phi"];
pub const SWEEP_HEADER: [&str; 7] = ["seed", "e0", "k", "feasible", "phi", "sum_capacity", "residual_energy"];
pub const UTILITY_HEADER: [&str; 5] = ["seed", "kind", "pair", "role", "utility"];
pub const THEOREM_HEADER: [&str; 4] = ["seed", "property", "pass", "value"];
pub const ORACLE_HEADER: [&str; 7] = [
    "seed",
    "solver_phi",
    "oracle_phi",
    "ratio",
    "oracle_evaluations",
    "oracle_feasible_points",
    "pass",
];

pub const SCAN_HEADER: [&str; 7] = [
    "seed",
    "axis",
    "grid_points",
    "argmax_index",
    "local_maxima",
    "unimodal",
    "endpoint_argmax",
];

/// Fraction of the oracle's Nash product the solver must reach.
pub const ORACLE_RATIO: f64 = 0.95;
/// Relative slack allowed when checking that traces never decrease.
pub const TRACE_SLACK: f64 = 1e-9;
/// Grid points of each theorem scan.
const UNIMODAL_GRID: usize = 1000;
const ENDPOINT_GRID: usize = 201;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Trace,
    DedicatorSweep,
    CapacitySweep,
    ResidualEnergySweep,
    UtilityDistribution,
    OracleCompare,
    TheoremChecks,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub experiment: Experiment,
    pub scenario: ScenarioConfig,
    pub solver: SolverConfig,
    /// Fixed relay cost values E0/T (mW) for sweeps.
    pub sweep_values: Vec<f64>,
    pub seeds: Vec<u64>,
    /// Per-axis oracle resolution; empty means the default for the size.
    pub oracle_resolution: Vec<usize>,
    /// Also run the exhaustive enumeration in theorem checks and report the
    /// gap of the pruned search.
    pub exhaustive_gap: bool,
    pub output_path: Option<PathBuf>,
}

impl ExperimentSpec {
    pub fn new(experiment: Experiment, scenario: ScenarioConfig, seeds: Vec<u64>) -> Self {
        Self {
            experiment,
            scenario,
            solver: SolverConfig::default(),
            sweep_values: Vec::new(),
            seeds,
            oracle_resolution: Vec::new(),
            exhaustive_gap: false,
            output_path: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.solver.validate()?;
        if self.seeds.is_empty() {
            return Err(Error::InvalidParameter("experiment needs at least one seed".into()));
        }
        let sweep = matches!(
            self.experiment,
            Experiment::DedicatorSweep | Experiment::CapacitySweep | Experiment::ResidualEnergySweep
        );
        if sweep && self.sweep_values.is_empty() {
            return Err(Error::InvalidParameter("sweep needs at least one E0 value".into()));
        }
        Ok(())
    }

    fn instance(&self, seed: u64) -> Result<NetworkInstance> {
        generate_scenario(&self.scenario, seed)
    }
}

/// Runs whichever experiment the spec names.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentOutput> {
    match spec.experiment {
        Experiment::Trace => run_trace(spec),
        Experiment::DedicatorSweep | Experiment::CapacitySweep | Experiment::ResidualEnergySweep => {
            run_dedicator_sweep(spec)
        }
        Experiment::UtilityDistribution => run_utility_distribution(spec),
        Experiment::OracleCompare => run_oracle_compare(spec),
        Experiment::TheoremChecks => run_theorem_checks(spec),
    }
}

/// 12 significant digits, scientific notation.
pub fn fmt_num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.11e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn fmt_phi(phi: Phi) -> String {
    phi.value().map(fmt_num).unwrap_or_default()
}

type Row = Vec<String>;

/// A finished table plus how many seeds produced a feasible solution.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExperimentOutput {
    pub csv: String,
    pub seeds: usize,
    pub feasible_seeds: usize,
}

impl ExperimentOutput {
    /// True when no seed had a feasible solution.
    pub fn infeasible_only(&self) -> bool {
        self.feasible_seeds == 0
    }
}

/// Runs `f` for every seed concurrently and writes the rows in seed order,
/// so the output does not depend on scheduling. `f` also reports whether
/// the seed had a feasible solution.
fn per_seed<F>(spec: &ExperimentSpec, header: &[&str], f: F) -> Result<ExperimentOutput>
where
    F: Fn(u64) -> Result<(Vec<Row>, bool)> + Sync,
{
    let chunks: Vec<(Vec<Row>, bool)> = spec.seeds.par_iter().map(|&seed| f(seed)).collect::<Result<_>>()?;
    let feasible_seeds = chunks.iter().filter(|c| c.1).count();
    let mut table = Table::new(header)?;
    for (rows, _) in chunks {
        table.rows(rows)?;
    }
    Ok(ExperimentOutput {
        csv: table.finish()?,
        seeds: spec.seeds.len(),
        feasible_seeds,
    })
}

struct Table {
    writer: csv::Writer<Vec<u8>>,
}

impl Table {
    fn new(header: &[&str]) -> Result<Self> {
        let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        writer.write_record(header)?;
        Ok(Self { writer })
    }

    fn rows(&mut self, rows: Vec<Row>) -> Result<()> {
        for r in rows {
            self.writer.write_record(&r)?;
        }
        Ok(())
    }

    fn finish(self) -> Result<String> {
        let bytes = self
            .writer
            .into_inner()
            .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// Convergence traces with every source a dedicator. Each alternation gives
/// a `power` row and a `time` row; a final `gain_ratio` row divides the log
/// gain of all power phases by that of all time phases. Infeasible seeds get
/// a single `infeasible` row.
pub fn run_trace(spec: &ExperimentSpec) -> Result<ExperimentOutput> {
    spec.validate()?;
    per_seed(spec, &TRACE_HEADER, |seed| {
        let inst = spec.instance(seed)?;
        let r = solve_inner(&inst, &DedicatorSet::all(inst.num_pairs), &spec.solver)?;
        let sd = seed.to_string();
        if !r.is_feasible() {
            return Ok((vec![vec![sd, "0".into(), "infeasible".into(), String::new()]], false));
        }
        let mut rows = Vec::with_capacity(2 * r.trace.len() + 1);
        for e in &r.trace {
            let it = e.iteration.to_string();
            rows.push(vec![sd.clone(), it.clone(), "power".into(), fmt_phi(e.phi_power)]);
            rows.push(vec![sd.clone(), it, "time".into(), fmt_phi(e.phi_time)]);
        }
        rows.push(vec![
            sd,
            r.alternations.to_string(),
            "gain_ratio".into(),
            fmt_num(phase_gain_ratio(&r.trace)),
        ]);
        Ok((rows, true))
    })
}

/// Log-domain gain of the power phases divided by that of the time phases,
/// counted from the end of the first power phase.
pub fn phase_gain_ratio(trace: &[crate::solver::TraceEntry]) -> f64 {
    let mut power = 0.0;
    let mut time = 0.0;
    let mut last = None;
    for e in trace {
        if let Some(prev) = last {
            power += e.phi_power.ln() - prev;
        }
        time += e.phi_time.ln() - e.phi_power.ln();
        last = Some(e.phi_time.ln());
    }
    if time > 0.0 {
        power / time
    } else {
        f64::NAN
    }
}

/// One row per E0 value, seed and dedicator count K using the top-K sources
/// by uplink gain.
pub fn run_dedicator_sweep(spec: &ExperimentSpec) -> Result<ExperimentOutput> {
    spec.validate()?;
    per_seed(spec, &SWEEP_HEADER, |seed| {
        let mut rows = Vec::new();
        let mut any = false;
        for &e0 in &spec.sweep_values {
            let mut scenario = spec.scenario.clone();
            scenario.params.relay_fixed_cost_rate = e0;
            let inst = generate_scenario(&scenario, seed)?;
            let order = gain_order(&inst);
            for k in 1..=inst.num_pairs {
                let set = DedicatorSet::from_members(inst.num_pairs, &order[..k])?;
                let r = solve_inner(&inst, &set, &spec.solver)?;
                any |= r.is_feasible();
                let (cap, residual) = match &r.strategy {
                    Some(s) => {
                        let u = evaluate(&inst, s)?;
                        (fmt_num(u.sum_capacity()), fmt_num(u.relay_utility))
                    }
                    None => (String::new(), String::new()),
                };
                rows.push(vec![
                    seed.to_string(),
                    fmt_num(e0),
                    k.to_string(),
                    r.is_feasible().to_string(),
                    fmt_phi(r.phi),
                    cap,
                    residual,
                ]);
            }
        }
        Ok((rows, any))
    })
}

/// Per-pair utilities of the best solution, then one geometric-mean row per
/// role present.
pub fn run_utility_distribution(spec: &ExperimentSpec) -> Result<ExperimentOutput> {
    spec.validate()?;
    per_seed(spec, &UTILITY_HEADER, |seed| {
        let inst = spec.instance(seed)?;
        let r = solve(&inst, &spec.solver)?;
        let sd = seed.to_string();
        let (Some(set), Some(u)) = (&r.best_set, &r.utilities) else {
            let row = vec![sd, "infeasible".into(), String::new(), String::new(), String::new()];
            return Ok((vec![row], false));
        };
        let mut rows: Vec<Row> = u
            .pair_utilities
            .iter()
            .enumerate()
            .map(|(i, &ui)| vec![sd.clone(), "pair".into(), i.to_string(), role(set, i).into(), fmt_num(ui)])
            .collect();
        for (name, dedicator) in [("dedicator", true), ("enjoyer", false)] {
            let logs: Vec<f64> = (0..inst.num_pairs)
                .filter(|&i| set.contains(i) == dedicator)
                .map(|i| u.pair_utilities[i].ln())
                .collect();
            if !logs.is_empty() {
                let gm = (logs.iter().sum::<f64>() / logs.len() as f64).exp();
                rows.push(vec![sd.clone(), "geomean".into(), String::new(), name.into(), fmt_num(gm)]);
            }
        }
        Ok((rows, true))
    })
}

fn role(set: &DedicatorSet, i: usize) -> &'static str {
    if set.contains(i) {
        "dedicator"
    } else {
        "enjoyer"
    }
}

/// Outcome of one structural check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckRow {
    pub seed: u64,
    pub property: String,
    pub pass: bool,
    pub value: f64,
}

/// Whether every recorded Nash product is at least its predecessor up to
/// `TRACE_SLACK` relative slack.
pub fn trace_is_monotone(trace: &[crate::solver::TraceEntry]) -> bool {
    let mut last = f64::NEG_INFINITY;
    for e in trace {
        for phi in [e.phi_power, e.phi_time] {
            let v = phi.ln();
            // relative slack on Phi is an additive slack on ln Phi
            if v < last + (-TRACE_SLACK).ln_1p() {
                return false;
            }
            last = last.max(v);
        }
    }
    true
}

/// Largest |balance gap| / max(1, C_i) over all pairs.
pub fn worst_balance(inst: &NetworkInstance, s: &Strategy) -> f64 {
    (0..inst.num_pairs)
        .map(|i| balance_gap(inst, s, i).abs() / pair_capacity(inst, s, i).max(1.0))
        .fold(0.0, f64::max)
}

/// Structural checks on one seed's solution.
pub fn theorem_checks(inst: &NetworkInstance, seed: u64, spec: &ExperimentSpec) -> Result<Vec<CheckRow>> {
    let mut rows = Vec::new();
    let mut push = |property: &str, pass: bool, value: f64| {
        rows.push(CheckRow {
            seed,
            property: property.into(),
            pass,
            value,
        })
    };
    let r = solve(inst, &spec.solver)?;
    let Some(s) = &r.best_strategy else {
        push("feasible", false, f64::NAN);
        return Ok(rows);
    };
    push("feasible", check_feasible(inst, s).feasible, 1.0);

    let worst = worst_balance(inst, s);
    push("balance", worst <= 1e-6, worst);

    let mut endpoint_ok = 0;
    for i in 0..inst.num_pairs {
        if endpoint_scan_energy_power(inst, s, i, ENDPOINT_GRID)?.is_endpoint_argmax {
            endpoint_ok += 1;
        }
    }
    push("endpoint", endpoint_ok == inst.num_pairs, endpoint_ok as f64);

    for axis in [ScanAxis::RelayPower, ScanAxis::HarvestFraction] {
        let scan = unimodality_scan(inst, s, axis, UNIMODAL_GRID)?;
        push(&format!("unimodal_{}", axis.name()), scan.is_unimodal, scan.local_maxima_count as f64);
    }

    let traces_ok = r.per_set_results.iter().all(|p| trace_is_monotone(&p.result.trace));
    let capped = r
        .per_set_results
        .iter()
        .filter(|p| p.result.is_feasible() && !p.result.converged)
        .count();
    push("monotone_trace", traces_ok, r.total_iterations as f64);
    push("converged", capped == 0, capped as f64);

    let (tested, ordering_ok) = ordering_checks(inst, s)?;
    push("ordering", ordering_ok, tested as f64);

    if spec.exhaustive_gap {
        let cfg = SolverConfig {
            enumeration_mode: EnumerationMode::Exhaustive,
            ..spec.solver.clone()
        };
        let full = solve(inst, &cfg)?;
        let gap = match (r.best_phi, full.best_phi) {
            (Phi::Feasible { ln: a }, Phi::Feasible { ln: b }) => -(a - b).exp_m1(),
            _ => f64::NAN,
        };
        push("pruned_gap", r.best_phi <= full.best_phi, gap);
    }
    Ok(rows)
}

/// Swap checks on every ordered pair of sources that satisfies the ordering
/// preconditions in `s`. Returns the number tested and whether all passed.
fn ordering_checks(inst: &NetworkInstance, s: &Strategy) -> Result<(usize, bool)> {
    let mut tested = 0;
    let mut ok = true;
    let spend = |k: usize| s.uplink_fraction[k] * s.data_power[k];
    for i in 0..inst.num_pairs {
        for j in 0..inst.num_pairs {
            if i != j
                && inst.source_relay_gains[i] >= inst.source_relay_gains[j]
                && spend(i) >= spend(j)
            {
                tested += 1;
                ok &= dedicator_ordering_check(inst, i, j, s)?;
            }
        }
    }
    Ok((tested, ok))
}

/// One row per property per seed.
pub fn run_theorem_checks(spec: &ExperimentSpec) -> Result<ExperimentOutput> {
    spec.validate()?;
    per_seed(spec, &THEOREM_HEADER, |seed| {
        let inst = spec.instance(seed)?;
        let checks = theorem_checks(&inst, seed, spec)?;
        let feasible = checks.iter().any(|c| c.property == "feasible" && c.pass);
        let rows = checks
            .into_iter()
            .map(|c| vec![c.seed.to_string(), c.property, c.pass.to_string(), fmt_num(c.value)])
            .collect();
        Ok((rows, feasible))
    })
}

/// Default oracle resolution for a network size.
pub fn default_oracle_resolution(num_pairs: usize) -> Result<Vec<usize>> {
    match num_pairs {
        1 => Ok(vec![200; 3]),
        2 => Ok(vec![32, 32, 16, 16, 16]),
        n => Err(Error::UnsupportedSize(n)),
    }
}

/// Solver result and best oracle value over every non-empty dedicator set.
pub fn oracle_compare(inst: &NetworkInstance, spec: &ExperimentSpec) -> Result<(SolveResult, Phi, usize, usize)> {
    let resolution = if spec.oracle_resolution.is_empty() {
        default_oracle_resolution(inst.num_pairs)?
    } else {
        spec.oracle_resolution.clone()
    };
    let solved = solve(inst, &spec.solver)?;
    let mut best = Phi::Infeasible;
    let (mut evaluations, mut feasible) = (0, 0);
    for set in candidate_sets(inst, EnumerationMode::Exhaustive)? {
        let o = grid_oracle_axes(inst, &set, &resolution)?;
        evaluations += o.evaluations;
        feasible += o.feasible_points;
        if o.best_phi > best {
            best = o.best_phi;
        }
    }
    Ok((solved, best, evaluations, feasible))
}

/// Passes when the solver reaches `ORACLE_RATIO` of the oracle, or both
/// find nothing feasible.
pub fn oracle_pass(solver: Phi, oracle: Phi) -> bool {
    match (solver, oracle) {
        (_, Phi::Infeasible) => true,
        (Phi::Infeasible, _) => false,
        (a, b) => a.ln() >= b.ln() + ORACLE_RATIO.ln(),
    }
}

pub fn run_oracle_compare(spec: &ExperimentSpec) -> Result<ExperimentOutput> {
    spec.validate()?;
    per_seed(spec, &ORACLE_HEADER, |seed| {
        let inst = spec.instance(seed)?;
        let (solved, oracle, evaluations, feasible) = oracle_compare(&inst, spec)?;
        let ratio = match (solved.best_phi, oracle) {
            (Phi::Feasible { ln: a }, Phi::Feasible { ln: b }) => fmt_num((a - b).exp()),
            _ => String::new(),
        };
        let row = vec![
            seed.to_string(),
            fmt_phi(solved.best_phi),
            fmt_phi(oracle),
            ratio,
            evaluations.to_string(),
            feasible.to_string(),
            oracle_pass(solved.best_phi, oracle).to_string(),
        ];
        Ok((vec![row], solved.best_phi.is_feasible() || oracle.is_feasible()))
    })
}

/// Scan reports of the solver's best strategy: both unimodality axes and
/// the energy-power endpoint scan of every source.
pub fn run_scans(spec: &ExperimentSpec) -> Result<ExperimentOutput> {
    spec.validate()?;
    per_seed(spec, &SCAN_HEADER, |seed| {
        let inst = spec.instance(seed)?;
        let r = solve(&inst, &spec.solver)?;
        let Some(s) = &r.best_strategy else {
            let mut row = vec![String::new(); SCAN_HEADER.len()];
            row[0] = seed.to_string();
            row[1] = "infeasible".into();
            return Ok((vec![row], false));
        };
        let mut reports = Vec::new();
        for axis in [ScanAxis::RelayPower, ScanAxis::HarvestFraction] {
            reports.push(unimodality_scan(&inst, s, axis, UNIMODAL_GRID)?);
        }
        for i in 0..inst.num_pairs {
            reports.push(endpoint_scan_energy_power(&inst, s, i, ENDPOINT_GRID)?);
        }
        let rows = reports
            .into_iter()
            .map(|rep| {
                vec![
                    seed.to_string(),
                    rep.axis,
                    rep.grid.to_string(),
                    rep.argmax_index.to_string(),
                    rep.local_maxima_count.to_string(),
                    rep.is_unimodal.to_string(),
                    rep.is_endpoint_argmax.to_string(),
                ]
            })
            .collect();
        Ok((rows, true))
    })
}
