//! Command-line front end for the relay bargaining solver.
//!
//! Exit status: 0 on success, 2 when every requested instance is
//! infeasible, 1 on any error (including failed property checks).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use relay_bargain::experiments::run_scans;
use relay_bargain::{
    generate_scenario, solve, ConfigFile, EnumerationMode, Experiment, ExperimentOutput, ExperimentSpec,
    NetworkInstance, PowerMode, ScenarioConfig, SolverConfig, TimeMode,
};
use serde_json::json;

#[derive(Parser, Debug)]
#[command(name = "relay-bargain", version, about = "Nash bargaining allocation for wireless-powered relay networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw one network instance and print it as TOML.
    Generate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Solve one instance and print the result as JSON.
    Solve {
        #[command(flatten)]
        common: Common,
        #[arg(long, conflicts_with = "instance")]
        seed: Option<u64>,
        /// Replay an instance written by `generate`.
        #[arg(long)]
        instance: Option<PathBuf>,
    },
    /// Run one experiment over a set of seeds and write CSV.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        seeds: SeedArgs,
        #[arg(long, value_enum)]
        experiment: ExperimentArg,
        /// Per-axis oracle grid sizes, comma separated.
        #[arg(long, value_delimiter = ',')]
        resolution: Vec<usize>,
        /// Add the pruned-versus-exhaustive gap to theorem checks.
        #[arg(long)]
        exhaustive_gap: bool,
    },
    /// Convergence traces with every source a dedicator, as CSV.
    Trace {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        seeds: SeedArgs,
    },
    /// Compare the solver against the grid oracle (N = 1 or 2), or with
    /// `--scans` emit scan reports of the solver's strategy.
    Oracle {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        seeds: SeedArgs,
        #[arg(long, value_delimiter = ',')]
        resolution: Vec<usize>,
        #[arg(long)]
        scans: bool,
    },
    /// Run the structural property checks and fail if any does not hold.
    Check {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        seeds: SeedArgs,
        #[arg(long)]
        exhaustive_gap: bool,
    },
}

#[derive(Args, Debug)]
struct Common {
    /// TOML configuration; missing keys take the reference values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dedicator enumeration.
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long, value_enum)]
    power_mode: Option<PowerModeArg>,
    #[arg(long, value_enum)]
    time_mode: Option<TimeModeArg>,
    /// Fixed relay cost E0/T in mW; a comma-separated list for sweeps.
    #[arg(long, value_delimiter = ',')]
    e0: Vec<f64>,
    /// Write here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SeedArgs {
    /// `a..b`, `a..=b`, a comma list, or one seed. Defaults to the config seed.
    #[arg(long, value_parser = parse_seeds)]
    seeds: Option<SeedList>,
    #[arg(long, conflicts_with = "seeds")]
    seed: Option<u64>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Pruned,
    Exhaustive,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PowerModeArg {
    GoldenSection,
    DualAscent,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum TimeModeArg {
    Substitution,
    DualAscent,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
#[value(rename_all = "snake_case")]
enum ExperimentArg {
    Trace,
    DedicatorSweep,
    CapacitySweep,
    ResidualEnergySweep,
    UtilityDistribution,
    OracleCompare,
    TheoremChecks,
}

impl From<ExperimentArg> for Experiment {
    fn from(e: ExperimentArg) -> Self {
        match e {
            ExperimentArg::Trace => Experiment::Trace,
            ExperimentArg::DedicatorSweep => Experiment::DedicatorSweep,
            ExperimentArg::CapacitySweep => Experiment::CapacitySweep,
            ExperimentArg::ResidualEnergySweep => Experiment::ResidualEnergySweep,
            ExperimentArg::UtilityDistribution => Experiment::UtilityDistribution,
            ExperimentArg::OracleCompare => Experiment::OracleCompare,
            ExperimentArg::TheoremChecks => Experiment::TheoremChecks,
        }
    }
}

#[derive(Clone, Debug)]
struct SeedList(Vec<u64>);

/// Parses `a..b`, `a..=b`, `a,b,c` or `a`.
fn parse_seeds(text: &str) -> Result<SeedList, String> {
    let num = |s: &str| s.trim().parse::<u64>().map_err(|e| format!("bad seed {s:?}: {e}"));
    let seeds = if let Some((a, b)) = text.split_once("..=") {
        (num(a)?..=num(b)?).collect()
    } else if let Some((a, b)) = text.split_once("..") {
        (num(a)?..num(b)?).collect()
    } else {
        text.split(',').map(num).collect::<Result<Vec<_>, _>>()?
    };
    if Vec::is_empty(&seeds) {
        return Err(format!("seed range {text:?} is empty"));
    }
    Ok(SeedList(seeds))
}

/// Scenario, solver settings and default seed after applying the flags.
struct Setup {
    scenario: ScenarioConfig,
    solver: SolverConfig,
    seed: u64,
}

impl Common {
    fn setup(&self) -> Result<Setup> {
        let file = match &self.config {
            Some(path) => ConfigFile::load(path).with_context(|| format!("reading {}", path.display()))?,
            None => ConfigFile::default(),
        };
        let mut scenario = file.scenario()?;
        let mut solver = file.solver_config()?;
        if let Some(m) = self.mode {
            solver.enumeration_mode = match m {
                ModeArg::Pruned => EnumerationMode::Pruned,
                ModeArg::Exhaustive => EnumerationMode::Exhaustive,
            };
        }
        if let Some(m) = self.power_mode {
            solver.power_mode = match m {
                PowerModeArg::GoldenSection => PowerMode::GoldenSection,
                PowerModeArg::DualAscent => PowerMode::DualAscent,
            };
        }
        if let Some(m) = self.time_mode {
            solver.time_mode = match m {
                TimeModeArg::Substitution => TimeMode::Substitution,
                TimeModeArg::DualAscent => TimeMode::DualAscent,
            };
        }
        if let [e0] = self.e0[..] {
            scenario.params.relay_fixed_cost_rate = e0;
            scenario.validate()?;
        }
        Ok(Setup {
            scenario,
            solver,
            seed: file.seed,
        })
    }

    /// E0 for a single-instance command; a list is only meaningful in sweeps.
    fn single_e0(&self) -> Result<()> {
        if self.e0.len() > 1 {
            bail!("--e0 takes one value here; lists are for `sweep`");
        }
        Ok(())
    }

    fn write(&self, text: &str) -> Result<()> {
        match &self.out {
            Some(path) => write_file(path, text),
            None => {
                print!("{text}");
                Ok(())
            }
        }
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

impl SeedArgs {
    fn resolve(&self, default: u64) -> Vec<u64> {
        match (&self.seeds, self.seed) {
            (Some(list), _) => list.0.clone(),
            (None, Some(s)) => vec![s],
            (None, None) => vec![default],
        }
    }
}

enum Status {
    Ok,
    InfeasibleOnly,
}

fn spec_for(common: &Common, seeds: &SeedArgs, experiment: Experiment) -> Result<ExperimentSpec> {
    let setup = common.setup()?;
    let mut spec = ExperimentSpec::new(experiment, setup.scenario.clone(), seeds.resolve(setup.seed));
    spec.solver = setup.solver;
    spec.sweep_values = if common.e0.is_empty() {
        vec![setup.scenario.params.relay_fixed_cost_rate]
    } else {
        common.e0.clone()
    };
    spec.output_path = common.out.clone();
    Ok(spec)
}

fn emit(common: &Common, out: ExperimentOutput) -> Result<Status> {
    common.write(&out.csv)?;
    Ok(if out.infeasible_only() {
        Status::InfeasibleOnly
    } else {
        Status::Ok
    })
}

fn run(cli: Cli) -> Result<Status> {
    match cli.command {
        Command::Generate { common, seed } => {
            common.single_e0()?;
            let setup = common.setup()?;
            let inst = generate_scenario(&setup.scenario, seed.unwrap_or(setup.seed))?;
            common.write(&inst.to_toml_string()?)?;
            Ok(Status::Ok)
        }
        Command::Solve { common, seed, instance } => {
            common.single_e0()?;
            let setup = common.setup()?;
            let inst = match instance {
                Some(path) => {
                    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
                    let mut inst = NetworkInstance::from_toml_str(&text)?;
                    if let [e0] = common.e0[..] {
                        inst.params.relay_fixed_cost_rate = e0;
                        inst.validate()?;
                    }
                    inst
                }
                None => generate_scenario(&setup.scenario, seed.unwrap_or(setup.seed))?,
            };
            let r = solve(&inst, &setup.solver)?;
            let report = json!({
                "seed": inst.seed,
                "feasible": r.feasible,
                "nash_product": r.best_phi,
                "dedicators": r.best_set.as_ref().map(|s| s.label()),
                "strategy": r.best_strategy,
                "utilities": r.utilities,
                "sets": r.per_set_results.iter().map(|p| json!({
                    "dedicators": p.set.label(),
                    "nash_product": p.result.phi,
                    "alternations": p.result.alternations,
                    "converged": p.result.converged,
                })).collect::<Vec<_>>(),
                "total_iterations": r.total_iterations,
            });
            common.write(&format!("{}\n", serde_json::to_string_pretty(&report)?))?;
            Ok(if r.feasible { Status::Ok } else { Status::InfeasibleOnly })
        }
        Command::Sweep {
            common,
            seeds,
            experiment,
            resolution,
            exhaustive_gap,
        } => {
            let mut spec = spec_for(&common, &seeds, experiment.into())?;
            spec.oracle_resolution = resolution;
            spec.exhaustive_gap = exhaustive_gap;
            emit(&common, relay_bargain::run_experiment(&spec)?)
        }
        Command::Trace { common, seeds } => {
            common.single_e0()?;
            let spec = spec_for(&common, &seeds, Experiment::Trace)?;
            emit(&common, relay_bargain::run_trace(&spec)?)
        }
        Command::Oracle {
            common,
            seeds,
            resolution,
            scans,
        } => {
            common.single_e0()?;
            let mut spec = spec_for(&common, &seeds, Experiment::OracleCompare)?;
            spec.oracle_resolution = resolution;
            let out = if scans {
                run_scans(&spec)?
            } else {
                relay_bargain::run_oracle_compare(&spec)?
            };
            emit(&common, out)
        }
        Command::Check {
            common,
            seeds,
            exhaustive_gap,
        } => {
            common.single_e0()?;
            let mut spec = spec_for(&common, &seeds, Experiment::TheoremChecks)?;
            spec.exhaustive_gap = exhaustive_gap;
            let out = relay_bargain::run_theorem_checks(&spec)?;
            let failed: Vec<String> = out
                .csv
                .lines()
                .skip(1)
                .filter(|l| l.split(',').nth(2) == Some("false"))
                .map(|l| l.split(',').take(2).collect::<Vec<_>>().join(" "))
                .collect();
            let status = emit(&common, out)?;
            // an infeasible seed only fails its `feasible` row
            let real: Vec<&String> = failed.iter().filter(|f| !f.ends_with(" feasible")).collect();
            if !real.is_empty() {
                let shown: Vec<&str> = real.iter().take(5).map(|s| s.as_str()).collect();
                bail!("{} property checks failed (seed property): {}", real.len(), shown.join("; "));
            }
            Ok(status)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // usage errors exit 1 so that 2 keeps meaning "infeasible"
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::InfeasibleOnly) => {
            eprintln!("no feasible allocation");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
