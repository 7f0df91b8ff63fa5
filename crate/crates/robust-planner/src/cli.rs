//! Command-line surface: plan, simulate, sweep, and generate the built-in
//! blocks-world files.
//!
//! Exit codes: 0 success, 1 input error (unreadable files, syntax errors,
//! bad flags), 2 semantic/invariant violation (scenario bounds, robustness
//! range, misconfigured normalization). Output files are written via a
//! temporary file and atomic rename, so failed commands never leave
//! partial outputs behind.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::blocksworld;
use crate::dsl::{parse_domain, parse_scenario, DslError};
use crate::model::ModelError;
use crate::plan_io::{export_plan, import_plan};
use crate::planner::{plan, plan_bnb, PlanError};
use crate::sim::{
    exact_distribution, exceedance, exceedance_csv, histogram_csv, monte_carlo, probability_sweep,
    sweep_csv, ExecutionConfig,
};
use crate::utility::UtilityError;

/// Environment variable consulted for a default simulation seed.
pub const SEED_ENV_VAR: &str = "ROBUST_PLANNER_SEED";

#[derive(Parser, Debug)]
#[command(
    name = "robust-planner",
    about = "Expected-utility conditional planning over probabilistic STRIPS domains",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Compute a conditional plan and write it as JSON.
    Plan {
        /// Domain definition file.
        domain: PathBuf,
        /// Scenario definition file.
        scenario: PathBuf,
        /// Use the branch-and-bound planner (same plan, fewer expansions).
        #[arg(long)]
        bnb: bool,
        /// Output plan file.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Monte Carlo simulation of a plan file.
    Simulate {
        /// Plan JSON file produced by `plan`.
        plan: PathBuf,
        /// Number of simulation trials.
        #[arg(long, default_value_t = 10000)]
        trials: u64,
        /// Success-probability override applied to every action.
        #[arg(long, value_name = "P")]
        exec_prob: Option<f64>,
        /// RNG seed (default: $ROBUST_PLANNER_SEED, else 0).
        #[arg(long)]
        seed: Option<u64>,
        /// Write the sampled histogram as CSV.
        #[arg(long, value_name = "FILE")]
        hist: Option<PathBuf>,
        /// Write the exact exceedance curve as CSV.
        #[arg(long, value_name = "FILE")]
        exceedance: Option<PathBuf>,
    },
    /// Mean final value across execution probabilities 0, step, ..., 1.
    Sweep {
        /// Plan JSON file produced by `plan`.
        plan: PathBuf,
        /// Trials per execution probability.
        #[arg(long, default_value_t = 1000)]
        trials: u64,
        /// Probability step; must divide 1.
        #[arg(long, default_value_t = 0.1)]
        step: f64,
        /// RNG seed (default: $ROBUST_PLANNER_SEED, else 0).
        #[arg(long)]
        seed: Option<u64>,
        /// Output CSV file.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Write the slippery blocks-world domain and reference scenario files.
    GenBlocksworld {
        /// Per-action success probability.
        #[arg(long, default_value_t = 0.72)]
        success_prob: f64,
        /// Robustness factor for the generated scenario.
        #[arg(long, default_value_t = 0.5)]
        robustness: f64,
        /// Directory for the generated files.
        #[arg(long, value_name = "DIR")]
        out_dir: PathBuf,
    },
}

/// A CLI failure with its process exit code.
#[derive(Debug)]
pub struct CliError {
    pub message: String,
    pub code: i32,
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.message)
    }
}

impl std::error::Error for CliError {}

impl CliError {
    fn input(message: impl Into<String>) -> Self {
        CliError {
            message: message.into(),
            code: 1,
        }
    }

    fn invariant(message: impl Into<String>) -> Self {
        CliError {
            message: message.into(),
            code: 2,
        }
    }
}

impl From<DslError> for CliError {
    fn from(err: DslError) -> Self {
        if err.is_invariant_violation() {
            CliError::invariant(err.to_string())
        } else {
            CliError::input(err.to_string())
        }
    }
}

impl From<PlanError> for CliError {
    fn from(err: PlanError) -> Self {
        let semantic = matches!(
            err,
            PlanError::Model(
                ModelError::ValueBounds { .. }
                    | ModelError::RobustnessRange(_)
                    | ModelError::DepthLimit
                    | ModelError::MissingWorth(_)
                    | ModelError::UnknownWorthObject(_)
            ) | PlanError::Utility(UtilityError::ValueOutOfBounds { .. })
        );
        if semantic {
            CliError::invariant(err.to_string())
        } else {
            CliError::input(err.to_string())
        }
    }
}

fn read_file(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path)
        .map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))
}

/// Writes through a temp file in the destination directory plus rename, so
/// the target is never left half-written.
fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let fail = |e: &dyn std::fmt::Display| {
        CliError::input(format!("cannot write {}: {e}", path.display()))
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| fail(&e))?;
    tmp.write_all(contents.as_bytes()).map_err(|e| fail(&e))?;
    tmp.persist(path).map_err(|e| fail(&e))?;
    Ok(())
}

fn resolve_seed(flag: Option<u64>) -> Result<u64, CliError> {
    if let Some(seed) = flag {
        return Ok(seed);
    }
    match std::env::var(SEED_ENV_VAR) {
        Ok(text) => text
            .parse()
            .map_err(|_| CliError::input(format!("{SEED_ENV_VAR}={text} is not a valid seed"))),
        Err(_) => Ok(0),
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Plan {
            domain,
            scenario,
            bnb,
            out,
        } => cmd_plan(&domain, &scenario, bnb, &out),
        Command::Simulate {
            plan,
            trials,
            exec_prob,
            seed,
            hist,
            exceedance,
        } => cmd_simulate(&plan, trials, exec_prob, seed, hist.as_deref(), exceedance.as_deref()),
        Command::Sweep {
            plan,
            trials,
            step,
            seed,
            out,
        } => cmd_sweep(&plan, trials, step, seed, &out),
        Command::GenBlocksworld {
            success_prob,
            robustness,
            out_dir,
        } => cmd_gen_blocksworld(success_prob, robustness, &out_dir),
    }
}

pub fn cmd_plan(
    domain_path: &Path,
    scenario_path: &Path,
    bnb: bool,
    out: &Path,
) -> Result<(), CliError> {
    let domain = parse_domain(&read_file(domain_path)?)
        .map_err(|e| CliError::from(e).prefixed(domain_path))?;
    let scenario = parse_scenario(&read_file(scenario_path)?, &domain)
        .map_err(|e| CliError::from(e).prefixed(scenario_path))?;
    let result = if bnb {
        plan_bnb(&domain, &scenario)?
    } else {
        plan(&domain, &scenario)?
    };
    write_atomic(out, &export_plan(&result))?;
    println!("root eu: {:.6}", result.root.eu);
    println!("expanded state nodes: {}", result.stats.expanded_state_nodes);
    println!("expanded action nodes: {}", result.stats.expanded_action_nodes);
    println!("pruned action nodes: {}", result.stats.pruned_action_nodes);
    Ok(())
}

impl CliError {
    fn prefixed(mut self, path: &Path) -> Self {
        self.message = format!("{}: {}", path.display(), self.message);
        self
    }
}

pub fn cmd_simulate(
    plan_path: &Path,
    trials: u64,
    exec_prob: Option<f64>,
    seed: Option<u64>,
    hist: Option<&Path>,
    exceedance_out: Option<&Path>,
) -> Result<(), CliError> {
    let plan = import_plan(&read_file(plan_path)?)
        .map_err(|e| CliError::input(format!("{}: {e}", plan_path.display())))?;
    let config = ExecutionConfig {
        execution_probability: exec_prob,
        trials,
        seed: resolve_seed(seed)?,
        bin_width: 1.0,
    };
    let stats = monte_carlo(&plan, &config).map_err(|e| CliError::input(e.to_string()))?;
    println!("mean: {:.6}", stats.mean);
    println!("stddev: {:.6}", stats.stddev);
    if let Some(path) = hist {
        write_atomic(path, &histogram_csv(&stats))?;
    }
    if let Some(path) = exceedance_out {
        let dist =
            exact_distribution(&plan, exec_prob).map_err(|e| CliError::input(e.to_string()))?;
        write_atomic(path, &exceedance_csv(&exceedance(&dist)))?;
    }
    Ok(())
}

pub fn cmd_sweep(
    plan_path: &Path,
    trials: u64,
    step: f64,
    seed: Option<u64>,
    out: &Path,
) -> Result<(), CliError> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(CliError::input(format!("step {step} outside (0,1]")));
    }
    let count = (1.0 / step).round();
    if (count * step - 1.0).abs() > 1e-9 {
        return Err(CliError::input(format!("step {step} does not divide 1")));
    }
    let plan = import_plan(&read_file(plan_path)?)
        .map_err(|e| CliError::input(format!("{}: {e}", plan_path.display())))?;
    let probabilities: Vec<f64> = (0..=count as u64)
        .map(|i| if i == count as u64 { 1.0 } else { i as f64 * step })
        .collect();
    let rows = probability_sweep(&plan, &probabilities, trials, resolve_seed(seed)?)
        .map_err(|e| CliError::input(e.to_string()))?;
    write_atomic(out, &sweep_csv(&rows))?;
    println!("wrote {} rows to {}", rows.len(), out.display());
    Ok(())
}

pub fn cmd_gen_blocksworld(
    success_prob: f64,
    robustness: f64,
    out_dir: &Path,
) -> Result<(), CliError> {
    if !(success_prob > 0.0 && success_prob <= 1.0) {
        return Err(CliError::input(format!(
            "success probability {success_prob} outside (0,1]"
        )));
    }
    if !(0.0..1.0).contains(&robustness) {
        return Err(CliError::input(format!(
            "robustness {robustness} outside [0,1)"
        )));
    }
    let domain_text =
        blocksworld::make_domain(success_prob).map_err(|e| CliError::input(e.to_string()))?;
    let mut spec = blocksworld::figure9_spec(robustness);
    spec.robustness = robustness;
    let scenario_text = spec.scenario_text().map_err(|e| CliError::input(e.to_string()))?;

    fs::create_dir_all(out_dir)
        .map_err(|e| CliError::input(format!("cannot create {}: {e}", out_dir.display())))?;
    let domain_path = out_dir.join("slippery-blocks.domain");
    let scenario_path = out_dir.join("fig9.scenario");
    write_atomic(&domain_path, &domain_text)?;
    write_atomic(&scenario_path, &scenario_text)?;
    println!("wrote {}", domain_path.display());
    println!("wrote {}", scenario_path.display());
    Ok(())
}
