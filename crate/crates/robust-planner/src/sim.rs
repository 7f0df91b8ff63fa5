//! Monte Carlo execution of conditional plans and the exact leaf-value
//! distribution.
//!
//! A simulation walks the plan from the root, samples an outcome of each
//! chosen action, and scores the terminal state it lands on. Trials draw
//! from counter-derived ChaCha substreams, so results are bit-reproducible
//! for a given seed regardless of execution order.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::model::{state_value, ModelError};
use crate::planner::{ActionNode, ConditionalPlan, StateNode};

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("execution probability {0} outside [0,1]")]
    OverrideRange(f64),
    #[error("execution-probability override needs binary success/failure actions, but {action} has outcomes [{labels}]")]
    OverrideNotBinary { action: String, labels: String },
    #[error("trials must be at least 1")]
    NoTrials,
    #[error("histogram bin width must be positive, got {0}")]
    BinWidth(f64),
}

/// Simulation parameters.
///
/// `execution_probability`, when set, replaces the success probability of
/// every (binary success/failure) action; failure gets the complement.
/// This is how a plan computed for one success rate is evaluated under
/// another.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExecutionConfig {
    pub execution_probability: Option<f64>,
    pub trials: u64,
    pub seed: u64,
    /// Histogram bin width; 1 bins integer-valued domains exactly.
    pub bin_width: f64,
}

impl Default for ExecutionConfig {
    fn default() -> Self {
        ExecutionConfig {
            execution_probability: None,
            trials: 1000,
            seed: 0,
            bin_width: 1.0,
        }
    }
}

impl ExecutionConfig {
    fn validate(&self, plan: &ConditionalPlan) -> Result<(), SimError> {
        if self.trials == 0 {
            return Err(SimError::NoTrials);
        }
        if !(self.bin_width > 0.0) {
            return Err(SimError::BinWidth(self.bin_width));
        }
        if let Some(p) = self.execution_probability {
            validate_override(plan, p)?;
        }
        Ok(())
    }
}

/// Summary of a Monte Carlo run: mean, population standard deviation, and
/// a binned histogram of final values.
#[derive(Clone, Debug, PartialEq)]
pub struct SimStats {
    pub mean: f64,
    pub stddev: f64,
    /// bin index -> count; a bin covers `[index * width, (index+1) * width)`.
    pub histogram: BTreeMap<i64, u64>,
    pub bin_width: f64,
    pub trials: u64,
}

/// Exact probability mass over the final values of a conditional plan,
/// sorted by value.
#[derive(Clone, Debug, PartialEq)]
pub struct ValueDistribution {
    support: Vec<(f64, f64)>,
}

impl ValueDistribution {
    fn from_masses(mut masses: Vec<(f64, f64)>) -> Self {
        masses.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite values"));
        let mut support: Vec<(f64, f64)> = Vec::with_capacity(masses.len());
        for (value, mass) in masses {
            if mass <= 0.0 {
                continue;
            }
            match support.last_mut() {
                Some((v, m)) if *v == value => *m += mass,
                _ => support.push((value, mass)),
            }
        }
        ValueDistribution { support }
    }

    /// `(value, mass)` pairs in ascending value order; all masses positive.
    pub fn support(&self) -> &[(f64, f64)] {
        &self.support
    }

    pub fn total_mass(&self) -> f64 {
        self.support.iter().map(|(_, m)| m).sum()
    }

    pub fn mean(&self) -> f64 {
        self.support.iter().map(|(v, m)| v * m).sum()
    }

    /// Population standard deviation.
    pub fn stddev(&self) -> f64 {
        let mean = self.mean();
        let var: f64 = self
            .support
            .iter()
            .map(|(v, m)| m * (v - mean) * (v - mean))
            .sum();
        var.max(0.0).sqrt()
    }

    /// Probability of achieving at least `v`.
    pub fn prob_at_least(&self, v: f64) -> f64 {
        self.support
            .iter()
            .filter(|(value, _)| *value >= v)
            .map(|(_, m)| m)
            .sum()
    }
}

fn binary_outcome_indices(action: &ActionNode) -> Option<(usize, usize)> {
    if action.outcomes.len() != 2 {
        return None;
    }
    let success = action.outcomes.iter().position(|e| e.label == "success")?;
    let failure = action.outcomes.iter().position(|e| e.label == "failure")?;
    Some((success, failure))
}

fn validate_override(plan: &ConditionalPlan, p: f64) -> Result<(), SimError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(SimError::OverrideRange(p));
    }
    fn walk(node: &StateNode) -> Result<(), SimError> {
        if let Some(action) = &node.chosen {
            if binary_outcome_indices(action).is_none() {
                let labels: Vec<&str> = action.outcomes.iter().map(|e| e.label.as_str()).collect();
                return Err(SimError::OverrideNotBinary {
                    action: action.action.clone(),
                    labels: labels.join(", "),
                });
            }
            for edge in &action.outcomes {
                walk(&edge.child)?;
            }
        }
        Ok(())
    }
    walk(&plan.root)
}

/// One simulated execution: walk the plan from the root, sampling each
/// chosen action's outcome, and return the value of the final state.
pub fn simulate_once<R: Rng>(
    plan: &ConditionalPlan,
    config: &ExecutionConfig,
    rng: &mut R,
) -> Result<f64, SimError> {
    let mut node = &plan.root;
    loop {
        let Some(action) = &node.chosen else {
            return Ok(state_value(&node.state, &plan.scenario.value_model)?);
        };
        let index = match config.execution_probability {
            Some(p) => {
                let (success, failure) =
                    binary_outcome_indices(action).ok_or_else(|| SimError::OverrideNotBinary {
                        action: action.action.clone(),
                        labels: action
                            .outcomes
                            .iter()
                            .map(|e| e.label.as_str())
                            .collect::<Vec<_>>()
                            .join(", "),
                    })?;
                if rng.gen::<f64>() < p {
                    success
                } else {
                    failure
                }
            }
            None => {
                let u: f64 = rng.gen();
                let mut cumulative = 0.0;
                let mut chosen = action.outcomes.len() - 1;
                for (i, edge) in action.outcomes.iter().enumerate() {
                    cumulative += edge.probability;
                    if u < cumulative {
                        chosen = i;
                        break;
                    }
                }
                chosen
            }
        };
        node = &action.outcomes[index].child;
    }
}

/// Runs `config.trials` independent simulations. Trial `i` draws from
/// stream `i` of a ChaCha generator seeded with `config.seed`, so equal
/// inputs give bit-identical statistics.
pub fn monte_carlo(plan: &ConditionalPlan, config: &ExecutionConfig) -> Result<SimStats, SimError> {
    config.validate(plan)?;
    let mut values = Vec::with_capacity(config.trials as usize);
    for trial in 0..config.trials {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(trial);
        values.push(simulate_once(plan, config, &mut rng)?);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let mut histogram: BTreeMap<i64, u64> = BTreeMap::new();
    for v in &values {
        *histogram.entry((v / config.bin_width).floor() as i64).or_default() += 1;
    }
    Ok(SimStats {
        mean,
        stddev: var.max(0.0).sqrt(),
        histogram,
        bin_width: config.bin_width,
        trials: config.trials,
    })
}

/// Exact distribution over final values: enumerates every root-to-leaf
/// path, multiplying outcome probabilities (the override applied if
/// given) and aggregating mass by leaf value.
pub fn exact_distribution(
    plan: &ConditionalPlan,
    execution_probability: Option<f64>,
) -> Result<ValueDistribution, SimError> {
    if let Some(p) = execution_probability {
        validate_override(plan, p)?;
    }
    let mut masses = Vec::new();
    collect_leaves(plan, &plan.root, 1.0, execution_probability, &mut masses)?;
    Ok(ValueDistribution::from_masses(masses))
}

fn collect_leaves(
    plan: &ConditionalPlan,
    node: &StateNode,
    mass: f64,
    override_p: Option<f64>,
    out: &mut Vec<(f64, f64)>,
) -> Result<(), SimError> {
    let Some(action) = &node.chosen else {
        let value = state_value(&node.state, &plan.scenario.value_model)?;
        out.push((value, mass));
        return Ok(());
    };
    match override_p {
        Some(p) => {
            let (success, failure) =
                binary_outcome_indices(action).expect("override validated up front");
            collect_leaves(plan, &action.outcomes[success].child, mass * p, override_p, out)?;
            collect_leaves(
                plan,
                &action.outcomes[failure].child,
                mass * (1.0 - p),
                override_p,
                out,
            )?;
        }
        None => {
            for edge in &action.outcomes {
                collect_leaves(plan, &edge.child, mass * edge.probability, override_p, out)?;
            }
        }
    }
    Ok(())
}

/// `(value, P[final value >= value])` at every support point, in ascending
/// value order. Starts at 1.0 for the smallest value.
pub fn exceedance(dist: &ValueDistribution) -> Vec<(f64, f64)> {
    let mut rows: Vec<(f64, f64)> = Vec::with_capacity(dist.support().len());
    let mut tail = 0.0;
    for (value, mass) in dist.support().iter().rev() {
        tail += mass;
        rows.push((*value, tail));
    }
    rows.reverse();
    rows
}

/// One Monte Carlo run per execution probability; returns
/// `(execution probability, mean final value)` rows.
pub fn probability_sweep(
    plan: &ConditionalPlan,
    probabilities: &[f64],
    trials: u64,
    seed: u64,
) -> Result<Vec<(f64, f64)>, SimError> {
    let mut rows = Vec::with_capacity(probabilities.len());
    for &p in probabilities {
        let config = ExecutionConfig {
            execution_probability: Some(p),
            trials,
            seed,
            bin_width: 1.0,
        };
        let stats = monte_carlo(plan, &config)?;
        rows.push((p, stats.mean));
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// CSV rendering

/// Formats a real with 6 significant digits.
pub fn fmt_sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x:.5}");
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (5 - magnitude).max(0) as usize;
    format!("{x:.decimals$}")
}

/// `exec_prob,mean_value` rows for a probability sweep.
pub fn sweep_csv(rows: &[(f64, f64)]) -> String {
    let mut out = String::from("exec_prob,mean_value\n");
    for (p, mean) in rows {
        out.push_str(&format!("{},{}\n", fmt_sig6(*p), fmt_sig6(*mean)));
    }
    out
}

/// `value,count` rows for a Monte Carlo histogram.
pub fn histogram_csv(stats: &SimStats) -> String {
    let mut out = String::from("value,count\n");
    for (bin, count) in &stats.histogram {
        out.push_str(&format!("{},{count}\n", fmt_sig6(*bin as f64 * stats.bin_width)));
    }
    out
}

/// `value,prob_geq` rows for an exceedance curve.
pub fn exceedance_csv(rows: &[(f64, f64)]) -> String {
    let mut out = String::from("value,prob_geq\n");
    for (value, prob) in rows {
        out.push_str(&format!("{},{}\n", fmt_sig6(*value), fmt_sig6(*prob)));
    }
    out
}
