#![allow(dead_code)] // each integration test target uses a different subset

//! Shared harness for the integration suites: a seeded generator of small
//! random planning cases and an exhaustive expected-utility enumerator
//! kept deliberately independent of the planner (its own grounding, its
//! own outcome application, its own normalization and utility).

use std::collections::BTreeMap;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use robust_planner::dsl::Domain;
use robust_planner::model::{
    Fact, FactPattern, OperatorSchema, OutcomeSpec, Param, PatternArg, Scenario, State,
    TypedObject, ValueModel,
};

pub struct GeneratedCase {
    pub domain: Domain,
    pub scenario: Scenario,
}

/// A small random delta-value planning case: at most 3 schemas with at
/// most 2 outcomes each, at most 4 objects, depth at most 4. Bounds are
/// wide enough that normalization can never fail, and the depth is shrunk
/// when a coarse tree-size estimate gets too large for exhaustive
/// enumeration.
pub fn random_case(seed: u64) -> GeneratedCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let n_objects = rng.gen_range(2..=4usize);
    let objects: Vec<TypedObject> = (1..=n_objects)
        .map(|i| TypedObject::new(format!("o{i}"), "item"))
        .collect();

    let n_preds = rng.gen_range(2..=4usize);
    let preds: Vec<(String, usize)> = (1..=n_preds)
        .map(|i| (format!("p{i}"), rng.gen_range(0..=2usize)))
        .collect();

    let deltas = [-2.0, -1.0, -0.5, 0.0, 0.0, 0.5, 1.0, 2.0];
    let n_schemas = rng.gen_range(1..=3usize);
    let mut schemas = Vec::with_capacity(n_schemas);
    for s in 1..=n_schemas {
        let n_params = rng.gen_range(0..=2usize.min(n_objects));
        let params: Vec<Param> = (0..n_params)
            .map(|i| Param {
                name: format!("v{i}"),
                ty: "item".to_string(),
            })
            .collect();

        let pattern = |rng: &mut ChaCha8Rng| -> FactPattern {
            let (pred, arity) = preds[rng.gen_range(0..preds.len())].clone();
            let args = (0..arity)
                .map(|_| {
                    if !params.is_empty() && rng.gen_bool(0.7) {
                        PatternArg::Var(params[rng.gen_range(0..params.len())].name.clone())
                    } else {
                        PatternArg::Obj(objects[rng.gen_range(0..objects.len())].name.clone())
                    }
                })
                .collect();
            FactPattern {
                predicate: pred,
                args,
            }
        };

        let preconditions = (0..rng.gen_range(0..=2)).map(|_| pattern(&mut rng)).collect();
        let k = rng.gen_range(1..=2usize);
        let outcomes = if k == 1 {
            vec![OutcomeSpec {
                label: "only".to_string(),
                probability: 1.0,
                add_list: (0..rng.gen_range(0..=2)).map(|_| pattern(&mut rng)).collect(),
                delete_list: (0..rng.gen_range(0..=2)).map(|_| pattern(&mut rng)).collect(),
                value_delta: deltas[rng.gen_range(0..deltas.len())],
            }]
        } else {
            let p = [0.3, 0.5, 0.72, 0.9][rng.gen_range(0..4)];
            ["success", "failure"]
                .iter()
                .enumerate()
                .map(|(i, label)| OutcomeSpec {
                    label: label.to_string(),
                    probability: if i == 0 { p } else { 1.0 - p },
                    add_list: (0..rng.gen_range(0..=2)).map(|_| pattern(&mut rng)).collect(),
                    delete_list: (0..rng.gen_range(0..=2)).map(|_| pattern(&mut rng)).collect(),
                    value_delta: deltas[rng.gen_range(0..deltas.len())],
                })
                .collect()
        };
        schemas.push(OperatorSchema {
            name: format!("op{s}"),
            params,
            preconditions,
            outcomes,
        });
    }
    for schema in &schemas {
        schema.validate().expect("generated schema must be valid");
    }

    // random subset of all ground facts as the initial state, limited to
    // predicates the operators actually mention (anything else would be
    // rejected by the surface-language parser and is inert anyway)
    let mentioned: std::collections::BTreeSet<(String, usize)> = schemas
        .iter()
        .flat_map(|s| {
            s.preconditions
                .iter()
                .chain(s.outcomes.iter().flat_map(|o| o.add_list.iter()))
                .chain(s.outcomes.iter().flat_map(|o| o.delete_list.iter()))
        })
        .map(|p| (p.predicate.clone(), p.args.len()))
        .collect();
    let mut init = Vec::new();
    for (pred, arity) in &preds {
        if !mentioned.contains(&(pred.clone(), *arity)) {
            continue;
        }
        let mut tuples: Vec<Vec<String>> = vec![Vec::new()];
        for _ in 0..*arity {
            tuples = tuples
                .into_iter()
                .flat_map(|t| {
                    objects.iter().map(move |o| {
                        let mut t = t.clone();
                        t.push(o.name.clone());
                        t
                    })
                })
                .collect();
        }
        for args in tuples {
            if rng.gen_bool(0.35) {
                init.push(Fact::new(pred.clone(), args));
            }
        }
    }

    let mut depth_limit = rng.gen_range(1..=4u32);
    // coarse tree bound: (ground actions * max k) ^ depth
    let ground_count: usize = schemas
        .iter()
        .map(|s| falling_product(n_objects, s.params.len()))
        .sum();
    let branch = (ground_count.max(1)
        * schemas.iter().map(|s| s.outcomes.len()).max().unwrap()) as u64;
    while depth_limit > 1 && branch.saturating_pow(depth_limit) > 60_000 {
        depth_limit -= 1;
    }

    let max_delta = schemas
        .iter()
        .flat_map(|s| s.outcomes.iter())
        .map(|o| o.value_delta.abs())
        .fold(0.0f64, f64::max);
    let bound = max_delta * depth_limit as f64 + 1.0;
    let robustness = [0.0, 0.3, 0.5, 0.9][rng.gen_range(0..4)];

    let scenario = Scenario {
        name: format!("random{seed}"),
        domain_name: format!("gen{seed}"),
        objects,
        initial: State::new(init),
        value_model: ValueModel::DeltaAccumulator,
        v_min: -bound,
        v_max: bound,
        depth_limit,
        robustness,
    };
    scenario.validate().expect("generated scenario must be valid");

    GeneratedCase {
        domain: Domain {
            name: format!("gen{seed}"),
            types: vec!["item".to_string()],
            schemas,
        },
        scenario,
    }
}

fn falling_product(n: usize, k: usize) -> usize {
    (0..k).map(|i| n - i).product()
}

// ---------------------------------------------------------------------------
// Independent exhaustive enumerator

/// Ground outcome as the oracle sees it.
struct OracleOutcome {
    probability: f64,
    add: Vec<Fact>,
    del: Vec<Fact>,
    value_delta: f64,
}

struct OracleAction {
    preconditions: Vec<Fact>,
    outcomes: Vec<OracleOutcome>,
}

fn substitute(pattern: &FactPattern, binding: &BTreeMap<&str, &str>) -> Fact {
    let args: Vec<String> = pattern
        .args
        .iter()
        .map(|a| match a {
            PatternArg::Var(v) => binding[v.as_str()].to_string(),
            PatternArg::Obj(o) => o.clone(),
        })
        .collect();
    Fact::new(pattern.predicate.clone(), args)
}

fn oracle_ground(domain: &Domain, scenario: &Scenario) -> Vec<OracleAction> {
    let mut out = Vec::new();
    for schema in &domain.schemas {
        // enumerate injective parameter bindings by odometer
        let pools: Vec<Vec<&str>> = schema
            .params
            .iter()
            .map(|p| {
                scenario
                    .objects
                    .iter()
                    .filter(|o| o.ty == p.ty)
                    .map(|o| o.name.as_str())
                    .collect()
            })
            .collect();
        if pools.iter().any(|p| p.is_empty()) {
            continue;
        }
        let mut indices = vec![0usize; pools.len()];
        loop {
            let chosen: Vec<&str> = pools.iter().zip(&indices).map(|(pool, &i)| pool[i]).collect();
            let distinct = chosen
                .iter()
                .enumerate()
                .all(|(i, c)| !chosen[..i].contains(c));
            if distinct {
                let binding: BTreeMap<&str, &str> = schema
                    .params
                    .iter()
                    .map(|p| p.name.as_str())
                    .zip(chosen.iter().copied())
                    .collect();
                out.push(OracleAction {
                    preconditions: schema
                        .preconditions
                        .iter()
                        .map(|p| substitute(p, &binding))
                        .collect(),
                    outcomes: schema
                        .outcomes
                        .iter()
                        .map(|o| OracleOutcome {
                            probability: o.probability,
                            add: o.add_list.iter().map(|p| substitute(p, &binding)).collect(),
                            del: o.delete_list.iter().map(|p| substitute(p, &binding)).collect(),
                            value_delta: o.value_delta,
                        })
                        .collect(),
                });
            }
            // advance the odometer; a zero-parameter schema is done after
            // its single empty binding
            let mut pos = 0;
            while pos < pools.len() {
                indices[pos] += 1;
                if indices[pos] < pools[pos].len() {
                    break;
                }
                indices[pos] = 0;
                pos += 1;
            }
            if pos == pools.len() {
                break;
            }
        }
    }
    out
}

fn oracle_value(scenario: &Scenario, state: &State) -> f64 {
    match &scenario.value_model {
        ValueModel::DeltaAccumulator => state.acc_value,
        ValueModel::Blocksworld { worths } => {
            let mut total = 0.0;
            for (block, worth) in worths {
                if state.facts.contains(&Fact::new("holding", [block.as_str()])) {
                    continue; // held: height 0
                }
                let mut height = 1.0;
                let mut current = block.as_str();
                while !state.facts.contains(&Fact::new("on-table", [current])) {
                    current = state
                        .facts
                        .iter()
                        .find(|f| f.predicate == "on" && f.args[0] == current)
                        .map(|f| f.args[1].as_str())
                        .expect("oracle: block must have a position");
                    height += 1.0;
                }
                total += worth * height;
            }
            total
        }
    }
}

fn oracle_utility(scenario: &Scenario, v: f64) -> f64 {
    let norm = (v - scenario.v_min) / (scenario.v_max - scenario.v_min);
    assert!(
        (-1e-12..=1.0 + 1e-12).contains(&norm),
        "oracle: value {v} outside bounds"
    );
    norm.clamp(0.0, 1.0).powf(1.0 - scenario.robustness)
}

fn oracle_eu(
    scenario: &Scenario,
    actions: &[OracleAction],
    state: &State,
    depth: u32,
) -> f64 {
    let mut best: Option<f64> = None;
    if depth < scenario.depth_limit {
        for action in actions {
            if !action.preconditions.iter().all(|f| state.facts.contains(f)) {
                continue;
            }
            let mut sum = 0.0;
            for outcome in &action.outcomes {
                let mut facts = state.facts.clone();
                for f in &outcome.del {
                    facts.remove(f);
                }
                for f in &outcome.add {
                    facts.insert(f.clone());
                }
                let next = State {
                    facts,
                    acc_value: state.acc_value + outcome.value_delta,
                };
                sum += outcome.probability * oracle_eu(scenario, actions, &next, depth + 1);
            }
            best = Some(best.map_or(sum, |b: f64| b.max(sum)));
        }
    }
    best.unwrap_or_else(|| oracle_utility(scenario, oracle_value(scenario, state)))
}

/// Exhaustively enumerated root expected utility.
pub fn oracle_root_eu(domain: &Domain, scenario: &Scenario) -> f64 {
    let actions = oracle_ground(domain, scenario);
    oracle_eu(scenario, &actions, &scenario.initial, 0)
}

fn oracle_best_mean(
    scenario: &Scenario,
    actions: &[OracleAction],
    state: &State,
    depth: u32,
) -> f64 {
    let mut best: Option<f64> = None;
    if depth < scenario.depth_limit {
        for action in actions {
            if !action.preconditions.iter().all(|f| state.facts.contains(f)) {
                continue;
            }
            let mut sum = 0.0;
            for outcome in &action.outcomes {
                let mut facts = state.facts.clone();
                for f in &outcome.del {
                    facts.remove(f);
                }
                for f in &outcome.add {
                    facts.insert(f.clone());
                }
                let next = State {
                    facts,
                    acc_value: state.acc_value + outcome.value_delta,
                };
                sum += outcome.probability * oracle_best_mean(scenario, actions, &next, depth + 1);
            }
            best = Some(best.map_or(sum, |b: f64| b.max(sum)));
        }
    }
    best.unwrap_or_else(|| oracle_value(scenario, state))
}

/// Maximum expected terminal *value* (no utility transform), for the
/// risk-neutral reduction check.
pub fn oracle_max_expected_value(domain: &Domain, scenario: &Scenario) -> f64 {
    let actions = oracle_ground(domain, scenario);
    oracle_best_mean(scenario, &actions, &scenario.initial, 0)
}
