//! Lossless JSON serialization of conditional plans.
//!
//! The document wraps the scenario the plan was computed for (the
//! simulator needs the value model and bounds) and the solved tree. Search
//! statistics are deliberately not serialized: the exhaustive and
//! branch-and-bound planners must export byte-identical documents.
//!
//! Import re-validates the tree invariants, so a hand-edited document with
//! a missing outcome child, inconsistent expected utilities, or broken
//! depth bookkeeping is rejected.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Fact, ModelError, Scenario, State, TypedObject, ValueModel};
use crate::planner::{ActionNode, ConditionalPlan, OutcomeEdge, SearchStats, StateNode};
use crate::utility::{UtilityError, UtilityParams};

/// Action-node expected utilities must equal the probability-weighted sum
/// of their children to this tolerance.
pub const EU_SUM_TOL: f64 = 1e-12;
/// Terminal expected utilities are recomputed through `powf`, which may
/// differ across math libraries, so they get a looser tolerance.
pub const EU_TERMINAL_TOL: f64 = 1e-9;
/// Outcome probability mass tolerance per action node.
pub const MASS_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum PlanIoError {
    #[error("malformed plan document: {0}")]
    Json(#[from] serde_json::Error),
    #[error("malformed fact in plan document: {0}")]
    Model(#[from] ModelError),
    #[error(transparent)]
    Utility(#[from] UtilityError),
    #[error("action {action}: outcome probabilities sum to {sum}, expected 1 (missing child?)")]
    OutcomeMass { action: String, sum: f64 },
    #[error("action {action}: outcome {label} has probability {probability} outside (0,1]")]
    OutcomeProbability {
        action: String,
        label: String,
        probability: f64,
    },
    #[error("action {action} has no outcomes")]
    NoOutcomes { action: String },
    #[error("action {action}: eu {eu} differs from outcome-weighted sum {sum}")]
    ActionEuMismatch { action: String, eu: f64, sum: f64 },
    #[error("terminal node at depth {depth}: eu {eu} differs from state utility {expected}")]
    TerminalEuMismatch { depth: u32, eu: f64, expected: f64 },
    #[error("node at depth {found} should be at depth {expected}")]
    DepthMismatch { expected: u32, found: u32 },
    #[error("plan deeper than the scenario depth limit {0}")]
    TooDeep(u32),
    #[error("plan root does not match the scenario's initial state")]
    RootNotInitial,
}

#[derive(Serialize, Deserialize)]
struct PlanDoc {
    scenario: ScenarioDoc,
    root: StateNodeDoc,
}

#[derive(Serialize, Deserialize)]
struct ScenarioDoc {
    name: String,
    domain: String,
    objects: Vec<TypedObject>,
    initial: StateDoc,
    value_model: ValueModel,
    v_min: f64,
    v_max: f64,
    depth_limit: u32,
    robustness: f64,
}

#[derive(Serialize, Deserialize)]
struct StateDoc {
    facts: Vec<String>,
    acc_value: f64,
}

#[derive(Serialize, Deserialize)]
struct StateNodeDoc {
    facts: Vec<String>,
    acc_value: f64,
    depth: u32,
    eu: f64,
    chosen: Option<ActionNodeDoc>,
}

#[derive(Serialize, Deserialize)]
struct ActionNodeDoc {
    action: String,
    eu: f64,
    outcomes: Vec<OutcomeDoc>,
}

#[derive(Serialize, Deserialize)]
struct OutcomeDoc {
    label: String,
    prob: f64,
    child: StateNodeDoc,
}

fn state_to_doc(state: &State) -> StateDoc {
    StateDoc {
        facts: state.facts.iter().map(|f| f.to_string()).collect(),
        acc_value: state.acc_value,
    }
}

fn state_from_doc(doc: &StateDoc) -> Result<State, PlanIoError> {
    let facts = doc
        .facts
        .iter()
        .map(|f| f.parse::<Fact>())
        .collect::<Result<Vec<_>, _>>()?;
    Ok(State::new(facts).with_value(doc.acc_value))
}

fn node_to_doc(node: &StateNode) -> StateNodeDoc {
    StateNodeDoc {
        facts: node.state.facts.iter().map(|f| f.to_string()).collect(),
        acc_value: node.state.acc_value,
        depth: node.depth,
        eu: node.eu,
        chosen: node.chosen.as_ref().map(|action| ActionNodeDoc {
            action: action.action.clone(),
            eu: action.eu,
            outcomes: action
                .outcomes
                .iter()
                .map(|edge| OutcomeDoc {
                    label: edge.label.clone(),
                    prob: edge.probability,
                    child: node_to_doc(&edge.child),
                })
                .collect(),
        }),
    }
}

fn node_from_doc(doc: StateNodeDoc) -> Result<StateNode, PlanIoError> {
    let facts = doc
        .facts
        .iter()
        .map(|f| f.parse::<Fact>())
        .collect::<Result<Vec<_>, _>>()?;
    let chosen = match doc.chosen {
        None => None,
        Some(action_doc) => {
            let mut outcomes = Vec::with_capacity(action_doc.outcomes.len());
            for o in action_doc.outcomes {
                outcomes.push(OutcomeEdge {
                    label: o.label,
                    probability: o.prob,
                    child: node_from_doc(o.child)?,
                });
            }
            Some(ActionNode {
                action: action_doc.action,
                eu: action_doc.eu,
                outcomes,
            })
        }
    };
    Ok(StateNode {
        state: State::new(facts).with_value(doc.acc_value),
        depth: doc.depth,
        eu: doc.eu,
        chosen,
    })
}

/// Serializes a plan to the JSON document format (pretty-printed,
/// deterministic byte layout for equal plans).
pub fn export_plan(plan: &ConditionalPlan) -> String {
    let doc = PlanDoc {
        scenario: ScenarioDoc {
            name: plan.scenario.name.clone(),
            domain: plan.scenario.domain_name.clone(),
            objects: plan.scenario.objects.clone(),
            initial: state_to_doc(&plan.scenario.initial),
            value_model: plan.scenario.value_model.clone(),
            v_min: plan.scenario.v_min,
            v_max: plan.scenario.v_max,
            depth_limit: plan.scenario.depth_limit,
            robustness: plan.scenario.robustness,
        },
        root: node_to_doc(&plan.root),
    };
    let mut text = serde_json::to_string_pretty(&doc).expect("plan serialization cannot fail");
    text.push('\n');
    text
}

/// Parses and validates a plan document. The returned plan has zeroed
/// search statistics (they are not part of the document).
pub fn import_plan(text: &str) -> Result<ConditionalPlan, PlanIoError> {
    let doc: PlanDoc = serde_json::from_str(text)?;
    let scenario = Scenario {
        name: doc.scenario.name,
        domain_name: doc.scenario.domain,
        objects: doc.scenario.objects,
        initial: state_from_doc(&doc.scenario.initial)?,
        value_model: doc.scenario.value_model,
        v_min: doc.scenario.v_min,
        v_max: doc.scenario.v_max,
        depth_limit: doc.scenario.depth_limit,
        robustness: doc.scenario.robustness,
    };
    scenario.validate()?;
    let root = node_from_doc(doc.root)?;
    if root.state != scenario.initial {
        return Err(PlanIoError::RootNotInitial);
    }
    let params = UtilityParams::from_scenario(&scenario)?;
    validate_tree(&root, 0, &scenario, &params)?;
    Ok(ConditionalPlan {
        root,
        scenario,
        stats: SearchStats::default(),
    })
}

fn validate_tree(
    node: &StateNode,
    expected_depth: u32,
    scenario: &Scenario,
    params: &UtilityParams,
) -> Result<(), PlanIoError> {
    if node.depth != expected_depth {
        return Err(PlanIoError::DepthMismatch {
            expected: expected_depth,
            found: node.depth,
        });
    }
    if node.depth > scenario.depth_limit {
        return Err(PlanIoError::TooDeep(scenario.depth_limit));
    }
    match &node.chosen {
        None => {
            let v = crate::model::state_value(&node.state, &scenario.value_model)?;
            let expected = params.utility_of_value(v)?;
            if (node.eu - expected).abs() > EU_TERMINAL_TOL {
                return Err(PlanIoError::TerminalEuMismatch {
                    depth: node.depth,
                    eu: node.eu,
                    expected,
                });
            }
        }
        Some(action) => {
            if action.outcomes.is_empty() {
                return Err(PlanIoError::NoOutcomes {
                    action: action.action.clone(),
                });
            }
            let mut mass = 0.0;
            let mut sum = 0.0;
            for edge in &action.outcomes {
                if !(edge.probability > 0.0 && edge.probability <= 1.0) {
                    return Err(PlanIoError::OutcomeProbability {
                        action: action.action.clone(),
                        label: edge.label.clone(),
                        probability: edge.probability,
                    });
                }
                mass += edge.probability;
                sum += edge.probability * edge.child.eu;
                validate_tree(&edge.child, expected_depth + 1, scenario, params)?;
            }
            if (mass - 1.0).abs() > MASS_TOL {
                return Err(PlanIoError::OutcomeMass {
                    action: action.action.clone(),
                    sum: mass,
                });
            }
            if (action.eu - sum).abs() > EU_SUM_TOL {
                return Err(PlanIoError::ActionEuMismatch {
                    action: action.action.clone(),
                    eu: action.eu,
                    sum,
                });
            }
            if (node.eu - action.eu).abs() > EU_SUM_TOL {
                return Err(PlanIoError::ActionEuMismatch {
                    action: action.action.clone(),
                    eu: node.eu,
                    sum: action.eu,
                });
            }
        }
    }
    Ok(())
}
