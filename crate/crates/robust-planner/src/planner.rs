//! Depth-limited expected-utility search over the AND/OR tree of states
//! and actions.
//!
//! States are OR nodes: the search evaluates every applicable action and
//! keeps the one with maximal expected utility. Actions are AND nodes:
//! every outcome is expanded and the action's expected utility is the
//! probability-weighted sum of its children. A state at the depth limit,
//! or with no applicable action, is terminal and scores `U_R(V(v(s)))`.
//!
//! [`plan`] searches exhaustively; [`plan_bnb`] additionally abandons an
//! action as soon as an upper bound on its expected utility falls to the
//! best sibling's value (alpha pruning). Both produce the same tree under
//! the deterministic tie-break: among equal-utility actions the
//! lexicographically smallest canonical action text wins.

use std::rc::Rc;

use thiserror::Error;

use crate::dsl::Domain;
use crate::model::{
    applicable, apply_outcome, ground_all_actions, state_value, GroundAction, ModelError,
    Scenario, State,
};
use crate::utility::{UtilityError, UtilityParams};

#[derive(Debug, Error)]
pub enum PlanError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Utility(#[from] UtilityError),
    #[error("action {action} is not applicable in this state")]
    InapplicableAction { action: String },
    #[error("depth {depth} exceeds the scenario depth limit {limit}")]
    DepthExceeded { depth: u32, limit: u32 },
}

/// Search effort counters.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SearchStats {
    pub expanded_state_nodes: u64,
    /// Actions whose outcomes were all expanded.
    pub expanded_action_nodes: u64,
    /// Actions abandoned by alpha pruning before completion.
    pub pruned_action_nodes: u64,
}

/// An OR node of the solved tree: a concrete state, its depth, its backed-up
/// expected utility, and the chosen action (absent iff the node is
/// terminal).
#[derive(Clone, Debug, PartialEq)]
pub struct StateNode {
    pub state: State,
    pub depth: u32,
    pub eu: f64,
    pub chosen: Option<ActionNode>,
}

impl StateNode {
    pub fn is_terminal(&self) -> bool {
        self.chosen.is_none()
    }
}

/// An AND node of the solved tree: a chosen action with one child state
/// per outcome.
#[derive(Clone, Debug, PartialEq)]
pub struct ActionNode {
    /// Canonical action text, e.g. `stack(b1,b3)`.
    pub action: String,
    pub eu: f64,
    pub outcomes: Vec<OutcomeEdge>,
}

/// One contingency branch of an action node.
#[derive(Clone, Debug, PartialEq)]
pub struct OutcomeEdge {
    pub label: String,
    pub probability: f64,
    pub child: StateNode,
}

/// A solved AND/OR tree rooted at the scenario's initial state, with the
/// scenario it was planned for and the search effort counters.
#[derive(Clone, Debug)]
pub struct ConditionalPlan {
    pub root: StateNode,
    pub scenario: Scenario,
    pub stats: SearchStats,
}

impl ConditionalPlan {
    /// The action sequence along the all-success branch: at every state
    /// take the chosen action, then descend into the outcome labeled
    /// `success` (or the sole outcome of a deterministic action).
    pub fn success_path(&self) -> Vec<String> {
        let mut path = Vec::new();
        let mut node = &self.root;
        while let Some(action) = &node.chosen {
            path.push(action.action.clone());
            let edge = action
                .outcomes
                .iter()
                .find(|e| e.label == "success")
                .unwrap_or(&action.outcomes[0]);
            node = &edge.child;
        }
        path
    }

    /// `(moved block, destination)` pairs of the stacking moves along the
    /// success path.
    pub fn success_path_stack_moves(&self) -> Vec<(String, String)> {
        self.success_path()
            .iter()
            .filter_map(|text| {
                let rest = text.strip_prefix("stack(")?.strip_suffix(')')?;
                let (moved, dest) = rest.split_once(',')?;
                Some((moved.to_string(), dest.to_string()))
            })
            .collect()
    }
}

/// Depth-limited expected-utility search over one scenario.
///
/// Grounding happens once up front; each state then filters the candidate
/// actions by applicability. Candidates are kept sorted by canonical text
/// so "first strict improvement wins" implements the tie-break.
pub struct Search<'a> {
    scenario: &'a Scenario,
    params: UtilityParams,
    candidates: Rc<Vec<GroundAction>>,
    prune: bool,
    pub stats: SearchStats,
}

impl<'a> Search<'a> {
    pub fn new(domain: &Domain, scenario: &'a Scenario) -> Result<Self, PlanError> {
        Self::build(domain, scenario, false)
    }

    pub fn with_pruning(domain: &Domain, scenario: &'a Scenario) -> Result<Self, PlanError> {
        Self::build(domain, scenario, true)
    }

    fn build(domain: &Domain, scenario: &'a Scenario, prune: bool) -> Result<Self, PlanError> {
        scenario.validate()?;
        for schema in &domain.schemas {
            schema.validate()?;
        }
        let params = UtilityParams::from_scenario(scenario)?;
        let mut candidates = ground_all_actions(&domain.schemas, &scenario.objects);
        candidates.sort_by(|a, b| a.text().cmp(&b.text()));
        Ok(Search {
            scenario,
            params,
            candidates: Rc::new(candidates),
            prune,
            stats: SearchStats::default(),
        })
    }

    fn terminal_eu(&self, state: &State) -> Result<f64, PlanError> {
        let v = state_value(state, &self.scenario.value_model)?;
        Ok(self.params.utility_of_value(v)?)
    }

    /// Solves the OR node for `state` at `depth`, returning the node with
    /// its backed-up expected utility and chosen action.
    pub fn expected_utility_state(
        &mut self,
        state: State,
        depth: u32,
    ) -> Result<StateNode, PlanError> {
        if depth > self.scenario.depth_limit {
            return Err(PlanError::DepthExceeded {
                depth,
                limit: self.scenario.depth_limit,
            });
        }
        self.stats.expanded_state_nodes += 1;

        let mut best: Option<ActionNode> = None;
        if depth < self.scenario.depth_limit {
            let candidates = Rc::clone(&self.candidates);
            for action in candidates.iter().filter(|a| applicable(&state, a)) {
                let alpha = match (&best, self.prune) {
                    (Some(node), true) => node.eu,
                    _ => f64::NEG_INFINITY,
                };
                if let Some(node) = self.action_node(action, &state, depth, alpha)? {
                    if best.as_ref().map_or(true, |b| node.eu > b.eu) {
                        best = Some(node);
                    }
                }
            }
        }
        Ok(match best {
            Some(node) => StateNode {
                state,
                depth,
                eu: node.eu,
                chosen: Some(node),
            },
            None => StateNode {
                eu: self.terminal_eu(&state)?,
                state,
                depth,
                chosen: None,
            },
        })
    }

    /// Solves the AND node for `action` applied to `state` at `depth`,
    /// expanding all outcome children.
    pub fn expected_utility_action(
        &mut self,
        action: &GroundAction,
        state: &State,
        depth: u32,
    ) -> Result<ActionNode, PlanError> {
        if !applicable(state, action) {
            return Err(PlanError::InapplicableAction {
                action: action.text(),
            });
        }
        if depth >= self.scenario.depth_limit {
            return Err(PlanError::DepthExceeded {
                depth: depth + 1,
                limit: self.scenario.depth_limit,
            });
        }
        let node = self
            .action_node(action, state, depth, f64::NEG_INFINITY)?
            .expect("unbounded evaluation cannot prune");
        Ok(node)
    }

    /// Expands an action's outcomes, abandoning early if the optimistic
    /// bound `partial_sum + remaining_mass * U_max` (with `U_max = 1`)
    /// falls to or below `alpha`. Returns `None` when pruned.
    fn action_node(
        &mut self,
        action: &GroundAction,
        state: &State,
        depth: u32,
        alpha: f64,
    ) -> Result<Option<ActionNode>, PlanError> {
        let mut sum = 0.0;
        let mut remaining = 1.0;
        let mut edges = Vec::with_capacity(action.outcomes.len());
        for (i, outcome) in action.outcomes.iter().enumerate() {
            if sum + remaining <= alpha {
                self.stats.pruned_action_nodes += 1;
                return Ok(None);
            }
            let successor = apply_outcome(state, action, i)?;
            let child = self.expected_utility_state(successor, depth + 1)?;
            sum += outcome.probability * child.eu;
            remaining -= outcome.probability;
            edges.push(OutcomeEdge {
                label: outcome.label.clone(),
                probability: outcome.probability,
                child,
            });
        }
        self.stats.expanded_action_nodes += 1;
        Ok(Some(ActionNode {
            action: action.text(),
            eu: sum,
            outcomes: edges,
        }))
    }
}

fn run(domain: &Domain, scenario: &Scenario, prune: bool) -> Result<ConditionalPlan, PlanError> {
    let mut search = if prune {
        Search::with_pruning(domain, scenario)?
    } else {
        Search::new(domain, scenario)?
    };
    let root = search.expected_utility_state(scenario.initial.clone(), 0)?;
    Ok(ConditionalPlan {
        root,
        scenario: scenario.clone(),
        stats: search.stats,
    })
}

/// Exhaustive depth-limited search: every applicable action at every
/// non-terminal state is fully evaluated.
pub fn plan(domain: &Domain, scenario: &Scenario) -> Result<ConditionalPlan, PlanError> {
    run(domain, scenario, false)
}

/// Branch-and-bound variant of [`plan`]: same chosen actions and expected
/// utilities, with sibling actions abandoned once they provably cannot
/// beat the incumbent.
pub fn plan_bnb(domain: &Domain, scenario: &Scenario) -> Result<ConditionalPlan, PlanError> {
    run(domain, scenario, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blocksworld;
    use crate::dsl::{parse_domain, parse_scenario};
    use crate::model::ValueModel;

    fn delta_domain(text: &str) -> Domain {
        parse_domain(text).unwrap()
    }

    /// One operator, two outcomes: success jumps to the top of the value
    /// range, failure to the midpoint.
    const LOTTERY_DOMAIN: &str = "\
domain lottery
  types coin
  operator toss(?c: coin)
    pre: fresh(?c)
    outcome success prob 0.72:
      add: []
      del: [fresh(?c)]
      value: 1
    outcome failure prob 0.28:
      add: []
      del: [fresh(?c)]
      value: 0.5
";

    fn lottery_scenario(domain: &Domain, depth: u32, robustness: f64) -> Scenario {
        let text = format!(
            "\
problem one-toss
  domain lottery
  objects c : coin
  init: fresh(c)
  value-model delta
  vmin 0
  vmax 1
  depth-limit {depth}
  robustness {robustness}
"
        );
        parse_scenario(&text, domain).unwrap()
    }

    #[test]
    fn state_at_depth_limit_is_terminal() {
        let domain = delta_domain(LOTTERY_DOMAIN);
        let scenario = lottery_scenario(&domain, 1, 0.0);
        let mut search = Search::new(&domain, &scenario).unwrap();
        let node = search
            .expected_utility_state(scenario.initial.clone().with_value(0.5), 1)
            .unwrap();
        assert!(node.is_terminal());
        assert!((node.eu - 0.5).abs() < 1e-15);
    }

    #[test]
    fn lottery_eu_is_probability_weighted() {
        let domain = delta_domain(LOTTERY_DOMAIN);
        let scenario = lottery_scenario(&domain, 1, 0.0);
        let result = plan(&domain, &scenario).unwrap();
        // 0.72 * U(1) + 0.28 * U(0.5) with U the identity
        assert!((result.root.eu - 0.86).abs() < 1e-12);
        let chosen = result.root.chosen.as_ref().unwrap();
        assert_eq!(chosen.action, "toss(c)");
        assert_eq!(chosen.outcomes.len(), 2);
        for edge in &chosen.outcomes {
            assert!(edge.child.is_terminal());
            assert_eq!(edge.child.depth, 1);
        }
    }

    #[test]
    fn deterministic_action_passes_child_eu_through() {
        let text = "\
domain walk
  types spot
  operator advance(?s: spot)
    pre: at(?s)
    outcome step prob 1:
      add: []
      del: [at(?s)]
      value: 0.25
";
        let domain = delta_domain(text);
        let scenario_text = "\
problem p
  domain walk
  objects a : spot
  init: at(a)
  value-model delta
  vmin 0
  vmax 1
  depth-limit 3
  robustness 0
";
        let scenario = parse_scenario(scenario_text, &domain).unwrap();
        let result = plan(&domain, &scenario).unwrap();
        let chosen = result.root.chosen.as_ref().unwrap();
        assert_eq!(chosen.outcomes.len(), 1);
        assert!((chosen.eu - chosen.outcomes[0].child.eu).abs() < 1e-15);
        assert!((result.root.eu - 0.25).abs() < 1e-15);
    }

    #[test]
    fn state_with_no_actions_is_terminal_before_depth_limit() {
        let domain = delta_domain(LOTTERY_DOMAIN);
        let scenario = lottery_scenario(&domain, 4, 0.0);
        // after the toss, `fresh` is gone and nothing applies
        let result = plan(&domain, &scenario).unwrap();
        let chosen = result.root.chosen.as_ref().unwrap();
        for edge in &chosen.outcomes {
            assert!(edge.child.is_terminal());
            assert_eq!(edge.child.depth, 1);
        }
    }

    #[test]
    fn tie_break_prefers_smallest_action_text() {
        // two interchangeable coins: toss(a) and toss(b) have equal eu
        let domain = delta_domain(LOTTERY_DOMAIN);
        let text = "\
problem tie
  domain lottery
  objects b a : coin
  init: fresh(a), fresh(b)
  value-model delta
  vmin 0
  vmax 2
  depth-limit 1
  robustness 0
";
        let scenario = parse_scenario(text, &domain).unwrap();
        for result in [plan(&domain, &scenario), plan_bnb(&domain, &scenario)] {
            let result = result.unwrap();
            assert_eq!(result.root.chosen.as_ref().unwrap().action, "toss(a)");
        }
    }

    #[test]
    fn inapplicable_action_is_caller_error() {
        let domain = delta_domain(LOTTERY_DOMAIN);
        let scenario = lottery_scenario(&domain, 1, 0.0);
        let mut search = Search::new(&domain, &scenario).unwrap();
        let action = crate::model::ground_all_actions(&domain.schemas, &scenario.objects)
            .pop()
            .unwrap();
        let empty = State::new([]);
        assert!(matches!(
            search.expected_utility_action(&action, &empty, 0),
            Err(PlanError::InapplicableAction { .. })
        ));
    }

    #[test]
    fn single_action_scenario_never_prunes() {
        let domain = delta_domain(LOTTERY_DOMAIN);
        let scenario = lottery_scenario(&domain, 2, 0.3);
        let exhaustive = plan(&domain, &scenario).unwrap();
        let bounded = plan_bnb(&domain, &scenario).unwrap();
        assert_eq!(bounded.stats.pruned_action_nodes, 0);
        assert_eq!(exhaustive.root, bounded.root);
        assert_eq!(exhaustive.stats, bounded.stats);
    }

    #[test]
    fn backed_up_values_are_consistent() {
        let domain = parse_domain(&blocksworld::make_domain(0.72).unwrap()).unwrap();
        let mut spec = blocksworld::figure9_spec(0.5);
        spec.depth_limit = 3;
        let scenario = spec.to_scenario().unwrap();
        let result = plan(&domain, &scenario).unwrap();
        check_consistency(&result.root, scenario.depth_limit);
    }

    fn check_consistency(node: &StateNode, limit: u32) {
        assert!(node.depth <= limit);
        if let Some(action) = &node.chosen {
            assert_eq!(node.eu, action.eu);
            let sum: f64 = action
                .outcomes
                .iter()
                .map(|e| e.probability * e.child.eu)
                .sum();
            assert!((action.eu - sum).abs() <= 1e-12);
            let mass: f64 = action.outcomes.iter().map(|e| e.probability).sum();
            assert!((mass - 1.0).abs() <= 1e-9);
            for edge in &action.outcomes {
                assert_eq!(edge.child.depth, node.depth + 1);
                check_consistency(&edge.child, limit);
            }
        }
    }

    #[test]
    fn planning_is_deterministic() {
        let domain = parse_domain(&blocksworld::make_domain(0.72).unwrap()).unwrap();
        let mut spec = blocksworld::figure9_spec(0.6);
        spec.depth_limit = 3;
        let scenario = spec.to_scenario().unwrap();
        let a = plan(&domain, &scenario).unwrap();
        let b = plan(&domain, &scenario).unwrap();
        assert_eq!(a.root, b.root);
        assert_eq!(a.stats, b.stats);
    }

    #[test]
    fn bnb_matches_plan_on_small_blocks_scenarios() {
        let domain = parse_domain(&blocksworld::make_domain(0.72).unwrap()).unwrap();
        for (r, depth) in [(0.0, 2), (0.5, 3), (0.6, 4)] {
            let mut spec = blocksworld::figure9_spec(r);
            spec.depth_limit = depth;
            let scenario = spec.to_scenario().unwrap();
            let exhaustive = plan(&domain, &scenario).unwrap();
            let bounded = plan_bnb(&domain, &scenario).unwrap();
            assert_eq!(exhaustive.root, bounded.root);
            assert!(
                bounded.stats.expanded_action_nodes <= exhaustive.stats.expanded_action_nodes
            );
        }
    }

    #[test]
    fn depth_zero_scenarios_are_rejected() {
        let domain = delta_domain(LOTTERY_DOMAIN);
        let mut scenario = lottery_scenario(&domain, 1, 0.0);
        scenario.depth_limit = 0;
        assert!(matches!(
            plan(&domain, &scenario),
            Err(PlanError::Model(ModelError::DepthLimit))
        ));
    }

    #[test]
    fn normalization_error_propagates() {
        let domain = delta_domain(LOTTERY_DOMAIN);
        let mut scenario = lottery_scenario(&domain, 1, 0.0);
        // bounds too tight: success pushes the accumulator to 1 > 0.75
        scenario.v_max = 0.75;
        assert!(matches!(
            plan(&domain, &scenario),
            Err(PlanError::Utility(UtilityError::ValueOutOfBounds { .. }))
        ));
        assert!(matches!(scenario.value_model, ValueModel::DeltaAccumulator));
    }
}
