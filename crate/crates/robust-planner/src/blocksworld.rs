//! Built-in slippery blocks world: the four arm operators with
//! success/failure outcomes, the height-weighted value function, and the
//! five-block reference scenario.
//!
//! Every arm action succeeds with a fixed probability `p`; failure leaves
//! the state unchanged. State value is `sum of worth(b) * height(b)`, so
//! tall stacks of valuable blocks score best.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::dsl::{print_domain, print_scenario, Domain};
use crate::model::{
    Fact, FactPattern, OperatorSchema, OutcomeSpec, Param, PatternArg, Scenario, State,
    TypedObject, ValueModel, PRED_CLEAR, PRED_HAND_EMPTY, PRED_HOLDING, PRED_ON, PRED_ON_TABLE,
};

pub const DOMAIN_NAME: &str = "slippery-blocks";
pub const BLOCK_TYPE: &str = "block";
pub const SUCCESS_LABEL: &str = "success";
pub const FAILURE_LABEL: &str = "failure";

#[derive(Debug, Error)]
pub enum BlocksError {
    #[error("success probability {0} outside (0,1]")]
    SuccessProbabilityRange(f64),
    #[error("robustness {0} outside [0,1)")]
    RobustnessRange(f64),
    #[error("block {0} appears in more than one position")]
    DuplicatePosition(String),
    #[error("block {0} has no declared worth")]
    MissingWorth(String),
    #[error("worth declared for unknown block {0}")]
    UnknownBlock(String),
    #[error("scenario has no blocks")]
    NoBlocks,
}

/// Upper bound on `v(s)`: the value of stacking every block into one tower
/// in ascending-worth order (cheap blocks low, valuable blocks high).
pub fn greedy_tower_value(worths: &BTreeMap<String, f64>) -> f64 {
    let mut values: Vec<f64> = worths.values().copied().collect();
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    values
        .iter()
        .enumerate()
        .map(|(i, w)| w * (i + 1) as f64)
        .sum()
}

fn var(name: &str) -> PatternArg {
    PatternArg::Var(name.to_string())
}

fn pat(predicate: &str, args: Vec<PatternArg>) -> FactPattern {
    FactPattern {
        predicate: predicate.to_string(),
        args,
    }
}

fn operator(
    name: &str,
    params: &[&str],
    pre: Vec<FactPattern>,
    add: Vec<FactPattern>,
    del: Vec<FactPattern>,
    p: f64,
) -> OperatorSchema {
    let mut outcomes = vec![OutcomeSpec {
        label: SUCCESS_LABEL.to_string(),
        probability: p,
        add_list: add,
        delete_list: del,
        value_delta: 0.0,
    }];
    if p < 1.0 {
        outcomes.push(OutcomeSpec {
            label: FAILURE_LABEL.to_string(),
            probability: clean_probability(1.0 - p),
            add_list: Vec::new(),
            delete_list: Vec::new(),
            value_delta: 0.0,
        });
    }
    OperatorSchema {
        name: name.to_string(),
        params: params
            .iter()
            .map(|n| Param {
                name: n.to_string(),
                ty: BLOCK_TYPE.to_string(),
            })
            .collect(),
        preconditions: pre,
        outcomes,
    }
}

/// Rounds a derived probability to 12 decimal places so the emitted text
/// stays readable; the reparsed mass is still 1 within 1e-9.
fn clean_probability(p: f64) -> f64 {
    format!("{p:.12}").parse().unwrap()
}

/// The four-operator slippery blocks domain with success probability `p`.
///
/// With `p = 1` the failure outcome is omitted and the domain degenerates
/// to deterministic STRIPS.
pub fn make_domain_value(p: f64) -> Result<Domain, BlocksError> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(BlocksError::SuccessProbabilityRange(p));
    }
    let schemas = vec![
        operator(
            "pick-up",
            &["b"],
            vec![
                pat(PRED_CLEAR, vec![var("b")]),
                pat(PRED_ON_TABLE, vec![var("b")]),
                pat(PRED_HAND_EMPTY, vec![]),
            ],
            vec![pat(PRED_HOLDING, vec![var("b")])],
            vec![
                pat(PRED_ON_TABLE, vec![var("b")]),
                pat(PRED_CLEAR, vec![var("b")]),
                pat(PRED_HAND_EMPTY, vec![]),
            ],
            p,
        ),
        operator(
            "put-down",
            &["b"],
            vec![pat(PRED_HOLDING, vec![var("b")])],
            vec![
                pat(PRED_ON_TABLE, vec![var("b")]),
                pat(PRED_CLEAR, vec![var("b")]),
                pat(PRED_HAND_EMPTY, vec![]),
            ],
            vec![pat(PRED_HOLDING, vec![var("b")])],
            p,
        ),
        operator(
            "stack",
            &["b", "c"],
            vec![
                pat(PRED_HOLDING, vec![var("b")]),
                pat(PRED_CLEAR, vec![var("c")]),
            ],
            vec![
                pat(PRED_ON, vec![var("b"), var("c")]),
                pat(PRED_CLEAR, vec![var("b")]),
                pat(PRED_HAND_EMPTY, vec![]),
            ],
            vec![
                pat(PRED_HOLDING, vec![var("b")]),
                pat(PRED_CLEAR, vec![var("c")]),
            ],
            p,
        ),
        operator(
            "unstack",
            &["b", "c"],
            vec![
                pat(PRED_ON, vec![var("b"), var("c")]),
                pat(PRED_CLEAR, vec![var("b")]),
                pat(PRED_HAND_EMPTY, vec![]),
            ],
            vec![
                pat(PRED_HOLDING, vec![var("b")]),
                pat(PRED_CLEAR, vec![var("c")]),
            ],
            vec![
                pat(PRED_ON, vec![var("b"), var("c")]),
                pat(PRED_CLEAR, vec![var("b")]),
                pat(PRED_HAND_EMPTY, vec![]),
            ],
            p,
        ),
    ];
    Ok(Domain {
        name: DOMAIN_NAME.to_string(),
        types: vec![BLOCK_TYPE.to_string()],
        schemas,
    })
}

/// Domain text for [`make_domain_value`], in the surface grammar.
pub fn make_domain(p: f64) -> Result<String, BlocksError> {
    Ok(print_domain(&make_domain_value(p)?))
}

/// A blocks-world problem: worths, an initial stacking, and search
/// parameters. Towers are listed bottom to top; a single-block tower is a
/// block on the table.
#[derive(Clone, Debug)]
pub struct BlocksScenarioSpec {
    pub name: String,
    pub worths: BTreeMap<String, f64>,
    pub towers: Vec<Vec<String>>,
    pub depth_limit: u32,
    pub robustness: f64,
    /// Normalization bounds; defaults are 0 and the greedy tower bound.
    pub v_min: Option<f64>,
    pub v_max: Option<f64>,
}

impl BlocksScenarioSpec {
    pub fn initial_state(&self) -> State {
        let mut facts = vec![Fact::prop(PRED_HAND_EMPTY)];
        for tower in &self.towers {
            for (i, block) in tower.iter().enumerate() {
                if i == 0 {
                    facts.push(Fact::new(PRED_ON_TABLE, &[block]));
                } else {
                    facts.push(Fact::new(PRED_ON, &[block, &tower[i - 1]]));
                }
            }
            if let Some(top) = tower.last() {
                facts.push(Fact::new(PRED_CLEAR, &[top]));
            }
        }
        State::new(facts)
    }

    pub fn to_scenario(&self) -> Result<Scenario, BlocksError> {
        if !(0.0..1.0).contains(&self.robustness) {
            return Err(BlocksError::RobustnessRange(self.robustness));
        }
        if self.worths.is_empty() {
            return Err(BlocksError::NoBlocks);
        }
        let mut seen = BTreeMap::new();
        for tower in &self.towers {
            for block in tower {
                if seen.insert(block.clone(), ()).is_some() {
                    return Err(BlocksError::DuplicatePosition(block.clone()));
                }
                if !self.worths.contains_key(block) {
                    return Err(BlocksError::MissingWorth(block.clone()));
                }
            }
        }
        for block in self.worths.keys() {
            if !seen.contains_key(block) {
                return Err(BlocksError::UnknownBlock(block.clone()));
            }
        }
        let objects = self
            .worths
            .keys()
            .map(|b| TypedObject::new(b.clone(), BLOCK_TYPE))
            .collect();
        Ok(Scenario {
            name: self.name.clone(),
            domain_name: DOMAIN_NAME.to_string(),
            objects,
            initial: self.initial_state(),
            value_model: ValueModel::Blocksworld {
                worths: self.worths.clone(),
            },
            v_min: self.v_min.unwrap_or(0.0),
            v_max: self.v_max.unwrap_or_else(|| greedy_tower_value(&self.worths)),
            depth_limit: self.depth_limit,
            robustness: self.robustness,
        })
    }

    pub fn scenario_text(&self) -> Result<String, BlocksError> {
        Ok(print_scenario(&self.to_scenario()?))
    }
}

/// The reference five-block problem: towers [b2,b3] and [b4,b1] (bottom to
/// top), b5 alone on the table, worths equal to the block numbers, depth
/// limit 6.
pub fn figure9_spec(robustness: f64) -> BlocksScenarioSpec {
    BlocksScenarioSpec {
        name: "fig9".to_string(),
        worths: (1..=5).map(|i| (format!("b{i}"), i as f64)).collect(),
        towers: vec![
            vec!["b2".to_string(), "b3".to_string()],
            vec!["b4".to_string(), "b1".to_string()],
            vec!["b5".to_string()],
        ],
        depth_limit: 6,
        robustness,
        v_min: Some(0.0),
        v_max: Some(55.0),
    }
}

/// Scenario text for [`figure9_spec`].
pub fn figure9_scenario(robustness: f64) -> Result<String, BlocksError> {
    figure9_spec(robustness).scenario_text()
}

/// Checks the physical invariants of a blocks state: every block in
/// exactly one position, at most one block held, `hand-empty` iff nothing
/// is held, `clear(b)` iff nothing sits on `b` and `b` is not held, and no
/// block supports two others.
pub fn validate_physical(state: &State, blocks: &[String]) -> Result<(), String> {
    let has = |f: &Fact| state.facts.contains(f);
    let mut held: Option<&str> = None;
    for b in blocks {
        let on_table = has(&Fact::new(PRED_ON_TABLE, &[b]));
        let holding = has(&Fact::new(PRED_HOLDING, &[b]));
        let on_something = state
            .facts
            .iter()
            .filter(|f| f.predicate == PRED_ON && f.args.first() == Some(b))
            .count();
        let positions = usize::from(on_table) + usize::from(holding) + on_something;
        if positions != 1 {
            return Err(format!("block {b} has {positions} position facts"));
        }
        if holding {
            if held.is_some() {
                return Err("two blocks held at once".to_string());
            }
            held = Some(b);
        }
    }
    if has(&Fact::prop(PRED_HAND_EMPTY)) != held.is_none() {
        return Err("hand-empty inconsistent with held block".to_string());
    }
    for b in blocks {
        let supports = state
            .facts
            .iter()
            .filter(|f| f.predicate == PRED_ON && f.args.get(1) == Some(b))
            .count();
        if supports > 1 {
            return Err(format!("block {b} supports {supports} blocks"));
        }
        let covered = supports > 0;
        let held_here = held == Some(b.as_str());
        let clear = has(&Fact::new(PRED_CLEAR, &[b]));
        if clear != (!covered && !held_here) {
            return Err(format!("clear({b}) inconsistent with position facts"));
        }
    }
    Ok(())
}
