//! Ground representation of states, facts, probabilistic operators, and
//! action application.
//!
//! A [`State`] is a set of ground [`Fact`]s plus an accumulated value
//! register. An [`OperatorSchema`] is a STRIPS-style action template whose
//! application is a lottery over `k` outcomes, each with its own add/delete
//! lists and a value delta. Grounding a schema against a typed object set
//! yields [`GroundAction`]s that the planner searches over.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance for the per-operator outcome probability mass check.
pub const PROB_MASS_TOL: f64 = 1e-9;

/// Predicate names used by the built-in blocks-world value model.
pub const PRED_ON: &str = "on";
pub const PRED_ON_TABLE: &str = "on-table";
pub const PRED_HOLDING: &str = "holding";
pub const PRED_CLEAR: &str = "clear";
pub const PRED_HAND_EMPTY: &str = "hand-empty";

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("action {action}: outcome index {index} out of range (arity {arity})")]
    OutcomeIndexOutOfRange {
        action: String,
        index: usize,
        arity: usize,
    },
    #[error("operator {operator}: outcome probabilities sum to {sum}, expected 1")]
    ProbabilityMass { operator: String, sum: f64 },
    #[error("operator {operator}: outcome {label} has probability {probability} outside (0,1]")]
    ProbabilityRange {
        operator: String,
        label: String,
        probability: f64,
    },
    #[error("operator {operator}: variable ?{variable} does not appear in the parameter list")]
    UnboundVariable { operator: String, variable: String },
    #[error("operator {operator}: duplicate parameter ?{param}")]
    DuplicateParam { operator: String, param: String },
    #[error("operator {operator}: duplicate outcome label {label}")]
    DuplicateOutcomeLabel { operator: String, label: String },
    #[error("operator {operator} has no outcomes")]
    NoOutcomes { operator: String },
    #[error("malformed state: block {block} has no position fact")]
    MissingPosition { block: String },
    #[error("malformed state: support chain under block {block} is cyclic")]
    CyclicSupport { block: String },
    #[error("scenario: v_min {v_min} must be strictly less than v_max {v_max}")]
    ValueBounds { v_min: f64, v_max: f64 },
    #[error("scenario: robustness {0} outside [0,1)")]
    RobustnessRange(f64),
    #[error("scenario: depth limit must be at least 1")]
    DepthLimit,
    #[error("scenario: duplicate object {0}")]
    DuplicateObject(String),
    #[error("scenario: blocksworld value model has no worth for object {0}")]
    MissingWorth(String),
    #[error("scenario: worth declared for undeclared object {0}")]
    UnknownWorthObject(String),
    #[error("cannot parse fact from {0:?}")]
    BadFactText(String),
}

/// A ground fact: a predicate applied to zero or more objects.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Fact {
    pub predicate: String,
    pub args: Vec<String>,
}

impl Fact {
    pub fn new<P, I, A>(predicate: P, args: I) -> Self
    where
        P: Into<String>,
        I: IntoIterator<Item = A>,
        A: AsRef<str>,
    {
        Fact {
            predicate: predicate.into(),
            args: args.into_iter().map(|a| a.as_ref().to_string()).collect(),
        }
    }

    /// Propositional fact with no arguments, e.g. `hand-empty`.
    pub fn prop<P: Into<String>>(predicate: P) -> Self {
        Fact {
            predicate: predicate.into(),
            args: Vec::new(),
        }
    }
}

impl fmt::Display for Fact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.args.is_empty() {
            write!(f, "{}", self.predicate)
        } else {
            write!(f, "{}({})", self.predicate, self.args.join(","))
        }
    }
}

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

impl FromStr for Fact {
    type Err = ModelError;

    /// Parses the canonical textual form `pred` or `pred(a,b)`.
    fn from_str(s: &str) -> Result<Self, ModelError> {
        let bad = || ModelError::BadFactText(s.to_string());
        let s = s.trim();
        if let Some(open) = s.find('(') {
            if !s.ends_with(')') {
                return Err(bad());
            }
            let predicate = &s[..open];
            let inner = &s[open + 1..s.len() - 1];
            if !is_ident(predicate) || inner.is_empty() {
                return Err(bad());
            }
            let args: Vec<String> = inner.split(',').map(|a| a.trim().to_string()).collect();
            if !args.iter().all(|a| is_ident(a)) {
                return Err(bad());
            }
            Ok(Fact {
                predicate: predicate.to_string(),
                args,
            })
        } else if is_ident(s) {
            Ok(Fact::prop(s))
        } else {
            Err(bad())
        }
    }
}

/// A world state: a set of facts plus the accumulated value register.
///
/// The register is only meaningful under [`ValueModel::DeltaAccumulator`];
/// the blocks-world value model ignores it.
#[derive(Clone, Debug, PartialEq)]
pub struct State {
    pub facts: BTreeSet<Fact>,
    pub acc_value: f64,
}

impl State {
    pub fn new<I: IntoIterator<Item = Fact>>(facts: I) -> Self {
        State {
            facts: facts.into_iter().collect(),
            acc_value: 0.0,
        }
    }

    pub fn with_value(mut self, acc_value: f64) -> Self {
        self.acc_value = acc_value;
        self
    }

    pub fn contains(&self, fact: &Fact) -> bool {
        self.facts.contains(fact)
    }
}

/// An argument position in an operator's fact pattern: either a variable
/// bound by the parameter list or a literal object name.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PatternArg {
    Var(String),
    Obj(String),
}

/// A fact with possibly-unbound arguments, as written in an operator body.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FactPattern {
    pub predicate: String,
    pub args: Vec<PatternArg>,
}

impl FactPattern {
    fn ground(&self, binding: &BTreeMap<&str, &str>) -> Fact {
        let args = self
            .args
            .iter()
            .map(|a| match a {
                PatternArg::Var(v) => binding[v.as_str()].to_string(),
                PatternArg::Obj(o) => o.clone(),
            })
            .collect();
        Fact {
            predicate: self.predicate.clone(),
            args,
        }
    }

    fn variables(&self) -> impl Iterator<Item = &str> {
        self.args.iter().filter_map(|a| match a {
            PatternArg::Var(v) => Some(v.as_str()),
            PatternArg::Obj(_) => None,
        })
    }
}

impl fmt::Display for FactPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.args.is_empty() {
            return write!(f, "{}", self.predicate);
        }
        let args: Vec<String> = self
            .args
            .iter()
            .map(|a| match a {
                PatternArg::Var(v) => format!("?{v}"),
                PatternArg::Obj(o) => o.clone(),
            })
            .collect();
        write!(f, "{}({})", self.predicate, args.join(","))
    }
}

/// One probabilistic outcome of an operator.
#[derive(Clone, Debug, PartialEq)]
pub struct OutcomeSpec {
    pub label: String,
    pub probability: f64,
    pub add_list: Vec<FactPattern>,
    pub delete_list: Vec<FactPattern>,
    pub value_delta: f64,
}

/// A typed operator parameter, e.g. `?b: block`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Param {
    pub name: String,
    pub ty: String,
}

/// A STRIPS-style operator template extended with `k` probabilistic
/// outcomes.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorSchema {
    pub name: String,
    pub params: Vec<Param>,
    pub preconditions: Vec<FactPattern>,
    pub outcomes: Vec<OutcomeSpec>,
}

impl OperatorSchema {
    /// Checks the schema invariants: at least one outcome, probabilities in
    /// (0,1] summing to 1 within [`PROB_MASS_TOL`], unique parameters and
    /// outcome labels, and every variable bound by the parameter list.
    pub fn validate(&self) -> Result<(), ModelError> {
        let op = || self.name.clone();
        if self.outcomes.is_empty() {
            return Err(ModelError::NoOutcomes { operator: op() });
        }
        let mut seen_params = BTreeSet::new();
        for p in &self.params {
            if !seen_params.insert(p.name.as_str()) {
                return Err(ModelError::DuplicateParam {
                    operator: op(),
                    param: p.name.clone(),
                });
            }
        }
        let mut mass = 0.0;
        let mut seen_labels = BTreeSet::new();
        for out in &self.outcomes {
            if !(out.probability > 0.0 && out.probability <= 1.0) {
                return Err(ModelError::ProbabilityRange {
                    operator: op(),
                    label: out.label.clone(),
                    probability: out.probability,
                });
            }
            if !seen_labels.insert(out.label.as_str()) {
                return Err(ModelError::DuplicateOutcomeLabel {
                    operator: op(),
                    label: out.label.clone(),
                });
            }
            mass += out.probability;
        }
        if (mass - 1.0).abs() > PROB_MASS_TOL {
            return Err(ModelError::ProbabilityMass {
                operator: op(),
                sum: mass,
            });
        }
        let patterns = self
            .preconditions
            .iter()
            .chain(self.outcomes.iter().flat_map(|o| &o.add_list))
            .chain(self.outcomes.iter().flat_map(|o| &o.delete_list));
        for pat in patterns {
            for var in pat.variables() {
                if !seen_params.contains(var) {
                    return Err(ModelError::UnboundVariable {
                        operator: op(),
                        variable: var.to_string(),
                    });
                }
            }
        }
        Ok(())
    }
}

/// A fully instantiated outcome of a ground action.
#[derive(Clone, Debug, PartialEq)]
pub struct GroundOutcome {
    pub label: String,
    pub probability: f64,
    pub add: Vec<Fact>,
    pub del: Vec<Fact>,
    pub value_delta: f64,
}

/// An operator schema applied to concrete objects.
///
/// Identity is the canonical text `name(obj,...)`, unique within any one
/// state's action set because bindings never repeat an object.
#[derive(Clone, Debug, PartialEq)]
pub struct GroundAction {
    pub name: String,
    pub args: Vec<String>,
    pub preconditions: Vec<Fact>,
    pub outcomes: Vec<GroundOutcome>,
}

impl GroundAction {
    /// Canonical textual form, e.g. `stack(b1,b3)`.
    pub fn text(&self) -> String {
        if self.args.is_empty() {
            self.name.clone()
        } else {
            format!("{}({})", self.name, self.args.join(","))
        }
    }
}

impl fmt::Display for GroundAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.text())
    }
}

/// An object declared by a scenario, tagged with its type.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypedObject {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: String,
}

impl TypedObject {
    pub fn new<N: Into<String>, T: Into<String>>(name: N, ty: T) -> Self {
        TypedObject {
            name: name.into(),
            ty: ty.into(),
        }
    }
}

/// How a state's value `v(s)` is computed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "kebab-case")]
pub enum ValueModel {
    /// `v(s)` is the accumulated sum of outcome value deltas.
    DeltaAccumulator,
    /// `v(s)` is the worth-weighted sum of block heights.
    Blocksworld { worths: BTreeMap<String, f64> },
}

/// A full planning problem: objects, initial state, value model,
/// normalization bounds, depth limit, and robustness factor.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub name: String,
    /// Name of the domain this problem is written against.
    pub domain_name: String,
    pub objects: Vec<TypedObject>,
    pub initial: State,
    pub value_model: ValueModel,
    pub v_min: f64,
    pub v_max: f64,
    pub depth_limit: u32,
    pub robustness: f64,
}

impl Scenario {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.v_min < self.v_max) {
            return Err(ModelError::ValueBounds {
                v_min: self.v_min,
                v_max: self.v_max,
            });
        }
        if !(0.0..1.0).contains(&self.robustness) {
            return Err(ModelError::RobustnessRange(self.robustness));
        }
        if self.depth_limit < 1 {
            return Err(ModelError::DepthLimit);
        }
        let mut names = BTreeSet::new();
        for obj in &self.objects {
            if !names.insert(obj.name.as_str()) {
                return Err(ModelError::DuplicateObject(obj.name.clone()));
            }
        }
        if let ValueModel::Blocksworld { worths } = &self.value_model {
            for obj in &self.objects {
                if !worths.contains_key(&obj.name) {
                    return Err(ModelError::MissingWorth(obj.name.clone()));
                }
            }
            for key in worths.keys() {
                if !names.contains(key.as_str()) {
                    return Err(ModelError::UnknownWorthObject(key.clone()));
                }
            }
        }
        Ok(())
    }
}

/// Applies outcome `i` of `a` to `s`, producing the successor state.
///
/// The delete list is removed first, then the add list is inserted (so an
/// overlapping fact survives), and the value register grows by the
/// outcome's value delta. `s` itself is untouched.
pub fn apply_outcome(s: &State, a: &GroundAction, i: usize) -> Result<State, ModelError> {
    let outcome = a
        .outcomes
        .get(i)
        .ok_or_else(|| ModelError::OutcomeIndexOutOfRange {
            action: a.text(),
            index: i,
            arity: a.outcomes.len(),
        })?;
    let mut facts = s.facts.clone();
    for f in &outcome.del {
        facts.remove(f);
    }
    for f in &outcome.add {
        facts.insert(f.clone());
    }
    Ok(State {
        facts,
        acc_value: s.acc_value + outcome.value_delta,
    })
}

/// True iff every ground precondition of `a` holds in `s`.
pub fn applicable(s: &State, a: &GroundAction) -> bool {
    a.preconditions.iter().all(|f| s.facts.contains(f))
}

/// Every type-correct ground instance of `schemas` over `objects`,
/// applicability ignored.
///
/// Ordering is schema declaration order, then lexicographic order of the
/// bound object tuple. A binding never assigns the same object to two
/// parameters.
pub fn ground_all_actions(schemas: &[OperatorSchema], objects: &[TypedObject]) -> Vec<GroundAction> {
    let mut by_type: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for obj in objects {
        by_type.entry(obj.ty.as_str()).or_default().push(obj.name.as_str());
    }
    for names in by_type.values_mut() {
        names.sort_unstable();
    }

    let mut actions = Vec::new();
    for schema in schemas {
        let mut chosen: Vec<&str> = Vec::with_capacity(schema.params.len());
        bind_params(schema, &by_type, &mut chosen, &mut actions);
    }
    actions
}

fn bind_params<'a>(
    schema: &OperatorSchema,
    by_type: &BTreeMap<&str, Vec<&'a str>>,
    chosen: &mut Vec<&'a str>,
    out: &mut Vec<GroundAction>,
) {
    if chosen.len() == schema.params.len() {
        let binding: BTreeMap<&str, &str> = schema
            .params
            .iter()
            .zip(chosen.iter())
            .map(|(p, obj)| (p.name.as_str(), *obj))
            .collect();
        out.push(ground_one(schema, &binding, chosen));
        return;
    }
    let ty = schema.params[chosen.len()].ty.as_str();
    let Some(candidates) = by_type.get(ty) else {
        return;
    };
    for obj in candidates {
        if chosen.contains(obj) {
            continue;
        }
        chosen.push(obj);
        bind_params(schema, by_type, chosen, out);
        chosen.pop();
    }
}

fn ground_one(schema: &OperatorSchema, binding: &BTreeMap<&str, &str>, args: &[&str]) -> GroundAction {
    GroundAction {
        name: schema.name.clone(),
        args: args.iter().map(|a| a.to_string()).collect(),
        preconditions: schema.preconditions.iter().map(|p| p.ground(binding)).collect(),
        outcomes: schema
            .outcomes
            .iter()
            .map(|o| GroundOutcome {
                label: o.label.clone(),
                probability: o.probability,
                add: o.add_list.iter().map(|p| p.ground(binding)).collect(),
                del: o.delete_list.iter().map(|p| p.ground(binding)).collect(),
                value_delta: o.value_delta,
            })
            .collect(),
    }
}

/// All applicable ground instances of `schemas` in `s`, in the
/// deterministic ordering of [`ground_all_actions`].
pub fn ground_actions(
    schemas: &[OperatorSchema],
    objects: &[TypedObject],
    s: &State,
) -> Vec<GroundAction> {
    ground_all_actions(schemas, objects)
        .into_iter()
        .filter(|a| applicable(s, a))
        .collect()
}

/// The domain value `v(s)` of a state under a value model.
///
/// Delta accumulator: the value register. Blocks world: `sum of
/// worth(b) * height(b)` with height 1 for a table block, parent height
/// plus one for a stacked block, and 0 for a held block.
pub fn state_value(s: &State, m: &ValueModel) -> Result<f64, ModelError> {
    match m {
        ValueModel::DeltaAccumulator => Ok(s.acc_value),
        ValueModel::Blocksworld { worths } => {
            let mut total = 0.0;
            for (block, worth) in worths {
                total += worth * block_height(s, block, worths.len())?;
            }
            Ok(total)
        }
    }
}

fn block_height(s: &State, block: &str, max_hops: usize) -> Result<f64, ModelError> {
    let mut current = block;
    let mut height = 0usize;
    for _ in 0..=max_hops {
        if s.facts.contains(&Fact::new(PRED_HOLDING, &[current])) {
            // A held block (and anything the chase started from) is off
            // the table entirely.
            return if height == 0 {
                Ok(0.0)
            } else {
                Err(ModelError::MissingPosition {
                    block: current.to_string(),
                })
            };
        }
        if s.facts.contains(&Fact::new(PRED_ON_TABLE, &[current])) {
            return Ok((height + 1) as f64);
        }
        match s
            .facts
            .iter()
            .find(|f| f.predicate == PRED_ON && f.args.first().map(String::as_str) == Some(current))
        {
            Some(on) => {
                current = &on.args[1];
                height += 1;
            }
            None => {
                return Err(ModelError::MissingPosition {
                    block: current.to_string(),
                })
            }
        }
    }
    Err(ModelError::CyclicSupport {
        block: block.to_string(),
    })
}
