//! Parser and printer for the textual domain and scenario definition
//! language.
//!
//! The grammar is line-oriented: every statement fits on one line, lines
//! start with a keyword, indentation is ignored and `;` starts a comment.
//! Parsing is all-or-nothing per document; an accepted domain satisfies
//! every [`OperatorSchema`] invariant and an accepted scenario satisfies
//! every [`Scenario`] invariant.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use thiserror::Error;

use crate::blocksworld;
use crate::model::{
    Fact, FactPattern, ModelError, OperatorSchema, OutcomeSpec, Param, PatternArg, Scenario, State,
    TypedObject, ValueModel,
};

#[derive(Debug, Error)]
pub enum DslError {
    #[error("line {line}, col {col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("line {line}: {source}")]
    Domain {
        line: usize,
        #[source]
        source: ModelError,
    },
    #[error("line {line}: {source}")]
    Invariant {
        line: usize,
        #[source]
        source: ModelError,
    },
}

impl DslError {
    /// True for violations of scenario-level invariants (bounds, robustness
    /// range, depth limit, worth coverage), as opposed to input errors.
    pub fn is_invariant_violation(&self) -> bool {
        matches!(self, DslError::Invariant { .. })
    }

    fn syntax(line: usize, col: usize, msg: impl Into<String>) -> Self {
        DslError::Syntax {
            line,
            col,
            msg: msg.into(),
        }
    }
}

/// A parsed domain: its name, declared types, and validated operator
/// schemas in declaration order.
#[derive(Clone, Debug, PartialEq)]
pub struct Domain {
    pub name: String,
    pub types: Vec<String>,
    pub schemas: Vec<OperatorSchema>,
}

impl Domain {
    /// Predicate name/arity pairs mentioned anywhere in the operators.
    pub fn predicate_arities(&self) -> BTreeSet<(String, usize)> {
        let mut out = BTreeSet::new();
        for schema in &self.schemas {
            let patterns = schema
                .preconditions
                .iter()
                .chain(schema.outcomes.iter().flat_map(|o| &o.add_list))
                .chain(schema.outcomes.iter().flat_map(|o| &o.delete_list));
            for p in patterns {
                out.insert((p.predicate.clone(), p.args.len()));
            }
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Lexer

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Var(String),
    Num(f64),
    LParen,
    RParen,
    LBracket,
    RBracket,
    LBrace,
    RBrace,
    Comma,
    Colon,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Var(s) => format!("`?{s}`"),
            Tok::Num(n) => format!("number {n}"),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::LBracket => "`[`".into(),
            Tok::RBracket => "`]`".into(),
            Tok::LBrace => "`{`".into(),
            Tok::RBrace => "`}`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Colon => "`:`".into(),
        }
    }
}

struct Spanned {
    tok: Tok,
    col: usize,
}

fn lex_line(line: usize, raw: &str) -> Result<Vec<Spanned>, DslError> {
    let text = match raw.find(';') {
        Some(i) => &raw[..i],
        None => raw,
    };
    let bytes = text.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let col = i + 1;
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' | '\r' => i += 1,
            '(' => {
                toks.push(Spanned { tok: Tok::LParen, col });
                i += 1;
            }
            ')' => {
                toks.push(Spanned { tok: Tok::RParen, col });
                i += 1;
            }
            '[' => {
                toks.push(Spanned { tok: Tok::LBracket, col });
                i += 1;
            }
            ']' => {
                toks.push(Spanned { tok: Tok::RBracket, col });
                i += 1;
            }
            '{' => {
                toks.push(Spanned { tok: Tok::LBrace, col });
                i += 1;
            }
            '}' => {
                toks.push(Spanned { tok: Tok::RBrace, col });
                i += 1;
            }
            ',' => {
                toks.push(Spanned { tok: Tok::Comma, col });
                i += 1;
            }
            ':' => {
                toks.push(Spanned { tok: Tok::Colon, col });
                i += 1;
            }
            '?' => {
                let start = i + 1;
                let end = scan_ident(bytes, start);
                if end == start {
                    return Err(DslError::syntax(line, col, "expected variable name after `?`"));
                }
                toks.push(Spanned {
                    tok: Tok::Var(text[start..end].to_string()),
                    col,
                });
                i = end;
            }
            c if c.is_ascii_alphabetic() => {
                let end = scan_ident(bytes, i);
                toks.push(Spanned {
                    tok: Tok::Ident(text[i..end].to_string()),
                    col,
                });
                i = end;
            }
            c if c.is_ascii_digit() || c == '-' || c == '+' => {
                let mut end = i + 1;
                while end < bytes.len()
                    && ((bytes[end] as char).is_ascii_digit() || bytes[end] == b'.')
                {
                    end += 1;
                }
                let lit = &text[i..end];
                let value: f64 = lit.parse().map_err(|_| {
                    DslError::syntax(line, col, format!("malformed number `{lit}`"))
                })?;
                toks.push(Spanned {
                    tok: Tok::Num(value),
                    col,
                });
                i = end;
            }
            other => {
                return Err(DslError::syntax(
                    line,
                    col,
                    format!("unexpected character `{other}`"),
                ))
            }
        }
    }
    Ok(toks)
}

fn scan_ident(bytes: &[u8], start: usize) -> usize {
    if start >= bytes.len() || !(bytes[start] as char).is_ascii_alphabetic() {
        return start;
    }
    let mut end = start + 1;
    while end < bytes.len() {
        let c = bytes[end] as char;
        if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
            end += 1;
        } else {
            break;
        }
    }
    end
}

// ---------------------------------------------------------------------------
// Token cursor

struct Cursor {
    line: usize,
    toks: Vec<Spanned>,
    pos: usize,
    end_col: usize,
}

impl Cursor {
    fn new(line: usize, toks: Vec<Spanned>, raw_len: usize) -> Self {
        Cursor {
            line,
            toks,
            pos: 0,
            end_col: raw_len + 1,
        }
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|s| &s.tok)
    }

    fn next(&mut self, expected: &str) -> Result<(Tok, usize), DslError> {
        match self.toks.get(self.pos) {
            Some(s) => {
                self.pos += 1;
                Ok((s.tok.clone(), s.col))
            }
            None => Err(DslError::syntax(
                self.line,
                self.end_col,
                format!("expected {expected}, found end of line"),
            )),
        }
    }

    fn expect_ident(&mut self, what: &str) -> Result<(String, usize), DslError> {
        match self.next(what)? {
            (Tok::Ident(s), col) => Ok((s, col)),
            (tok, col) => Err(DslError::syntax(
                self.line,
                col,
                format!("expected {what}, found {}", tok.describe()),
            )),
        }
    }

    fn expect_num(&mut self, what: &str) -> Result<(f64, usize), DslError> {
        match self.next(what)? {
            (Tok::Num(n), col) => Ok((n, col)),
            (tok, col) => Err(DslError::syntax(
                self.line,
                col,
                format!("expected {what}, found {}", tok.describe()),
            )),
        }
    }

    fn expect_tok(&mut self, tok: Tok, what: &str) -> Result<usize, DslError> {
        match self.next(what)? {
            (t, col) if t == tok => Ok(col),
            (t, col) => Err(DslError::syntax(
                self.line,
                col,
                format!("expected {what}, found {}", t.describe()),
            )),
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<(), DslError> {
        let (ident, col) = self.expect_ident(&format!("`{kw}`"))?;
        if ident == kw {
            Ok(())
        } else {
            Err(DslError::syntax(
                self.line,
                col,
                format!("expected `{kw}`, found `{ident}`"),
            ))
        }
    }

    fn expect_end(&self) -> Result<(), DslError> {
        match self.toks.get(self.pos) {
            None => Ok(()),
            Some(s) => Err(DslError::syntax(
                self.line,
                s.col,
                format!("unexpected trailing {}", s.tok.describe()),
            )),
        }
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == Some(tok) {
            self.pos += 1;
            true
        } else {
            false
        }
    }
}

/// One fact pattern: `pred` or `pred(arg,...)` with `?var` or object args.
fn parse_pattern(cur: &mut Cursor, allow_vars: bool) -> Result<FactPattern, DslError> {
    let (predicate, _) = cur.expect_ident("predicate name")?;
    let mut args = Vec::new();
    if cur.eat(&Tok::LParen) {
        loop {
            match cur.next("fact argument")? {
                (Tok::Ident(obj), _) => args.push(PatternArg::Obj(obj)),
                (Tok::Var(v), col) => {
                    if !allow_vars {
                        return Err(DslError::syntax(
                            cur.line,
                            col,
                            "variables are not allowed in ground facts",
                        ));
                    }
                    args.push(PatternArg::Var(v));
                }
                (tok, col) => {
                    return Err(DslError::syntax(
                        cur.line,
                        col,
                        format!("expected fact argument, found {}", tok.describe()),
                    ))
                }
            }
            if cur.eat(&Tok::Comma) {
                continue;
            }
            cur.expect_tok(Tok::RParen, "`)`")?;
            break;
        }
    }
    Ok(FactPattern { predicate, args })
}

/// Comma-separated fact patterns until end of line (possibly empty).
fn parse_pattern_list(cur: &mut Cursor, allow_vars: bool) -> Result<Vec<FactPattern>, DslError> {
    let mut out = Vec::new();
    if cur.peek().is_none() {
        return Ok(out);
    }
    loop {
        out.push(parse_pattern(cur, allow_vars)?);
        if !cur.eat(&Tok::Comma) {
            break;
        }
    }
    cur.expect_end()?;
    Ok(out)
}

/// `[fact, fact, ...]`, possibly `[]`.
fn parse_bracketed_list(cur: &mut Cursor, allow_vars: bool) -> Result<Vec<FactPattern>, DslError> {
    cur.expect_tok(Tok::LBracket, "`[`")?;
    let mut out = Vec::new();
    if cur.eat(&Tok::RBracket) {
        cur.expect_end()?;
        return Ok(out);
    }
    loop {
        out.push(parse_pattern(cur, allow_vars)?);
        if cur.eat(&Tok::Comma) {
            continue;
        }
        cur.expect_tok(Tok::RBracket, "`]`")?;
        break;
    }
    cur.expect_end()?;
    Ok(out)
}

fn ground_fact(pattern: FactPattern) -> Fact {
    Fact {
        predicate: pattern.predicate,
        args: pattern
            .args
            .into_iter()
            .map(|a| match a {
                PatternArg::Obj(o) => o,
                PatternArg::Var(_) => unreachable!("vars rejected by parse_pattern"),
            })
            .collect(),
    }
}

// ---------------------------------------------------------------------------
// Domain parsing

struct OperatorBuilder {
    line: usize,
    schema: OperatorSchema,
    saw_outcome: bool,
}

/// Parses and validates a domain document.
pub fn parse_domain(text: &str) -> Result<Domain, DslError> {
    let mut name: Option<String> = None;
    let mut types: Vec<String> = Vec::new();
    let mut schemas: Vec<OperatorSchema> = Vec::new();
    let mut current: Option<OperatorBuilder> = None;

    let finalize = |builder: Option<OperatorBuilder>,
                    schemas: &mut Vec<OperatorSchema>|
     -> Result<(), DslError> {
        if let Some(b) = builder {
            b.schema.validate().map_err(|source| DslError::Domain {
                line: b.line,
                source,
            })?;
            schemas.push(b.schema);
        }
        Ok(())
    };

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let toks = lex_line(line, raw)?;
        if toks.is_empty() {
            continue;
        }
        let mut cur = Cursor::new(line, toks, raw.len());
        let (keyword, kw_col) = cur.expect_ident("statement keyword")?;
        match keyword.as_str() {
            "domain" => {
                if name.is_some() {
                    return Err(DslError::syntax(line, kw_col, "duplicate `domain` line"));
                }
                let (n, _) = cur.expect_ident("domain name")?;
                cur.expect_end()?;
                name = Some(n);
            }
            "types" => {
                loop {
                    let (ty, col) = cur.expect_ident("type name")?;
                    if types.contains(&ty) {
                        return Err(DslError::syntax(line, col, format!("duplicate type `{ty}`")));
                    }
                    types.push(ty);
                    if cur.peek().is_none() {
                        break;
                    }
                }
            }
            "operator" => {
                finalize(current.take(), &mut schemas)?;
                let (op_name, col) = cur.expect_ident("operator name")?;
                if schemas.iter().any(|s| s.name == op_name) {
                    return Err(DslError::syntax(
                        line,
                        col,
                        format!("duplicate operator `{op_name}`"),
                    ));
                }
                cur.expect_tok(Tok::LParen, "`(`")?;
                let mut params = Vec::new();
                if !cur.eat(&Tok::RParen) {
                    loop {
                        let (var, col) = match cur.next("parameter")? {
                            (Tok::Var(v), col) => (v, col),
                            (tok, col) => {
                                return Err(DslError::syntax(
                                    line,
                                    col,
                                    format!("expected `?param`, found {}", tok.describe()),
                                ))
                            }
                        };
                        cur.expect_tok(Tok::Colon, "`:`")?;
                        let (ty, ty_col) = cur.expect_ident("parameter type")?;
                        if !types.contains(&ty) {
                            return Err(DslError::syntax(
                                line,
                                ty_col,
                                format!("unknown type `{ty}`"),
                            ));
                        }
                        let _ = col;
                        params.push(Param { name: var, ty });
                        if cur.eat(&Tok::Comma) {
                            continue;
                        }
                        cur.expect_tok(Tok::RParen, "`)`")?;
                        break;
                    }
                }
                cur.expect_end()?;
                current = Some(OperatorBuilder {
                    line,
                    schema: OperatorSchema {
                        name: op_name,
                        params,
                        preconditions: Vec::new(),
                        outcomes: Vec::new(),
                    },
                    saw_outcome: false,
                });
            }
            "pre" => {
                let b = current.as_mut().ok_or_else(|| {
                    DslError::syntax(line, kw_col, "`pre:` outside an operator block")
                })?;
                if b.saw_outcome {
                    return Err(DslError::syntax(
                        line,
                        kw_col,
                        "`pre:` must precede the operator's outcomes",
                    ));
                }
                cur.expect_tok(Tok::Colon, "`:`")?;
                b.schema.preconditions = parse_pattern_list(&mut cur, true)?;
            }
            "outcome" => {
                let b = current.as_mut().ok_or_else(|| {
                    DslError::syntax(line, kw_col, "`outcome` outside an operator block")
                })?;
                let (label, _) = cur.expect_ident("outcome label")?;
                cur.expect_keyword("prob")?;
                let (probability, _) = cur.expect_num("probability")?;
                cur.expect_tok(Tok::Colon, "`:`")?;
                cur.expect_end()?;
                b.saw_outcome = true;
                b.schema.outcomes.push(OutcomeSpec {
                    label,
                    probability,
                    add_list: Vec::new(),
                    delete_list: Vec::new(),
                    value_delta: 0.0,
                });
            }
            "add" | "del" | "value" => {
                let what = keyword.clone();
                let outcome = current
                    .as_mut()
                    .and_then(|b| b.schema.outcomes.last_mut())
                    .ok_or_else(|| {
                        DslError::syntax(line, kw_col, format!("`{what}:` outside an outcome block"))
                    })?;
                cur.expect_tok(Tok::Colon, "`:`")?;
                match what.as_str() {
                    "add" => outcome.add_list = parse_bracketed_list(&mut cur, true)?,
                    "del" => outcome.delete_list = parse_bracketed_list(&mut cur, true)?,
                    _ => {
                        let (delta, _) = cur.expect_num("value delta")?;
                        cur.expect_end()?;
                        outcome.value_delta = delta;
                    }
                }
            }
            other => {
                return Err(DslError::syntax(
                    line,
                    kw_col,
                    format!("unexpected keyword `{other}` in domain document"),
                ))
            }
        }
    }
    finalize(current.take(), &mut schemas)?;

    let name = name.ok_or_else(|| DslError::syntax(1, 1, "missing `domain <name>` line"))?;
    Ok(Domain {
        name,
        types,
        schemas,
    })
}

// ---------------------------------------------------------------------------
// Scenario parsing

/// Parses and validates a scenario document against an already-parsed
/// domain.
pub fn parse_scenario(text: &str, domain: &Domain) -> Result<Scenario, DslError> {
    let mut problem: Option<String> = None;
    let mut domain_ref: Option<String> = None;
    let mut objects: Vec<TypedObject> = Vec::new();
    let mut init: Option<(usize, Vec<Fact>)> = None;
    let mut value_model: Option<ValueModel> = None;
    let mut v_min: Option<(f64, usize)> = None;
    let mut v_max: Option<(f64, usize)> = None;
    let mut depth_limit: Option<(u32, usize)> = None;
    let mut robustness: Option<(f64, usize)> = None;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let toks = lex_line(line, raw)?;
        if toks.is_empty() {
            continue;
        }
        let mut cur = Cursor::new(line, toks, raw.len());
        let (keyword, kw_col) = cur.expect_ident("statement keyword")?;
        match keyword.as_str() {
            "problem" => {
                if problem.is_some() {
                    return Err(DslError::syntax(line, kw_col, "duplicate `problem` line"));
                }
                let (n, _) = cur.expect_ident("problem name")?;
                cur.expect_end()?;
                problem = Some(n);
            }
            "domain" => {
                let (n, col) = cur.expect_ident("domain name")?;
                cur.expect_end()?;
                if n != domain.name {
                    return Err(DslError::syntax(
                        line,
                        col,
                        format!(
                            "scenario references domain `{n}` but `{}` was loaded",
                            domain.name
                        ),
                    ));
                }
                domain_ref = Some(n);
            }
            "objects" => {
                let mut names: Vec<(String, usize)> = Vec::new();
                loop {
                    let (n, col) = cur.expect_ident("object name")?;
                    names.push((n, col));
                    if cur.eat(&Tok::Colon) {
                        break;
                    }
                }
                let (ty, ty_col) = cur.expect_ident("object type")?;
                cur.expect_end()?;
                if !domain.types.contains(&ty) {
                    return Err(DslError::syntax(line, ty_col, format!("unknown type `{ty}`")));
                }
                for (n, col) in names {
                    if objects.iter().any(|o| o.name == n) {
                        return Err(DslError::syntax(
                            line,
                            col,
                            format!("duplicate object `{n}`"),
                        ));
                    }
                    objects.push(TypedObject::new(n, ty.clone()));
                }
            }
            "init" => {
                if init.is_some() {
                    return Err(DslError::syntax(line, kw_col, "duplicate `init:` line"));
                }
                cur.expect_tok(Tok::Colon, "`:`")?;
                let facts = parse_pattern_list(&mut cur, false)?
                    .into_iter()
                    .map(ground_fact)
                    .collect();
                init = Some((line, facts));
            }
            "value-model" => {
                if value_model.is_some() {
                    return Err(DslError::syntax(line, kw_col, "duplicate `value-model` line"));
                }
                let (variant, col) = cur.expect_ident("value model variant")?;
                match variant.as_str() {
                    "delta" => {
                        cur.expect_end()?;
                        value_model = Some(ValueModel::DeltaAccumulator);
                    }
                    "blocksworld" => {
                        cur.expect_keyword("worths")?;
                        cur.expect_tok(Tok::LBrace, "`{`")?;
                        let mut worths = BTreeMap::new();
                        if !cur.eat(&Tok::RBrace) {
                            loop {
                                let (obj, obj_col) = cur.expect_ident("block name")?;
                                cur.expect_tok(Tok::Colon, "`:`")?;
                                let (worth, _) = cur.expect_num("worth")?;
                                if worths.insert(obj.clone(), worth).is_some() {
                                    return Err(DslError::syntax(
                                        line,
                                        obj_col,
                                        format!("duplicate worth for `{obj}`"),
                                    ));
                                }
                                if cur.eat(&Tok::Comma) {
                                    continue;
                                }
                                cur.expect_tok(Tok::RBrace, "`}`")?;
                                break;
                            }
                        }
                        cur.expect_end()?;
                        value_model = Some(ValueModel::Blocksworld { worths });
                    }
                    other => {
                        return Err(DslError::syntax(
                            line,
                            col,
                            format!("unknown value model `{other}` (expected `delta` or `blocksworld`)"),
                        ))
                    }
                }
            }
            "vmin" => {
                let (v, _) = cur.expect_num("vmin value")?;
                v_min = Some((v, line));
                // the grammar also allows `vmin <r> vmax <r>` on one line
                if cur.peek().is_some() {
                    cur.expect_keyword("vmax")?;
                    let (v, _) = cur.expect_num("vmax value")?;
                    cur.expect_end()?;
                    v_max = Some((v, line));
                }
            }
            "vmax" => {
                let (v, _) = cur.expect_num("vmax value")?;
                cur.expect_end()?;
                v_max = Some((v, line));
            }
            "depth-limit" => {
                let (v, col) = cur.expect_num("depth limit")?;
                cur.expect_end()?;
                if v.fract() != 0.0 || !(0.0..=u32::MAX as f64).contains(&v) {
                    return Err(DslError::syntax(line, col, "depth limit must be an integer"));
                }
                depth_limit = Some((v as u32, line));
            }
            "robustness" => {
                let (v, _) = cur.expect_num("robustness")?;
                cur.expect_end()?;
                robustness = Some((v, line));
            }
            other => {
                return Err(DslError::syntax(
                    line,
                    kw_col,
                    format!("unexpected keyword `{other}` in scenario document"),
                ))
            }
        }
    }

    let problem = problem.ok_or_else(|| DslError::syntax(1, 1, "missing `problem <name>` line"))?;
    if domain_ref.is_none() {
        return Err(DslError::syntax(1, 1, "missing `domain <name>` line"));
    }
    let (init_line, init_facts) = init.ok_or_else(|| DslError::syntax(1, 1, "missing `init:` line"))?;
    let value_model =
        value_model.ok_or_else(|| DslError::syntax(1, 1, "missing `value-model` line"))?;
    let (depth_limit, depth_line) =
        depth_limit.ok_or_else(|| DslError::syntax(1, 1, "missing `depth-limit` line"))?;

    // Reference checks: init facts must use known predicates over declared
    // objects, worths must name declared objects.
    let known_preds = domain.predicate_arities();
    let object_names: BTreeSet<&str> = objects.iter().map(|o| o.name.as_str()).collect();
    for fact in &init_facts {
        if !known_preds.contains(&(fact.predicate.clone(), fact.args.len())) {
            return Err(DslError::syntax(
                init_line,
                1,
                format!(
                    "unknown predicate `{}/{}` in init",
                    fact.predicate,
                    fact.args.len()
                ),
            ));
        }
        for arg in &fact.args {
            if !object_names.contains(arg.as_str()) {
                return Err(DslError::syntax(
                    init_line,
                    1,
                    format!("undeclared object `{arg}` in init"),
                ));
            }
        }
    }

    // Defaults: vmin 0 always; vmax from the greedy single-tower bound for
    // the blocks world, mandatory otherwise.
    let (v_min, v_min_line) = v_min.unwrap_or((0.0, 1));
    let (v_max, v_max_line) = match v_max {
        Some((v, l)) => (v, l),
        None => match &value_model {
            ValueModel::Blocksworld { worths } => (blocksworld::greedy_tower_value(worths), 1),
            ValueModel::DeltaAccumulator => {
                return Err(DslError::syntax(
                    1,
                    1,
                    "`vmax` is required for delta value models",
                ))
            }
        },
    };
    let (robustness, robustness_line) = robustness.unwrap_or((0.0, 1));

    // order-insensitive object declarations
    objects.sort_by(|a, b| a.name.cmp(&b.name));

    let scenario = Scenario {
        name: problem,
        domain_name: domain.name.clone(),
        objects,
        initial: State::new(init_facts),
        value_model,
        v_min,
        v_max,
        depth_limit,
        robustness,
    };
    scenario.validate().map_err(|source| {
        let line = match &source {
            ModelError::RobustnessRange(_) => robustness_line,
            ModelError::ValueBounds { .. } => v_max_line.max(v_min_line),
            ModelError::DepthLimit => depth_line,
            _ => 1,
        };
        DslError::Invariant { line, source }
    })?;
    Ok(scenario)
}

// ---------------------------------------------------------------------------
// Printers

fn fmt_pattern_list(patterns: &[FactPattern]) -> String {
    patterns
        .iter()
        .map(|p| p.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

/// Renders a domain back into the surface grammar. `parse_domain` of the
/// output reproduces the input value.
pub fn print_domain(domain: &Domain) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "domain {}", domain.name);
    if !domain.types.is_empty() {
        let _ = writeln!(out, "  types {}", domain.types.join(" "));
    }
    for schema in &domain.schemas {
        let params: Vec<String> = schema
            .params
            .iter()
            .map(|p| format!("?{}: {}", p.name, p.ty))
            .collect();
        let _ = writeln!(out, "  operator {}({})", schema.name, params.join(", "));
        let _ = writeln!(out, "    pre: {}", fmt_pattern_list(&schema.preconditions));
        for outcome in &schema.outcomes {
            let _ = writeln!(
                out,
                "    outcome {} prob {}:",
                outcome.label, outcome.probability
            );
            let _ = writeln!(out, "      add: [{}]", fmt_pattern_list(&outcome.add_list));
            let _ = writeln!(out, "      del: [{}]", fmt_pattern_list(&outcome.delete_list));
            if outcome.value_delta != 0.0 {
                let _ = writeln!(out, "      value: {}", outcome.value_delta);
            }
        }
    }
    out
}

/// Renders a scenario back into the surface grammar. `parse_scenario` of
/// the output (against the same domain) reproduces the input value.
pub fn print_scenario(scenario: &Scenario) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "problem {}", scenario.name);
    let _ = writeln!(out, "  domain {}", scenario.domain_name);

    let mut seen_types: Vec<&str> = Vec::new();
    for obj in &scenario.objects {
        if !seen_types.contains(&obj.ty.as_str()) {
            seen_types.push(&obj.ty);
        }
    }
    for ty in seen_types {
        let names: Vec<&str> = scenario
            .objects
            .iter()
            .filter(|o| o.ty == ty)
            .map(|o| o.name.as_str())
            .collect();
        let _ = writeln!(out, "  objects {} : {ty}", names.join(" "));
    }

    let facts: Vec<String> = scenario.initial.facts.iter().map(|f| f.to_string()).collect();
    let _ = writeln!(out, "  init: {}", facts.join(", "));

    match &scenario.value_model {
        ValueModel::DeltaAccumulator => {
            let _ = writeln!(out, "  value-model delta");
        }
        ValueModel::Blocksworld { worths } => {
            let entries: Vec<String> = worths.iter().map(|(b, w)| format!("{b}:{w}")).collect();
            let _ = writeln!(out, "  value-model blocksworld worths {{ {} }}", entries.join(", "));
        }
    }
    let _ = writeln!(out, "  vmin {}", scenario.v_min);
    let _ = writeln!(out, "  vmax {}", scenario.v_max);
    let _ = writeln!(out, "  depth-limit {}", scenario.depth_limit);
    let _ = writeln!(out, "  robustness {}", scenario.robustness);
    out
}
