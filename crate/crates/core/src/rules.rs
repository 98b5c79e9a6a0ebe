//! The failure-rule DSL: parsing, binding, and classification.
//!
//! A rule file holds one rule per line in the surface syntax
//!
//! ```text
//! Irr_in1.omission, Irr_in2.omission -> Irr_out1.omission, Irr_out2.omission;
//! ```
//!
//! `#` starts a comment, the trailing `;` is optional, and failure keywords
//! are case-insensitive. A `component NAME` directive line attaches the rules
//! that follow to that component; without a directive the owner is inferred
//! at binding time from the port names, which must identify a unique simple
//! component.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Direction, PortRef, SystemModel};

/// Errors from parsing or binding rules.
#[derive(Debug, Error)]
pub enum RuleError {
    #[error("syntax error at line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: port `{port}` repeated on the {side} side of a rule")]
    DuplicatePort {
        line: usize,
        port: String,
        side: &'static str,
    },
    #[error("rule {rule}: unknown port `{port}` on component `{component}`")]
    UnknownPort {
        rule: String,
        component: String,
        port: String,
    },
    #[error("rule {rule}: port `{port}` has the wrong direction ({expected:?} expected)")]
    DirectionMismatch {
        rule: String,
        port: String,
        expected: Direction,
    },
    #[error("rule {rule}: component `{component}` is composite; rules attach to simple components only")]
    CompositeOwner { rule: String, component: String },
    #[error("rule {rule}: no simple component has all of its ports")]
    NoOwner { rule: String },
    #[error("rule {rule}: ports match more than one component ({candidates:?}); add a `component NAME` directive")]
    AmbiguousOwner { rule: String, candidates: Vec<String> },
    #[error("model is not valid: {0}")]
    InvalidModel(String),
}

/// The failure alphabet. The six concrete failures describe service, timing,
/// and value anomalies; `NoFailure` marks correct behavior and `Wildcard` is
/// a left-hand-side pattern that matches any token.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "camelCase")]
pub enum FailureType {
    Early,
    Late,
    ValueCoarse,
    ValueSubtle,
    Omission,
    Commission,
    NoFailure,
    Wildcard,
}

impl FailureType {
    /// The six concrete failures, in canonical order.
    pub const CONCRETE: [FailureType; 6] = [
        FailureType::Early,
        FailureType::Late,
        FailureType::ValueCoarse,
        FailureType::ValueSubtle,
        FailureType::Omission,
        FailureType::Commission,
    ];

    /// Everything a port's token set may contain (no wildcard).
    pub const TOKENS: [FailureType; 7] = [
        FailureType::Early,
        FailureType::Late,
        FailureType::ValueCoarse,
        FailureType::ValueSubtle,
        FailureType::Omission,
        FailureType::Commission,
        FailureType::NoFailure,
    ];

    pub fn is_concrete(self) -> bool {
        !matches!(self, FailureType::NoFailure | FailureType::Wildcard)
    }

    /// Pattern match for rule left-hand sides: a concrete failure or
    /// `noFailure` matches itself, the wildcard matches any token.
    pub fn matches(self, token: FailureType) -> bool {
        self == FailureType::Wildcard || self == token
    }

    pub fn keyword(self) -> &'static str {
        match self {
            FailureType::Early => "early",
            FailureType::Late => "late",
            FailureType::ValueCoarse => "valueCoarse",
            FailureType::ValueSubtle => "valueSubtle",
            FailureType::Omission => "omission",
            FailureType::Commission => "commission",
            FailureType::NoFailure => "noFailure",
            FailureType::Wildcard => "*",
        }
    }
}

impl fmt::Display for FailureType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

impl FromStr for FailureType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "*" {
            return Ok(FailureType::Wildcard);
        }
        for f in [
            FailureType::Early,
            FailureType::Late,
            FailureType::ValueCoarse,
            FailureType::ValueSubtle,
            FailureType::Omission,
            FailureType::Commission,
            FailureType::NoFailure,
        ] {
            if s.eq_ignore_ascii_case(f.keyword()) {
                return Ok(f);
            }
        }
        Err(format!("unknown failure type `{s}`"))
    }
}

/// One `port.failure` term.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RuleTerm {
    pub port: String,
    pub failure: FailureType,
}

impl RuleTerm {
    pub fn new(port: &str, failure: FailureType) -> Self {
        RuleTerm {
            port: port.to_string(),
            failure,
        }
    }
}

impl fmt::Display for RuleTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.port, self.failure)
    }
}

/// A parsed rule. `owner` is `None` until a `component` directive or binding
/// supplies it.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FptcRule {
    pub owner: Option<String>,
    pub lhs: Vec<RuleTerm>,
    pub rhs: Vec<RuleTerm>,
}

impl fmt::Display for FptcRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |terms: &[RuleTerm]| {
            terms
                .iter()
                .map(|t| t.to_string())
                .collect::<Vec<_>>()
                .join(", ")
        };
        write!(f, "{} -> {};", join(&self.lhs), join(&self.rhs))
    }
}

/// What a rule does to failures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RuleClass {
    Propagation,
    Transformation,
    Source,
    Sink,
}

/// Classifies a rule. Total: every rule falls in exactly one class, with
/// precedence source > sink > propagation > transformation. The all-noFailure
/// rule lands in `Sink` (it absorbs nothing and creates nothing; a lint flags
/// it as a no-op).
pub fn classify_rule(rule: &FptcRule) -> RuleClass {
    let lhs_all_pattern = rule
        .lhs
        .iter()
        .all(|t| matches!(t.failure, FailureType::NoFailure | FailureType::Wildcard));
    let rhs_all_nofailure = rule.rhs.iter().all(|t| t.failure == FailureType::NoFailure);

    if lhs_all_pattern && !rhs_all_nofailure {
        RuleClass::Source
    } else if rhs_all_nofailure {
        RuleClass::Sink
    } else if rule.lhs.len() == 1 && rule.rhs.iter().all(|t| t.failure == rule.lhs[0].failure) {
        RuleClass::Propagation
    } else {
        RuleClass::Transformation
    }
}

/// Parses a rule file. See the module docs for the grammar.
pub fn parse_rules(text: &str) -> Result<Vec<FptcRule>, RuleError> {
    let mut rules = Vec::new();
    let mut owner: Option<String> = None;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        let line = line.trim();
        if line.is_empty() {
            continue;
        }

        if let Some(rest) = line.strip_prefix("component ") {
            let name = rest.trim().trim_end_matches(':').trim();
            if name.is_empty() || !is_ident(name) {
                return Err(RuleError::Syntax {
                    line: line_no,
                    message: format!("invalid component name `{name}`"),
                });
            }
            owner = Some(name.to_string());
            continue;
        }

        let body = line.strip_suffix(';').unwrap_or(line);
        let (lhs_text, rhs_text) = body.split_once("->").ok_or_else(|| RuleError::Syntax {
            line: line_no,
            message: "expected `lhs -> rhs`".to_string(),
        })?;
        let lhs = parse_terms(lhs_text, line_no, "left")?;
        let rhs = parse_terms(rhs_text, line_no, "right")?;
        if lhs.is_empty() {
            return Err(RuleError::Syntax {
                line: line_no,
                message: "a rule needs at least one left-hand term".to_string(),
            });
        }
        if rhs.is_empty() {
            return Err(RuleError::Syntax {
                line: line_no,
                message: "a rule needs at least one right-hand term".to_string(),
            });
        }
        if let Some(t) = rhs.iter().find(|t| t.failure == FailureType::Wildcard) {
            return Err(RuleError::Syntax {
                line: line_no,
                message: format!("wildcard is not allowed on the right-hand side (`{t}`)"),
            });
        }
        rules.push(FptcRule {
            owner: owner.clone(),
            lhs,
            rhs,
        });
    }
    Ok(rules)
}

/// Canonical printer; `parse_rules(render_rules(r))` reproduces `r`.
pub fn render_rules(rules: &[FptcRule]) -> String {
    let mut out = String::new();
    let mut current_owner: Option<&str> = None;
    for rule in rules {
        if rule.owner.as_deref() != current_owner {
            if let Some(name) = rule.owner.as_deref() {
                out.push_str(&format!("component {name}\n"));
            }
            current_owner = rule.owner.as_deref();
        }
        out.push_str(&rule.to_string());
        out.push('\n');
    }
    out
}

fn is_ident(s: &str) -> bool {
    !s.is_empty()
        && s.chars().next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
        && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn parse_terms(
    text: &str,
    line: usize,
    side: &'static str,
) -> Result<Vec<RuleTerm>, RuleError> {
    let text = text.trim();
    if text.is_empty() {
        return Ok(Vec::new());
    }
    let mut terms = Vec::new();
    let mut seen = BTreeSet::new();
    for part in text.split(',') {
        let part = part.trim();
        let (port, failure) = part.rsplit_once('.').ok_or_else(|| RuleError::Syntax {
            line,
            message: format!("expected `port.failure`, got `{part}`"),
        })?;
        let port = port.trim();
        if !is_ident(port) {
            return Err(RuleError::Syntax {
                line,
                message: format!("invalid port name `{port}`"),
            });
        }
        let failure: FailureType =
            failure
                .trim()
                .parse()
                .map_err(|message| RuleError::Syntax { line, message })?;
        if !seen.insert(port.to_string()) {
            return Err(RuleError::DuplicatePort {
                line,
                port: port.to_string(),
                side,
            });
        }
        terms.push(RuleTerm::new(port, failure));
    }
    Ok(terms)
}

/// A rule whose terms are resolved against a model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundRule {
    pub owner: String,
    pub rule: FptcRule,
    pub class: RuleClass,
    pub lhs_ports: Vec<PortRef>,
    pub rhs_ports: Vec<PortRef>,
}

/// Immutable set of bound rules; shareable across threads.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct BoundRuleSet {
    pub rules: Vec<BoundRule>,
}

impl BoundRuleSet {
    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn for_component<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a BoundRule> {
        self.rules.iter().filter(move |r| r.owner == name)
    }

    /// No-op rules (every term noFailure) are legal but pointless; surface
    /// them so authors can delete them.
    pub fn lints(&self) -> Vec<String> {
        self.rules
            .iter()
            .filter(|r| {
                r.rule
                    .lhs
                    .iter()
                    .chain(&r.rule.rhs)
                    .all(|t| t.failure == FailureType::NoFailure)
            })
            .map(|r| format!("rule `{}` on `{}` is a no-op", r.rule, r.owner))
            .collect()
    }
}

/// Resolves every rule against the model: the owner must be (or be inferred
/// to be) a simple component, left-hand ports must be its inputs and
/// right-hand ports its outputs.
pub fn bind_rules(rules: &[FptcRule], model: &SystemModel) -> Result<BoundRuleSet, RuleError> {
    if let Some(d) = model.validate().into_iter().next() {
        return Err(RuleError::InvalidModel(d.to_string()));
    }

    let mut bound = Vec::new();
    for rule in rules {
        let owner = match &rule.owner {
            Some(name) => name.clone(),
            None => infer_owner(rule, model)?,
        };
        let component = model
            .component(&owner)
            .map_err(|_| RuleError::NoOwner { rule: rule.to_string() })?;
        if component.kind == crate::model::ComponentKind::Composite {
            return Err(RuleError::CompositeOwner {
                rule: rule.to_string(),
                component: owner,
            });
        }
        let mut lhs_ports = Vec::new();
        for term in &rule.lhs {
            lhs_ports.push(check_term(rule, component, term, Direction::Input)?);
        }
        let mut rhs_ports = Vec::new();
        for term in &rule.rhs {
            rhs_ports.push(check_term(rule, component, term, Direction::Output)?);
        }
        let mut rule = rule.clone();
        rule.owner = Some(owner.clone());
        let class = classify_rule(&rule);
        bound.push(BoundRule {
            owner,
            rule,
            class,
            lhs_ports,
            rhs_ports,
        });
    }
    Ok(BoundRuleSet { rules: bound })
}

fn check_term(
    rule: &FptcRule,
    component: &crate::model::Component,
    term: &RuleTerm,
    expected: Direction,
) -> Result<PortRef, RuleError> {
    let port = component
        .port(&term.port)
        .ok_or_else(|| RuleError::UnknownPort {
            rule: rule.to_string(),
            component: component.name.clone(),
            port: term.port.clone(),
        })?;
    if port.direction != expected {
        return Err(RuleError::DirectionMismatch {
            rule: rule.to_string(),
            port: term.port.clone(),
            expected,
        });
    }
    Ok(PortRef::new(&component.name, &term.port))
}

/// Finds the component a directive-less rule belongs to: the unique
/// component (simple or composite, so composite misuse is reportable) whose
/// port set covers every term with the right directions.
fn infer_owner(rule: &FptcRule, model: &SystemModel) -> Result<String, RuleError> {
    let mut candidates = Vec::new();
    for (component, _) in model.all_components() {
        let lhs_ok = rule.lhs.iter().all(|t| {
            component
                .port(&t.port)
                .is_some_and(|p| p.direction == Direction::Input)
        });
        let rhs_ok = rule.rhs.iter().all(|t| {
            component
                .port(&t.port)
                .is_some_and(|p| p.direction == Direction::Output)
        });
        if lhs_ok && rhs_ok {
            candidates.push(component.name.clone());
        }
    }
    match candidates.len() {
        0 => Err(RuleError::NoOwner { rule: rule.to_string() }),
        1 => Ok(candidates.pop().unwrap()),
        _ => Err(RuleError::AmbiguousOwner {
            rule: rule.to_string(),
            candidates,
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Component, ComponentKind, Port};

    fn rule(lhs: &[(&str, FailureType)], rhs: &[(&str, FailureType)]) -> FptcRule {
        FptcRule {
            owner: None,
            lhs: lhs.iter().map(|(p, f)| RuleTerm::new(p, *f)).collect(),
            rhs: rhs.iter().map(|(p, f)| RuleTerm::new(p, *f)).collect(),
        }
    }

    #[test]
    fn parses_two_by_two_omission_rule() {
        let parsed = parse_rules(
            "Irr_in1.omission, Irr_in2.omission -> Irr_out1.omission, Irr_out2.omission;",
        )
        .unwrap();
        assert_eq!(parsed.len(), 1);
        assert_eq!(parsed[0].lhs.len(), 2);
        assert_eq!(parsed[0].rhs.len(), 2);
        assert!(parsed[0]
            .lhs
            .iter()
            .chain(&parsed[0].rhs)
            .all(|t| t.failure == FailureType::Omission));
    }

    #[test]
    fn parses_single_propagation_rule() {
        let parsed = parse_rules("Bd_in.valueCoarse -> Bd_out.valueCoarse").unwrap();
        assert_eq!(parsed.len(), 1);
        assert_eq!(parsed[0].lhs, vec![RuleTerm::new("Bd_in", FailureType::ValueCoarse)]);
        assert_eq!(parsed[0].rhs, vec![RuleTerm::new("Bd_out", FailureType::ValueCoarse)]);
    }

    #[test]
    fn empty_rhs_is_a_syntax_error() {
        let err = parse_rules("p.early ->").unwrap_err();
        assert!(matches!(err, RuleError::Syntax { line: 1, .. }), "{err}");
    }

    #[test]
    fn keywords_are_case_insensitive_and_comments_ignored() {
        let parsed = parse_rules(
            "# comment line\nP_in.EARLY -> P_out.Late; # trailing comment\n",
        )
        .unwrap();
        assert_eq!(parsed.len(), 1);
        assert_eq!(parsed[0].lhs[0].failure, FailureType::Early);
        assert_eq!(parsed[0].rhs[0].failure, FailureType::Late);
    }

    #[test]
    fn duplicate_port_within_side_is_rejected() {
        let err = parse_rules("p.early, p.late -> q.late").unwrap_err();
        assert!(matches!(err, RuleError::DuplicatePort { side: "left", .. }));
    }

    #[test]
    fn wildcard_on_rhs_is_rejected() {
        let err = parse_rules("p.early -> q.*").unwrap_err();
        assert!(matches!(err, RuleError::Syntax { .. }));
    }

    #[test]
    fn component_directive_sets_owner() {
        let parsed = parse_rules("component Board\nBd_in.early -> Bd_out.early").unwrap();
        assert_eq!(parsed[0].owner.as_deref(), Some("Board"));
    }

    #[test]
    fn classify_matches_definition_cases() {
        use FailureType::*;
        // Propagation: same failure carried through.
        assert_eq!(
            classify_rule(&rule(&[("i", Early)], &[("o", Early)])),
            RuleClass::Propagation
        );
        // Multi-output propagation.
        assert_eq!(
            classify_rule(&rule(&[("i", Late)], &[("o1", Late), ("o2", Late)])),
            RuleClass::Propagation
        );
        // Transformation: nature changes.
        assert_eq!(
            classify_rule(&rule(&[("i", Early)], &[("o", Late)])),
            RuleClass::Transformation
        );
        // Merging equal types still transforms.
        assert_eq!(
            classify_rule(&rule(&[("i1", Late), ("i2", Late)], &[("o", Late)])),
            RuleClass::Transformation
        );
        // Source / sink.
        assert_eq!(
            classify_rule(&rule(&[("i", NoFailure)], &[("o", Late)])),
            RuleClass::Source
        );
        assert_eq!(
            classify_rule(&rule(&[("i", Late)], &[("o", NoFailure)])),
            RuleClass::Sink
        );
        // Degenerate all-noFailure rule is a sink by convention.
        assert_eq!(
            classify_rule(&rule(&[("i", NoFailure)], &[("o", NoFailure)])),
            RuleClass::Sink
        );
        // Wildcard-only LHS creating a failure acts as a source.
        assert_eq!(
            classify_rule(&rule(&[("i", Wildcard)], &[("o", Late)])),
            RuleClass::Source
        );
    }

    #[test]
    fn classification_is_total_over_small_rule_space() {
        // All 1-in/1-out and 2-in/1-out rules over the 8 LHS-legal symbols
        // and 7 RHS-legal symbols land in exactly one class.
        let lhs_syms: Vec<FailureType> = FailureType::TOKENS
            .into_iter()
            .chain([FailureType::Wildcard])
            .collect();
        let mut counts = [0usize; 4];
        let mut classify_and_count = |r: &FptcRule| {
            let class = classify_rule(r);
            counts[match class {
                RuleClass::Propagation => 0,
                RuleClass::Transformation => 1,
                RuleClass::Source => 2,
                RuleClass::Sink => 3,
            }] += 1;
        };
        for &a in &lhs_syms {
            for &out in &FailureType::TOKENS {
                classify_and_count(&rule(&[("i", a)], &[("o", out)]));
                for &b in &lhs_syms {
                    classify_and_count(&rule(&[("i1", a), ("i2", b)], &[("o", out)]));
                }
            }
        }
        let total: usize = counts.iter().sum();
        assert_eq!(total, 8 * 7 + 8 * 8 * 7);
        assert!(counts.iter().all(|&c| c > 0), "counts: {counts:?}");
    }

    fn board_model() -> SystemModel {
        SystemModel {
            name: "board".into(),
            components: vec![Component::simple(
                "Board",
                vec![Port::input("Bd_in"), Port::output("Bd_out")],
            )],
            system_inputs: vec![PortRef::new("Board", "Bd_in")],
            system_outputs: vec![PortRef::new("Board", "Bd_out")],
            ..Default::default()
        }
    }

    #[test]
    fn binds_by_owner_inference() {
        let rules = parse_rules("Bd_in.valueCoarse -> Bd_out.valueCoarse").unwrap();
        let bound = bind_rules(&rules, &board_model()).unwrap();
        assert_eq!(bound.rules[0].owner, "Board");
        assert_eq!(bound.rules[0].class, RuleClass::Propagation);
        assert_eq!(bound.rules[0].lhs_ports, vec![PortRef::new("Board", "Bd_in")]);
    }

    #[test]
    fn output_port_on_lhs_is_direction_mismatch() {
        let rules = parse_rules("component Board\nBd_out.early -> Bd_out.early").unwrap();
        let err = bind_rules(&rules, &board_model()).unwrap_err();
        assert!(matches!(err, RuleError::DirectionMismatch { .. }), "{err}");
    }

    #[test]
    fn rule_on_composite_is_rejected() {
        let composite = Component::composite(
            "Node",
            vec![Port::input("n_in"), Port::output("n_out")],
            vec![Component::simple(
                "Inner",
                vec![Port::input("i_in"), Port::output("i_out")],
            )],
        );
        let model = SystemModel {
            name: "m".into(),
            components: vec![composite],
            connections: vec![
                crate::model::Connection::new(PortRef::new("Node", "n_in"), PortRef::new("Inner", "i_in")),
                crate::model::Connection::new(PortRef::new("Inner", "i_out"), PortRef::new("Node", "n_out")),
            ],
            ..Default::default()
        };
        assert_eq!(model.components[0].kind, ComponentKind::Composite);
        let rules = parse_rules("component Node\nn_in.early -> n_out.early").unwrap();
        let err = bind_rules(&rules, &model).unwrap_err();
        assert!(matches!(err, RuleError::CompositeOwner { .. }), "{err}");
    }

    #[test]
    fn render_parse_round_trip() {
        let text = "component Board\nBd_in.valueCoarse -> Bd_out.valueCoarse;\nBd_in.early, Bd_in2.late -> Bd_out.late;\n";
        let board = Component {
            ports: vec![
                Port::input("Bd_in"),
                Port::input("Bd_in2"),
                Port::output("Bd_out"),
            ],
            ..Component::simple("Board", vec![])
        };
        let model = SystemModel {
            name: "m".into(),
            components: vec![board],
            ..Default::default()
        };
        let rules = parse_rules(text).unwrap();
        let bound = bind_rules(&rules, &model).unwrap();
        let rendered = render_rules(
            &bound.rules.iter().map(|r| r.rule.clone()).collect::<Vec<_>>(),
        );
        let reparsed = parse_rules(&rendered).unwrap();
        assert_eq!(
            reparsed,
            bound.rules.iter().map(|r| r.rule.clone()).collect::<Vec<_>>()
        );
    }
}
