//! System-level failure propagation.
//!
//! [`propagate`] computes, for every port of a flattened model, the set of
//! failure tokens that can reach it. Token sets live in a finite lattice
//! (at most the seven token kinds per port) and only ever grow, so the least
//! fixed point exists and is independent of evaluation order.
//!
//! Semantics per round:
//! 1. every port holds at least `noFailure`; injected tokens are added to
//!    system inputs or component output ports;
//! 2. tokens at an output port flow into every connected input port;
//! 3. a rule fires once for every assignment that picks one token per
//!    left-hand port and matches the pattern (wildcards match anything); the
//!    right-hand tokens are added to the named output ports;
//! 4. tokens no rule of the owning component can match are either absorbed
//!    (`Sink`, the default) or copied to all of the component's output ports
//!    (`Propagate`).

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::model::{Direction, PortRef, SystemModel};
use crate::rules::{BoundRuleSet, FailureType};

#[derive(Debug, Error)]
pub enum FlaError {
    #[error("unknown port `{0}`")]
    UnknownPort(PortRef),
    #[error("injection target `{0}` must be a system input or a component output port")]
    BadInjectionTarget(PortRef),
    #[error("model must be flattened before analysis (composite `{0}` present)")]
    NotFlat(String),
}

/// Tokens per port plus injected failures.
pub type TokenSet = BTreeMap<PortRef, BTreeSet<FailureType>>;

/// What to do with a token no rule of the owning component matches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum UnmatchedPolicy {
    /// The token stops at the component.
    #[default]
    Sink,
    /// The token is copied to every output port of the component.
    Propagate,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct FlaOptions {
    pub unmatched: UnmatchedPolicy,
}

/// One rule firing: the rule index in the bound set and the token chosen
/// for each left-hand term, in term order.
pub type Firing = (usize, Vec<FailureType>);

/// Result of a propagation run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlaResult {
    pub tokens: TokenSet,
    /// Every (rule, assignment) pair that matches at the fixed point.
    pub fired_rules: BTreeSet<Firing>,
    pub injected: TokenSet,
}

impl FlaResult {
    /// Failures that can reach `port` (tokens minus `noFailure`).
    pub fn reachable_failures(&self, port: &PortRef) -> Result<BTreeSet<FailureType>, FlaError> {
        let tokens = self
            .tokens
            .get(port)
            .ok_or_else(|| FlaError::UnknownPort(port.clone()))?;
        Ok(tokens
            .iter()
            .copied()
            .filter(|f| *f != FailureType::NoFailure)
            .collect())
    }
}

/// Checks injection targets before a run: each must exist and be a system
/// input or some component's output port.
pub fn check_injection_targets(
    model: &SystemModel,
    injected: &TokenSet,
) -> Result<(), FlaError> {
    for port in injected.keys() {
        let (_, p) = model
            .resolve(port)
            .map_err(|_| FlaError::UnknownPort(port.clone()))?;
        let ok = p.direction == Direction::Output || model.system_inputs.contains(port);
        if !ok {
            return Err(FlaError::BadInjectionTarget(port.clone()));
        }
    }
    Ok(())
}

/// Computes the least fixed point of failure propagation. Pure; callers may
/// run any number of propagations concurrently on shared inputs.
pub fn propagate(
    flat: &SystemModel,
    rules: &BoundRuleSet,
    injected: &TokenSet,
    opts: FlaOptions,
) -> FlaResult {
    let mut tokens: TokenSet = BTreeMap::new();
    for component in flat.simple_components() {
        for port in &component.ports {
            let mut set = BTreeSet::new();
            set.insert(FailureType::NoFailure);
            tokens.insert(PortRef::new(&component.name, &port.name), set);
        }
    }
    for (port, failures) in injected {
        if let Some(set) = tokens.get_mut(port) {
            set.extend(failures.iter().copied());
        }
    }

    // For the unmatched-token policy: which (component, input port, token)
    // combinations have a rule term able to match them. Pattern-level, so the
    // judgment is static and the transfer stays monotone.
    let handles = |component: &str, port: &PortRef, token: FailureType| -> bool {
        rules.for_component(component).any(|r| {
            r.lhs_ports
                .iter()
                .zip(&r.rule.lhs)
                .any(|(p, term)| p == port && term.failure.matches(token))
        })
    };

    let outputs_of: BTreeMap<&str, Vec<PortRef>> = flat
        .simple_components()
        .into_iter()
        .map(|c| {
            (
                c.name.as_str(),
                c.output_ports()
                    .map(|p| PortRef::new(&c.name, &p.name))
                    .collect(),
            )
        })
        .collect();

    loop {
        let mut changed = false;

        // Connection transfer.
        for conn in &flat.connections {
            let incoming: Vec<FailureType> = match tokens.get(&conn.from) {
                Some(set) => set.iter().copied().collect(),
                None => continue,
            };
            if let Some(target) = tokens.get_mut(&conn.to) {
                for f in incoming {
                    changed |= target.insert(f);
                }
            }
        }

        // Rule firing. The right-hand side is fixed per rule, so one
        // matching assignment is enough to add it.
        for bound in &rules.rules {
            if !has_matching_assignment(bound, &tokens) {
                continue;
            }
            for (port, term) in bound.rhs_ports.iter().zip(&bound.rule.rhs) {
                if let Some(set) = tokens.get_mut(port) {
                    changed |= set.insert(term.failure);
                }
            }
        }

        // Unmatched-token default.
        if opts.unmatched == UnmatchedPolicy::Propagate {
            for component in flat.simple_components() {
                let outs = &outputs_of[component.name.as_str()];
                for port in component.input_ports() {
                    let pref = PortRef::new(&component.name, &port.name);
                    let incoming: Vec<FailureType> = tokens[&pref]
                        .iter()
                        .copied()
                        .filter(|f| !handles(&component.name, &pref, *f))
                        .collect();
                    for out in outs {
                        if let Some(set) = tokens.get_mut(out) {
                            for f in &incoming {
                                changed |= set.insert(*f);
                            }
                        }
                    }
                }
            }
        }

        if !changed {
            break;
        }
    }

    // Record every assignment that matches the final token sets; together
    // with `injected` this justifies every non-noFailure token.
    let mut fired_rules = BTreeSet::new();
    for (idx, bound) in rules.rules.iter().enumerate() {
        for assignment in matching_assignments(bound, &tokens) {
            fired_rules.insert((idx, assignment));
        }
    }

    FlaResult {
        tokens,
        fired_rules,
        injected: injected.clone(),
    }
}

fn has_matching_assignment(bound: &crate::rules::BoundRule, tokens: &TokenSet) -> bool {
    bound
        .lhs_ports
        .iter()
        .zip(&bound.rule.lhs)
        .all(|(port, term)| {
            tokens
                .get(port)
                .is_some_and(|set| set.iter().any(|t| term.failure.matches(*t)))
        })
}

/// All ways to pick one token per left-hand port such that the pattern
/// matches. Assignments are in term order.
fn matching_assignments(
    bound: &crate::rules::BoundRule,
    tokens: &TokenSet,
) -> Vec<Vec<FailureType>> {
    let mut candidates: Vec<Vec<FailureType>> = Vec::with_capacity(bound.lhs_ports.len());
    for (port, term) in bound.lhs_ports.iter().zip(&bound.rule.lhs) {
        let Some(set) = tokens.get(port) else {
            return Vec::new();
        };
        let matched: Vec<FailureType> = set
            .iter()
            .copied()
            .filter(|t| term.failure.matches(*t))
            .collect();
        if matched.is_empty() {
            return Vec::new();
        }
        candidates.push(matched);
    }
    // Cartesian product over per-port candidates.
    let mut assignments: Vec<Vec<FailureType>> = vec![Vec::new()];
    for options in candidates {
        let mut next = Vec::with_capacity(assignments.len() * options.len());
        for partial in &assignments {
            for opt in &options {
                let mut extended = partial.clone();
                extended.push(*opt);
                next.push(extended);
            }
        }
        assignments = next;
    }
    assignments
}
