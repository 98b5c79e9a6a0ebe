//! Fault-tree generation and analysis.
//!
//! One tree is generated per failure that reaches a target output port.
//! Construction recurses backwards through the causes of each (port, failure)
//! event: a transformation firing becomes an AND gate over its left-hand
//! events, a propagation step (rule or connection transfer) becomes an OR
//! gate, and alternative causes of the same event join under one OR gate.
//! Recursion stops at basic events (source-rule productions), external events
//! (injected failures), and undeveloped events (causal cycles or missing
//! sources).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fla::FlaResult;
use crate::model::{PortRef, SystemModel};
use crate::rules::{BoundRuleSet, FailureType};

#[derive(Debug, Error)]
pub enum FtError {
    #[error("target port `{0}` is not a system output")]
    TargetNotSystemOutput(PortRef),
    #[error("failure `{failure}` does not reach port `{port}`")]
    FailureNotReachable { port: PortRef, failure: FailureType },
    #[error("unknown port `{0}`")]
    UnknownPort(PortRef),
    #[error("no probability given for leaf `{0}`")]
    MissingProbability(String),
    #[error("probability {value} for `{label}` is outside [0, 1]")]
    BadProbability { label: String, value: f64 },
    #[error("exact quantification over {0} minimal cut sets is not tractable (limit 20)")]
    TooManyCutSets(usize),
    #[error("invalid fault tree: {0}")]
    InvalidTree(String),
    #[error("fault tree parse error: {0}")]
    Parse(#[from] serde_json::Error),
}

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub struct EventId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Basic,
    Intermediate,
    External,
    Undeveloped,
    Top,
}

/// What an event talks about: a failure at a component port.
#[derive(
    Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub struct EventLabel {
    pub port: PortRef,
    pub failure: FailureType,
}

impl EventLabel {
    pub fn new(port: PortRef, failure: FailureType) -> Self {
        EventLabel { port, failure }
    }
}

impl fmt::Display for EventLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.port, self.failure)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FtEvent {
    pub id: EventId,
    pub kind: EventKind,
    pub label: EventLabel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probability: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum GateKind {
    And,
    Or,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FtGate {
    pub kind: GateKind,
    pub output: EventId,
    pub inputs: Vec<EventId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaultTree {
    /// The (system output port, failure) the top event stands for.
    pub target: EventLabel,
    pub root: EventId,
    pub events: Vec<FtEvent>,
    pub gates: Vec<FtGate>,
    /// Diagnostics attached during generation, e.g. cycles cut as
    /// undeveloped events.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

// ---------------------------------------------------------------------------
// Generation
// ---------------------------------------------------------------------------

/// How an event can come about, derived from the analysis result.
enum Cause {
    Injected,
    Transfer(PortRef),
    /// A rule firing; children are the non-noFailure (port, token) pairs of
    /// the matched assignment. Empty children mean the firing acted as a
    /// failure source.
    Firing { children: Vec<EventLabel> },
}

/// An alternative contribution to an event's gate.
enum Alt {
    Leaf(EventKind),
    Child(EventId),
    AndOver(Vec<EventId>),
}

struct TreeBuilder<'a> {
    flat: &'a SystemModel,
    rules: &'a BoundRuleSet,
    fla: &'a FlaResult,
    events: Vec<FtEvent>,
    gates: Vec<FtGate>,
    notes: Vec<String>,
    /// (port, failure) pairs on the current expansion path, for cycle cuts.
    path: Vec<EventLabel>,
}

impl<'a> TreeBuilder<'a> {
    fn add_event(&mut self, kind: EventKind, label: EventLabel) -> EventId {
        let id = EventId(self.events.len() as u32);
        self.events.push(FtEvent {
            id,
            kind,
            label,
            probability: None,
        });
        id
    }

    fn add_gate(&mut self, kind: GateKind, output: EventId, inputs: Vec<EventId>) {
        self.gates.push(FtGate {
            kind,
            output,
            inputs,
        });
    }

    fn causes_of(&self, label: &EventLabel) -> Vec<Cause> {
        let mut causes = Vec::new();
        if self
            .fla
            .injected
            .get(&label.port)
            .is_some_and(|s| s.contains(&label.failure))
        {
            causes.push(Cause::Injected);
        }
        for conn in &self.flat.connections {
            if conn.to == label.port
                && self
                    .fla
                    .tokens
                    .get(&conn.from)
                    .is_some_and(|s| s.contains(&label.failure))
            {
                causes.push(Cause::Transfer(conn.from.clone()));
            }
        }
        for (idx, assignment) in &self.fla.fired_rules {
            let rule = &self.rules.rules[*idx];
            let produces = rule
                .rhs_ports
                .iter()
                .zip(&rule.rule.rhs)
                .any(|(p, term)| *p == label.port && term.failure == label.failure);
            if !produces {
                continue;
            }
            let children: Vec<EventLabel> = rule
                .lhs_ports
                .iter()
                .zip(assignment)
                .filter(|(_, token)| **token != FailureType::NoFailure)
                .map(|(port, token)| EventLabel::new(port.clone(), *token))
                .collect();
            causes.push(Cause::Firing { children });
        }
        causes
    }

    /// Expands one event. `root` disables leaf-collapsing so the top event
    /// always stays a gated `Top` node.
    fn expand(&mut self, label: EventLabel, root: bool) -> EventId {
        if self.path.contains(&label) {
            self.notes
                .push(format!("cycle at {label}; cut as an undeveloped event"));
            return self.add_event(EventKind::Undeveloped, label);
        }

        let causes = self.causes_of(&label);
        if causes.is_empty() && !root {
            // Unjustified token; should not happen for propagate() results.
            self.notes
                .push(format!("no producing cause found for {label}; left undeveloped"));
            return self.add_event(EventKind::Undeveloped, label);
        }

        self.path.push(label.clone());
        let mut alts = Vec::new();
        for cause in &causes {
            let alt = match cause {
                Cause::Injected => Alt::Leaf(EventKind::External),
                Cause::Transfer(from) => {
                    let child = self.expand(EventLabel::new(from.clone(), label.failure), false);
                    Alt::Child(child)
                }
                Cause::Firing { children } if children.is_empty() => Alt::Leaf(EventKind::Basic),
                Cause::Firing { children } => {
                    let ids: Vec<EventId> = children
                        .iter()
                        .map(|c| self.expand(c.clone(), false))
                        .collect();
                    // One child carrying the same failure is a propagation;
                    // anything else transforms and gets an AND gate.
                    if children.len() == 1 && children[0].failure == label.failure {
                        Alt::Child(ids[0])
                    } else {
                        Alt::AndOver(ids)
                    }
                }
            };
            alts.push(alt);
        }
        self.path.pop();

        let kind = if root { EventKind::Top } else { EventKind::Intermediate };

        // A single cause collapses into the event itself where possible.
        if !root && alts.len() == 1 {
            match alts.pop().unwrap() {
                Alt::Leaf(leaf_kind) => return self.add_event(leaf_kind, label),
                Alt::Child(child) => {
                    let id = self.add_event(kind, label);
                    self.add_gate(GateKind::Or, id, vec![child]);
                    return id;
                }
                Alt::AndOver(children) => {
                    let id = self.add_event(kind, label);
                    self.add_gate(GateKind::And, id, children);
                    return id;
                }
            }
        }

        // At the root a lone transformation keeps its AND gate directly.
        if alts.len() == 1 {
            if let Alt::AndOver(children) = &alts[0] {
                let id = self.add_event(kind, label);
                self.add_gate(GateKind::And, id, children.clone());
                return id;
            }
        }

        let id = self.add_event(kind, label.clone());
        let mut inputs = Vec::new();
        for alt in alts {
            match alt {
                Alt::Leaf(leaf_kind) => inputs.push(self.add_event(leaf_kind, label.clone())),
                Alt::Child(child) => inputs.push(child),
                Alt::AndOver(children) => {
                    let aux = self.add_event(EventKind::Intermediate, label.clone());
                    self.add_gate(GateKind::And, aux, children);
                    inputs.push(aux);
                }
            }
        }
        if inputs.is_empty() {
            // Root with no causes at all: leave a single undeveloped input.
            self.notes
                .push(format!("no producing cause found for {label}; left undeveloped"));
            inputs.push(self.add_event(EventKind::Undeveloped, label));
        }
        self.add_gate(GateKind::Or, id, inputs);
        id
    }
}

/// Generates the fault tree for one failure reaching `target_port`.
pub fn generate_fault_tree(
    flat: &SystemModel,
    rules: &BoundRuleSet,
    fla: &FlaResult,
    target_port: &PortRef,
    failure: FailureType,
) -> Result<FaultTree, FtError> {
    if !flat.system_outputs.contains(target_port) {
        return Err(FtError::TargetNotSystemOutput(target_port.clone()));
    }
    let reachable = fla
        .reachable_failures(target_port)
        .map_err(|_| FtError::UnknownPort(target_port.clone()))?;
    if !reachable.contains(&failure) {
        return Err(FtError::FailureNotReachable {
            port: target_port.clone(),
            failure,
        });
    }

    let mut builder = TreeBuilder {
        flat,
        rules,
        fla,
        events: Vec::new(),
        gates: Vec::new(),
        notes: Vec::new(),
        path: Vec::new(),
    };
    let label = EventLabel::new(target_port.clone(), failure);
    let root = builder.expand(label.clone(), true);
    let tree = FaultTree {
        target: label,
        root,
        events: builder.events,
        gates: builder.gates,
        notes: builder.notes,
    };
    debug_assert!(tree.validate().is_ok(), "{:?}", tree.validate());
    Ok(tree)
}

/// Generates one tree per failure reaching the target output port.
pub fn generate_fault_trees(
    flat: &SystemModel,
    rules: &BoundRuleSet,
    fla: &FlaResult,
    target_port: &PortRef,
) -> Result<Vec<FaultTree>, FtError> {
    if !flat.system_outputs.contains(target_port) {
        return Err(FtError::TargetNotSystemOutput(target_port.clone()));
    }
    let reachable = fla
        .reachable_failures(target_port)
        .map_err(|_| FtError::UnknownPort(target_port.clone()))?;
    reachable
        .into_iter()
        .map(|f| generate_fault_tree(flat, rules, fla, target_port, f))
        .collect()
}

// ---------------------------------------------------------------------------
// Nested view used by the analyses
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq)]
enum Node {
    Leaf {
        kind: EventKind,
        label: EventLabel,
    },
    Gate {
        kind: EventKind,
        label: EventLabel,
        gate: GateKind,
        children: Vec<Node>,
    },
}

impl FaultTree {
    pub fn event(&self, id: EventId) -> Option<&FtEvent> {
        self.events.iter().find(|e| e.id == id)
    }

    fn gate_of(&self, id: EventId) -> Option<&FtGate> {
        self.gates.iter().find(|g| g.output == id)
    }

    fn to_node(&self, id: EventId) -> Node {
        let event = self.event(id).expect("validated tree");
        match self.gate_of(id) {
            None => Node::Leaf {
                kind: event.kind,
                label: event.label.clone(),
            },
            Some(gate) => Node::Gate {
                kind: event.kind,
                label: event.label.clone(),
                gate: gate.kind,
                children: gate.inputs.iter().map(|i| self.to_node(*i)).collect(),
            },
        }
    }

    fn from_node(target: EventLabel, node: Node, notes: Vec<String>) -> FaultTree {
        fn emit(node: Node, root: bool, events: &mut Vec<FtEvent>, gates: &mut Vec<FtGate>) -> EventId {
            let id = EventId(events.len() as u32);
            match node {
                Node::Leaf { kind, label } => {
                    events.push(FtEvent { id, kind: if root { EventKind::Top } else { kind }, label, probability: None });
                    id
                }
                Node::Gate { kind, label, gate, children } => {
                    events.push(FtEvent { id, kind: if root { EventKind::Top } else { kind }, label, probability: None });
                    let inputs: Vec<EventId> = children
                        .into_iter()
                        .map(|c| emit(c, false, events, gates))
                        .collect();
                    gates.push(FtGate { kind: gate, output: id, inputs });
                    id
                }
            }
        }
        let mut events = Vec::new();
        let mut gates = Vec::new();
        let root = emit(node, true, &mut events, &mut gates);
        FaultTree { target, root, events, gates, notes }
    }

    /// Checks the structural invariants; `Ok` for every tree this module
    /// produces.
    pub fn validate(&self) -> Result<(), FtError> {
        let mut ids = BTreeSet::new();
        for e in &self.events {
            if !ids.insert(e.id) {
                return Err(FtError::InvalidTree(format!("duplicate event id {:?}", e.id)));
            }
        }
        let root = self
            .event(self.root)
            .ok_or_else(|| FtError::InvalidTree("root event missing".into()))?;
        if root.kind != EventKind::Top {
            return Err(FtError::InvalidTree("root event is not a top event".into()));
        }
        if self.events.iter().filter(|e| e.kind == EventKind::Top).count() > 1 {
            return Err(FtError::InvalidTree("more than one top event".into()));
        }

        let mut feeds: BTreeMap<EventId, usize> = BTreeMap::new();
        let mut gate_outputs = BTreeSet::new();
        for g in &self.gates {
            if g.inputs.is_empty() {
                return Err(FtError::InvalidTree("gate with no inputs".into()));
            }
            if !gate_outputs.insert(g.output) {
                return Err(FtError::InvalidTree("event is the output of two gates".into()));
            }
            for i in &g.inputs {
                if self.event(*i).is_none() {
                    return Err(FtError::InvalidTree(format!("gate input {i:?} missing")));
                }
                *feeds.entry(*i).or_default() += 1;
            }
            if self.event(g.output).is_none() {
                return Err(FtError::InvalidTree(format!("gate output {:?} missing", g.output)));
            }
        }
        for e in &self.events {
            let fed = feeds.get(&e.id).copied().unwrap_or(0);
            if e.id == self.root {
                if fed != 0 {
                    return Err(FtError::InvalidTree("root feeds a gate".into()));
                }
            } else if fed != 1 {
                return Err(FtError::InvalidTree(format!(
                    "event {} feeds {} gates (expected 1)",
                    e.label, fed
                )));
            }
            let is_gate_output = gate_outputs.contains(&e.id);
            match e.kind {
                EventKind::Intermediate => {
                    if !is_gate_output {
                        return Err(FtError::InvalidTree(format!(
                            "intermediate event {} has no gate",
                            e.label
                        )));
                    }
                }
                EventKind::Basic | EventKind::External | EventKind::Undeveloped => {
                    if is_gate_output {
                        return Err(FtError::InvalidTree(format!(
                            "leaf event {} is a gate output",
                            e.label
                        )));
                    }
                }
                EventKind::Top => {}
            }
        }
        Ok(())
    }

    /// Collapses single-input OR chains, splices nested ORs, and merges
    /// duplicate inputs under a gate. AND gates and the root are preserved;
    /// the boolean function (and so the minimal cut sets) is unchanged.
    pub fn qualitative_reduce(&self) -> FaultTree {
        fn reduce(node: Node, root: bool) -> Node {
            match node {
                leaf @ Node::Leaf { .. } => leaf,
                Node::Gate { kind, label, gate, children } => {
                    let mut reduced: Vec<Node> = Vec::new();
                    for child in children {
                        let child = reduce(child, false);
                        // Splice OR-children into an OR parent.
                        match (&gate, child) {
                            (GateKind::Or, Node::Gate { gate: GateKind::Or, children: grand, .. }) => {
                                reduced.extend(grand);
                            }
                            (_, other) => reduced.push(other),
                        }
                    }
                    // Merge structurally identical inputs.
                    let mut unique: Vec<Node> = Vec::new();
                    for c in reduced {
                        if !unique.contains(&c) {
                            unique.push(c);
                        }
                    }
                    // A non-root single-input OR dissolves into its child.
                    if !root && gate == GateKind::Or && unique.len() == 1 {
                        return unique.pop().unwrap();
                    }
                    Node::Gate { kind, label, gate, children: unique }
                }
            }
        }
        let node = reduce(self.to_node(self.root), true);
        let out = FaultTree::from_node(self.target.clone(), node, self.notes.clone());
        debug_assert!(out.validate().is_ok());
        out
    }

    /// Minimal cut sets: top-down expansion (OR unions the families, AND
    /// crosses them) followed by superset removal.
    pub fn minimal_cut_sets(&self) -> BTreeSet<BTreeSet<EventLabel>> {
        fn cut_sets(node: &Node) -> BTreeSet<BTreeSet<EventLabel>> {
            match node {
                Node::Leaf { label, .. } => {
                    let mut s = BTreeSet::new();
                    s.insert([label.clone()].into_iter().collect());
                    s
                }
                Node::Gate { gate, children, .. } => match gate {
                    GateKind::Or => children.iter().flat_map(cut_sets).collect(),
                    GateKind::And => {
                        let mut acc: BTreeSet<BTreeSet<EventLabel>> =
                            [BTreeSet::new()].into_iter().collect();
                        for child in children {
                            let mut next = BTreeSet::new();
                            for base in &acc {
                                for cs in cut_sets(child) {
                                    let mut merged = base.clone();
                                    merged.extend(cs);
                                    next.insert(merged);
                                }
                            }
                            acc = next;
                        }
                        acc
                    }
                },
            }
        }
        let family = cut_sets(&self.to_node(self.root));
        minimize(family)
    }

    /// Leaf events (basic, external, undeveloped) of the tree.
    pub fn leaves(&self) -> Vec<&FtEvent> {
        let gate_outputs: BTreeSet<EventId> = self.gates.iter().map(|g| g.output).collect();
        self.events
            .iter()
            .filter(|e| !gate_outputs.contains(&e.id))
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("fault tree serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<FaultTree, FtError> {
        let tree: FaultTree = serde_json::from_str(text)?;
        tree.validate()?;
        Ok(tree)
    }

    /// DOT digraph; gate shapes distinguish AND/OR, node styles the event
    /// kinds.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph fault_tree {\n  rankdir=BT;\n");
        for e in &self.events {
            let (shape, style) = match e.kind {
                EventKind::Top => ("doubleoctagon", "filled\" fillcolor=\"lightcoral"),
                EventKind::Intermediate => ("box", "solid"),
                EventKind::Basic => ("circle", "filled\" fillcolor=\"lightblue"),
                EventKind::External => ("house", "filled\" fillcolor=\"lightyellow"),
                EventKind::Undeveloped => ("diamond", "dashed"),
            };
            out.push_str(&format!(
                "  e{} [label=\"{}\" shape={} style=\"{}\"];\n",
                e.id.0, e.label, shape, style
            ));
        }
        for (gi, g) in self.gates.iter().enumerate() {
            let (label, shape) = match g.kind {
                GateKind::And => ("AND", "invtrapezium"),
                GateKind::Or => ("OR", "invtriangle"),
            };
            out.push_str(&format!("  g{gi} [label=\"{label}\" shape={shape}];\n"));
            out.push_str(&format!("  g{} -> e{};\n", gi, g.output.0));
            for i in &g.inputs {
                out.push_str(&format!("  e{} -> g{};\n", i.0, gi));
            }
        }
        out.push_str("}\n");
        out
    }
}

fn minimize(family: BTreeSet<BTreeSet<EventLabel>>) -> BTreeSet<BTreeSet<EventLabel>> {
    family
        .iter()
        .filter(|cs| {
            !family
                .iter()
                .any(|other| other.len() < cs.len() && other.is_subset(cs))
        })
        .cloned()
        .collect()
}

// ---------------------------------------------------------------------------
// Quantification
// ---------------------------------------------------------------------------

/// Which computation produced a probability.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuantifyMethod {
    /// Independent bottom-up products; used when every leaf label is unique.
    BottomUp,
    /// Inclusion–exclusion over minimal cut sets; exact under repeated
    /// leaf labels.
    CutSetInclusionExclusion,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Quantification {
    pub probability: f64,
    pub method: QuantifyMethod,
}

impl FaultTree {
    /// Computes the top-event probability. Every leaf label needs a
    /// probability: from `probs` (keys in `Component.port.failure` form) or
    /// the event's own `probability` field. Undeveloped leaves require an
    /// explicitly assumed value like any other leaf.
    pub fn quantify(
        &self,
        probs: &BTreeMap<String, f64>,
    ) -> Result<Quantification, FtError> {
        let mut leaf_probs: BTreeMap<EventLabel, f64> = BTreeMap::new();
        let mut label_counts: BTreeMap<EventLabel, usize> = BTreeMap::new();
        for leaf in self.leaves() {
            *label_counts.entry(leaf.label.clone()).or_default() += 1;
            let key = leaf.label.to_string();
            let p = probs
                .get(&key)
                .copied()
                .or(leaf.probability)
                .ok_or_else(|| FtError::MissingProbability(key.clone()))?;
            if !(0.0..=1.0).contains(&p) {
                return Err(FtError::BadProbability { label: key, value: p });
            }
            leaf_probs.insert(leaf.label.clone(), p);
        }

        let shared = label_counts.values().any(|&n| n > 1);
        if !shared {
            fn bottom_up(node: &Node, probs: &BTreeMap<EventLabel, f64>) -> f64 {
                match node {
                    Node::Leaf { label, .. } => probs[label],
                    Node::Gate { gate, children, .. } => {
                        let ps: Vec<f64> =
                            children.iter().map(|c| bottom_up(c, probs)).collect();
                        match gate {
                            GateKind::And => ps.iter().product(),
                            GateKind::Or => 1.0 - ps.iter().map(|p| 1.0 - p).product::<f64>(),
                        }
                    }
                }
            }
            let probability = bottom_up(&self.to_node(self.root), &leaf_probs);
            return Ok(Quantification {
                probability,
                method: QuantifyMethod::BottomUp,
            });
        }

        let cut_sets: Vec<BTreeSet<EventLabel>> = self.minimal_cut_sets().into_iter().collect();
        if cut_sets.len() > 20 {
            return Err(FtError::TooManyCutSets(cut_sets.len()));
        }
        let mut probability = 0.0;
        for mask in 1u32..(1 << cut_sets.len()) {
            let mut union: BTreeSet<&EventLabel> = BTreeSet::new();
            for (i, cs) in cut_sets.iter().enumerate() {
                if mask & (1 << i) != 0 {
                    union.extend(cs.iter());
                }
            }
            let term: f64 = union.iter().map(|l| leaf_probs[*l]).product();
            if mask.count_ones() % 2 == 1 {
                probability += term;
            } else {
                probability -= term;
            }
        }
        Ok(Quantification {
            probability: probability.clamp(0.0, 1.0),
            method: QuantifyMethod::CutSetInclusionExclusion,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fla::{propagate, FlaOptions, TokenSet};
    use crate::model::{Component, Connection, Port, SystemModel};
    use crate::rules::{bind_rules, parse_rules};

    fn label(c: &str, p: &str, f: FailureType) -> EventLabel {
        EventLabel::new(PortRef::new(c, p), f)
    }

    /// Hand-built tree: useful for analysis tests without generation.
    fn tree_of(node: Node) -> FaultTree {
        let target = match &node {
            Node::Leaf { label, .. } | Node::Gate { label, .. } => label.clone(),
        };
        let t = FaultTree::from_node(target, node, Vec::new());
        t.validate().unwrap();
        t
    }

    fn leaf(c: &str, p: &str, f: FailureType) -> Node {
        Node::Leaf {
            kind: EventKind::Basic,
            label: label(c, p, f),
        }
    }

    fn gate(g: GateKind, l: EventLabel, children: Vec<Node>) -> Node {
        Node::Gate {
            kind: EventKind::Intermediate,
            label: l,
            gate: g,
            children,
        }
    }

    fn two_input_transformer() -> (SystemModel, BoundRuleSet, FlaResult) {
        let model = SystemModel {
            name: "xfrm".into(),
            components: vec![Component::simple(
                "X",
                vec![
                    Port::input("p_in1"),
                    Port::input("p_in2"),
                    Port::output("p_out"),
                ],
            )],
            system_inputs: vec![PortRef::new("X", "p_in1"), PortRef::new("X", "p_in2")],
            system_outputs: vec![PortRef::new("X", "p_out")],
            ..Default::default()
        };
        let rules = bind_rules(
            &parse_rules("p_in1.early, p_in2.late -> p_out.omission").unwrap(),
            &model,
        )
        .unwrap();
        let mut injected = TokenSet::new();
        injected.insert(
            PortRef::new("X", "p_in1"),
            [FailureType::Early].into_iter().collect(),
        );
        injected.insert(
            PortRef::new("X", "p_in2"),
            [FailureType::Late].into_iter().collect(),
        );
        let fla = propagate(&model, &rules, &injected, FlaOptions::default());
        (model, rules, fla)
    }

    #[test]
    fn transformation_yields_single_and_gate() {
        let (model, rules, fla) = two_input_transformer();
        let tree = generate_fault_tree(
            &model,
            &rules,
            &fla,
            &PortRef::new("X", "p_out"),
            FailureType::Omission,
        )
        .unwrap();

        let ands: Vec<&FtGate> = tree.gates.iter().filter(|g| g.kind == GateKind::And).collect();
        assert_eq!(ands.len(), 1);
        assert_eq!(tree.gates.len(), 1);
        assert_eq!(ands[0].inputs.len(), 2);
        let input_labels: BTreeSet<EventLabel> = ands[0]
            .inputs
            .iter()
            .map(|i| tree.event(*i).unwrap().label.clone())
            .collect();
        assert_eq!(
            input_labels,
            [
                label("X", "p_in1", FailureType::Early),
                label("X", "p_in2", FailureType::Late)
            ]
            .into_iter()
            .collect()
        );
        // Both inputs are externally injected.
        assert!(ands[0]
            .inputs
            .iter()
            .all(|i| tree.event(*i).unwrap().kind == EventKind::External));
    }

    #[test]
    fn injected_propagation_yields_or_over_external_event() {
        let model = SystemModel {
            name: "prop".into(),
            components: vec![Component::simple(
                "P",
                vec![Port::input("p_in"), Port::output("p_out")],
            )],
            system_inputs: vec![PortRef::new("P", "p_in")],
            system_outputs: vec![PortRef::new("P", "p_out")],
            ..Default::default()
        };
        let rules =
            bind_rules(&parse_rules("p_in.early -> p_out.early").unwrap(), &model).unwrap();
        let mut injected = TokenSet::new();
        injected.insert(
            PortRef::new("P", "p_in"),
            [FailureType::Early].into_iter().collect(),
        );
        let fla = propagate(&model, &rules, &injected, FlaOptions::default());
        let tree = generate_fault_tree(
            &model,
            &rules,
            &fla,
            &PortRef::new("P", "p_out"),
            FailureType::Early,
        )
        .unwrap();
        assert_eq!(tree.gates.len(), 1);
        assert_eq!(tree.gates[0].kind, GateKind::Or);
        assert_eq!(tree.gates[0].inputs.len(), 1);
        let leaf = tree.event(tree.gates[0].inputs[0]).unwrap();
        assert_eq!(leaf.kind, EventKind::External);
        assert_eq!(leaf.label, label("P", "p_in", FailureType::Early));
    }

    fn source_chain() -> (SystemModel, BoundRuleSet, FlaResult) {
        let model = SystemModel {
            name: "chain".into(),
            components: vec![
                Component::simple("A", vec![Port::input("a_in"), Port::output("a_out")]),
                Component::simple("B", vec![Port::input("b_in"), Port::output("b_out")]),
            ],
            connections: vec![Connection::new(
                PortRef::new("A", "a_out"),
                PortRef::new("B", "b_in"),
            )],
            system_inputs: vec![PortRef::new("A", "a_in")],
            system_outputs: vec![PortRef::new("B", "b_out")],
        };
        let rules = bind_rules(
            &parse_rules("a_in.noFailure -> a_out.late\nb_in.late -> b_out.late").unwrap(),
            &model,
        )
        .unwrap();
        let fla = propagate(&model, &rules, &TokenSet::new(), FlaOptions::default());
        (model, rules, fla)
    }

    #[test]
    fn chain_expands_to_or_chain_ending_in_basic() {
        let (model, rules, fla) = source_chain();
        let tree = generate_fault_tree(
            &model,
            &rules,
            &fla,
            &PortRef::new("B", "b_out"),
            FailureType::Late,
        )
        .unwrap();
        // top(b_out) <- OR <- e(b_in) <- OR <- basic e(a_out).
        assert_eq!(tree.gates.len(), 2);
        assert!(tree.gates.iter().all(|g| g.kind == GateKind::Or && g.inputs.len() == 1));
        let basics: Vec<&FtEvent> = tree
            .events
            .iter()
            .filter(|e| e.kind == EventKind::Basic)
            .collect();
        assert_eq!(basics.len(), 1);
        assert_eq!(basics[0].label, label("A", "a_out", FailureType::Late));
    }

    #[test]
    fn reduce_collapses_propagation_chain() {
        let (model, rules, fla) = source_chain();
        let tree = generate_fault_tree(
            &model,
            &rules,
            &fla,
            &PortRef::new("B", "b_out"),
            FailureType::Late,
        )
        .unwrap();
        let reduced = tree.qualitative_reduce();
        // top <- OR(basic(A.a_out.late)) and nothing else.
        assert_eq!(reduced.gates.len(), 1);
        assert_eq!(reduced.gates[0].inputs.len(), 1);
        assert_eq!(reduced.events.len(), 2);
        let leaf = reduced.event(reduced.gates[0].inputs[0]).unwrap();
        assert_eq!(leaf.kind, EventKind::Basic);
        assert_eq!(leaf.label, label("A", "a_out", FailureType::Late));
        assert_eq!(tree.minimal_cut_sets(), reduced.minimal_cut_sets());
    }

    #[test]
    fn reduce_leaves_single_and_of_basics_unchanged() {
        let t = tree_of(gate(
            GateKind::And,
            label("T", "out", FailureType::Late),
            vec![
                leaf("A", "a", FailureType::Early),
                leaf("B", "b", FailureType::Late),
            ],
        ));
        let reduced = t.qualitative_reduce();
        assert_eq!(reduced.gates.len(), 1);
        assert_eq!(reduced.gates[0].kind, GateKind::And);
        assert_eq!(reduced.gates[0].inputs.len(), 2);
    }

    #[test]
    fn reduce_merges_duplicate_or_inputs() {
        let t = tree_of(gate(
            GateKind::Or,
            label("T", "out", FailureType::Late),
            vec![
                leaf("A", "a", FailureType::Early),
                leaf("A", "a", FailureType::Early),
            ],
        ));
        let reduced = t.qualitative_reduce();
        assert_eq!(reduced.gates[0].inputs.len(), 1);
    }

    #[test]
    fn cut_sets_for_and_pair() {
        let t = tree_of(gate(
            GateKind::And,
            label("T", "out", FailureType::Late),
            vec![
                leaf("A", "a", FailureType::Early),
                leaf("B", "b", FailureType::Late),
            ],
        ));
        let mcs = t.minimal_cut_sets();
        assert_eq!(mcs.len(), 1);
        let only = mcs.into_iter().next().unwrap();
        assert_eq!(only.len(), 2);
    }

    #[test]
    fn absorption_removes_superset_cut_set() {
        // OR(a, AND(a, b)) -> {{a}}.
        let a = || leaf("A", "a", FailureType::Early);
        let t = tree_of(gate(
            GateKind::Or,
            label("T", "out", FailureType::Late),
            vec![
                a(),
                gate(
                    GateKind::And,
                    label("T", "aux", FailureType::Late),
                    vec![a(), leaf("B", "b", FailureType::Late)],
                ),
            ],
        ));
        let mcs = t.minimal_cut_sets();
        assert_eq!(mcs.len(), 1);
        assert_eq!(
            mcs.into_iter().next().unwrap(),
            [label("A", "a", FailureType::Early)].into_iter().collect()
        );
    }

    #[test]
    fn fig3_shape_with_extra_or_branch() {
        // OR(AND(f1, f2), c) -> {{f1, f2}, {c}}; checked against brute-force
        // truth-table enumeration over the three events.
        let f1 = leaf("X", "in1", FailureType::Early);
        let f2 = leaf("X", "in2", FailureType::Late);
        let c = leaf("C", "c", FailureType::Omission);
        let t = tree_of(gate(
            GateKind::Or,
            label("X", "out", FailureType::Late),
            vec![
                gate(
                    GateKind::And,
                    label("X", "aux", FailureType::Late),
                    vec![f1.clone(), f2.clone()],
                ),
                c.clone(),
            ],
        ));
        let mcs = t.minimal_cut_sets();
        let expected: BTreeSet<BTreeSet<EventLabel>> = [
            [
                label("X", "in1", FailureType::Early),
                label("X", "in2", FailureType::Late),
            ]
            .into_iter()
            .collect(),
            [label("C", "c", FailureType::Omission)].into_iter().collect(),
        ]
        .into_iter()
        .collect();
        assert_eq!(mcs, expected);

        // Brute force: a set family is the MCS family iff the tree is true
        // exactly when some cut set is fully present.
        let labels = [
            label("X", "in1", FailureType::Early),
            label("X", "in2", FailureType::Late),
            label("C", "c", FailureType::Omission),
        ];
        for mask in 0u8..8 {
            let on: BTreeSet<EventLabel> = labels
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, l)| l.clone())
                .collect();
            let tree_true = (on.contains(&labels[0]) && on.contains(&labels[1]))
                || on.contains(&labels[2]);
            let mcs_true = mcs.iter().any(|cs| cs.is_subset(&on));
            assert_eq!(tree_true, mcs_true, "mask {mask:#b}");
        }
    }

    #[test]
    fn quantify_and_or_products() {
        let mut probs = BTreeMap::new();
        probs.insert("A.a.early".to_string(), 0.1);
        probs.insert("B.b.late".to_string(), 0.1);

        let and_tree = tree_of(gate(
            GateKind::And,
            label("T", "out", FailureType::Late),
            vec![leaf("A", "a", FailureType::Early), leaf("B", "b", FailureType::Late)],
        ));
        let q = and_tree.quantify(&probs).unwrap();
        assert!((q.probability - 0.01).abs() < 1e-15);
        assert_eq!(q.method, QuantifyMethod::BottomUp);

        let or_tree = tree_of(gate(
            GateKind::Or,
            label("T", "out", FailureType::Late),
            vec![leaf("A", "a", FailureType::Early), leaf("B", "b", FailureType::Late)],
        ));
        let q = or_tree.quantify(&probs).unwrap();
        assert!((q.probability - 0.19).abs() < 1e-15);
    }

    #[test]
    fn quantify_shared_event_uses_cut_sets() {
        // OR(a, AND(a, b)) with p(a)=0.2, p(b)=0.5 is exactly 0.2; the naive
        // bottom-up product would give 0.28.
        let a = || leaf("A", "a", FailureType::Early);
        let t = tree_of(gate(
            GateKind::Or,
            label("T", "out", FailureType::Late),
            vec![
                a(),
                gate(
                    GateKind::And,
                    label("T", "aux", FailureType::Late),
                    vec![a(), leaf("B", "b", FailureType::Late)],
                ),
            ],
        ));
        let mut probs = BTreeMap::new();
        probs.insert("A.a.early".to_string(), 0.2);
        probs.insert("B.b.late".to_string(), 0.5);
        let q = t.quantify(&probs).unwrap();
        assert!((q.probability - 0.2).abs() < 1e-12, "{}", q.probability);
        assert_eq!(q.method, QuantifyMethod::CutSetInclusionExclusion);
    }

    #[test]
    fn quantify_missing_probability_errors() {
        let t = tree_of(gate(
            GateKind::Or,
            label("T", "out", FailureType::Late),
            vec![leaf("A", "a", FailureType::Early)],
        ));
        assert!(matches!(
            t.quantify(&BTreeMap::new()),
            Err(FtError::MissingProbability(_))
        ));
    }

    #[test]
    fn export_dot_counts_for_and_fixture() {
        let (model, rules, fla) = two_input_transformer();
        let tree = generate_fault_tree(
            &model,
            &rules,
            &fla,
            &PortRef::new("X", "p_out"),
            FailureType::Omission,
        )
        .unwrap();
        let dot = tree.to_dot();
        assert_eq!(dot.matches("label=\"AND\"").count(), 1);
        assert_eq!(dot.matches("label=\"OR\"").count(), 0);
        assert_eq!(dot.matches("shape=doubleoctagon").count(), 1);
        // One node definition per event: the top plus the two inputs.
        let event_nodes = dot
            .lines()
            .filter(|l| l.trim_start().starts_with('e') && l.contains("[label="))
            .count();
        assert_eq!(event_nodes, 3);
    }

    #[test]
    fn export_import_json_round_trip() {
        let (model, rules, fla) = two_input_transformer();
        let tree = generate_fault_tree(
            &model,
            &rules,
            &fla,
            &PortRef::new("X", "p_out"),
            FailureType::Omission,
        )
        .unwrap();
        let json = tree.to_json();
        let back = FaultTree::from_json(&json).unwrap();
        assert_eq!(tree, back);
    }

    #[test]
    fn single_leaf_tree_exports() {
        let t = tree_of(Node::Leaf {
            kind: EventKind::Basic,
            label: label("A", "a", FailureType::Early),
        });
        // The root doubles as the only event; DOT has one node, no gates.
        let dot = t.to_dot();
        assert!(dot.contains("e0"));
        assert!(!dot.contains("g0"));
    }

    #[test]
    fn unreachable_target_failure_errors() {
        let (model, rules, fla) = two_input_transformer();
        let err = generate_fault_tree(
            &model,
            &rules,
            &fla,
            &PortRef::new("X", "p_out"),
            FailureType::Commission,
        )
        .unwrap_err();
        assert!(matches!(err, FtError::FailureNotReachable { .. }));
    }

    #[test]
    fn cycle_is_cut_as_undeveloped() {
        let model = SystemModel {
            name: "cycle".into(),
            components: vec![
                Component::simple("A", vec![Port::input("a_in"), Port::output("a_out")]),
                Component::simple("B", vec![Port::input("b_in"), Port::output("b_out")]),
            ],
            connections: vec![
                Connection::new(PortRef::new("A", "a_out"), PortRef::new("B", "b_in")),
                Connection::new(PortRef::new("B", "b_out"), PortRef::new("A", "a_in")),
            ],
            system_outputs: vec![],
            ..Default::default()
        };
        // b_out is looped back, so make it the target via a second output.
        let mut model = model;
        model.components[1]
            .ports
            .push(Port::output("b_obs"));
        model.system_outputs = vec![PortRef::new("B", "b_obs")];
        let rules = bind_rules(
            &parse_rules(
                "a_in.late -> a_out.late\ncomponent B\nb_in.late -> b_out.late\nb_in.late -> b_obs.late",
            )
            .unwrap(),
            &model,
        )
        .unwrap();
        let mut injected = TokenSet::new();
        injected.insert(
            PortRef::new("A", "a_out"),
            [FailureType::Late].into_iter().collect(),
        );
        let fla = propagate(&model, &rules, &injected, FlaOptions::default());
        let tree = generate_fault_tree(
            &model,
            &rules,
            &fla,
            &PortRef::new("B", "b_obs"),
            FailureType::Late,
        )
        .unwrap();
        assert!(tree.events.iter().any(|e| e.kind == EventKind::Undeveloped));
        assert!(!tree.notes.is_empty());
    }

    #[test]
    fn quantify_extremes_and_monotonicity() {
        let t = tree_of(gate(
            GateKind::Or,
            label("T", "out", FailureType::Late),
            vec![
                gate(
                    GateKind::And,
                    label("T", "aux", FailureType::Late),
                    vec![leaf("A", "a", FailureType::Early), leaf("B", "b", FailureType::Late)],
                ),
                leaf("C", "c", FailureType::Omission),
            ],
        ));
        let keys = ["A.a.early", "B.b.late", "C.c.omission"];
        let with = |vals: [f64; 3]| {
            let probs: BTreeMap<String, f64> = keys
                .iter()
                .zip(vals)
                .map(|(k, v)| (k.to_string(), v))
                .collect();
            t.quantify(&probs).unwrap().probability
        };
        assert_eq!(with([0.0, 0.0, 0.0]), 0.0);
        assert_eq!(with([1.0, 1.0, 1.0]), 1.0);
        // Nondecreasing in each coordinate.
        let base = with([0.3, 0.4, 0.1]);
        for i in 0..3 {
            let mut bumped = [0.3, 0.4, 0.1];
            bumped[i] += 0.05;
            assert!(with(bumped) >= base - 1e-15);
        }
    }
}
