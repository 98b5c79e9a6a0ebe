//! Component/port/connection architecture graph.
//!
//! A [`SystemModel`] is a tree of components (simple or composite) whose ports
//! are wired by connections. Two kinds of connections exist:
//!
//! * **peer** — from an output port to an input port of another component;
//! * **delegation** — between a composite's boundary port and a port of the
//!   same direction on one of its direct children. Delegations are how a
//!   composite exposes its inner structure; [`SystemModel::flatten`] resolves
//!   them away, leaving only simple components and peer connections.
//!
//! Models are immutable once loaded; every analysis in this crate consumes
//! them by shared reference.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Errors raised while loading or flattening a model.
#[derive(Debug, Error)]
pub enum ModelError {
    #[error("model parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unresolved reference: no component named `{component}`")]
    UnknownComponent { component: String },
    #[error("unresolved reference: component `{component}` has no port `{port}`")]
    UnknownPort { component: String, port: String },
    #[error("ambiguous reference: component name `{component}` occurs at more than one nesting level")]
    AmbiguousComponent { component: String },
    #[error("invalid port reference `{text}`: expected `Component.port`")]
    BadPortRef { text: String },
    #[error("model is not valid: {0}")]
    Invalid(Diagnostic),
    #[error("composite boundary port `{port}` has no inner binding")]
    UnboundBoundaryPort { port: PortRef },
}

/// Port direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Input,
    Output,
}

/// Deployment layer. Carried as metadata; no analysis consumes it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Layer {
    #[default]
    Edge,
    Fog,
    Cloud,
}

/// Simple components carry behavior and rules; composites only wrap children.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ComponentKind {
    #[default]
    Simple,
    Composite,
}

fn default_range() -> [f64; 2] {
    [0.0, 5.0]
}

/// A named, directed port with a legal signal range in volts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Port {
    pub name: String,
    pub direction: Direction,
    /// `[v_min, v_max]`; defaults to `[0, 5]`.
    #[serde(default = "default_range")]
    pub range: [f64; 2],
}

impl Port {
    pub fn input(name: &str) -> Self {
        Port {
            name: name.to_string(),
            direction: Direction::Input,
            range: default_range(),
        }
    }

    pub fn output(name: &str) -> Self {
        Port {
            name: name.to_string(),
            direction: Direction::Output,
            range: default_range(),
        }
    }
}

/// A simple or composite component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub name: String,
    #[serde(default)]
    pub kind: ComponentKind,
    #[serde(default)]
    pub layer: Layer,
    #[serde(default)]
    pub ports: Vec<Port>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<Component>,
    /// Name of a registered behavior model (simple components only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub behavior: Option<String>,
    /// Behavior-model parameters.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, f64>,
}

impl Component {
    pub fn simple(name: &str, ports: Vec<Port>) -> Self {
        Component {
            name: name.to_string(),
            kind: ComponentKind::Simple,
            layer: Layer::default(),
            ports,
            children: Vec::new(),
            behavior: None,
            params: BTreeMap::new(),
        }
    }

    pub fn composite(name: &str, ports: Vec<Port>, children: Vec<Component>) -> Self {
        Component {
            name: name.to_string(),
            kind: ComponentKind::Composite,
            layer: Layer::default(),
            ports,
            children,
            behavior: None,
            params: BTreeMap::new(),
        }
    }

    pub fn port(&self, name: &str) -> Option<&Port> {
        self.ports.iter().find(|p| p.name == name)
    }

    pub fn input_ports(&self) -> impl Iterator<Item = &Port> {
        self.ports.iter().filter(|p| p.direction == Direction::Input)
    }

    pub fn output_ports(&self) -> impl Iterator<Item = &Port> {
        self.ports.iter().filter(|p| p.direction == Direction::Output)
    }
}

/// Reference to a port in dotted `Component.port` form.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PortRef {
    pub component: String,
    pub port: String,
}

impl PortRef {
    pub fn new(component: &str, port: &str) -> Self {
        PortRef {
            component: component.to_string(),
            port: port.to_string(),
        }
    }
}

impl fmt::Display for PortRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.component, self.port)
    }
}

impl FromStr for PortRef {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (component, port) = s
            .rsplit_once('.')
            .ok_or_else(|| ModelError::BadPortRef { text: s.to_string() })?;
        if component.is_empty() || port.is_empty() {
            return Err(ModelError::BadPortRef { text: s.to_string() });
        }
        Ok(PortRef::new(component, port))
    }
}

impl Serialize for PortRef {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for PortRef {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(D::Error::custom)
    }
}

/// A directed connection between two ports.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Connection {
    pub from: PortRef,
    pub to: PortRef,
}

impl Connection {
    pub fn new(from: PortRef, to: PortRef) -> Self {
        Connection { from, to }
    }
}

/// The architecture graph every other module consumes.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SystemModel {
    pub name: String,
    #[serde(default)]
    pub components: Vec<Component>,
    #[serde(default)]
    pub connections: Vec<Connection>,
    #[serde(default)]
    pub system_inputs: Vec<PortRef>,
    #[serde(default)]
    pub system_outputs: Vec<PortRef>,
}

/// A violated invariant, naming the offending element.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostic {
    pub invariant: String,
    pub element: String,
    pub message: String,
}

impl Diagnostic {
    fn new(invariant: &str, element: impl fmt::Display, message: impl Into<String>) -> Self {
        Diagnostic {
            invariant: invariant.to_string(),
            element: element.to_string(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}: {}", self.invariant, self.element, self.message)
    }
}

/// How a connection relates to the component hierarchy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ConnectionRole {
    /// Output port → input port between components.
    Peer,
    /// Composite input boundary port → input port of a direct child.
    DelegateIn,
    /// Output port of a direct child → composite output boundary port.
    DelegateOut,
}

impl SystemModel {
    /// Parses and resolves a model document (see the JSON schema in the
    /// repository's `schemas/` directory).
    pub fn from_json(document: &str) -> Result<SystemModel, ModelError> {
        let model: SystemModel =
            serde_json::from_str(document).map_err(|e| ModelError::Parse {
                line: e.line(),
                column: e.column(),
                message: e.to_string(),
            })?;
        model.check_references()?;
        Ok(model)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serialization cannot fail")
    }

    /// All components, recursively, paired with their nesting depth.
    pub fn all_components(&self) -> Vec<(&Component, usize)> {
        fn walk<'a>(c: &'a Component, depth: usize, out: &mut Vec<(&'a Component, usize)>) {
            out.push((c, depth));
            for child in &c.children {
                walk(child, depth + 1, out);
            }
        }
        let mut out = Vec::new();
        for c in &self.components {
            walk(c, 0, &mut out);
        }
        out
    }

    /// All simple components, recursively.
    pub fn simple_components(&self) -> Vec<&Component> {
        self.all_components()
            .into_iter()
            .filter(|(c, _)| c.kind == ComponentKind::Simple)
            .map(|(c, _)| c)
            .collect()
    }

    /// Looks up a component by name anywhere in the tree. Errors if the name
    /// is missing or occurs more than once.
    pub fn component(&self, name: &str) -> Result<&Component, ModelError> {
        let mut found = None;
        for (c, _) in self.all_components() {
            if c.name == name {
                if found.is_some() {
                    return Err(ModelError::AmbiguousComponent {
                        component: name.to_string(),
                    });
                }
                found = Some(c);
            }
        }
        found.ok_or_else(|| ModelError::UnknownComponent {
            component: name.to_string(),
        })
    }

    /// Resolves a port reference to its component and port definitions.
    pub fn resolve(&self, r: &PortRef) -> Result<(&Component, &Port), ModelError> {
        let component = self.component(&r.component)?;
        let port = component.port(&r.port).ok_or_else(|| ModelError::UnknownPort {
            component: r.component.clone(),
            port: r.port.clone(),
        })?;
        Ok((component, port))
    }

    fn check_references(&self) -> Result<(), ModelError> {
        for conn in &self.connections {
            self.resolve(&conn.from)?;
            self.resolve(&conn.to)?;
        }
        for r in self.system_inputs.iter().chain(&self.system_outputs) {
            self.resolve(r)?;
        }
        Ok(())
    }

    /// Maps each component name to its direct parent's name, for components
    /// nested inside a composite.
    fn parent_map(&self) -> BTreeMap<String, String> {
        fn walk(c: &Component, out: &mut BTreeMap<String, String>) {
            for child in &c.children {
                out.insert(child.name.clone(), c.name.clone());
                walk(child, out);
            }
        }
        let mut out = BTreeMap::new();
        for c in &self.components {
            walk(c, &mut out);
        }
        out
    }

    fn connection_role(&self, conn: &Connection) -> Result<ConnectionRole, Diagnostic> {
        let (from_comp, from_port) = self
            .resolve(&conn.from)
            .map_err(|e| Diagnostic::new("resolved-references", conn_label(conn), e.to_string()))?;
        let (to_comp, to_port) = self
            .resolve(&conn.to)
            .map_err(|e| Diagnostic::new("resolved-references", conn_label(conn), e.to_string()))?;
        let parents = self.parent_map();

        // Delegation: boundary port of a composite wired to a direct child's
        // port of the same direction.
        if from_comp.kind == ComponentKind::Composite
            && parents.get(&to_comp.name) == Some(&from_comp.name)
        {
            return if from_port.direction == Direction::Input
                && to_port.direction == Direction::Input
            {
                Ok(ConnectionRole::DelegateIn)
            } else {
                Err(Diagnostic::new(
                    "connection-direction",
                    conn_label(conn),
                    "inward delegation must run input-to-input",
                ))
            };
        }
        if to_comp.kind == ComponentKind::Composite
            && parents.get(&from_comp.name) == Some(&to_comp.name)
        {
            return if from_port.direction == Direction::Output
                && to_port.direction == Direction::Output
            {
                Ok(ConnectionRole::DelegateOut)
            } else {
                Err(Diagnostic::new(
                    "connection-direction",
                    conn_label(conn),
                    "outward delegation must run output-to-output",
                ))
            };
        }

        if from_port.direction != Direction::Output || to_port.direction != Direction::Input {
            return Err(Diagnostic::new(
                "connection-direction",
                conn_label(conn),
                format!(
                    "direction mismatch: peer connections run output-to-input, got {:?} -> {:?}",
                    from_port.direction, to_port.direction
                ),
            ));
        }
        Ok(ConnectionRole::Peer)
    }

    /// Checks every model invariant; returns one diagnostic per violation.
    /// An empty list means the model is valid.
    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();

        // Component tree invariants.
        fn check_level(
            components: &[Component],
            scope: &str,
            out: &mut Vec<Diagnostic>,
        ) {
            let mut seen = BTreeSet::new();
            for c in components {
                if !seen.insert(c.name.clone()) {
                    out.push(Diagnostic::new(
                        "unique-component-names",
                        &c.name,
                        format!("duplicate component name within {scope}"),
                    ));
                }
                let mut port_names = BTreeSet::new();
                for p in &c.ports {
                    if !port_names.insert(p.name.clone()) {
                        out.push(Diagnostic::new(
                            "unique-port-names",
                            PortRef::new(&c.name, &p.name),
                            "duplicate port name within component",
                        ));
                    }
                    if !(p.range[0] < p.range[1]) {
                        out.push(Diagnostic::new(
                            "port-range",
                            PortRef::new(&c.name, &p.name),
                            format!("signal range [{}, {}] requires v_min < v_max", p.range[0], p.range[1]),
                        ));
                    }
                }
                match c.kind {
                    ComponentKind::Simple => {
                        if !c.children.is_empty() {
                            out.push(Diagnostic::new(
                                "simple-has-no-children",
                                &c.name,
                                "simple component declares children",
                            ));
                        }
                    }
                    ComponentKind::Composite => {
                        if c.children.is_empty() {
                            out.push(Diagnostic::new(
                                "composite-has-children",
                                &c.name,
                                "composite component has no children",
                            ));
                        }
                        if c.behavior.is_some() {
                            out.push(Diagnostic::new(
                                "composite-has-no-behavior",
                                &c.name,
                                "behavior models attach to simple components only",
                            ));
                        }
                    }
                }
                check_level(&c.children, &format!("composite `{}`", c.name), out);
            }
        }
        check_level(&self.components, "the top level", &mut out);

        // Connection invariants.
        let mut seen_conns = BTreeSet::new();
        for conn in &self.connections {
            if !seen_conns.insert((conn.from.clone(), conn.to.clone())) {
                out.push(Diagnostic::new(
                    "no-duplicate-connections",
                    conn_label(conn),
                    "connection appears more than once",
                ));
                continue;
            }
            if let Err(d) = self.connection_role(conn) {
                out.push(d);
            }
        }

        // System boundary invariants.
        for r in &self.system_inputs {
            match self.resolve(r) {
                Err(e) => out.push(Diagnostic::new("resolved-references", r, e.to_string())),
                Ok((_, port)) => {
                    if port.direction != Direction::Input {
                        out.push(Diagnostic::new(
                            "system-input-direction",
                            r,
                            "system input must be an input port",
                        ));
                    }
                    if self.connections.iter().any(|c| &c.to == r) {
                        out.push(Diagnostic::new(
                            "system-input-unconnected",
                            r,
                            "system input port is fed by a connection",
                        ));
                    }
                }
            }
        }
        for r in &self.system_outputs {
            match self.resolve(r) {
                Err(e) => out.push(Diagnostic::new("resolved-references", r, e.to_string())),
                Ok((_, port)) => {
                    if port.direction != Direction::Output {
                        out.push(Diagnostic::new(
                            "system-output-direction",
                            r,
                            "system output must be an output port",
                        ));
                    }
                    if self.connections.iter().any(|c| &c.from == r) {
                        out.push(Diagnostic::new(
                            "system-output-unconnected",
                            r,
                            "system output port feeds a connection",
                        ));
                    }
                }
            }
        }

        out
    }

    /// Resolves a reference to the simple-component input ports it stands
    /// for, following inward delegations through composites.
    fn resolve_inputs(&self, r: &PortRef) -> Result<Vec<PortRef>, ModelError> {
        let (comp, _) = self.resolve(r)?;
        if comp.kind == ComponentKind::Simple {
            return Ok(vec![r.clone()]);
        }
        let mut out = Vec::new();
        for conn in &self.connections {
            if &conn.from == r && self.connection_role(conn) == Ok(ConnectionRole::DelegateIn) {
                out.extend(self.resolve_inputs(&conn.to)?);
            }
        }
        if out.is_empty() {
            return Err(ModelError::UnboundBoundaryPort { port: r.clone() });
        }
        Ok(out)
    }

    /// Resolves a reference to the simple-component output ports it stands
    /// for, following outward delegations through composites.
    fn resolve_outputs(&self, r: &PortRef) -> Result<Vec<PortRef>, ModelError> {
        let (comp, _) = self.resolve(r)?;
        if comp.kind == ComponentKind::Simple {
            return Ok(vec![r.clone()]);
        }
        let mut out = Vec::new();
        for conn in &self.connections {
            if &conn.to == r && self.connection_role(conn) == Ok(ConnectionRole::DelegateOut) {
                out.extend(self.resolve_outputs(&conn.from)?);
            }
        }
        if out.is_empty() {
            return Err(ModelError::UnboundBoundaryPort { port: r.clone() });
        }
        Ok(out)
    }

    /// Replaces composites by their simple components, rewriting every
    /// connection and boundary reference onto simple-component ports.
    ///
    /// Requires [`SystemModel::validate`] to be empty. Every composite
    /// boundary port must be bound to at least one inner port; fan-out and
    /// fan-in over delegations are both materialized as separate connections.
    pub fn flatten(&self) -> Result<SystemModel, ModelError> {
        if let Some(d) = self.validate().into_iter().next() {
            return Err(ModelError::Invalid(d));
        }

        // Every boundary port of every composite must have a binding, even if
        // nothing references it.
        for (c, _) in self.all_components() {
            if c.kind != ComponentKind::Composite {
                continue;
            }
            for p in &c.ports {
                let r = PortRef::new(&c.name, &p.name);
                match p.direction {
                    Direction::Input => self.resolve_inputs(&r)?,
                    Direction::Output => self.resolve_outputs(&r)?,
                };
            }
        }

        let components: Vec<Component> = self.simple_components().into_iter().cloned().collect();

        let mut connections = BTreeSet::new();
        for conn in &self.connections {
            match self.connection_role(conn) {
                Ok(ConnectionRole::Peer) => {
                    for from in self.resolve_outputs(&conn.from)? {
                        for to in self.resolve_inputs(&conn.to)? {
                            connections.insert(Connection::new(from.clone(), to));
                        }
                    }
                }
                // Delegations are absorbed into the rewritten peer edges.
                Ok(_) => {}
                Err(d) => return Err(ModelError::Invalid(d)),
            }
        }

        let mut system_inputs = Vec::new();
        for r in &self.system_inputs {
            system_inputs.extend(self.resolve_inputs(r)?);
        }
        let mut system_outputs = Vec::new();
        for r in &self.system_outputs {
            system_outputs.extend(self.resolve_outputs(r)?);
        }

        Ok(SystemModel {
            name: self.name.clone(),
            components,
            connections: connections.into_iter().collect(),
            system_inputs,
            system_outputs,
        })
    }

    /// True if the model contains no composite components.
    pub fn is_flat(&self) -> bool {
        self.all_components()
            .iter()
            .all(|(c, _)| c.kind == ComponentKind::Simple)
    }
}

fn conn_label(conn: &Connection) -> String {
    format!("{} -> {}", conn.from, conn.to)
}
