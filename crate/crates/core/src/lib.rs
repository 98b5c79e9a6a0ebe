//! Failure-logic analysis and fault-injection testing toolkit.
//!
//! The crate is organized around three workflows that share one system model:
//!
//! 1. **Failure-logic analysis** — [`model`] describes the component/port
//!    architecture, [`rules`] parses and binds failure-propagation rules, and
//!    [`fla`] computes which failure tokens can reach each port.
//! 2. **Fault-tree analysis** — [`fault_tree`] turns an analysis result into
//!    one fault tree per failure reaching a target output, then reduces,
//!    extracts minimal cut sets, and quantifies.
//! 3. **Rule testing** — [`signal`] simulates isolated components on
//!    time-series inputs, [`inject`] mutates those inputs with typed failures
//!    and detects failures on outputs, and [`orchestrate`] drives whole
//!    discovery/validation campaigns and turns observations back into rules.
//!
//! [`reference`] holds the built-in irrigation-unit demo system used by the
//! CLI examples and the test suite.

pub mod fault_tree;
pub mod fla;
pub mod inject;
pub mod model;
pub mod orchestrate;
pub mod reference;
pub mod rules;
pub mod signal;

pub use fault_tree::{FaultTree, FtError};
pub use fla::{FlaError, FlaResult};
pub use inject::{InjectError, InjectionConfig, ObservationKind};
pub use model::{Component, Connection, ModelError, Port, PortRef, SystemModel};
pub use orchestrate::{Observation, OrchestrateError, RuleVerdict};
pub use rules::{BoundRuleSet, FailureType, FptcRule, RuleClass, RuleError};
pub use signal::{BaseExecution, SignalError, TestBench, TimeSeries};
