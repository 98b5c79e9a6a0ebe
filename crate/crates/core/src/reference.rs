//! Built-in smart-irrigation demo system.
//!
//! Nine components: three sensors feeding a computing board that drives the
//! two-channel irrigation unit, a status LED, and a gateway relaying to a
//! cloud server and a mobile phone. The irrigation unit carries the
//! `irrigation_channel` behavior model, so it can be isolated and exercised
//! by the test orchestrator.

use std::collections::BTreeMap;

use crate::model::{Component, Connection, Port, PortRef, SystemModel};
use crate::signal::TimeSeries;

fn sensor(name: &str) -> Component {
    Component::simple(name, vec![Port::input("env"), Port::output("out")])
}

/// The demo architecture.
pub fn irrigation_system() -> SystemModel {
    let board = Component::simple(
        "Board",
        vec![
            Port::input("Bd_in1"),
            Port::input("Bd_in2"),
            Port::input("Bd_in3"),
            Port::output("Bd_out1"),
            Port::output("Bd_out2"),
            Port::output("Bd_led"),
            Port::output("Bd_gw"),
        ],
    );
    let mut irrigation = Component::simple(
        "IrrigationUnit",
        vec![
            Port::input("Irr_in1"),
            Port::input("Irr_in2"),
            Port::output("Irr_out1"),
            Port::output("Irr_out2"),
        ],
    );
    irrigation.behavior = Some("irrigation_channel".to_string());
    let led = Component::simple("Led", vec![Port::input("in"), Port::output("status")]);
    let gateway = Component::simple("Gateway", vec![Port::input("in"), Port::output("up")]);
    let cloud = Component::simple("CloudServer", vec![Port::input("in"), Port::output("app")]);
    let phone = Component::simple("MobilePhone", vec![Port::input("in")]);

    let conn = |from: (&str, &str), to: (&str, &str)| {
        Connection::new(PortRef::new(from.0, from.1), PortRef::new(to.0, to.1))
    };

    SystemModel {
        name: "SmartIrrigationSystem".to_string(),
        components: vec![
            sensor("MoistureSensor"),
            sensor("TemperatureSensor"),
            sensor("HumiditySensor"),
            board,
            irrigation,
            led,
            gateway,
            cloud,
            phone,
        ],
        connections: vec![
            conn(("MoistureSensor", "out"), ("Board", "Bd_in1")),
            conn(("TemperatureSensor", "out"), ("Board", "Bd_in2")),
            conn(("HumiditySensor", "out"), ("Board", "Bd_in3")),
            conn(("Board", "Bd_out1"), ("IrrigationUnit", "Irr_in1")),
            conn(("Board", "Bd_out2"), ("IrrigationUnit", "Irr_in2")),
            conn(("Board", "Bd_led"), ("Led", "in")),
            conn(("Board", "Bd_gw"), ("Gateway", "in")),
            conn(("Gateway", "up"), ("CloudServer", "in")),
            conn(("CloudServer", "app"), ("MobilePhone", "in")),
        ],
        system_inputs: vec![
            PortRef::new("MoistureSensor", "env"),
            PortRef::new("TemperatureSensor", "env"),
            PortRef::new("HumiditySensor", "env"),
        ],
        system_outputs: vec![
            PortRef::new("IrrigationUnit", "Irr_out1"),
            PortRef::new("IrrigationUnit", "Irr_out2"),
            PortRef::new("Led", "status"),
        ],
    }
}

/// The reference stimulus: both irrigation inputs step to 5 V at
/// t = 15.00001 s and back to 0 V at t = 30.00001 s.
pub fn irrigation_base_inputs() -> BTreeMap<String, TimeSeries> {
    let series = TimeSeries::step(&[(0.0, 0.0), (15.00001, 5.0), (30.00001, 0.0)]);
    [
        ("Irr_in1".to_string(), series.clone()),
        ("Irr_in2".to_string(), series),
    ]
    .into_iter()
    .collect()
}

/// The hand-written irrigation-unit rules used by the validation demo.
pub fn irrigation_declared_rules() -> &'static str {
    "\
# Declared failure behavior of the irrigation unit.
component IrrigationUnit
Irr_in1.omission, Irr_in2.omission -> Irr_out1.omission, Irr_out2.omission;
Irr_in1.early, Irr_in2.early -> Irr_out1.commission, Irr_out2.commission;
Irr_in1.late, Irr_in2.late -> Irr_out1.commission, Irr_out2.commission;
Irr_in1.valueSubtle, Irr_in2.valueSubtle -> Irr_out1.early, Irr_out2.early;
Irr_in1.valueSubtle, Irr_in2.valueSubtle -> Irr_out1.late, Irr_out2.late;
"
}
