//! Deterministic time-series simulation of isolated components.
//!
//! Signals are piecewise-constant: a sample `(t, v)` holds until the next
//! sample (and `0 V` before the first one). [`isolate`] wraps a simple
//! component in a [`TestBench`] — one stub per input port, one probe per
//! output port — and [`TestBench::simulate`] runs the component's registered
//! behavior model over stub inputs, returning the probe recordings.
//!
//! The built-in `irrigation_channel` model drives one output per input
//! through a charge integrator: the clamped drive voltage accumulates charge
//! until a threshold switches the output on, and the output releases a fixed
//! delay after the drive returns to zero. The defaults reproduce a 30 µs
//! turn-on and 60 µs turn-off lag for a full 5 V step.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Component, ComponentKind, SystemModel};

#[derive(Debug, Error)]
pub enum SignalError {
    #[error("time series CSV error at line {line}: {message}")]
    Csv { line: usize, message: String },
    #[error("timestamps must be strictly increasing (sample {index} at t={t})")]
    NonMonotonicTime { index: usize, t: f64 },
    #[error("component `{0}` is composite; only simple components can be isolated")]
    CompositeComponent(String),
    #[error("component `{component}` has no registered behavior model{detail}")]
    MissingBehavior { component: String, detail: String },
    #[error("component `{0}` has no output ports; nothing to observe")]
    NoOutputs(String),
    #[error("missing input series for port `{0}`")]
    MissingInput(String),
    #[error("input series for `{port}` ends at t={end}, beyond the horizon {horizon}")]
    BeyondHorizon { port: String, end: f64, horizon: f64 },
    #[error("behavior model parameter `{0}` must be positive")]
    BadParameter(&'static str),
}

/// An ordered sequence of `(t seconds, v volts)` samples with strictly
/// increasing timestamps, read as a piecewise-constant signal.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TimeSeries {
    samples: Vec<(f64, f64)>,
}

impl TimeSeries {
    pub fn new(samples: Vec<(f64, f64)>) -> Result<TimeSeries, SignalError> {
        for (i, w) in samples.windows(2).enumerate() {
            if w[1].0 <= w[0].0 {
                return Err(SignalError::NonMonotonicTime {
                    index: i + 1,
                    t: w[1].0,
                });
            }
        }
        Ok(TimeSeries { samples })
    }

    /// Fixture helper; panics if the samples are not in time order.
    pub fn step(samples: &[(f64, f64)]) -> TimeSeries {
        TimeSeries::new(samples.to_vec()).expect("step fixture must be ordered")
    }

    pub fn samples(&self) -> &[(f64, f64)] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn end_time(&self) -> f64 {
        self.samples.last().map(|s| s.0).unwrap_or(0.0)
    }

    /// Piecewise-constant lookup; `0` before the first sample.
    pub fn value_at(&self, t: f64) -> f64 {
        let mut v = 0.0;
        for &(st, sv) in &self.samples {
            if st <= t {
                v = sv;
            } else {
                break;
            }
        }
        v
    }

    /// CSV with a `t,v` header. Values are printed with shortest-roundtrip
    /// precision, so re-reading reproduces the series exactly.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,v\n");
        for (t, v) in &self.samples {
            out.push_str(&format!("{t},{v}\n"));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<TimeSeries, SignalError> {
        let mut samples = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if idx == 0 {
                let header = line.to_ascii_lowercase().replace(' ', "");
                if header != "t,v" {
                    return Err(SignalError::Csv {
                        line: 1,
                        message: format!("expected header `t,v`, got `{line}`"),
                    });
                }
                continue;
            }
            let (t, v) = line.split_once(',').ok_or_else(|| SignalError::Csv {
                line: idx + 1,
                message: "expected `t,v`".to_string(),
            })?;
            let parse = |s: &str| -> Result<f64, SignalError> {
                s.trim().parse().map_err(|_| SignalError::Csv {
                    line: idx + 1,
                    message: format!("not a number: `{s}`"),
                })
            };
            samples.push((parse(t)?, parse(v)?));
        }
        TimeSeries::new(samples)
    }
}

/// A reference run of an isolated component: the outputs are always produced
/// by [`TestBench::simulate`], never hand-authored.
#[derive(Debug, Clone, Serialize)]
pub struct BaseExecution {
    pub inputs: BTreeMap<String, TimeSeries>,
    pub outputs: BTreeMap<String, TimeSeries>,
    pub horizon: f64,
}

impl BaseExecution {
    pub fn new(
        bench: &TestBench,
        inputs: BTreeMap<String, TimeSeries>,
        horizon: f64,
    ) -> Result<BaseExecution, SignalError> {
        let outputs = bench.simulate(&inputs, horizon)?;
        Ok(BaseExecution {
            inputs,
            outputs,
            horizon,
        })
    }
}

/// A pure, deterministic transfer function from input series to output
/// series over a horizon.
pub trait BehaviorModel: Send + Sync {
    fn name(&self) -> &str;

    fn transfer(
        &self,
        inputs: &BTreeMap<String, TimeSeries>,
        horizon: f64,
    ) -> BTreeMap<String, TimeSeries>;
}

type ModelFactory =
    fn(&Component, &BTreeMap<String, f64>) -> Result<Box<dyn BehaviorModel>, SignalError>;

/// Behavior models by name, as referenced from a model file's `behavior`
/// field.
pub struct BehaviorRegistry {
    factories: BTreeMap<String, ModelFactory>,
}

impl BehaviorRegistry {
    pub fn empty() -> Self {
        BehaviorRegistry {
            factories: BTreeMap::new(),
        }
    }

    /// The built-in models: `irrigation_channel` and `passthrough`.
    pub fn standard() -> Self {
        let mut reg = Self::empty();
        reg.register("irrigation_channel", |component, params| {
            Ok(Box::new(IrrigationChannelModel::for_component(component, params)?))
        });
        reg.register("passthrough", |component, _| {
            Ok(Box::new(PassthroughModel {
                pairs: channel_pairs(component),
            }))
        });
        reg
    }

    pub fn register(&mut self, name: &str, factory: ModelFactory) {
        self.factories.insert(name.to_string(), factory);
    }

    pub fn instantiate(&self, component: &Component) -> Result<Box<dyn BehaviorModel>, SignalError> {
        let name = component.behavior.as_deref().ok_or_else(|| {
            SignalError::MissingBehavior {
                component: component.name.clone(),
                detail: String::new(),
            }
        })?;
        let factory = self.factories.get(name).ok_or_else(|| {
            SignalError::MissingBehavior {
                component: component.name.clone(),
                detail: format!(" (behavior `{name}` is not registered)"),
            }
        })?;
        factory(component, &component.params)
    }
}

/// Pairs the component's input and output ports by declaration order.
fn channel_pairs(component: &Component) -> Vec<(String, String)> {
    component
        .input_ports()
        .zip(component.output_ports())
        .map(|(i, o)| (i.name.clone(), o.name.clone()))
        .collect()
}

/// Copies each input to its paired output; test plumbing.
struct PassthroughModel {
    pairs: Vec<(String, String)>,
}

impl BehaviorModel for PassthroughModel {
    fn name(&self) -> &str {
        "passthrough"
    }

    fn transfer(
        &self,
        inputs: &BTreeMap<String, TimeSeries>,
        _horizon: f64,
    ) -> BTreeMap<String, TimeSeries> {
        self.pairs
            .iter()
            .map(|(i, o)| (o.clone(), inputs.get(i).cloned().unwrap_or_default()))
            .collect()
    }
}

/// Parameters of one charge-integrator channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    /// Charge threshold in volt-seconds; a steady 5 V drive turns the output
    /// on after `q / 5` seconds.
    pub q: f64,
    /// Release delay after the drive returns to zero, in seconds.
    pub d_off: f64,
    /// Drive voltages are clamped to this magnitude.
    pub v_clamp: f64,
    /// Output level while on.
    pub v_on: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        ChannelParams {
            q: 150e-6,
            d_off: 60e-6,
            v_clamp: 5.0,
            v_on: 5.0,
        }
    }
}

impl ChannelParams {
    pub fn from_map(params: &BTreeMap<String, f64>) -> Result<ChannelParams, SignalError> {
        let defaults = ChannelParams::default();
        let p = ChannelParams {
            q: params.get("q").copied().unwrap_or(defaults.q),
            d_off: params.get("d_off").copied().unwrap_or(defaults.d_off),
            v_clamp: params.get("v_clamp").copied().unwrap_or(defaults.v_clamp),
            v_on: params.get("v_on").copied().unwrap_or(defaults.v_on),
        };
        if !(p.q > 0.0) {
            return Err(SignalError::BadParameter("q"));
        }
        if !(p.d_off > 0.0) {
            return Err(SignalError::BadParameter("d_off"));
        }
        if !(p.v_clamp > 0.0) {
            return Err(SignalError::BadParameter("v_clamp"));
        }
        Ok(p)
    }
}

/// Independent charge-integrator channels, one per input/output port pair
/// (paired by declaration order).
pub struct IrrigationChannelModel {
    pairs: Vec<(String, String)>,
    params: ChannelParams,
}

impl IrrigationChannelModel {
    pub fn for_component(
        component: &Component,
        params: &BTreeMap<String, f64>,
    ) -> Result<IrrigationChannelModel, SignalError> {
        Ok(IrrigationChannelModel {
            pairs: channel_pairs(component),
            params: ChannelParams::from_map(params)?,
        })
    }
}

impl BehaviorModel for IrrigationChannelModel {
    fn name(&self) -> &str {
        "irrigation_channel"
    }

    fn transfer(
        &self,
        inputs: &BTreeMap<String, TimeSeries>,
        horizon: f64,
    ) -> BTreeMap<String, TimeSeries> {
        self.pairs
            .iter()
            .map(|(i, o)| {
                let input = inputs.get(i).cloned().unwrap_or_default();
                (
                    o.clone(),
                    irrigation_channel_response(&input, &self.params, horizon),
                )
            })
            .collect()
    }
}

/// The single-channel response.
///
/// While the clamped drive `min(|v|, v_clamp)` is positive, an internal
/// charge level rises at `drive` volt-seconds per second; the output switches
/// to `v_on` once the level reaches `q`. When the drive drops to zero the
/// level resets and the output returns to 0 V after `d_off`, unless the
/// channel re-qualifies first.
pub fn irrigation_channel_response(
    input: &TimeSeries,
    params: &ChannelParams,
    horizon: f64,
) -> TimeSeries {
    let mut out = vec![(0.0, 0.0)];
    let mut level = 0.0_f64;
    let mut on = false;
    let mut pending_off: Option<f64> = None;

    // Segment boundaries: t=0, every sample time, and the horizon.
    let mut boundaries: Vec<f64> = Vec::with_capacity(input.len() + 2);
    boundaries.push(0.0);
    for &(t, _) in input.samples() {
        if t > 0.0 && t < horizon {
            boundaries.push(t);
        }
    }
    boundaries.push(horizon);
    boundaries.dedup();

    fn emit(out: &mut Vec<(f64, f64)>, horizon: f64, t: f64, v: f64) {
        if t <= horizon && out.last().map(|&(_, lv)| lv) != Some(v) {
            out.push((t, v));
        }
    }

    for w in boundaries.windows(2) {
        let (seg_start, seg_end) = (w[0], w[1]);
        let drive = input.value_at(seg_start).abs().min(params.v_clamp);

        if drive > 0.0 {
            // A scheduled release fires only if it lands in this segment and
            // strictly before the charge would re-qualify the output;
            // otherwise the resumed drive holds the output on.
            if on {
                if let Some(off_t) = pending_off.take() {
                    let requalify_t = seg_start + params.q / drive;
                    if off_t <= seg_end && off_t < requalify_t {
                        emit(&mut out, horizon, off_t, 0.0);
                        on = false;
                    }
                }
            }
            if !on {
                let turn_on = seg_start + (params.q - level) / drive;
                if turn_on <= seg_end {
                    emit(&mut out, horizon, turn_on, params.v_on);
                    on = true;
                } else {
                    level += drive * (seg_end - seg_start);
                }
            }
        } else {
            level = 0.0;
            if on {
                let off_t = *pending_off.get_or_insert(seg_start + params.d_off);
                if off_t <= seg_end {
                    emit(&mut out, horizon, off_t, 0.0);
                    on = false;
                    pending_off = None;
                }
            }
        }
    }

    TimeSeries::new(out).expect("channel events are emitted in time order")
}

/// Stub feeding one input port.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Stub {
    pub name: String,
    pub port: String,
}

/// Probe recording one output port.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Probe {
    pub name: String,
    pub port: String,
}

/// An isolated component: original connections dropped, a stub on every
/// input, a probe on every output. Benches are cheap; create one per
/// scenario and drop it.
pub struct TestBench {
    pub component: Component,
    pub stubs: Vec<Stub>,
    pub probes: Vec<Probe>,
    model: Box<dyn BehaviorModel>,
}

impl std::fmt::Debug for TestBench {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TestBench")
            .field("component", &self.component.name)
            .field("stubs", &self.stubs)
            .field("probes", &self.probes)
            .field("model", &self.model.name())
            .finish()
    }
}

impl TestBench {
    pub fn model_name(&self) -> &str {
        self.model.name()
    }

    pub fn input_ports(&self) -> Vec<String> {
        self.stubs.iter().map(|s| s.port.clone()).collect()
    }

    pub fn output_ports(&self) -> Vec<String> {
        self.probes.iter().map(|p| p.port.clone()).collect()
    }

    /// Runs the behavior model on stub inputs; returns probe recordings.
    pub fn simulate(
        &self,
        inputs: &BTreeMap<String, TimeSeries>,
        horizon: f64,
    ) -> Result<BTreeMap<String, TimeSeries>, SignalError> {
        for stub in &self.stubs {
            let series = inputs
                .get(&stub.port)
                .ok_or_else(|| SignalError::MissingInput(stub.port.clone()))?;
            if series.end_time() > horizon {
                return Err(SignalError::BeyondHorizon {
                    port: stub.port.clone(),
                    end: series.end_time(),
                    horizon,
                });
            }
        }
        let mut outputs = self.model.transfer(inputs, horizon);
        // Probes record every output port, active or not.
        for probe in &self.probes {
            outputs.entry(probe.port.clone()).or_default();
        }
        outputs.retain(|port, _| self.probes.iter().any(|p| &p.port == port));
        Ok(outputs)
    }
}

/// Isolates a simple component with a registered behavior model.
pub fn isolate(
    model: &SystemModel,
    component: &str,
    registry: &BehaviorRegistry,
) -> Result<TestBench, SignalError> {
    let component = model
        .component(component)
        .map_err(|e| SignalError::MissingBehavior {
            component: component.to_string(),
            detail: format!(" ({e})"),
        })?;
    if component.kind == ComponentKind::Composite {
        return Err(SignalError::CompositeComponent(component.name.clone()));
    }
    if component.output_ports().next().is_none() {
        return Err(SignalError::NoOutputs(component.name.clone()));
    }
    let behavior = registry.instantiate(component)?;
    let stubs = component
        .input_ports()
        .map(|p| Stub {
            name: format!("GEN_{}", p.name.to_ascii_uppercase()),
            port: p.name.clone(),
        })
        .collect();
    let probes = component
        .output_ports()
        .map(|p| Probe {
            name: format!("PROBE_{}", p.name.to_ascii_uppercase()),
            port: p.name.clone(),
        })
        .collect();
    Ok(TestBench {
        component: component.clone(),
        stubs,
        probes,
        model: behavior,
    })
}
