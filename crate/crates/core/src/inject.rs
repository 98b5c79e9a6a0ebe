//! Failure injectors and detectors over time series.
//!
//! An injector minimally mutates one sample of an input series so that it
//! embodies a failure type; a detector compares a base series against a
//! mutated one and names the failure it sees. Both are parameterized by
//! [`InjectionConfig`]: timing tolerance `epsilon_t`, value tolerance
//! `epsilon_v`, and the accepted value range `[v_min, v_max]`.
//!
//! Detection runs in two passes. Value failures are read off sample pairs at
//! identical timestamps (an out-of-range value is `ValueCoarse`, an in-range
//! value off by more than `epsilon_v` is `ValueSubtle`); this must happen
//! before any interval alignment because a low-voltage mutation can suppress
//! the activation entirely. Timing failures are then read off activation
//! intervals matched by ordinal position — mismatched activation counts are
//! `Unclassified`, matched onsets shifted beyond `epsilon_t` are `Early` or
//! `Late`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rules::FailureType;
use crate::signal::TimeSeries;

#[derive(Debug, Error)]
pub enum InjectError {
    #[error("failure type `{0}` has no injector")]
    Unsupported(FailureType),
    #[error("series has no non-zero sample to mutate")]
    NoMutationSite,
    #[error("cannot satisfy the {failure} constraint: {reason}")]
    Unsatisfiable { failure: FailureType, reason: String },
    #[error("config error: {0}")]
    BadConfig(String),
}

/// Which part of the legal mutation space to draw from. `Low` drives values
/// toward (or below) `v_min` and picks small time shifts, `High` toward (or
/// above) `v_max` with large shifts, `Random` uniformly over the legal set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MagnitudeStrategy {
    Low,
    High,
    #[default]
    Random,
}

impl FromStr for MagnitudeStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "low" => Ok(MagnitudeStrategy::Low),
            "high" => Ok(MagnitudeStrategy::High),
            "random" => Ok(MagnitudeStrategy::Random),
            other => Err(format!("unknown magnitude strategy `{other}`")),
        }
    }
}

/// Injector/detector tolerances and the signal domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InjectionConfig {
    pub epsilon_t: f64,
    pub epsilon_v: f64,
    pub v_min: f64,
    pub v_max: f64,
    pub horizon: f64,
    /// Threshold for activation extraction.
    pub theta: f64,
    pub strategy: MagnitudeStrategy,
    pub seed: u64,
}

impl Default for InjectionConfig {
    fn default() -> Self {
        InjectionConfig {
            epsilon_t: 1e-4,
            epsilon_v: 0.5,
            v_min: 0.0,
            v_max: 5.0,
            horizon: 45.0,
            theta: 2.5,
            strategy: MagnitudeStrategy::Random,
            seed: 0,
        }
    }
}

impl InjectionConfig {
    pub fn validate(&self) -> Result<(), InjectError> {
        if !(self.epsilon_t > 0.0) {
            return Err(InjectError::BadConfig("epsilon_t must be > 0".into()));
        }
        if !(self.epsilon_v > 0.0) {
            return Err(InjectError::BadConfig("epsilon_v must be > 0".into()));
        }
        if !(self.v_min < self.v_max) {
            return Err(InjectError::BadConfig("v_min must be < v_max".into()));
        }
        Ok(())
    }

    /// Reads either JSON or `key = value` lines (`#` comments allowed).
    pub fn from_config_text(text: &str) -> Result<InjectionConfig, InjectError> {
        let trimmed = text.trim_start();
        let cfg = if trimmed.starts_with('{') {
            serde_json::from_str(text).map_err(|e| InjectError::BadConfig(e.to_string()))?
        } else {
            let mut cfg = InjectionConfig::default();
            for (idx, raw) in text.lines().enumerate() {
                let line = raw.split('#').next().unwrap_or("").trim();
                if line.is_empty() {
                    continue;
                }
                let (key, value) = line.split_once('=').ok_or_else(|| {
                    InjectError::BadConfig(format!("line {}: expected `key = value`", idx + 1))
                })?;
                let key = key.trim();
                let value = value.trim();
                let num = |v: &str| -> Result<f64, InjectError> {
                    v.parse()
                        .map_err(|_| InjectError::BadConfig(format!("`{key}`: not a number")))
                };
                match key {
                    "epsilon_t" => cfg.epsilon_t = num(value)?,
                    "epsilon_v" => cfg.epsilon_v = num(value)?,
                    "v_min" => cfg.v_min = num(value)?,
                    "v_max" => cfg.v_max = num(value)?,
                    "horizon" => cfg.horizon = num(value)?,
                    "theta" => cfg.theta = num(value)?,
                    "seed" => {
                        cfg.seed = value.parse().map_err(|_| {
                            InjectError::BadConfig("`seed`: not an integer".into())
                        })?
                    }
                    "strategy" => {
                        cfg.strategy = value.parse().map_err(InjectError::BadConfig)?
                    }
                    other => {
                        return Err(InjectError::BadConfig(format!("unknown key `{other}`")))
                    }
                }
            }
            cfg
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// The mutation applied at an injection site.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "amount", rename_all = "kebab-case")]
pub enum Delta {
    /// No change (a `noFailure` injection).
    Identity,
    /// Seconds added to the sample's timestamp (negative = earlier).
    TimeShift(f64),
    /// The sample's new value.
    ValueSet(f64),
}

/// Where and how a series was mutated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InjectionSite {
    pub failure: FailureType,
    pub sample_index: usize,
    pub delta: Delta,
}

/// What a detector reports for one output port.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum ObservationKind {
    Early,
    Late,
    ValueCoarse,
    ValueSubtle,
    NoFailure,
    /// Divergence outside the four detectable types, e.g. differing
    /// activation counts.
    Unclassified,
}

impl ObservationKind {
    pub fn as_failure(self) -> Option<FailureType> {
        match self {
            ObservationKind::Early => Some(FailureType::Early),
            ObservationKind::Late => Some(FailureType::Late),
            ObservationKind::ValueCoarse => Some(FailureType::ValueCoarse),
            ObservationKind::ValueSubtle => Some(FailureType::ValueSubtle),
            ObservationKind::NoFailure => Some(FailureType::NoFailure),
            ObservationKind::Unclassified => None,
        }
    }

    pub fn from_failure(f: FailureType) -> Option<ObservationKind> {
        match f {
            FailureType::Early => Some(ObservationKind::Early),
            FailureType::Late => Some(ObservationKind::Late),
            FailureType::ValueCoarse => Some(ObservationKind::ValueCoarse),
            FailureType::ValueSubtle => Some(ObservationKind::ValueSubtle),
            FailureType::NoFailure => Some(ObservationKind::NoFailure),
            _ => None,
        }
    }
}

impl fmt::Display for ObservationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ObservationKind::Early => "early",
            ObservationKind::Late => "late",
            ObservationKind::ValueCoarse => "valueCoarse",
            ObservationKind::ValueSubtle => "valueSubtle",
            ObservationKind::NoFailure => "noFailure",
            ObservationKind::Unclassified => "unclassified",
        };
        f.write_str(s)
    }
}

/// The default mutation site: the first sample carrying a non-zero value
/// (the first rising transition for step signals).
fn mutation_site(ts: &TimeSeries) -> Result<usize, InjectError> {
    ts.samples()
        .iter()
        .position(|&(_, v)| v != 0.0)
        .ok_or(InjectError::NoMutationSite)
}

/// Bounds for a time shift at `index` that keep timestamps strictly
/// increasing: the open interval up to the gap toward the affected neighbor.
fn shift_gap(ts: &TimeSeries, index: usize, cfg: &InjectionConfig, earlier: bool) -> f64 {
    let samples = ts.samples();
    let t = samples[index].0;
    if earlier {
        if index == 0 {
            t
        } else {
            t - samples[index - 1].0
        }
    } else if index + 1 < samples.len() {
        samples[index + 1].0 - t
    } else {
        (cfg.horizon - t).max(0.0)
    }
}

/// Picks a magnitude in the open interval `(lo, hi)` per strategy.
fn pick_in_interval(
    lo: f64,
    hi: f64,
    strategy: MagnitudeStrategy,
    rng: &mut impl Rng,
) -> Option<f64> {
    if !(hi > lo) {
        return None;
    }
    let span = hi - lo;
    let x = match strategy {
        MagnitudeStrategy::Low => lo + 0.05 * span,
        MagnitudeStrategy::High => lo + 0.95 * span,
        MagnitudeStrategy::Random => lo + rng.gen_range(0.01..0.99) * span,
    };
    Some(x)
}

fn apply_time_shift(
    ts: &TimeSeries,
    index: usize,
    shift: f64,
    failure: FailureType,
) -> (TimeSeries, InjectionSite) {
    let mut samples = ts.samples().to_vec();
    samples[index].0 += shift;
    let mutated = TimeSeries::new(samples).expect("shift is bounded by the neighbor gap");
    (
        mutated,
        InjectionSite {
            failure,
            sample_index: index,
            delta: Delta::TimeShift(shift),
        },
    )
}

fn apply_value_set(
    ts: &TimeSeries,
    index: usize,
    value: f64,
    failure: FailureType,
) -> (TimeSeries, InjectionSite) {
    let mut samples = ts.samples().to_vec();
    samples[index].1 = value;
    let mutated = TimeSeries::new(samples).expect("value mutation keeps timestamps");
    (
        mutated,
        InjectionSite {
            failure,
            sample_index: index,
            delta: Delta::ValueSet(value),
        },
    )
}

/// Legal `valueCoarse` result: outside the accepted range, moved by more
/// than `epsilon_v`.
fn coarse_ok(v: f64, original: f64, cfg: &InjectionConfig) -> bool {
    (v < cfg.v_min || v > cfg.v_max) && (v - original).abs() > cfg.epsilon_v
}

/// Legal `valueSubtle` result: moved by more than `epsilon_v` while the
/// magnitude stays inside the accepted range.
fn subtle_ok(v: f64, original: f64, cfg: &InjectionConfig) -> bool {
    (v - original).abs() > cfg.epsilon_v && v.abs() >= cfg.v_min && v.abs() <= cfg.v_max
}

/// Mutates `ts` to embody failure `f`. The returned site records the sample
/// index and the applied delta; sample count and time ordering are always
/// preserved.
pub fn inject(
    ts: &TimeSeries,
    f: FailureType,
    cfg: &InjectionConfig,
    rng: &mut impl Rng,
) -> Result<(TimeSeries, InjectionSite), InjectError> {
    cfg.validate()?;
    if f == FailureType::NoFailure {
        return Ok((
            ts.clone(),
            InjectionSite {
                failure: f,
                sample_index: 0,
                delta: Delta::Identity,
            },
        ));
    }
    let index = mutation_site(ts)?;
    let original = ts.samples()[index].1;

    match f {
        FailureType::Early | FailureType::Late => {
            let earlier = f == FailureType::Early;
            let gap = shift_gap(ts, index, cfg, earlier);
            let x = pick_in_interval(cfg.epsilon_t, gap, cfg.strategy, rng).ok_or_else(|| {
                InjectError::Unsatisfiable {
                    failure: f,
                    reason: format!(
                        "neighbor gap {gap} leaves no shift above epsilon_t {}",
                        cfg.epsilon_t
                    ),
                }
            })?;
            Ok(apply_time_shift(ts, index, if earlier { -x } else { x }, f))
        }
        FailureType::ValueCoarse => {
            let spread = 0.3 * (cfg.v_max - cfg.v_min);
            let value = match cfg.strategy {
                MagnitudeStrategy::Low => {
                    let v = cfg.v_min - cfg.epsilon_v;
                    if coarse_ok(v, original, cfg) {
                        v
                    } else {
                        original - 1.5 * cfg.epsilon_v
                    }
                }
                MagnitudeStrategy::High => {
                    let v = cfg.v_max + cfg.epsilon_v;
                    if coarse_ok(v, original, cfg) {
                        v
                    } else {
                        original + 1.5 * cfg.epsilon_v
                    }
                }
                MagnitudeStrategy::Random => {
                    let low_side = rng.gen_bool(0.5);
                    if low_side {
                        let hi = (cfg.v_min).min(original - cfg.epsilon_v);
                        hi - rng.gen_range(0.0..spread) - 1e-9
                    } else {
                        let lo = (cfg.v_max).max(original + cfg.epsilon_v);
                        lo + rng.gen_range(0.0..spread) + 1e-9
                    }
                }
            };
            if !coarse_ok(value, original, cfg) {
                return Err(InjectError::Unsatisfiable {
                    failure: f,
                    reason: format!("no out-of-range value beyond epsilon_v from {original}"),
                });
            }
            Ok(apply_value_set(ts, index, value, f))
        }
        FailureType::ValueSubtle => {
            let value = match cfg.strategy {
                MagnitudeStrategy::Low => [
                    cfg.v_min + cfg.epsilon_v,
                    original - 1.5 * cfg.epsilon_v,
                    original + 1.5 * cfg.epsilon_v,
                ]
                .into_iter()
                .find(|v| subtle_ok(*v, original, cfg)),
                MagnitudeStrategy::High => [
                    cfg.v_max,
                    cfg.v_max - 1.5 * cfg.epsilon_v,
                    original + 1.5 * cfg.epsilon_v,
                    original - 1.5 * cfg.epsilon_v,
                ]
                .into_iter()
                .find(|v| subtle_ok(*v, original, cfg)),
                MagnitudeStrategy::Random => {
                    let mut found = None;
                    for _ in 0..100 {
                        let v = rng.gen_range(cfg.v_min..=cfg.v_max);
                        if subtle_ok(v, original, cfg) {
                            found = Some(v);
                            break;
                        }
                    }
                    found.or_else(|| {
                        [
                            cfg.v_min + cfg.epsilon_v,
                            cfg.v_max,
                            original - 1.5 * cfg.epsilon_v,
                            original + 1.5 * cfg.epsilon_v,
                        ]
                        .into_iter()
                        .find(|v| subtle_ok(*v, original, cfg))
                    })
                }
            };
            let value = value.ok_or_else(|| InjectError::Unsatisfiable {
                failure: f,
                reason: format!(
                    "range [{}, {}] leaves no in-range value beyond epsilon_v {} from {original}",
                    cfg.v_min, cfg.v_max, cfg.epsilon_v
                ),
            })?;
            Ok(apply_value_set(ts, index, value, f))
        }
        FailureType::Omission | FailureType::Commission | FailureType::Wildcard => {
            Err(InjectError::Unsupported(f))
        }
        FailureType::NoFailure => unreachable!("handled above"),
    }
}

/// A maximal interval during which the signal holds at or above the
/// threshold. `t_off` is infinite when the series ends active.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Activation {
    pub t_on: f64,
    pub t_off: f64,
    /// The value at interval onset.
    pub level: f64,
}

/// Maximal intervals where the piecewise-constant value is `>= theta`.
pub fn extract_activations(ts: &TimeSeries, theta: f64) -> Vec<Activation> {
    let mut out = Vec::new();
    let mut current: Option<Activation> = None;
    for &(t, v) in ts.samples() {
        match (&mut current, v >= theta) {
            (None, true) => {
                current = Some(Activation {
                    t_on: t,
                    t_off: f64::INFINITY,
                    level: v,
                })
            }
            (Some(act), false) => {
                act.t_off = t;
                out.push(*act);
                current = None;
            }
            _ => {}
        }
    }
    if let Some(act) = current {
        out.push(act);
    }
    out
}

/// Sample pairs at identical timestamps where the mutated value differs:
/// out-of-range values are coarse, in-range deviations beyond `epsilon_v`
/// subtle. Time-shifted samples have no equal-time partner and are skipped.
fn value_anomaly(base: &TimeSeries, mutated: &TimeSeries, cfg: &InjectionConfig) -> Option<ObservationKind> {
    let mut subtle = false;
    for &(tb, vb) in base.samples() {
        for &(tm, vm) in mutated.samples() {
            if tm != tb || vm == vb {
                continue;
            }
            if vm < cfg.v_min || vm > cfg.v_max {
                return Some(ObservationKind::ValueCoarse);
            }
            if (vb - vm).abs() > cfg.epsilon_v {
                subtle = true;
            }
        }
    }
    subtle.then_some(ObservationKind::ValueSubtle)
}

/// Classifies the divergence between a base and a mutated series. See the
/// module docs for the two-pass scheme and precedence.
pub fn detect(base: &TimeSeries, mutated: &TimeSeries, cfg: &InjectionConfig) -> ObservationKind {
    if let Some(kind) = value_anomaly(base, mutated, cfg) {
        return kind;
    }

    let base_acts = extract_activations(base, cfg.theta);
    let mut_acts = extract_activations(mutated, cfg.theta);
    if base_acts.len() != mut_acts.len() {
        return ObservationKind::Unclassified;
    }

    // Value checks at matched intervals, for divergences the sample-pair
    // pass cannot see (the detectors' level comparison).
    for (b, m) in base_acts.iter().zip(&mut_acts) {
        if m.level != b.level {
            if m.level < cfg.v_min || m.level > cfg.v_max {
                return ObservationKind::ValueCoarse;
            }
            if (b.level - m.level).abs() > cfg.epsilon_v {
                return ObservationKind::ValueSubtle;
            }
        }
    }

    // Timing: the first matched activation whose onset moved beyond the
    // tolerance decides.
    for (b, m) in base_acts.iter().zip(&mut_acts) {
        if m.t_on < b.t_on - cfg.epsilon_t {
            return ObservationKind::Early;
        }
        if m.t_on > b.t_on + cfg.epsilon_t {
            return ObservationKind::Late;
        }
    }
    ObservationKind::NoFailure
}
