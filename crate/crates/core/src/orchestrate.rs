//! Campaign driver: pattern enumeration, repeated mutated executions,
//! observation logging, rule generation, and rule validation.
//!
//! Discovery mode walks every combination of failure types over the input
//! ports; validation mode replays only the left-hand-side patterns of
//! declared rules. Each (pattern, repetition) scenario draws its own seeded
//! generator, so logs are byte-identical for a given configuration no matter
//! how many worker threads run the scenarios.

use std::collections::{BTreeMap, BTreeSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::inject::{
    detect, inject, InjectError, InjectionConfig, InjectionSite, MagnitudeStrategy,
    ObservationKind,
};
use crate::rules::{FailureType, FptcRule, RuleTerm};
use crate::signal::{BaseExecution, SignalError, TestBench};

#[derive(Debug, Error)]
pub enum OrchestrateError {
    #[error("pattern has {pattern} entries but the bench has {ports} input ports")]
    PatternArity { pattern: usize, ports: usize },
    #[error("observation log line {line}: {message}")]
    Log { line: usize, message: String },
    #[error("observations cover no component (empty log)")]
    EmptyLog,
    #[error("observations mix components `{0}` and `{1}`")]
    MixedComponents(String, String),
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error(transparent)]
    Inject(#[from] InjectError),
}

/// One failure type per input port, in bench port order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct InputPattern(pub Vec<FailureType>);

impl InputPattern {
    pub fn label(&self) -> String {
        self.0
            .iter()
            .map(|f| f.to_string())
            .collect::<Vec<_>>()
            .join("-")
    }
}

/// Pattern enumeration mode.
pub enum PatternMode<'a> {
    /// Every tuple over `types` (plus `noFailure` unless excluded), minus the
    /// all-noFailure tuple, in lexicographic order.
    Discovery {
        types: &'a [FailureType],
        n_ports: usize,
        include_nofailure: bool,
    },
    /// The distinct left-hand-side patterns of the rules, aligned with the
    /// bench input ports; ports a rule does not mention stay `noFailure`.
    Validation {
        rules: &'a [FptcRule],
        input_ports: &'a [String],
    },
}

pub fn enumerate_patterns(mode: &PatternMode<'_>) -> Vec<InputPattern> {
    match mode {
        PatternMode::Discovery {
            types,
            n_ports,
            include_nofailure,
        } => {
            let mut alphabet: Vec<FailureType> = types
                .iter()
                .copied()
                .filter(|f| *f != FailureType::NoFailure)
                .collect();
            alphabet.sort();
            alphabet.dedup();
            if *include_nofailure {
                alphabet.push(FailureType::NoFailure);
            }
            let mut out = Vec::new();
            let mut current = vec![FailureType::NoFailure; *n_ports];
            enumerate_tuples(&alphabet, &mut current, 0, &mut out);
            out.retain(|p| p.0.iter().any(|f| *f != FailureType::NoFailure));
            out
        }
        PatternMode::Validation { rules, input_ports } => {
            let mut seen = BTreeSet::new();
            let mut out = Vec::new();
            for rule in rules.iter() {
                let Some(pattern) = lhs_pattern(rule, input_ports) else {
                    continue;
                };
                if seen.insert(pattern.clone()) {
                    out.push(pattern);
                }
            }
            out
        }
    }
}

fn enumerate_tuples(
    alphabet: &[FailureType],
    current: &mut Vec<FailureType>,
    index: usize,
    out: &mut Vec<InputPattern>,
) {
    if index == current.len() {
        out.push(InputPattern(current.clone()));
        return;
    }
    for &f in alphabet {
        current[index] = f;
        enumerate_tuples(alphabet, current, index + 1, out);
    }
}

/// The rule's left-hand side as a per-port pattern; `None` if the rule
/// mentions a port the bench does not have.
fn lhs_pattern(rule: &FptcRule, input_ports: &[String]) -> Option<InputPattern> {
    let mut pattern = vec![FailureType::NoFailure; input_ports.len()];
    for term in &rule.lhs {
        let idx = input_ports.iter().position(|p| p == &term.port)?;
        pattern[idx] = term.failure;
    }
    Some(InputPattern(pattern))
}

fn rhs_tuple(rule: &FptcRule, output_ports: &[String]) -> Option<Vec<FailureType>> {
    let mut tuple = vec![FailureType::NoFailure; output_ports.len()];
    for term in &rule.rhs {
        let idx = output_ports.iter().position(|p| p == &term.port)?;
        tuple[idx] = term.failure;
    }
    Some(tuple)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObsStatus {
    Ok,
    Skipped,
}

/// One recorded scenario execution. Serialized as one JSON object per line
/// in observation logs; `v` is the schema version.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub v: u32,
    pub scenario: usize,
    pub component: String,
    pub input_ports: Vec<String>,
    pub output_ports: Vec<String>,
    pub pattern: Vec<FailureType>,
    pub rep: usize,
    pub stratum: MagnitudeStrategy,
    pub seed: u64,
    pub status: ObsStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    pub outputs: Vec<ObservationKind>,
    pub sites: Vec<InjectionSite>,
}

pub const OBSERVATION_SCHEMA_VERSION: u32 = 1;

/// Magnitude stratum for repetition `rep`: low, high, random, repeating.
pub fn stratum_for_rep(rep: usize) -> MagnitudeStrategy {
    match rep % 3 {
        0 => MagnitudeStrategy::Low,
        1 => MagnitudeStrategy::High,
        _ => MagnitudeStrategy::Random,
    }
}

fn scenario_seed(base_seed: u64, scenario: usize) -> u64 {
    // SplitMix64 over the scenario id, offset by the campaign seed.
    let mut z = base_seed
        .wrapping_add(0x9E3779B97F4A7C15u64.wrapping_mul(scenario as u64 + 1));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Runs every pattern for `reps` repetitions against the base execution.
/// Scenarios execute independently (in parallel when `jobs > 1`); the
/// returned log is always ordered by (pattern index, repetition).
pub fn run_experiment(
    bench: &TestBench,
    base: &BaseExecution,
    patterns: &[InputPattern],
    reps: usize,
    cfg: &InjectionConfig,
    jobs: usize,
) -> Result<Vec<Observation>, OrchestrateError> {
    let input_ports = bench.input_ports();
    let output_ports = bench.output_ports();
    for pattern in patterns {
        if pattern.0.len() != input_ports.len() {
            return Err(OrchestrateError::PatternArity {
                pattern: pattern.0.len(),
                ports: input_ports.len(),
            });
        }
    }

    let scenarios: Vec<(usize, usize, usize)> = (0..patterns.len())
        .flat_map(|p| (0..reps).map(move |r| (p * reps + r, p, r)))
        .collect();

    let run_one = |&(scenario, pattern_idx, rep): &(usize, usize, usize)| -> Observation {
        let pattern = &patterns[pattern_idx];
        let stratum = stratum_for_rep(rep);
        let seed = scenario_seed(cfg.seed, scenario);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scenario_cfg = InjectionConfig {
            strategy: stratum,
            ..*cfg
        };

        let mut observation = Observation {
            v: OBSERVATION_SCHEMA_VERSION,
            scenario,
            component: bench.component.name.clone(),
            input_ports: input_ports.clone(),
            output_ports: output_ports.clone(),
            pattern: pattern.0.clone(),
            rep,
            stratum,
            seed,
            status: ObsStatus::Ok,
            reason: None,
            outputs: Vec::new(),
            sites: Vec::new(),
        };

        let mut mutated_inputs = base.inputs.clone();
        for (port, failure) in input_ports.iter().zip(&pattern.0) {
            let series = &base.inputs[port];
            match inject(series, *failure, &scenario_cfg, &mut rng) {
                Ok((mutated, site)) => {
                    mutated_inputs.insert(port.clone(), mutated);
                    observation.sites.push(site);
                }
                Err(e) => {
                    observation.status = ObsStatus::Skipped;
                    observation.reason = Some(format!("injection on `{port}`: {e}"));
                    observation.sites.clear();
                    return observation;
                }
            }
        }

        match bench.simulate(&mutated_inputs, base.horizon) {
            Ok(outputs) => {
                observation.outputs = output_ports
                    .iter()
                    .map(|port| detect(&base.outputs[port], &outputs[port], &scenario_cfg))
                    .collect();
            }
            Err(e) => {
                observation.status = ObsStatus::Skipped;
                observation.reason = Some(format!("simulation: {e}"));
            }
        }
        observation
    };

    let mut observations: Vec<Observation> = if jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .expect("thread pool");
        pool.install(|| scenarios.par_iter().map(run_one).collect())
    } else {
        scenarios.iter().map(run_one).collect()
    };
    observations.sort_by_key(|o| o.scenario);
    Ok(observations)
}

/// One observation per line, schema-versioned JSON.
pub fn write_observations(observations: &[Observation]) -> String {
    let mut out = String::new();
    for obs in observations {
        out.push_str(&serde_json::to_string(obs).expect("observation serialization"));
        out.push('\n');
    }
    out
}

pub fn read_observations(text: &str) -> Result<Vec<Observation>, OrchestrateError> {
    text.lines()
        .enumerate()
        .filter(|(_, line)| !line.trim().is_empty())
        .map(|(idx, line)| {
            serde_json::from_str(line).map_err(|e| OrchestrateError::Log {
                line: idx + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

/// Rules learned from observations, plus the observations that had to be
/// left out because some output could not be classified.
#[derive(Debug, Clone, Serialize)]
pub struct GeneratedRules {
    pub rules: Vec<FptcRule>,
    pub excluded: Vec<ExcludedObservation>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExcludedObservation {
    pub scenario: usize,
    pub reason: String,
}

/// Emits one rule per distinct (pattern, observed output tuple) pair:
/// `LHS = pattern -> RHS = tuple`, with `noFailure` kept explicit on both
/// sides. Deduplicated and canonically ordered.
pub fn generate_rules(observations: &[Observation]) -> Result<GeneratedRules, OrchestrateError> {
    let component = observations
        .first()
        .map(|o| o.component.clone())
        .ok_or(OrchestrateError::EmptyLog)?;
    if let Some(other) = observations.iter().find(|o| o.component != component) {
        return Err(OrchestrateError::MixedComponents(
            component,
            other.component.clone(),
        ));
    }

    let mut excluded = Vec::new();
    let mut rules = BTreeSet::new();
    for obs in observations {
        if obs.status == ObsStatus::Skipped {
            excluded.push(ExcludedObservation {
                scenario: obs.scenario,
                reason: obs.reason.clone().unwrap_or_else(|| "skipped".into()),
            });
            continue;
        }
        let tuple: Option<Vec<FailureType>> =
            obs.outputs.iter().map(|k| k.as_failure()).collect();
        let Some(tuple) = tuple else {
            excluded.push(ExcludedObservation {
                scenario: obs.scenario,
                reason: "unclassified output".into(),
            });
            continue;
        };
        rules.insert(FptcRule {
            owner: Some(component.clone()),
            lhs: obs
                .input_ports
                .iter()
                .zip(&obs.pattern)
                .map(|(p, f)| RuleTerm::new(p, *f))
                .collect(),
            rhs: obs
                .output_ports
                .iter()
                .zip(&tuple)
                .map(|(p, f)| RuleTerm::new(p, *f))
                .collect(),
        });
    }
    Ok(GeneratedRules {
        rules: rules.into_iter().collect(),
        excluded,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VerdictStatus {
    Confirmed,
    Disproved,
    Unsupported,
    /// No observation covers the rule's left-hand side.
    Deferred,
}

/// Outcome of checking one declared rule against the observations.
#[derive(Debug, Clone, Serialize)]
pub struct RuleVerdict {
    pub rule: String,
    pub status: VerdictStatus,
    /// Observed output tuples under the rule's left-hand-side pattern.
    pub witnesses: Vec<Vec<ObservationKind>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Confirms or disproves each declared rule against the observations.
/// Rules with unsupported failure types (no injector/detector exists) are
/// marked `unsupported`; rules whose pattern was never exercised are
/// `deferred`. Confirmation requires the exact per-port output tuple to
/// appear among the observations for the rule's pattern.
pub fn validate_rules(
    declared: &[FptcRule],
    observations: &[Observation],
    input_ports: &[String],
    output_ports: &[String],
) -> Vec<RuleVerdict> {
    let mut by_pattern: BTreeMap<Vec<FailureType>, BTreeSet<Vec<ObservationKind>>> =
        BTreeMap::new();
    for obs in observations {
        if obs.status == ObsStatus::Ok && !obs.outputs.is_empty() {
            by_pattern
                .entry(obs.pattern.clone())
                .or_default()
                .insert(obs.outputs.clone());
        }
    }

    declared
        .iter()
        .map(|rule| {
            let text = rule.to_string();
            let unsupported = rule.lhs.iter().chain(&rule.rhs).find(|t| {
                matches!(
                    t.failure,
                    FailureType::Omission | FailureType::Commission | FailureType::Wildcard
                )
            });
            if let Some(term) = unsupported {
                return RuleVerdict {
                    rule: text,
                    status: VerdictStatus::Unsupported,
                    witnesses: Vec::new(),
                    note: Some(format!(
                        "no injector/detector for `{}`",
                        term.failure
                    )),
                };
            }
            let (Some(pattern), Some(expected)) = (
                lhs_pattern(rule, input_ports),
                rhs_tuple(rule, output_ports),
            ) else {
                return RuleVerdict {
                    rule: text,
                    status: VerdictStatus::Deferred,
                    witnesses: Vec::new(),
                    note: Some("rule names ports outside the bench".into()),
                };
            };
            let Some(observed) = by_pattern.get(&pattern.0) else {
                return RuleVerdict {
                    rule: text,
                    status: VerdictStatus::Deferred,
                    witnesses: Vec::new(),
                    note: Some("no observations cover this pattern".into()),
                };
            };
            let expected_kinds: Option<Vec<ObservationKind>> = expected
                .iter()
                .map(|f| ObservationKind::from_failure(*f))
                .collect();
            let confirmed =
                expected_kinds.is_some_and(|kinds| observed.contains(&kinds));
            RuleVerdict {
                rule: text,
                status: if confirmed {
                    VerdictStatus::Confirmed
                } else {
                    VerdictStatus::Disproved
                },
                witnesses: observed.iter().cloned().collect(),
                note: None,
            }
        })
        .collect()
}

/// Per-port propagation tag for the experiment report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PropagationTag {
    Propagated,
    Transformed,
    Masked,
}

/// Tags each output port: `propagated` when the failure kind carried over
/// unchanged, `masked` when an injected failure vanished, `transformed` when
/// the kind changed. Output ports are paired with input ports by position.
pub fn classify_observation(
    pattern: &[FailureType],
    outputs: &[ObservationKind],
) -> Result<Vec<PropagationTag>, OrchestrateError> {
    if pattern.len() != outputs.len() {
        return Err(OrchestrateError::PatternArity {
            pattern: pattern.len(),
            ports: outputs.len(),
        });
    }
    Ok(pattern
        .iter()
        .zip(outputs)
        .map(|(input, output)| {
            let out_failure = output.as_failure();
            match (*input, out_failure) {
                (FailureType::NoFailure, Some(FailureType::NoFailure)) => {
                    PropagationTag::Propagated
                }
                (FailureType::NoFailure, _) => PropagationTag::Transformed,
                (_, Some(FailureType::NoFailure)) => PropagationTag::Masked,
                (input_f, Some(out_f)) if input_f == out_f => PropagationTag::Propagated,
                _ => PropagationTag::Transformed,
            }
        })
        .collect())
}

/// Static comparison of two rule files.
#[derive(Debug, Clone, Serialize)]
pub struct RuleDiff {
    /// Declared rules that appear verbatim among the learned rules.
    pub confirmed: Vec<String>,
    /// Declared rules whose pattern was learned with different outputs.
    pub disproved: Vec<DisprovedRule>,
    /// Declared rules whose pattern never appears among the learned rules.
    pub uncovered: Vec<String>,
    /// Learned rules not declared.
    pub new: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DisprovedRule {
    pub rule: String,
    pub learned: Vec<String>,
}

pub fn diff_rules(declared: &[FptcRule], learned: &[FptcRule]) -> RuleDiff {
    let key = |r: &FptcRule| (r.lhs.clone(), r.rhs.clone());
    let learned_keys: BTreeSet<_> = learned.iter().map(key).collect();
    let declared_keys: BTreeSet<_> = declared.iter().map(key).collect();

    let mut confirmed = Vec::new();
    let mut disproved = Vec::new();
    let mut uncovered = Vec::new();
    for rule in declared {
        if learned_keys.contains(&key(rule)) {
            confirmed.push(rule.to_string());
            continue;
        }
        let same_lhs: Vec<String> = learned
            .iter()
            .filter(|l| l.lhs == rule.lhs)
            .map(|l| l.to_string())
            .collect();
        if same_lhs.is_empty() {
            uncovered.push(rule.to_string());
        } else {
            disproved.push(DisprovedRule {
                rule: rule.to_string(),
                learned: same_lhs,
            });
        }
    }
    let new = learned
        .iter()
        .filter(|l| !declared_keys.contains(&key(l)))
        .map(|l| l.to_string())
        .collect();
    RuleDiff {
        confirmed,
        disproved,
        uncovered,
        new,
    }
}
