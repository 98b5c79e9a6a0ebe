use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{Context as _, Result};
use clap::Args;

use flakit_core::inject::ObservationKind;
use flakit_core::orchestrate::{
    classify_observation, enumerate_patterns, run_experiment, validate_rules, write_observations,
    ObsStatus, Observation, PatternMode, RuleVerdict, VerdictStatus,
};
use flakit_core::rules::FailureType;
use flakit_core::signal::{isolate, BaseExecution, BehaviorRegistry, TestBench, TimeSeries};

use crate::context::{load_model, load_rules, read_file, write_file, Ctx};

#[derive(Args)]
pub struct DiscoverArgs {
    /// Model file (JSON).
    #[arg(long)]
    pub model: PathBuf,

    /// Component to isolate.
    #[arg(long)]
    pub component: String,

    /// Directory with one `<port>.csv` base input per input port.
    #[arg(long)]
    pub base: PathBuf,

    /// Repetitions per pattern (strata cycle low, high, random).
    #[arg(long, default_value_t = 3)]
    pub reps: usize,

    /// Failure types to combine.
    #[arg(long, value_delimiter = ',', default_value = "early,late,valueCoarse,valueSubtle")]
    pub types: Vec<String>,

    /// Exclude `noFailure` from the per-port alphabet (pure product grid).
    #[arg(long)]
    pub no_nofailure: bool,

    /// Observation log output (JSON lines).
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Args)]
pub struct ValidateArgs {
    /// Model file (JSON).
    #[arg(long)]
    pub model: PathBuf,

    /// Component to isolate.
    #[arg(long)]
    pub component: String,

    /// Declared rules to validate.
    #[arg(long)]
    pub rules: PathBuf,

    /// Directory with one `<port>.csv` base input per input port.
    #[arg(long)]
    pub base: PathBuf,

    /// Repetitions per pattern.
    #[arg(long, default_value_t = 3)]
    pub reps: usize,

    /// Verdict report output (JSON).
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

fn load_base(bench: &TestBench, dir: &Path, horizon: f64) -> Result<BaseExecution> {
    let mut inputs = BTreeMap::new();
    for port in bench.input_ports() {
        let path = dir.join(format!("{port}.csv"));
        let text = read_file(&path)?;
        let series = TimeSeries::from_csv(&text)
            .with_context(|| format!("in base series {}", path.display()))?;
        inputs.insert(port, series);
    }
    Ok(BaseExecution::new(bench, inputs, horizon)?)
}

fn parse_types(names: &[String]) -> Result<Vec<FailureType>> {
    names
        .iter()
        .map(|n| n.parse().map_err(|e: String| anyhow::anyhow!(e)))
        .collect()
}

/// Per-pattern summary: the set of distinct output tuples, as in the
/// propagation report.
fn summarize(
    observations: &[Observation],
) -> BTreeMap<Vec<FailureType>, Vec<Vec<ObservationKind>>> {
    let mut summary: BTreeMap<Vec<FailureType>, Vec<Vec<ObservationKind>>> = BTreeMap::new();
    for obs in observations {
        if obs.status != ObsStatus::Ok {
            continue;
        }
        let entry = summary.entry(obs.pattern.clone()).or_default();
        if !entry.contains(&obs.outputs) {
            entry.push(obs.outputs.clone());
        }
    }
    summary
}

fn kinds_label(kinds: &[ObservationKind]) -> String {
    kinds
        .iter()
        .map(|k| k.to_string())
        .collect::<Vec<_>>()
        .join("-")
}

fn pattern_label(pattern: &[FailureType]) -> String {
    pattern
        .iter()
        .map(|f| f.to_string())
        .collect::<Vec<_>>()
        .join("-")
}

pub fn discover(ctx: &Ctx, args: &DiscoverArgs) -> Result<bool> {
    let model = load_model(&args.model)?;
    let bench = isolate(&model, &args.component, &BehaviorRegistry::standard())?;
    let base = load_base(&bench, &args.base, ctx.config.horizon)?;
    let types = parse_types(&args.types)?;
    let patterns = enumerate_patterns(&PatternMode::Discovery {
        types: &types,
        n_ports: bench.input_ports().len(),
        include_nofailure: !args.no_nofailure,
    });
    let observations = run_experiment(&bench, &base, &patterns, args.reps, &ctx.config, ctx.jobs)?;

    if let Some(out) = &args.output {
        write_file(out, &write_observations(&observations))?;
    }

    let skipped: Vec<&Observation> = observations
        .iter()
        .filter(|o| o.status == ObsStatus::Skipped)
        .collect();
    let unclassified = observations
        .iter()
        .filter(|o| o.outputs.contains(&ObservationKind::Unclassified))
        .count();
    let summary = summarize(&observations);

    if ctx.json() {
        let rows: Vec<serde_json::Value> = summary
            .iter()
            .map(|(pattern, tuples)| {
                serde_json::json!({
                    "in": pattern_label(pattern),
                    "out": tuples.iter().map(|t| kinds_label(t)).collect::<Vec<_>>(),
                })
            })
            .collect();
        println!(
            "{}",
            serde_json::to_string_pretty(&serde_json::json!({
                "component": args.component,
                "scenarios": observations.len(),
                "skipped": skipped.len(),
                "unclassified": unclassified,
                "propagation": rows,
            }))?
        );
    } else {
        println!(
            "{} scenarios ({} patterns x {} reps), {} skipped",
            observations.len(),
            patterns.len(),
            args.reps,
            skipped.len()
        );
        println!("{:<40} OUT failures", "IN failures");
        for (pattern, tuples) in &summary {
            let mut labels = Vec::new();
            for tuple in tuples {
                let tags = classify_observation(pattern, tuple)
                    .map(|tags| {
                        tags.iter()
                            .map(|t| format!("{t:?}").chars().next().unwrap().to_string())
                            .collect::<Vec<_>>()
                            .join("")
                    })
                    .unwrap_or_default();
                labels.push(format!("{} [{}]", kinds_label(tuple), tags));
            }
            println!("{:<40} {}", pattern_label(pattern), labels.join(", "));
        }
        for obs in &skipped {
            println!(
                "skipped scenario {}: {}",
                obs.scenario,
                obs.reason.as_deref().unwrap_or("unknown")
            );
        }
    }
    Ok(!skipped.is_empty() || unclassified > 0)
}

fn verdict_counts(verdicts: &[RuleVerdict]) -> BTreeMap<&'static str, usize> {
    let mut counts = BTreeMap::new();
    for v in verdicts {
        let key = match v.status {
            VerdictStatus::Confirmed => "confirmed",
            VerdictStatus::Disproved => "disproved",
            VerdictStatus::Unsupported => "unsupported",
            VerdictStatus::Deferred => "deferred",
        };
        *counts.entry(key).or_insert(0) += 1;
    }
    counts
}

pub fn validate(ctx: &Ctx, args: &ValidateArgs) -> Result<bool> {
    let model = load_model(&args.model)?;
    let bench = isolate(&model, &args.component, &BehaviorRegistry::standard())?;
    let base = load_base(&bench, &args.base, ctx.config.horizon)?;
    let declared = load_rules(&args.rules)?;

    let input_ports = bench.input_ports();
    let output_ports = bench.output_ports();
    let patterns = enumerate_patterns(&PatternMode::Validation {
        rules: &declared,
        input_ports: &input_ports,
    });
    let observations = run_experiment(&bench, &base, &patterns, args.reps, &ctx.config, ctx.jobs)?;
    let verdicts = validate_rules(&declared, &observations, &input_ports, &output_ports);
    let counts = verdict_counts(&verdicts);

    let report = serde_json::json!({
        "component": args.component,
        "rules": verdicts,
        "summary": counts,
    });
    if let Some(out) = &args.output {
        write_file(out, &(serde_json::to_string_pretty(&report)? + "\n"))?;
    }

    if ctx.json() {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        for v in &verdicts {
            let mut line = format!("{:<12} {}", format!("{:?}", v.status).to_lowercase(), v.rule);
            if let Some(note) = &v.note {
                line.push_str(&format!("  ({note})"));
            }
            println!("{line}");
            if v.status == VerdictStatus::Disproved {
                for w in &v.witnesses {
                    println!("             observed: {}", kinds_label(w));
                }
            }
        }
        let summary = counts
            .iter()
            .map(|(k, n)| format!("{n} {k}"))
            .collect::<Vec<_>>()
            .join(", ");
        println!("{summary}");
    }

    let disproved = counts.get("disproved").copied().unwrap_or(0);
    Ok(disproved > 0)
}
