use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{Context as _, Result};
use clap::Args;

use flakit_core::fla::{check_injection_targets, propagate, FlaOptions, TokenSet, UnmatchedPolicy};
use flakit_core::model::SystemModel;
use flakit_core::rules::FailureType;

use crate::context::{load_bound_rules, load_model, resolve_port, Ctx};

#[derive(Args)]
pub struct RunArgs {
    /// Model file (JSON).
    pub model: PathBuf,

    /// Rule file to bind.
    #[arg(long)]
    pub rules: Option<PathBuf>,

    /// Failure injections, `Port=failure` or `Component.port=failure`,
    /// repeatable or comma-separated.
    #[arg(long, value_delimiter = ',')]
    pub inject: Vec<String>,

    /// What happens to tokens no rule matches.
    #[arg(long, default_value = "sink")]
    pub unmatched: String,
}

pub fn parse_injections(model: &SystemModel, specs: &[String]) -> Result<TokenSet> {
    let mut injected = TokenSet::new();
    for spec in specs {
        let (port, failure) = spec
            .split_once('=')
            .with_context(|| format!("injection `{spec}`: expected `port=failure`"))?;
        let port = resolve_port(model, port.trim())?;
        let failure: FailureType = failure
            .trim()
            .parse()
            .map_err(|e: String| anyhow::anyhow!(e))?;
        anyhow::ensure!(
            failure != FailureType::Wildcard,
            "injection `{spec}`: wildcard is not an injectable failure"
        );
        injected.entry(port).or_default().insert(failure);
    }
    Ok(injected)
}

pub fn run(ctx: &Ctx, args: &RunArgs) -> Result<bool> {
    let model = load_model(&args.model)?;
    let diagnostics = model.validate();
    anyhow::ensure!(
        diagnostics.is_empty(),
        "model is not valid:\n{}",
        diagnostics
            .iter()
            .map(|d| format!("  {d}"))
            .collect::<Vec<_>>()
            .join("\n")
    );
    let flat = model.flatten()?;
    let rules = load_bound_rules(args.rules.as_ref(), &flat)?;
    for lint in rules.lints() {
        eprintln!("warning: {lint}");
    }

    let injected = parse_injections(&flat, &args.inject)?;
    check_injection_targets(&flat, &injected)?;

    let unmatched = match args.unmatched.as_str() {
        "sink" => UnmatchedPolicy::Sink,
        "propagate" => UnmatchedPolicy::Propagate,
        other => anyhow::bail!("--unmatched must be `sink` or `propagate`, got `{other}`"),
    };
    let result = propagate(&flat, &rules, &injected, FlaOptions { unmatched });

    let mut table: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for port in result.tokens.keys() {
        let failures = result.reachable_failures(port)?;
        table.insert(
            port.to_string(),
            failures.iter().map(|f| f.to_string()).collect(),
        );
    }

    if ctx.json() {
        println!(
            "{}",
            serde_json::to_string_pretty(&serde_json::json!({ "ports": table }))?
        );
    } else {
        for (port, failures) in &table {
            println!("{port}: {{{}}}", failures.join(", "));
        }
    }
    Ok(false)
}
