use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{Context as _, Result};
use clap::Args;

use flakit_core::fault_tree::{generate_fault_tree, generate_fault_trees, FaultTree};
use flakit_core::fla::{check_injection_targets, propagate, FlaOptions};
use flakit_core::rules::FailureType;

use crate::context::{load_bound_rules, load_model, read_file, resolve_port, write_file, Ctx};

#[derive(Args)]
pub struct GenArgs {
    /// Model file (JSON).
    pub model: PathBuf,

    /// Rule file to bind.
    #[arg(long)]
    pub rules: Option<PathBuf>,

    /// Target system output port (`Component.port`).
    #[arg(long)]
    pub target: String,

    /// Generate only the tree for this failure type.
    #[arg(long)]
    pub failure: Option<String>,

    /// Failure injections, as in `fla run`.
    #[arg(long, value_delimiter = ',')]
    pub inject: Vec<String>,

    /// Apply qualitative reduction before output.
    #[arg(long)]
    pub reduce: bool,

    /// Print minimal cut sets.
    #[arg(long)]
    pub cutsets: bool,

    /// Probability file: JSON map from `Component.port.failure` to [0,1].
    #[arg(long)]
    pub probs: Option<PathBuf>,

    /// Output file; `.dot` or `.json` by extension. With several trees the
    /// failure name is appended before the extension.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Args)]
pub struct AnalyzeArgs {
    /// Fault tree file (JSON, as produced by `ft gen`).
    pub tree: PathBuf,

    /// Apply qualitative reduction.
    #[arg(long)]
    pub reduce: bool,

    /// Print minimal cut sets.
    #[arg(long)]
    pub cutsets: bool,

    /// Probability file, as in `ft gen`.
    #[arg(long)]
    pub probs: Option<PathBuf>,

    /// Write the (possibly reduced) tree here.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

fn load_probs(path: &Path) -> Result<BTreeMap<String, f64>> {
    let text = read_file(path)?;
    serde_json::from_str(&text).with_context(|| format!("in probability file {}", path.display()))
}

fn render_tree(tree: &FaultTree, path: &Path) -> Result<String> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("dot") => Ok(tree.to_dot()),
        Some("json") => Ok(tree.to_json() + "\n"),
        other => anyhow::bail!(
            "unsupported output extension {:?}; use .dot or .json",
            other.unwrap_or("")
        ),
    }
}

fn report_tree(
    ctx: &Ctx,
    tree: &FaultTree,
    cutsets: bool,
    probs: Option<&BTreeMap<String, f64>>,
) -> Result<()> {
    let mcs: Vec<Vec<String>> = if cutsets {
        tree.minimal_cut_sets()
            .into_iter()
            .map(|cs| cs.into_iter().map(|l| l.to_string()).collect())
            .collect()
    } else {
        Vec::new()
    };
    let quant = match probs {
        Some(probs) => Some(tree.quantify(probs)?),
        None => None,
    };

    if ctx.json() {
        let mut doc = serde_json::json!({
            "target": tree.target,
            "events": tree.events.len(),
            "gates": tree.gates.len(),
        });
        if cutsets {
            doc["minimal_cut_sets"] = serde_json::json!(mcs);
        }
        if let Some(q) = quant {
            doc["quantification"] = serde_json::to_value(q)?;
        }
        if !tree.notes.is_empty() {
            doc["notes"] = serde_json::json!(tree.notes);
        }
        println!("{}", serde_json::to_string_pretty(&doc)?);
    } else {
        println!(
            "tree for {}: {} events, {} gates",
            tree.target,
            tree.events.len(),
            tree.gates.len()
        );
        for note in &tree.notes {
            println!("  note: {note}");
        }
        if cutsets {
            println!("  minimal cut sets ({}):", mcs.len());
            for cs in &mcs {
                println!("    {{{}}}", cs.join(", "));
            }
        }
        if let Some(q) = quant {
            println!(
                "  top event probability: {} ({:?})",
                q.probability, q.method
            );
        }
    }
    Ok(())
}

pub fn gen(ctx: &Ctx, args: &GenArgs) -> Result<bool> {
    let model = load_model(&args.model)?;
    let flat = model.flatten()?;
    let rules = load_bound_rules(args.rules.as_ref(), &flat)?;
    let injected = super::fla::parse_injections(&flat, &args.inject)?;
    check_injection_targets(&flat, &injected)?;
    let fla = propagate(&flat, &rules, &injected, FlaOptions::default());

    let target = resolve_port(&flat, &args.target)?;
    let trees = match &args.failure {
        Some(name) => {
            let failure: FailureType = name.parse().map_err(|e: String| anyhow::anyhow!(e))?;
            vec![generate_fault_tree(&flat, &rules, &fla, &target, failure)?]
        }
        None => generate_fault_trees(&flat, &rules, &fla, &target)?,
    };
    anyhow::ensure!(
        !trees.is_empty(),
        "no failure reaches {target}; nothing to generate"
    );

    let probs = args.probs.as_ref().map(|p| load_probs(p)).transpose()?;
    for tree in &trees {
        let tree = if args.reduce {
            tree.qualitative_reduce()
        } else {
            tree.clone()
        };
        if let Some(out) = &args.output {
            let path = if trees.len() == 1 {
                out.clone()
            } else {
                let failure = tree.target.failure.to_string();
                let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("tree");
                let ext = out.extension().and_then(|e| e.to_str()).unwrap_or("json");
                out.with_file_name(format!("{stem}.{failure}.{ext}"))
            };
            write_file(&path, &render_tree(&tree, &path)?)?;
        }
        report_tree(ctx, &tree, args.cutsets, probs.as_ref())?;
    }
    Ok(false)
}

pub fn analyze(ctx: &Ctx, args: &AnalyzeArgs) -> Result<bool> {
    let text = read_file(&args.tree)?;
    let tree = FaultTree::from_json(&text)
        .with_context(|| format!("in tree file {}", args.tree.display()))?;
    let tree = if args.reduce {
        tree.qualitative_reduce()
    } else {
        tree
    };
    let probs = args.probs.as_ref().map(|p| load_probs(p)).transpose()?;
    report_tree(ctx, &tree, args.cutsets, probs.as_ref())?;
    if let Some(out) = &args.output {
        write_file(out, &render_tree(&tree, out)?)?;
    }
    Ok(false)
}
