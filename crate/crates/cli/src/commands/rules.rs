use std::path::PathBuf;

use anyhow::Result;
use clap::Args;

use flakit_core::orchestrate::{diff_rules, generate_rules, read_observations};
use flakit_core::rules::render_rules;

use crate::context::{load_rules, read_file, write_file, Ctx};

#[derive(Args)]
pub struct GenArgs {
    /// Observation log (JSON lines, from `test discover`).
    pub observations: PathBuf,

    /// Rule file to write.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Args)]
pub struct DiffArgs {
    /// Declared rule file.
    pub declared: PathBuf,

    /// Learned rule file (from `rules gen`).
    pub learned: PathBuf,
}

pub fn gen(ctx: &Ctx, args: &GenArgs) -> Result<bool> {
    let observations = read_observations(&read_file(&args.observations)?)?;
    let generated = generate_rules(&observations)?;
    let rendered = render_rules(&generated.rules);

    if let Some(out) = &args.output {
        write_file(out, &rendered)?;
    }

    if ctx.json() {
        println!("{}", serde_json::to_string_pretty(&generated)?);
    } else {
        print!("{rendered}");
        for e in &generated.excluded {
            eprintln!("excluded scenario {}: {}", e.scenario, e.reason);
        }
        eprintln!(
            "{} rule(s), {} observation(s) excluded",
            generated.rules.len(),
            generated.excluded.len()
        );
    }
    Ok(!generated.excluded.is_empty())
}

pub fn diff(ctx: &Ctx, args: &DiffArgs) -> Result<bool> {
    let declared = load_rules(&args.declared)?;
    let learned = load_rules(&args.learned)?;
    let diff = diff_rules(&declared, &learned);

    if ctx.json() {
        println!("{}", serde_json::to_string_pretty(&diff)?);
    } else {
        for r in &diff.confirmed {
            println!("confirmed  {r}");
        }
        for d in &diff.disproved {
            println!("disproved  {}", d.rule);
            for l in &d.learned {
                println!("           learned: {l}");
            }
        }
        for r in &diff.uncovered {
            println!("uncovered  {r}");
        }
        for r in &diff.new {
            println!("new        {r}");
        }
        println!(
            "{} confirmed, {} disproved, {} uncovered, {} new",
            diff.confirmed.len(),
            diff.disproved.len(),
            diff.uncovered.len(),
            diff.new.len()
        );
    }
    Ok(!diff.disproved.is_empty())
}
