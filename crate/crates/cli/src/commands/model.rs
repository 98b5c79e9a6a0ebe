use std::path::PathBuf;

use anyhow::Result;
use clap::Args;

use crate::context::{load_model, Ctx};

#[derive(Args)]
pub struct CheckArgs {
    /// Model file (JSON).
    pub model: PathBuf,
}

pub fn check(ctx: &Ctx, args: &CheckArgs) -> Result<bool> {
    let model = load_model(&args.model)?;
    let diagnostics = model.validate();

    if ctx.json() {
        println!(
            "{}",
            serde_json::to_string_pretty(&serde_json::json!({
                "model": model.name,
                "components": model.all_components().len(),
                "diagnostics": diagnostics,
            }))?
        );
    } else if diagnostics.is_empty() {
        println!(
            "model `{}` is valid ({} components, {} connections)",
            model.name,
            model.all_components().len(),
            model.connections.len()
        );
    } else {
        for d in &diagnostics {
            println!("{d}");
        }
        println!("{} diagnostic(s)", diagnostics.len());
    }
    Ok(!diagnostics.is_empty())
}
