//! Shared command context: global flags, config loading, file helpers.

use std::path::{Path, PathBuf};

use anyhow::{Context as _, Result};
use clap::ValueEnum;
use flakit_core::inject::InjectionConfig;
use flakit_core::model::{PortRef, SystemModel};
use flakit_core::rules::{bind_rules, parse_rules, BoundRuleSet, FptcRule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Text,
    Json,
}

pub struct Ctx {
    pub format: OutputFormat,
    pub jobs: usize,
    pub strict: bool,
    pub config: InjectionConfig,
}

impl Ctx {
    pub fn new(global: &crate::GlobalArgs) -> Result<Ctx> {
        let mut config = match &global.config {
            Some(path) => {
                let text = read_file(path)?;
                InjectionConfig::from_config_text(&text)
                    .with_context(|| format!("in config file {}", path.display()))?
            }
            None => InjectionConfig::default(),
        };
        if let Some(seed) = global.seed {
            config.seed = seed;
        }
        Ok(Ctx {
            format: global.format,
            jobs: global.jobs.max(1),
            strict: global.strict,
            config,
        })
    }

    pub fn json(&self) -> bool {
        self.format == OutputFormat::Json
    }
}

pub fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

pub fn load_model(path: &Path) -> Result<SystemModel> {
    let text = read_file(path)?;
    SystemModel::from_json(&text).with_context(|| format!("in model file {}", path.display()))
}

pub fn load_rules(path: &Path) -> Result<Vec<FptcRule>> {
    let text = read_file(path)?;
    parse_rules(&text).with_context(|| format!("in rule file {}", path.display()))
}

pub fn load_bound_rules(path: Option<&PathBuf>, model: &SystemModel) -> Result<BoundRuleSet> {
    match path {
        Some(path) => {
            let rules = load_rules(path)?;
            bind_rules(&rules, model).with_context(|| format!("binding {}", path.display()))
        }
        None => Ok(BoundRuleSet::default()),
    }
}

/// Resolves `Component.port`, or a bare port name when it is unique across
/// the model's simple components.
pub fn resolve_port(model: &SystemModel, text: &str) -> Result<PortRef> {
    if text.contains('.') {
        let r: PortRef = text.parse()?;
        model.resolve(&r)?;
        return Ok(r);
    }
    let matches: Vec<PortRef> = model
        .simple_components()
        .into_iter()
        .flat_map(|c| {
            c.ports
                .iter()
                .filter(|p| p.name == text)
                .map(|p| PortRef::new(&c.name, &p.name))
        })
        .collect();
    match matches.len() {
        0 => anyhow::bail!("no port named `{text}` in the model"),
        1 => Ok(matches.into_iter().next().unwrap()),
        _ => anyhow::bail!(
            "port name `{text}` is ambiguous ({}); use Component.port",
            matches
                .iter()
                .map(|r| r.to_string())
                .collect::<Vec<_>>()
                .join(", ")
        ),
    }
}
