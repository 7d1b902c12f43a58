//! Command implementations behind the `hwv` binary: experiment presets,
//! `run`, and `validate`.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use crate::controller::{run_experiment_with, FixedPolicy, PolicySource, Registries};
use crate::metrics::{emit_series, emit_stats, improvement_stats, Summary};
use crate::nwpd::NwpdClient;
use crate::policy::PolicyDocument;
use crate::substrate::{static_allocation, ExperimentConfig};

/// A checked-in experiment: the shared BTS + AP config plus one policy.
#[derive(Debug, Clone, Copy)]
pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
    config_json: &'static str,
    policy_json: &'static str,
}

const BTS_AP_CONFIG: &str = include_str!("../presets/bts-ap.config.json");

pub const PRESETS: &[Preset] = &[
    Preset {
        name: "unconstrained",
        description: "rate maximization, bids 1.4/0.6, no minimum reservations",
        config_json: BTS_AP_CONFIG,
        policy_json: include_str!("../presets/unconstrained.policy.json"),
    },
    Preset {
        name: "constrained",
        description: "as unconstrained, plus a 0.7 airtime minimum for SLC1 on the AP",
        config_json: BTS_AP_CONFIG,
        policy_json: include_str!("../presets/constrained.policy.json"),
    },
    Preset {
        name: "priced",
        description: "revenue maximization with BTS airtime priced at twice the AP",
        config_json: BTS_AP_CONFIG,
        policy_json: include_str!("../presets/priced.policy.json"),
    },
];

impl Preset {
    pub fn find(name: &str) -> Option<&'static Preset> {
        PRESETS.iter().find(|p| p.name == name)
    }

    pub fn config(&self) -> ExperimentConfig {
        ExperimentConfig::from_json(self.config_json).expect("preset config parses")
    }

    pub fn policy(&self) -> PolicyDocument {
        PolicyDocument::from_json(self.policy_json).expect("preset policy parses")
    }

    pub fn config_json(&self) -> &'static str {
        self.config_json
    }

    pub fn policy_json(&self) -> &'static str {
        self.policy_json
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PolicySourceArg {
    File(PathBuf),
    Url(String),
}

#[derive(Debug, Clone, Default)]
pub struct RunManifest {
    pub config: Option<PathBuf>,
    pub policy: Option<PolicySourceArg>,
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub preset: Option<String>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub summary: Summary,
    pub files: Vec<PathBuf>,
}

fn read_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    ExperimentConfig::from_json(&text).with_context(|| format!("parsing config {}", path.display()))
}

fn read_policy(path: &Path) -> Result<PolicyDocument> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    PolicyDocument::from_json(&text).with_context(|| format!("parsing policy {}", path.display()))
}

impl RunManifest {
    /// Explicit `config`/`policy` override the preset's; without a preset
    /// both must be given.
    pub fn resolve(&self) -> Result<(ExperimentConfig, Box<dyn PolicySource>)> {
        let preset = match &self.preset {
            Some(name) => Some(Preset::find(name).with_context(|| {
                let names: Vec<&str> = PRESETS.iter().map(|p| p.name).collect();
                format!("unknown preset '{name}' (available: {})", names.join(", "))
            })?),
            None => None,
        };
        let mut config = match (&self.config, preset) {
            (Some(path), _) => read_config(path)?,
            (None, Some(p)) => p.config(),
            (None, None) => bail!("no experiment config: pass --config or --preset"),
        };
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        let source: Box<dyn PolicySource> = match (&self.policy, preset) {
            (Some(PolicySourceArg::File(path)), _) => Box::new(FixedPolicy(read_policy(path)?)),
            (Some(PolicySourceArg::Url(url)), _) => Box::new(NwpdClient::new(url)),
            (None, Some(p)) => Box::new(FixedPolicy(p.policy())),
            (None, None) => bail!("no policy source: pass --policy, --nwpd-url or --preset"),
        };
        Ok((config, source))
    }
}

/// Runs one experiment and writes `weights.csv`, `revenue.csv`, `cdf.csv`
/// and `summary.json` into `manifest.out`.
pub fn cmd_run(manifest: &RunManifest) -> Result<RunOutcome> {
    let (config, source) = manifest.resolve()?;
    let series = run_experiment_with(&config, source.as_ref(), &Registries::default())
        .with_context(|| format!("running experiment against {}", source.describe()))?;
    let stats = improvement_stats(&series).context("computing improvement statistics")?;
    let summary = Summary::new(&series, &stats, config.seed, manifest.preset.as_deref());

    fs::create_dir_all(&manifest.out)
        .with_context(|| format!("creating {}", manifest.out.display()))?;
    let substrates: Vec<_> = config.substrates.iter().map(|s| s.id).collect();
    let (revenue, weights) = emit_series(&series, &substrates, &manifest.out)?;
    let (summary_path, cdf) = emit_stats(&summary, &stats, &manifest.out)?;
    Ok(RunOutcome {
        summary,
        files: vec![weights, revenue, cdf, summary_path],
    })
}

#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub source: String,
    pub version: Option<u64>,
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn is_feasible(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks a policy file or NWPD URL, optionally against a config's
/// substrate layout and static split. Parse errors are returned as `Err`
/// with their line and column.
pub fn cmd_validate(target: &str, config: Option<&Path>) -> Result<ValidationReport> {
    let (text, source) = if target.starts_with("http://") || target.starts_with("https://") {
        let client = NwpdClient::new(target);
        let bytes = client.fetch_bytes()?;
        (String::from_utf8_lossy(&bytes).into_owned(), client.url().to_string())
    } else {
        let text = fs::read_to_string(target).with_context(|| format!("reading {target}"))?;
        (text, target.to_string())
    };
    let doc: PolicyDocument = serde_json::from_str(&text).map_err(|e| {
        anyhow::anyhow!(
            "{source}: parse error at line {}, column {}: {e}",
            e.line(),
            e.column()
        )
    })?;
    let mut violations: Vec<String> = doc.violations().iter().map(ToString::to_string).collect();
    if let Some(path) = config {
        let cfg = read_config(path)?;
        if violations.is_empty() {
            if let Err(e) = static_allocation(&cfg, &doc) {
                violations.push(format!("config {}: {e}", path.display()));
            }
        }
    }
    Ok(ValidationReport {
        source,
        version: Some(doc.version),
        violations,
    })
}
