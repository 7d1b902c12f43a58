use std::io::{self, Write};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use hwv::nwpd::{self, NwpdClient, PolicyStore};
use hwv::policy::PolicyDocument;
use hwv::runner::{cmd_run, cmd_validate, PolicySourceArg, RunManifest, PRESETS};

#[derive(Parser)]
#[command(name = "hwv", version, about = "Hybrid wireless virtualization controller and simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a seeded experiment and write CSV/JSON results.
    Run(RunArgs),
    /// Serve the network-wide policy database over HTTP.
    ServeNwpd {
        /// Policy store file (created on first PUT).
        #[arg(long, env = nwpd::STORE_ENV)]
        store: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8080")]
        listen: SocketAddr,
    },
    /// Check a policy file or NWPD URL for feasibility.
    Validate {
        /// Policy file path or http:// URL.
        target: String,
        /// Also check against this experiment config.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Upload a policy document to an NWPD.
    PushPolicy {
        policy: PathBuf,
        #[arg(long)]
        nwpd_url: String,
    },
    /// List presets, or print one preset's config or policy.
    Preset {
        name: Option<String>,
        #[arg(long, conflicts_with = "policy")]
        config: bool,
        #[arg(long)]
        policy: bool,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, conflicts_with = "nwpd_url")]
    policy: Option<PathBuf>,
    #[arg(long)]
    nwpd_url: Option<String>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// One of: unconstrained, constrained, priced.
    #[arg(long)]
    preset: Option<String>,
}

fn run(args: RunArgs) -> Result<ExitCode> {
    let policy = match (args.policy, args.nwpd_url) {
        (Some(p), None) => Some(PolicySourceArg::File(p)),
        (None, Some(u)) => Some(PolicySourceArg::Url(u)),
        _ => None,
    };
    let manifest = RunManifest {
        config: args.config,
        policy,
        out: args.out,
        seed: args.seed,
        preset: args.preset,
    };
    let outcome = cmd_run(&manifest)?;
    let s = &outcome.summary;
    let mut lines = vec![format!(
        "{} cycles (seed {}): mean improvement {:.2}%, best {:.2}%, infeasible cycles {}",
        s.n_cycles, s.seed, s.mean_improvement_pct, s.best_improvement_pct, s.infeasible_cycles
    )];
    lines.extend(outcome.files.iter().map(|f| format!("wrote {}", f.display())));
    emit(&lines)?;
    Ok(ExitCode::SUCCESS)
}

fn serve(store: PathBuf, listen: SocketAddr) -> Result<ExitCode> {
    let store = Arc::new(
        PolicyStore::open(&store).with_context(|| format!("opening store {}", store.display()))?,
    );
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(listen)
            .await
            .with_context(|| format!("binding {listen}"))?;
        nwpd::serve(listener, store, async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
        Ok::<_, anyhow::Error>(())
    })?;
    Ok(ExitCode::SUCCESS)
}

/// Writes to stdout; a closed pipe (e.g. `| head`) is not an error.
fn emit(lines: &[String]) -> Result<()> {
    let mut out = io::stdout().lock();
    for line in lines {
        match writeln!(out, "{line}") {
            Err(e) if e.kind() == io::ErrorKind::BrokenPipe => return Ok(()),
            r => r?,
        }
    }
    Ok(())
}

fn validate(target: &str, config: Option<PathBuf>) -> Result<ExitCode> {
    let report = cmd_validate(target, config.as_deref())?;
    if report.is_feasible() {
        emit(&[format!("{}: feasible (version {})", report.source, report.version.unwrap_or(0))])?;
        Ok(ExitCode::SUCCESS)
    } else {
        let mut lines = vec![format!("{}: infeasible", report.source)];
        lines.extend(report.violations.iter().map(|v| format!("  - {v}")));
        emit(&lines)?;
        Ok(ExitCode::FAILURE)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::ServeNwpd { store, listen } => serve(store, listen),
        Command::Validate { target, config } => validate(&target, config),
        Command::PushPolicy { policy, nwpd_url } => (|| {
            let text = std::fs::read_to_string(&policy)?;
            let doc = PolicyDocument::from_json(&text)?;
            let version = NwpdClient::new(&nwpd_url).put_policy(&doc)?;
            emit(&[format!("installed policy version {version}")])?;
            Ok(ExitCode::SUCCESS)
        })(),
        Command::Preset { name, config, policy } => (|| {
            match name {
                None => {
                    let lines: Vec<String> = PRESETS
                        .iter()
                        .map(|p| format!("{:<14} {}", p.name, p.description))
                        .collect();
                    emit(&lines)?;
                }
                Some(name) => {
                    let p = hwv::runner::Preset::find(&name)
                        .with_context(|| format!("unknown preset '{name}'"))?;
                    let text = if policy {
                        p.policy_json().trim_end().to_string()
                    } else if config {
                        p.config_json().trim_end().to_string()
                    } else {
                        format!("{}: {}", p.name, p.description)
                    };
                    emit(&[text])?;
                }
            }
            Ok(ExitCode::SUCCESS)
        })(),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
