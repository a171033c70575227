//! `scholnet`: stamping, publishing, reviewing, round orchestration, store
//! and query services, and simulation from the command line.
//!
//! Exit status is 0 on success, 1 on a domain error (one diagnostic line on
//! stderr) and 2 on a usage error.

mod coe_cmd;
mod config;
mod data;
mod escrow_cmd;
mod query_cmd;
mod review_cmd;
mod store_cmd;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Result};
use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};

use scholnet::canonical::{canonical_decode, parse_fingerprint, Fingerprint};
use scholnet::harness::{simulate, ScenarioParams, SCENARIOS};

use crate::config::{Loaded, OutputFormat, CONFIG_ENV, DEFAULT_CONFIG_FILE};
use crate::data::DataDir;

#[derive(Debug, Parser)]
#[command(name = "scholnet", version, about = "Content-addressed scholarly publication fabric")]
struct Cli {
    /// Config file (canonical encoding).
    #[arg(long, global = true, env = CONFIG_ENV, default_value = DEFAULT_CONFIG_FILE)]
    config: PathBuf,
    /// Overrides the data directory named in the config.
    #[arg(long, global = true)]
    data_dir: Option<PathBuf>,
    /// Output format; defaults to the config's.
    #[arg(long, global = true, value_enum)]
    format: Option<OutputFormat>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Show or write the configuration file.
    #[command(subcommand)]
    Config(ConfigCmd),
    /// Stamp a file's fingerprint with a registry authority.
    Stamp(coe_cmd::StampArgs),
    /// Queue a fingerprint for the authority's next linked round.
    RoundAppend(coe_cmd::RoundAppendArgs),
    /// Close the open linked round and publish its head.
    RoundClose(coe_cmd::RoundCloseArgs),
    /// Check a certificate of existence against the trust anchors.
    VerifyCoe(coe_cmd::VerifyArgs),
    /// Submit a file to a store and print its handle.
    Publish(store_cmd::PublishArgs),
    /// Print a file's document handle.
    Handle(store_cmd::HandleArgs),
    /// Write, check and finalize review objects.
    #[command(subcommand)]
    Review(review_cmd::ReviewCmd),
    /// Drive a review round.
    #[command(subcommand)]
    Round(review_cmd::RoundCmd),
    /// Operate an identity escrow.
    #[command(subcommand)]
    Escrow(escrow_cmd::EscrowCmd),
    /// Define and run saved queries.
    #[command(subcommand)]
    Query(query_cmd::QueryCmd),
    /// Run or talk to a store node.
    #[command(subcommand)]
    Store(store_cmd::StoreCmd),
    /// Run a deterministic scenario and print its event log.
    Simulate(SimulateArgs),
}

#[derive(Debug, Subcommand)]
enum ConfigCmd {
    /// Print the effective configuration.
    Show,
    /// Write the effective configuration to the config file.
    Init {
        #[arg(long)]
        default_authority: Option<String>,
    },
}

#[derive(Debug, Args)]
struct SimulateArgs {
    scenario: String,
    #[arg(long)]
    seed: u64,
    /// Scenario parameters file (canonical encoding); --seed wins over its seed.
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long)]
    nodes: Option<u32>,
    #[arg(long)]
    drop_permille: Option<u32>,
}

/// What every command gets to work with.
pub struct Ctx {
    pub cfg: Loaded,
    pub format: OutputFormat,
}

impl Ctx {
    pub fn data(&self) -> Result<DataDir> {
        DataDir::open(&self.cfg)
    }

    pub fn default_authority(&self, flag: Option<String>) -> Result<String> {
        flag.or_else(|| self.cfg.config.default_authority.clone())
            .ok_or_else(|| anyhow!("no authority given and no default_authority configured"))
    }
}

pub fn parse_fp(s: &str) -> Result<Fingerprint, String> {
    parse_fingerprint(s).map_err(|e| e.to_string())
}

pub fn parse_date(s: &str) -> Result<NaiveDate, String> {
    NaiveDate::parse_from_str(s, "%Y-%m-%d").map_err(|_| format!("expected YYYY-MM-DD, got {s:?}"))
}

pub fn read_canonical<T: serde::de::DeserializeOwned>(path: &std::path::Path) -> Result<T> {
    let bytes = std::fs::read(path).map_err(|e| anyhow!("{}: {e}", path.display()))?;
    canonical_decode(config::trim_newline(&bytes)).map_err(|e| anyhow!("{}: {e}", path.display()))
}

/// Canonical output is written as-is plus a final newline.
pub fn canonical_line(mut bytes: Vec<u8>) -> Vec<u8> {
    bytes.push(b'\n');
    bytes
}

fn run(cli: Cli) -> Result<Vec<u8>> {
    let mut cfg = Loaded::load(cli.config)?;
    if let Some(d) = cli.data_dir {
        cfg.config.data_dir = d.to_string_lossy().into_owned();
    }
    let format = cli.format.unwrap_or(cfg.config.format);
    let ctx = Ctx { cfg, format };
    match cli.command {
        Command::Config(c) => config_cmd(ctx, c),
        Command::Stamp(a) => coe_cmd::stamp(&ctx, a),
        Command::RoundAppend(a) => coe_cmd::round_append(&ctx, a),
        Command::RoundClose(a) => coe_cmd::round_close(&ctx, a),
        Command::VerifyCoe(a) => coe_cmd::verify(&ctx, a),
        Command::Publish(a) => store_cmd::publish(&ctx, a),
        Command::Handle(a) => store_cmd::handle(&ctx, a),
        Command::Review(c) => review_cmd::review(&ctx, c),
        Command::Round(c) => review_cmd::round(&ctx, c),
        Command::Escrow(c) => escrow_cmd::run(&ctx, c),
        Command::Query(c) => query_cmd::run(&ctx, c),
        Command::Store(c) => store_cmd::run(&ctx, c),
        Command::Simulate(a) => simulate_cmd(a),
    }
}

fn config_cmd(mut ctx: Ctx, c: ConfigCmd) -> Result<Vec<u8>> {
    match c {
        ConfigCmd::Show => {}
        ConfigCmd::Init { default_authority } => {
            if default_authority.is_some() {
                ctx.cfg.config.default_authority = default_authority;
            }
            ctx.cfg.config.format = ctx.format;
            ctx.cfg.save()?;
            ctx.data()?;
        }
    }
    Ok(canonical_line(ctx.cfg.config.to_bytes()))
}

fn simulate_cmd(a: SimulateArgs) -> Result<Vec<u8>> {
    if !SCENARIOS.contains(&a.scenario.as_str()) {
        bail!("unknown scenario {:?} (known: {})", a.scenario, SCENARIOS.join(", "));
    }
    let mut params: ScenarioParams = match &a.params {
        Some(p) => read_canonical(p)?,
        None => ScenarioParams::default(),
    };
    params.seed = a.seed;
    if let Some(n) = a.nodes {
        params.nodes = n;
    }
    if let Some(d) = a.drop_permille {
        params.drop_permille = d;
    }
    let report = simulate(&a.scenario, &params).map_err(|e| anyhow!("{e}"))?;
    let out = report.render().into_bytes();
    if !report.passed() {
        let failed: Vec<&str> = report.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
        std::io::stdout().write_all(&out)?;
        bail!("scenario checks failed: {}", failed.join(", "));
    }
    Ok(out)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(out) => {
            let mut stdout = std::io::stdout().lock();
            if stdout.write_all(&out).and_then(|_| stdout.flush()).is_err() {
                return ExitCode::from(1);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            let msg = format!("{e:#}").replace('\n', " ");
            eprintln!("scholnet: {msg}");
            ExitCode::from(1)
        }
    }
}
