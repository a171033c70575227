use std::fmt::Write as _;

use anyhow::{anyhow, bail, Result};
use chrono::NaiveDate;
use clap::{Subcommand, ValueEnum};
use rand::rngs::OsRng;

use scholnet::canonical::Fingerprint;
use scholnet::escrow::{EscrowConfig, EscrowService, Resolution, DEFAULT_MIN_PETITIONERS, DEFAULT_WINDOW_DAYS};
use scholnet::model::Identity;

use crate::{canonical_line, parse_date, parse_fp, Ctx};

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ActionArg {
    Retraction,
    Clarification,
}

/// Every command that touches sealed state needs the escrow passphrase in
/// the environment. Output names pseudonyms only.
#[derive(Debug, Subcommand)]
pub enum EscrowCmd {
    /// Create an escrow run by the given board.
    Init {
        label: String,
        #[arg(long = "board", required = true)]
        board: Vec<String>,
        #[arg(long, default_value_t = DEFAULT_MIN_PETITIONERS)]
        min_petitioners: usize,
        #[arg(long, default_value_t = DEFAULT_WINDOW_DAYS)]
        window_days: u64,
    },
    /// Seal an identity and print its fresh pseudonym.
    Register {
        label: String,
        #[arg(long)]
        name: String,
        #[arg(long)]
        affiliation: Option<String>,
    },
    /// Open an investigation into pseudonymous reviews.
    Petition {
        label: String,
        #[arg(long = "petitioner", required = true)]
        petitioners: Vec<String>,
        #[arg(long = "review", value_parser = parse_fp, required = true)]
        reviews: Vec<Fingerprint>,
        #[arg(long, value_parser = parse_date)]
        date: NaiveDate,
    },
    /// The board's answer: counter-review frames under the same pseudonyms.
    Resolve {
        label: String,
        id: u64,
        #[arg(long, value_enum)]
        action: ActionArg,
        #[arg(long, value_parser = parse_date)]
        date: NaiveDate,
    },
    /// Close an unanswered investigation; the board becomes nonresponsive.
    Expire {
        label: String,
        id: u64,
        #[arg(long, value_parser = parse_date)]
        date: NaiveDate,
    },
    /// Print the public status (no passphrase needed).
    Status { label: String },
}

pub fn run(ctx: &Ctx, c: EscrowCmd) -> Result<Vec<u8>> {
    let data = ctx.data()?;
    match c {
        EscrowCmd::Init { label, board, min_petitioners, window_days } => {
            if data.escrow_exists(&label)? {
                bail!("escrow {label:?} already exists");
            }
            let board = board.into_iter().map(Identity::new).collect();
            let e = EscrowService::with_config(label, board, EscrowConfig { min_petitioners, window_days });
            data.save_escrow(&e)?;
            Ok(format!("{}\n", e.board_id()).into_bytes())
        }
        EscrowCmd::Register { label, name, affiliation } => {
            let mut e = data.load_escrow(&label)?;
            let identity = Identity { affiliation, ..Identity::new(name) };
            let pseudonym = e.register(identity, &mut OsRng);
            data.save_escrow(&e)?;
            Ok(format!("{pseudonym}\n").into_bytes())
        }
        EscrowCmd::Petition { label, petitioners, reviews, date } => {
            let mut e = data.load_escrow(&label)?;
            let node = data.local_store()?;
            let handles = reviews.into_iter().map(|fp| data.handle_for(&node, fp)).collect::<Result<Vec<_>>>()?;
            let petitioners = petitioners.into_iter().map(Identity::new).collect();
            let inv = e.open_investigation(petitioners, handles, date).map_err(|x| anyhow!("{x}"))?;
            let out = format!("investigation {} open until {}\n", inv.id, inv.deadline);
            data.save_escrow(&e)?;
            Ok(out.into_bytes())
        }
        EscrowCmd::Resolve { label, id, action, date } => {
            let mut e = data.load_escrow(&label)?;
            let action = match action {
                ActionArg::Retraction => Resolution::Retraction,
                ActionArg::Clarification => Resolution::Clarification,
            };
            let templates = e.resolve_investigation(id, action, date).map_err(|x| anyhow!("{x}"))?;
            data.save_escrow(&e)?;
            let mut out = String::new();
            for t in templates {
                let targets: Vec<String> = t.targets.iter().map(|h| h.fingerprint.to_string()).collect();
                let _ = writeln!(out, "{}\t{}\t{}", t.pseudonym, t.title, targets.join(" "));
            }
            Ok(out.into_bytes())
        }
        EscrowCmd::Expire { label, id, date } => {
            let mut e = data.load_escrow(&label)?;
            let state = e.expire_investigation(id, date).map_err(|x| anyhow!("{x}"))?;
            data.save_escrow(&e)?;
            Ok(format!("investigation {id} {state:?}; board {} nonresponsive\n", e.board_id()).into_bytes())
        }
        EscrowCmd::Status { label } => {
            if !data.escrow_exists(&label)? {
                bail!("no escrow {label:?}");
            }
            let path = data.path(format!("escrow/{label}.public"));
            let bytes = std::fs::read(&path).map_err(|_| anyhow!("no escrow {label:?}"))?;
            Ok(canonical_line(bytes))
        }
    }
}
