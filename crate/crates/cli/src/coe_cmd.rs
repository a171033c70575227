use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::{anyhow, bail, Result};
use chrono::NaiveDate;
use clap::Args;
use serde::Serialize;

use scholnet::canonical::{canonical_encode, Fingerprint, Hasher, Algorithm};
use scholnet::coe::{verify_coe, CoERef, Verdict};

use crate::config::OutputFormat;
use crate::{canonical_line, parse_date, parse_fp, Ctx};

#[derive(Debug, Args)]
pub struct StampArgs {
    file: PathBuf,
    #[arg(long)]
    authority: Option<String>,
    #[arg(long, value_parser = parse_date)]
    date: NaiveDate,
    /// Registry-assigned identifier; derived from the signature when absent.
    #[arg(long)]
    id: Option<String>,
}

#[derive(Debug, Args)]
pub struct RoundAppendArgs {
    #[arg(value_parser = parse_fp)]
    fingerprint: Fingerprint,
    #[arg(long)]
    authority: Option<String>,
}

#[derive(Debug, Args)]
pub struct RoundCloseArgs {
    #[arg(long)]
    authority: Option<String>,
    /// Free text published beside the head.
    #[arg(long, default_value = "")]
    note: String,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    coe: String,
    #[arg(value_parser = parse_fp)]
    fingerprint: Fingerprint,
}

/// Streams a file through the hasher; only the digest leaves this function.
pub fn file_fingerprint(path: &PathBuf) -> Result<Fingerprint> {
    use std::io::Read;
    let mut f = std::fs::File::open(path).map_err(|e| anyhow!("{}: {e}", path.display()))?;
    let mut h = Hasher::new(Algorithm::Sha256);
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf)?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(h.finish())
}

pub fn stamp(ctx: &Ctx, a: StampArgs) -> Result<Vec<u8>> {
    let fp = file_fingerprint(&a.file)?;
    let data = ctx.data()?;
    let authority = data.authority(&ctx.default_authority(a.authority)?)?;
    let coe = match a.id {
        Some(id) => authority.stamp_registry_with_id(&fp, a.date, id),
        None => authority.stamp_registry(&fp, a.date),
    };
    data.add_cert(&fp, coe.clone())?;
    Ok(format!("{coe}\n").into_bytes())
}

#[derive(Serialize)]
struct Pending {
    round: u64,
    leaf_index: u64,
}

pub fn round_append(ctx: &Ctx, a: RoundAppendArgs) -> Result<Vec<u8>> {
    let data = ctx.data()?;
    let mut authority = data.authority(&ctx.default_authority(a.authority)?)?;
    let r = authority.round_append(a.fingerprint);
    data.save_authority(&authority)?;
    Ok(match ctx.format {
        OutputFormat::Canonical => canonical_line(canonical_encode(&Pending { round: r.round, leaf_index: r.leaf_index }).expect("encodable").into_vec()),
        _ => format!("pending round {} leaf {}\n", r.round, r.leaf_index).into_bytes(),
    })
}

pub fn round_close(ctx: &Ctx, a: RoundCloseArgs) -> Result<Vec<u8>> {
    let data = ctx.data()?;
    let mut authority = data.authority(&ctx.default_authority(a.authority)?)?;
    let pending = authority.to_state().pending;
    let (head, receipts) = authority.round_close(a.note).map_err(|e| anyhow!("{e}"))?;
    data.save_authority(&authority)?;
    for (fp, coe) in pending.iter().zip(&receipts) {
        data.add_cert(fp, coe.clone())?;
    }
    let mut out = String::new();
    let _ = writeln!(out, "round {} {}", head.round, to_hex(&head.head));
    for (fp, coe) in pending.iter().zip(&receipts) {
        let _ = writeln!(out, "{fp}\t{coe}");
    }
    Ok(out.into_bytes())
}

pub fn verify(ctx: &Ctx, a: VerifyArgs) -> Result<Vec<u8>> {
    let coe = CoERef::parse(&a.coe).map_err(|e| anyhow!("malformed certificate: {e}"))?;
    let anchors = ctx.data()?.anchors()?;
    match verify_coe(&coe, &a.fingerprint, &anchors) {
        Verdict::Valid => Ok(b"valid\n".to_vec()),
        v => bail!("{v}"),
    }
}

fn to_hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
