use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use chrono::NaiveDate;
use clap::{Args, Subcommand};
use serde::{Deserialize, Serialize};

use scholnet::canonical::{canonical_encode, Fingerprint};
use scholnet::model::{
    make_handle, review_as_object, validate_review, DocumentHandle, Grade, Identity, Orientation, PublishedObject, ReviewObject,
    ReviewProcessSpec, ReviewerAttribution,
};
use scholnet::review_proc::{start_round, RoundMode, RoundState, RoundWork};
use scholnet::store::StoreNode;

use crate::config::OutputFormat;
use crate::data::DataDir;
use crate::{canonical_line, parse_date, parse_fp, read_canonical, Ctx};

#[derive(Debug, Subcommand)]
pub enum ReviewCmd {
    /// Write a review object (canonical) for the given targets.
    New(NewArgs),
    /// List rule violations; exits 1 if there are any.
    Validate { file: PathBuf },
    /// Turn a valid review into a publishable object and print its handle.
    Seal {
        file: PathBuf,
        /// Also submit the sealed object to the local store.
        #[arg(long)]
        publish: bool,
    },
}

#[derive(Debug, Args)]
pub struct NewArgs {
    /// Review process description (canonical).
    #[arg(long)]
    process: PathBuf,
    #[arg(long = "target", value_parser = parse_fp, required = true)]
    targets: Vec<Fingerprint>,
    /// Open reviewer name.
    #[arg(long, conflicts_with = "pseudonym")]
    reviewer: Option<String>,
    /// Pseudonym issued by --escrow.
    #[arg(long, requires = "escrow")]
    pseudonym: Option<String>,
    #[arg(long)]
    escrow: Option<String>,
    #[arg(long)]
    title: Option<String>,
    /// `name=value/max`, with a trailing `-` when lower is better.
    #[arg(long = "grade", value_parser = parse_grade)]
    grades: Vec<Grade>,
    #[arg(long, default_value = "")]
    comments: String,
    /// Write here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum RoundCmd {
    /// Open a round from a description file.
    Start {
        name: String,
        description: PathBuf,
        #[arg(long, value_parser = parse_date)]
        date: NaiveDate,
    },
    /// Hand a review to the round.
    Submit {
        name: String,
        review: PathBuf,
        /// Escrow vouching for a pseudonymous reviewer.
        #[arg(long)]
        escrow: Option<String>,
    },
    /// End the round and publish what it releases to the local store.
    Release {
        name: String,
        #[arg(long, value_parser = parse_date)]
        date: NaiveDate,
    },
}

fn parse_grade(s: &str) -> Result<Grade, String> {
    let err = || format!("expected name=value/max[-], got {s:?}");
    let (name, rest) = s.split_once('=').ok_or_else(err)?;
    let (rest, orientation) = match rest.strip_suffix('-') {
        Some(r) => (r, Orientation::LowerIsBetter),
        None => (rest, Orientation::HigherIsBetter),
    };
    let (v, m) = rest.split_once('/').ok_or_else(err)?;
    Ok(Grade {
        name: name.to_owned(),
        value: v.trim().parse().map_err(|_| err())?,
        scale_max: m.trim().parse().map_err(|_| err())?,
        orientation,
    })
}

fn read_review(path: &Path) -> Result<ReviewObject> {
    read_canonical(path)
}

fn violations_text(review: &ReviewObject) -> (usize, String) {
    let v = validate_review(review);
    let mut out = String::new();
    for x in &v {
        let _ = writeln!(out, "{x}");
    }
    (v.len(), out)
}

pub fn review(ctx: &Ctx, c: ReviewCmd) -> Result<Vec<u8>> {
    match c {
        ReviewCmd::New(a) => new_review(ctx, a),
        ReviewCmd::Validate { file } => {
            let review = read_review(&file)?;
            let (n, text) = violations_text(&review);
            if n > 0 {
                use std::io::Write;
                std::io::stdout().write_all(text.as_bytes())?;
                bail!("{n} violation{}", if n == 1 { "" } else { "s" });
            }
            Ok(b"valid\n".to_vec())
        }
        ReviewCmd::Seal { file, publish } => {
            let review = read_review(&file)?;
            let (object, handle) = review_as_object(&review).map_err(|e| anyhow!("{e}"))?;
            let handle = if publish {
                let data = ctx.data()?;
                let mut node = data.local_store()?;
                put(&mut node, &object, handle)?
            } else {
                handle
            };
            Ok(match ctx.format {
                OutputFormat::Canonical => canonical_line(canonical_encode(&handle).expect("encodable").into_vec()),
                _ => format!("{handle}\n").into_bytes(),
            })
        }
    }
}

fn new_review(ctx: &Ctx, a: NewArgs) -> Result<Vec<u8>> {
    let process: ReviewProcessSpec = read_canonical(&a.process)?;
    let data = ctx.data()?;
    let author = match (a.reviewer, a.pseudonym, a.escrow) {
        (Some(name), None, _) => ReviewerAttribution::Open(Identity::new(name)),
        (None, Some(p), Some(label)) => data.load_escrow(&label)?.attribution(&p).map_err(|e| anyhow!("{e}"))?,
        _ => bail!("give --reviewer, or --pseudonym with --escrow"),
    };
    let node = if data.path("store").exists() { Some(data.local_store()?) } else { None };
    let mut targets = Vec::new();
    for fp in a.targets {
        targets.push(match &node {
            Some(n) => data.handle_for(n, fp)?,
            None => {
                let mut h = DocumentHandle::bare(fp);
                h.coes = data.certs_of(&fp)?;
                h
            }
        });
    }
    let title = a.title.unwrap_or_else(|| {
        let names: Vec<String> = targets.iter().map(|t| t.title.clone().unwrap_or_else(|| t.fingerprint.to_string())).collect();
        format!("Review of {}", names.join("; "))
    });
    let review = ReviewObject { author, title, targets, grades: a.grades, comments: a.comments, process };
    let bytes = canonical_line(review.to_canonical().map_err(|e| anyhow!("{e}"))?);
    match a.out {
        Some(path) => {
            std::fs::write(&path, &bytes).with_context(|| path.display().to_string())?;
            let (object, _) = review_as_object(&review).map_err(|e| anyhow!("{e}"))?;
            Ok(format!("{}\n", object.fingerprint()).into_bytes())
        }
        None => Ok(bytes),
    }
}

/// Submits to the local store as its owner (p2p) or under a neutral name.
fn put(node: &mut StoreNode, object: &PublishedObject, handle: DocumentHandle) -> Result<DocumentHandle> {
    let submitter = node.config().owner.clone().unwrap_or_else(|| Identity::new("scholnet"));
    node.submit_with_handle(object, handle, &submitter).map_err(|e| anyhow!("{e}"))
}

/// What `round start` reads: the process, the mode, and the works with
/// paths relative to the description file.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoundDescription {
    pub spec: ReviewProcessSpec,
    pub mode: RoundMode,
    pub works: Vec<WorkEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkEntry {
    pub private: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anonymized: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub authors: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub media_type: Option<String>,
}

fn load_blob(base: &Path, rel: &str, media: &str) -> Result<PublishedObject> {
    let path = base.join(rel);
    let bytes = std::fs::read(&path).with_context(|| path.display().to_string())?;
    Ok(PublishedObject::blob(bytes, media))
}

fn load_round(data: &DataDir, name: &str) -> Result<(PathBuf, RoundState)> {
    let path = data.round_file(name)?;
    let state = data.read(&path)?.ok_or_else(|| anyhow!("no round {name:?}"))?;
    Ok((path, state))
}

pub fn round(ctx: &Ctx, c: RoundCmd) -> Result<Vec<u8>> {
    let data = ctx.data()?;
    match c {
        RoundCmd::Start { name, description, date } => {
            let path = data.round_file(&name)?;
            if path.exists() {
                bail!("round {name:?} already exists");
            }
            let d: RoundDescription = read_canonical(&description)?;
            let base = description.parent().unwrap_or(Path::new("."));
            let mut works = Vec::new();
            for w in d.works {
                let media = w.media_type.as_deref().unwrap_or("application/octet-stream");
                let private_object = load_blob(base, &w.private, media)?;
                let anonymized_object = w.anonymized.as_deref().map(|a| load_blob(base, a, media)).transpose()?;
                let coes = data.certs_of(&private_object.fingerprint())?;
                let handle = make_handle(&private_object, w.title, w.authors, coes);
                works.push(RoundWork { private_object, anonymized_object, handle });
            }
            let state = start_round(d.spec, works, d.mode, date).map_err(|e| anyhow!("{e}"))?;
            let dir = data.path(format!("rounds/{name}"));
            let mut listing = String::new();
            for (i, p) in state.packets().iter().enumerate() {
                let template = dir.join(format!("packet-{i}.template.canon"));
                let work = dir.join(format!("packet-{i}.work"));
                data.write(&template, &p.template)?;
                crate::data::write_atomic(&work, &p.object.canonical_bytes())?;
                let _ = writeln!(listing, "packet\t{}\t{}", template.display(), work.display());
            }
            data.write(&path, &state)?;
            let mut out = canonical_line(state.description());
            if ctx.format == OutputFormat::Text {
                out.extend(listing.into_bytes());
            }
            Ok(out)
        }
        RoundCmd::Submit { name, review, escrow } => {
            let (path, mut state) = load_round(&data, &name)?;
            let review = read_review(&review)?;
            let mut escrow = escrow.map(|l| data.load_escrow(&l)).transpose()?;
            let receipt = state.submit_review(review, escrow.as_mut()).map_err(|e| anyhow!("{e}"))?;
            if let Some(e) = &escrow {
                data.save_escrow(e)?;
            }
            data.write(&path, &state)?;
            if receipt.published_now {
                let mut node = data.local_store()?;
                for (object, handle) in state.public_reviews() {
                    if handle.fingerprint == receipt.review.fingerprint {
                        put(&mut node, &object, handle)?;
                    }
                }
            }
            let status = if receipt.published_now { "published" } else { "held" };
            Ok(format!("{status}\t{}\n", receipt.review.fingerprint).into_bytes())
        }
        RoundCmd::Release { name, date } => {
            let (path, mut state) = load_round(&data, &name)?;
            let release = state.release(date).map_err(|e| anyhow!("{e}"))?;
            let mut node = data.local_store()?;
            let mut out = String::new();
            for (object, handle) in &release.works {
                let h = put(&mut node, object, handle.clone())?;
                let _ = writeln!(out, "work\t{}\t{}", h.fingerprint, h.title.as_deref().unwrap_or("-"));
            }
            for (object, handle) in &release.reviews {
                let h = put(&mut node, object, handle.clone())?;
                let _ = writeln!(out, "review\t{}\t{}", h.fingerprint, h.title.as_deref().unwrap_or("-"));
            }
            for fp in &release.withheld {
                let _ = writeln!(out, "withheld\t{fp}");
            }
            data.write(&path, &state)?;
            Ok(out.into_bytes())
        }
    }
}
