use std::path::PathBuf;

use anyhow::{anyhow, bail, Result};
use chrono::NaiveDate;
use clap::{Args, Subcommand};

use scholnet::canonical::{decode, parse_fingerprint, Fingerprint, Value};
use scholnet::model::{Fraction, Identity};
use scholnet::query::{execute, feed, results_canonical, results_text, Filter, KnowledgeGraph, RankingSpec, SavedQuery};
use scholnet::store::LookupOutcome;

use crate::config::OutputFormat;
use crate::data::DataDir;
use crate::{canonical_line, parse_date, parse_fp, read_canonical, Ctx};

#[derive(Debug, Subcommand)]
pub enum QueryCmd {
    /// Save a query, from flags or from a canonical definition file.
    Define(DefineArgs),
    /// Run a saved query over the local store.
    Run {
        id: String,
        /// Caller identity; private queries only run for their owner.
        #[arg(long = "as")]
        caller: Option<String>,
        /// As-of date, required for feed output.
        #[arg(long, value_parser = parse_date)]
        date: Option<NaiveDate>,
    },
    /// Atom feed of the top results of a public query.
    Feed {
        id: String,
        #[arg(long, default_value_t = 20)]
        limit: usize,
        #[arg(long, value_parser = parse_date)]
        date: NaiveDate,
    },
}

#[derive(Debug, Args)]
pub struct DefineArgs {
    id: String,
    /// Canonical SavedQuery; the other flags are ignored when given.
    #[arg(long)]
    from: Option<PathBuf>,
    #[arg(long)]
    owner: Option<String>,
    #[arg(long = "title-term")]
    title_terms: Vec<String>,
    #[arg(long)]
    author: Option<String>,
    #[arg(long, value_parser = parse_date)]
    coe_from: Option<NaiveDate>,
    #[arg(long, value_parser = parse_date)]
    coe_to: Option<NaiveDate>,
    #[arg(long)]
    min_score: Option<Fraction>,
    #[arg(long, value_parser = parse_fp)]
    reviewed_by: Option<Fingerprint>,
    /// Escrow boards whose reviews this query ignores.
    #[arg(long = "blacklist", value_parser = parse_fp)]
    blacklist: Vec<Fingerprint>,
    #[arg(long)]
    damping: Option<Fraction>,
    #[arg(long)]
    depth: Option<u32>,
    #[arg(long)]
    private: bool,
}

fn build_query(a: DefineArgs) -> Result<SavedQuery> {
    if let Some(path) = &a.from {
        let q: SavedQuery = read_canonical(path)?;
        if q.id != a.id {
            bail!("definition id {:?} does not match {:?}", q.id, a.id);
        }
        return Ok(q);
    }
    let owner = a.owner.ok_or_else(|| anyhow!("--owner is required"))?;
    let mut parts = Vec::new();
    if !a.title_terms.is_empty() {
        parts.push(Filter::TitleTerms(a.title_terms));
    }
    if let Some(au) = a.author {
        parts.push(Filter::Author(au));
    }
    if a.coe_from.is_some() || a.coe_to.is_some() {
        parts.push(Filter::CoeDate { from: a.coe_from, to: a.coe_to });
    }
    if let Some(m) = a.min_score {
        parts.push(Filter::MinScore(m));
    }
    if let Some(b) = a.reviewed_by {
        parts.push(Filter::ReviewedBy(b));
    }
    let filter = match parts.len() {
        0 => Filter::All,
        1 => parts.pop().expect("one part"),
        _ => Filter::And(parts),
    };
    let mut ranking = RankingSpec::default();
    if let Some(d) = a.damping {
        ranking.damping = d;
    }
    if let Some(d) = a.depth {
        ranking.max_depth = d;
    }
    if !ranking.is_valid() {
        bail!("ranking needs depth >= 1 and damping in (0, 1]");
    }
    Ok(SavedQuery { id: a.id, owner: Identity::new(owner), filter, ranking, public: !a.private, blacklist: a.blacklist })
}

/// Everything the local store knows, plus escrow responsiveness.
pub fn local_graph(data: &DataDir) -> Result<KnowledgeGraph> {
    let node = data.local_store()?;
    let mut graph = KnowledgeGraph::new();
    let content = node.home_of().into_iter().chain(node.cached());
    for fp in content {
        if let LookupOutcome::Found { object, .. } = node.get(&fp) {
            graph.index(&object, node.get_metadata(&fp).as_ref());
        }
    }
    for fp in node.metadata_only() {
        if let Some(h) = node.get_metadata(&fp) {
            graph.index_handle(&h);
        }
    }
    for status in data.escrow_public()? {
        let Ok(Value::Map(m)) = decode(&status) else { continue };
        let board = m.get("board").and_then(Value::as_text).and_then(|t| parse_fingerprint(t).ok());
        if let (Some(board), Some(Value::Bool(responsive))) = (board, m.get("responsive")) {
            graph.set_escrow_responsive(board, *responsive);
        }
    }
    Ok(graph)
}

fn load(data: &DataDir, id: &str) -> Result<SavedQuery> {
    data.read(&data.query_file(id)?)?.ok_or_else(|| anyhow!("no query {id:?}"))
}

pub fn run(ctx: &Ctx, c: QueryCmd) -> Result<Vec<u8>> {
    let data = ctx.data()?;
    match c {
        QueryCmd::Define(a) => {
            let q = build_query(a)?;
            data.write(&data.query_file(&q.id)?, &q)?;
            Ok(canonical_line(q.definition()))
        }
        QueryCmd::Run { id, caller, date } => {
            let q = load(&data, &id)?;
            let graph = local_graph(&data)?;
            if ctx.format == OutputFormat::Feed {
                let date = date.ok_or_else(|| anyhow!("feed output needs --date"))?;
                return Ok(feed(&graph, &q, usize::MAX, date).map_err(|e| anyhow!("{e}"))?.into_bytes());
            }
            let caller = caller.map(|c| if c == q.owner.name { q.owner.clone() } else { Identity::new(c) });
            let results = execute(&graph, &q, caller.as_ref()).map_err(|e| anyhow!("{e}"))?;
            Ok(match ctx.format {
                OutputFormat::Canonical => canonical_line(results_canonical(&results)),
                _ => results_text(&results).into_bytes(),
            })
        }
        QueryCmd::Feed { id, limit, date } => {
            let q = load(&data, &id)?;
            let graph = local_graph(&data)?;
            Ok(feed(&graph, &q, limit, date).map_err(|e| anyhow!("{e}"))?.into_bytes())
        }
    }
}
