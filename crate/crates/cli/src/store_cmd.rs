use std::io::Write as _;
use std::net::{TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::sync::RwLock;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Subcommand, ValueEnum};

use scholnet::canonical::{canonical_encode, Fingerprint};
use scholnet::model::{make_handle, DocumentHandle, Identity, PublishedObject};
use scholnet::store::{read_frame, serve_http, serve_stream, write_frame, LookupOutcome, Request, Response, StoreMode};

use crate::coe_cmd::file_fingerprint;
use crate::config::OutputFormat;
use crate::{canonical_line, parse_fp, Ctx};

#[derive(Debug, Args)]
pub struct PublishArgs {
    file: PathBuf,
    #[arg(long)]
    title: Option<String>,
    #[arg(long = "author")]
    authors: Vec<String>,
    #[arg(long)]
    media_type: Option<String>,
    /// Who submits; defaults to the node owner, then the first author.
    #[arg(long)]
    submitter: Option<String>,
    #[arg(long)]
    affiliation: Option<String>,
    /// Remote store (`host:port`) instead of the local one.
    #[arg(long)]
    store: Option<String>,
}

#[derive(Debug, Args)]
pub struct HandleArgs {
    file: PathBuf,
    #[arg(long)]
    title: Option<String>,
    #[arg(long = "author")]
    authors: Vec<String>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Institutional,
    P2p,
}

#[derive(Debug, Subcommand)]
pub enum StoreCmd {
    /// Serve the local store: framed requests on --listen, GET over --http.
    Serve {
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        /// Node owner; required for p2p mode unless configured.
        #[arg(long)]
        owner: Option<String>,
        #[arg(long, default_value = "127.0.0.1:7411")]
        listen: String,
        #[arg(long)]
        http: Option<String>,
        /// Exit after this many connections (for scripted use).
        #[arg(long)]
        max_connections: Option<usize>,
    },
    /// Fetch an object by fingerprint from the local or a remote store.
    Get {
        #[arg(value_parser = parse_fp)]
        fingerprint: Fingerprint,
        #[arg(long)]
        store: Option<String>,
        /// Write the content here instead of printing its handle.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn media_type_for(path: &Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("pdf") => "application/pdf",
        Some("txt") | Some("md") => "text/plain",
        Some("tex") => "application/x-tex",
        Some("html") | Some("htm") => "text/html",
        Some("json") => "application/json",
        _ => "application/octet-stream",
    }
}

fn authors(list: Vec<String>) -> Option<Vec<String>> {
    (!list.is_empty()).then_some(list)
}

fn render_handle(ctx: &Ctx, h: &DocumentHandle) -> Vec<u8> {
    match ctx.format {
        OutputFormat::Canonical => canonical_line(canonical_encode(h).expect("handles are encodable").into_vec()),
        _ => format!("{h}\n").into_bytes(),
    }
}

pub fn handle(ctx: &Ctx, a: HandleArgs) -> Result<Vec<u8>> {
    let fp = file_fingerprint(&a.file)?;
    let data = ctx.data()?;
    let mut h = DocumentHandle::bare(fp);
    if data.path("store").exists() {
        if let Some(stored) = data.local_store()?.get_metadata(&fp) {
            h = stored;
        }
    }
    if a.title.is_some() {
        h.title = a.title;
    }
    if let Some(au) = authors(a.authors) {
        h.authors = Some(au);
    }
    for c in data.certs_of(&fp)? {
        if !h.coes.contains(&c) {
            h.coes.push(c);
        }
    }
    Ok(render_handle(ctx, &h))
}

pub fn publish(ctx: &Ctx, a: PublishArgs) -> Result<Vec<u8>> {
    let bytes = std::fs::read(&a.file).with_context(|| a.file.display().to_string())?;
    let media = a.media_type.unwrap_or_else(|| media_type_for(&a.file).to_owned());
    let object = PublishedObject::blob(bytes, media);
    let data = ctx.data()?;
    let handle = make_handle(&object, a.title, authors(a.authors.clone()), data.certs_of(&object.fingerprint())?);
    let submitter_name = a.submitter.or_else(|| a.authors.first().cloned());
    let stored = match a.store {
        Some(addr) => {
            let name = submitter_name.ok_or_else(|| anyhow!("remote publish needs --submitter or --author"))?;
            let submitter = Identity { affiliation: a.affiliation, ..Identity::new(name) };
            match call(&addr, &Request::PutObject { object, submitter, handle: Some(handle) })? {
                Response::Stored { handle } => handle,
                Response::Refused { reason } => bail!("refused: {reason}"),
                other => bail!("unexpected reply {}", reply_kind(&other)),
            }
        }
        None => {
            let mut node = data.local_store()?;
            let submitter = match (&node.config().owner, submitter_name) {
                (_, Some(n)) => Identity { affiliation: a.affiliation, ..Identity::new(n) },
                (Some(owner), None) => owner.clone(),
                (None, None) => bail!("publish needs --submitter or --author"),
            };
            node.submit_with_handle(&object, handle, &submitter).map_err(|e| anyhow!("{e}"))?
        }
    };
    Ok(render_handle(ctx, &stored))
}

fn reply_kind(r: &Response) -> &'static str {
    match r {
        Response::Object { .. } => "object",
        Response::Metadata { .. } => "metadata",
        Response::Absent => "absent",
        Response::Stored { .. } => "stored",
        Response::Refused { .. } => "refused",
        Response::Nodes { .. } => "nodes",
        Response::Providers { .. } => "providers",
        Response::Ack => "ack",
    }
}

/// One request/response exchange with a remote store.
fn call(addr: &str, request: &Request) -> Result<Response> {
    let mut stream = TcpStream::connect(addr).with_context(|| format!("connecting to {addr}"))?;
    write_frame(&mut stream, request)?;
    stream.shutdown(std::net::Shutdown::Write)?;
    read_frame(&mut stream)?.ok_or_else(|| anyhow!("{addr} closed the connection without answering"))
}

pub fn run(ctx: &Ctx, c: StoreCmd) -> Result<Vec<u8>> {
    match c {
        StoreCmd::Serve { mode, owner, listen, http, max_connections } => serve(ctx, mode, owner, &listen, http, max_connections),
        StoreCmd::Get { fingerprint, store, out } => get(ctx, fingerprint, store, out),
    }
}

fn get(ctx: &Ctx, fp: Fingerprint, store: Option<String>, out: Option<PathBuf>) -> Result<Vec<u8>> {
    let (object, handle) = match store {
        Some(addr) => match call(&addr, &Request::GetObject { fingerprint: fp })? {
            Response::Object { object, .. } => {
                let h = match call(&addr, &Request::GetMetadata { fingerprint: fp })? {
                    Response::Metadata { handle } => handle,
                    _ => DocumentHandle::bare(fp),
                };
                (Some(object), h)
            }
            Response::Metadata { handle } => (None, handle),
            Response::Absent => bail!("absent at {addr}"),
            other => bail!("unexpected reply {}", reply_kind(&other)),
        },
        None => {
            let node = ctx.data()?.local_store()?;
            match node.get(&fp) {
                LookupOutcome::Found { object, .. } => (Some(object), node.get_metadata(&fp).unwrap_or_else(|| DocumentHandle::bare(fp))),
                LookupOutcome::MetadataOnly { handle, .. } => (None, handle),
                other => bail!("{}", other.label()),
            }
        }
    };
    if let Some(object) = &object {
        if object.fingerprint() != fp {
            bail!("integrity mismatch for {fp}");
        }
    }
    match (out, object) {
        (Some(path), Some(object)) => {
            let bytes = match object {
                PublishedObject::Blob { bytes, .. } => bytes,
                d => d.canonical_bytes(),
            };
            std::fs::write(&path, bytes).with_context(|| path.display().to_string())?;
            Ok(render_handle(ctx, &handle))
        }
        (Some(_), None) => bail!("metadata only: no content for {fp}"),
        (None, _) => Ok(render_handle(ctx, &handle)),
    }
}

fn serve(
    ctx: &Ctx,
    mode: Option<ModeArg>,
    owner: Option<String>,
    listen: &str,
    http: Option<String>,
    max_connections: Option<usize>,
) -> Result<Vec<u8>> {
    let data = ctx.data()?;
    let mut config = data.node_config()?;
    if let Some(m) = mode {
        config.mode = match m {
            ModeArg::Institutional => StoreMode::Institutional,
            ModeArg::P2p => StoreMode::P2p,
        };
    }
    if let Some(o) = owner {
        config.owner = Some(Identity::new(o));
    }
    let node = RwLock::new(data.store(config)?);
    let listener = TcpListener::bind(listen).with_context(|| format!("binding {listen}"))?;
    let http_server = match &http {
        Some(addr) => Some(tiny_http::Server::http(addr.as_str()).map_err(|e| anyhow!("binding {addr}: {e}"))?),
        None => None,
    };
    {
        let mut stdout = std::io::stdout().lock();
        writeln!(stdout, "listening {}", listener.local_addr()?)?;
        if let Some(s) = &http_server {
            writeln!(stdout, "http {}", s.server_addr())?;
        }
        stdout.flush()?;
    }
    let mut served = 0u64;
    std::thread::scope(|s| -> Result<()> {
        if let Some(server) = &http_server {
            let node = &node;
            s.spawn(move || serve_http(node, server, 4));
        }
        let mut accepted = 0usize;
        let mut workers = Vec::new();
        for stream in listener.incoming() {
            let mut stream = stream?;
            let node = &node;
            workers.push(s.spawn(move || serve_stream(node, &mut stream).unwrap_or(0)));
            accepted += 1;
            if max_connections.is_some_and(|m| accepted >= m) {
                break;
            }
        }
        for w in workers {
            served += w.join().unwrap_or(0);
        }
        if let Some(server) = &http_server {
            for _ in 0..4 {
                server.unblock();
            }
        }
        Ok(())
    })?;
    Ok(format!("served {served}\n").into_bytes())
}
