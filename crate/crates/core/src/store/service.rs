use std::io::{self, Read, Write};
use std::sync::RwLock;

use base64::engine::general_purpose::URL_SAFE_NO_PAD;
use base64::Engine;

use super::wire::{read_frame, write_frame, Request, Response};
use super::{LookupOutcome, StoreNode};
use crate::canonical::{canonical_encode, parse_fingerprint};

/// Response header carrying the canonical provenance record, base64url-encoded.
pub const PROVENANCE_HEADER: &str = "X-Scholnet-Provenance";

/// Serves framed requests on one connection until the peer closes it.
/// Read-only requests share the node; writes take it exclusively.
pub fn serve_stream<S: Read + Write>(node: &RwLock<StoreNode>, stream: &mut S) -> io::Result<u64> {
    let mut served = 0;
    while let Some(request) = read_frame::<_, Request>(stream)? {
        let read = node.read().expect("store lock").handle_read(&request);
        let response = match read {
            Some(r) => r,
            None => node.write().expect("store lock").handle(request),
        };
        write_frame(stream, &response)?;
        served += 1;
    }
    Ok(served)
}

pub(crate) struct HttpReply {
    pub status: u16,
    pub content_type: String,
    pub provenance: Option<String>,
    pub body: Vec<u8>,
}

impl HttpReply {
    fn text(status: u16, body: &str) -> Self {
        HttpReply { status, content_type: "text/plain; charset=utf-8".into(), provenance: None, body: body.as_bytes().to_vec() }
    }
}

pub(crate) fn route(node: &StoreNode, method: &str, url: &str) -> HttpReply {
    if method != "GET" {
        return HttpReply::text(405, "only GET is served over HTTP");
    }
    let path = url.split('?').next().unwrap_or_default();
    let (kind, rest) = match path.strip_prefix("/objects/") {
        Some(rest) => ("objects", rest),
        None => match path.strip_prefix("/metadata/") {
            Some(rest) => ("metadata", rest),
            None => return HttpReply::text(404, "unknown path"),
        },
    };
    let Ok(fp) = parse_fingerprint(rest) else {
        return HttpReply::text(400, "malformed fingerprint");
    };
    match (kind, node.handle_read(&Request::GetObject { fingerprint: fp })) {
        ("objects", Some(Response::Object { object, provenance })) => HttpReply {
            status: 200,
            content_type: object.media_type().unwrap_or("application/vnd.scholnet.dictionary").to_owned(),
            provenance: Some(URL_SAFE_NO_PAD.encode(canonical_encode(&provenance).expect("encodable").as_bytes())),
            body: object.canonical_bytes(),
        },
        ("metadata", _) => match node.get_metadata(&fp) {
            Some(handle) => HttpReply {
                status: 200,
                content_type: "application/vnd.scholnet.handle".into(),
                provenance: None,
                body: canonical_encode(&handle).expect("encodable").into_vec(),
            },
            None => HttpReply::text(404, absent_text(node, &fp)),
        },
        (_, Some(Response::Metadata { .. })) => HttpReply::text(404, "metadata only; content not kept here"),
        _ => HttpReply::text(404, absent_text(node, &fp)),
    }
}

fn absent_text(node: &StoreNode, fp: &crate::canonical::Fingerprint) -> &'static str {
    match node.get(fp) {
        LookupOutcome::DefinitelyAbsent => "absent",
        _ => "not found here",
    }
}

/// Serves `/objects/{fp}` and `/metadata/{fp}` with `workers` threads until
/// the server is unblocked.
pub fn serve_http(node: &RwLock<StoreNode>, server: &tiny_http::Server, workers: usize) {
    std::thread::scope(|s| {
        for _ in 0..workers.max(1) {
            s.spawn(|| {
                while let Ok(request) = server.recv() {
                    let reply = route(&node.read().expect("store lock"), request.method().as_str(), request.url());
                    let mut response = tiny_http::Response::from_data(reply.body).with_status_code(reply.status);
                    let header = |k: &str, v: &str| tiny_http::Header::from_bytes(k.as_bytes(), v.as_bytes()).expect("ascii header");
                    response.add_header(header("Content-Type", &reply.content_type));
                    if let Some(p) = reply.provenance {
                        response.add_header(header(PROVENANCE_HEADER, &p));
                    }
                    let _ = request.respond(response);
                }
            });
        }
    });
}
