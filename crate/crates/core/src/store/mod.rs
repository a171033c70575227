//! Data-store nodes.
//!
//! Two network roles share one node type:
//! - institutional nodes peer contractually, keep home copies of what they
//!   accept, flood unsatisfied requests along peering links and can answer
//!   "absent" with confidence;
//! - peer-to-peer nodes accept objects only from their owner, find objects
//!   through a Kademlia-shaped DHT and keep transient cached copies.
//!
//! Every copy served carries a [`Provenance`] naming the serving node's owner.

mod backend;
mod dht;
mod propagate;
mod service;
mod wire;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::canonical::{canonical_decode, canonical_encode, Fingerprint};
use crate::model::{make_handle, DocumentHandle, Identity, PublishedObject};

pub use self::backend::{Backend, DirBackend, MemoryBackend};
pub use self::dht::{dht_lookup, dht_publish, DhtConfig, DhtLookup, RoutingTable};
pub use self::propagate::{propagate_request, Transport};
pub use self::service::{serve_http, serve_stream, PROVENANCE_HEADER};
pub use self::wire::{encode_frame, read_frame, write_frame, Request, Response, MAX_FRAME};

/// Default hop limit for institutional request propagation.
pub const DEFAULT_REQUEST_TTL: u32 = 6;

/// 256-bit node identifier; shares the metric space of SHA-256 digests.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId([u8; 32]);

impl NodeId {
    pub fn from_bytes(bytes: [u8; 32]) -> Self {
        NodeId(bytes)
    }

    /// The DHT key of a fingerprint.
    pub fn of_fingerprint(fp: &Fingerprint) -> Self {
        NodeId(*fp.digest())
    }

    /// Derives an id from a label, for simulations and configuration files.
    pub fn from_label(label: &str) -> Self {
        NodeId(*Fingerprint::sha256(label.as_bytes()).digest())
    }

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    pub fn distance(&self, other: &NodeId) -> [u8; 32] {
        let mut d = [0u8; 32];
        for (i, b) in d.iter_mut().enumerate() {
            *b = self.0[i] ^ other.0[i];
        }
        d
    }

    /// Short hex prefix for logs.
    pub fn short(&self) -> String {
        hex::encode(&self.0[..4])
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&hex::encode(self.0))
    }
}

impl fmt::Debug for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "NodeId({})", self.short())
    }
}

impl std::str::FromStr for NodeId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bytes = hex::decode(s).map_err(|e| e.to_string())?;
        bytes.try_into().map(NodeId).map_err(|_| "node id must be 64 hex digits".to_owned())
    }
}

impl Serialize for NodeId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for NodeId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StoreMode {
    Institutional,
    P2p,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SubmissionPolicy {
    #[default]
    Open,
    /// Only submitters declaring this affiliation are accepted.
    AffiliatedOnly(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StoreConfig {
    pub mode: StoreMode,
    pub node_id: NodeId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub owner: Option<Identity>,
    #[serde(default)]
    pub peers: Vec<NodeId>,
    #[serde(default)]
    pub submission_policy: SubmissionPolicy,
    pub request_ttl: u32,
    /// Upper bound on non-home copies kept after eviction.
    pub cache_capacity: usize,
}

impl StoreConfig {
    pub fn institutional(node_id: NodeId) -> Self {
        StoreConfig {
            mode: StoreMode::Institutional,
            node_id,
            owner: None,
            peers: Vec::new(),
            submission_policy: SubmissionPolicy::Open,
            request_ttl: DEFAULT_REQUEST_TTL,
            cache_capacity: 1024,
        }
    }

    pub fn p2p(node_id: NodeId, owner: Identity) -> Self {
        StoreConfig { mode: StoreMode::P2p, owner: Some(owner), ..Self::institutional(node_id) }
    }
}

/// Audit trail of a served copy.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    /// Nodes from the asking node to the serving node, both included.
    pub path: Vec<NodeId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub server_owner: Option<Identity>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LookupOutcome {
    Found { object: PublishedObject, provenance: Provenance },
    /// The work is known by handle only; no copy of the content is kept.
    MetadataOnly { handle: DocumentHandle, provenance: Provenance },
    DefinitelyAbsent,
    PossiblyAbsent,
}

impl LookupOutcome {
    pub fn is_found(&self) -> bool {
        matches!(self, LookupOutcome::Found { .. })
    }

    pub fn label(&self) -> &'static str {
        match self {
            LookupOutcome::Found { .. } => "found",
            LookupOutcome::MetadataOnly { .. } => "metadata-only",
            LookupOutcome::DefinitelyAbsent => "definitely-absent",
            LookupOutcome::PossiblyAbsent => "possibly-absent",
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("only the node owner may insert objects")]
    NotOwner,
    #[error("submission refused: {0}")]
    SubmissionRefused(String),
    #[error("peer-to-peer nodes need an owner identity")]
    OwnerRequired,
    #[error("operation requires {0:?} mode")]
    WrongMode(StoreMode),
    #[error("{0} is not stored on this node")]
    NotStored(Fingerprint),
    #[error("copy does not match its fingerprint {0}")]
    IntegrityMismatch(Fingerprint),
    #[error("corrupt index record: {0}")]
    CorruptIndex(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum ObjectKind {
    Blob { media_type: String },
    Dictionary,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum IndexRecord {
    Put {
        handle: DocumentHandle,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        kind: Option<ObjectKind>,
        home: bool,
    },
    Evict { fingerprint: Fingerprint },
}

#[derive(Debug, Clone)]
struct Entry {
    handle: DocumentHandle,
    /// `None` for metadata-only entries.
    kind: Option<ObjectKind>,
    home: bool,
}

/// One store node: persistence, local lookup and request handling.
///
/// Reads take `&self` and may run concurrently; writes take `&mut self`.
pub struct StoreNode {
    config: StoreConfig,
    backend: Box<dyn Backend>,
    entries: BTreeMap<Fingerprint, Entry>,
    served_clock: AtomicU64,
    last_served: Mutex<BTreeMap<Fingerprint, u64>>,
    routing: RoutingTable,
    providers: BTreeMap<Fingerprint, BTreeSet<NodeId>>,
}

impl fmt::Debug for StoreNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StoreNode").field("mode", &self.config.mode).field("id", &self.config.node_id).field("entries", &self.entries.len()).finish()
    }
}

impl StoreNode {
    /// Opens a node over `backend`, replaying its index.
    pub fn open(config: StoreConfig, backend: Box<dyn Backend>) -> Result<Self, StoreError> {
        if config.mode == StoreMode::P2p && config.owner.is_none() {
            return Err(StoreError::OwnerRequired);
        }
        let mut entries = BTreeMap::new();
        let records = backend.records()?;
        let last = records.len();
        for (i, line) in records.into_iter().enumerate() {
            match canonical_decode::<IndexRecord>(&line) {
                Ok(IndexRecord::Put { handle, kind, home }) => {
                    entries.insert(handle.fingerprint, Entry { handle, kind, home });
                }
                Ok(IndexRecord::Evict { fingerprint }) => {
                    entries.remove(&fingerprint);
                }
                // A torn trailing record is what a crash mid-append leaves behind.
                Err(_) if i + 1 == last => {}
                Err(e) => return Err(StoreError::CorruptIndex(e.to_string())),
            }
        }
        entries.retain(|fp, e| e.kind.is_none() || backend.contains(fp));
        let routing = RoutingTable::new(config.node_id, dht::DEFAULT_K);
        Ok(StoreNode {
            config,
            backend,
            entries,
            served_clock: AtomicU64::new(0),
            last_served: Mutex::new(BTreeMap::new()),
            routing,
            providers: BTreeMap::new(),
        })
    }

    pub fn in_memory(config: StoreConfig) -> Result<Self, StoreError> {
        Self::open(config, Box::new(MemoryBackend::new()))
    }

    pub fn config(&self) -> &StoreConfig {
        &self.config
    }

    pub fn id(&self) -> NodeId {
        self.config.node_id
    }

    pub fn mode(&self) -> StoreMode {
        self.config.mode
    }

    pub fn peers(&self) -> &[NodeId] {
        &self.config.peers
    }

    pub fn add_peer(&mut self, peer: NodeId) {
        if peer != self.config.node_id && !self.config.peers.contains(&peer) {
            self.config.peers.push(peer);
        }
    }

    pub fn routing(&self) -> &RoutingTable {
        &self.routing
    }

    pub fn routing_mut(&mut self) -> &mut RoutingTable {
        &mut self.routing
    }

    pub fn home_of(&self) -> BTreeSet<Fingerprint> {
        self.entries.iter().filter(|(_, e)| e.home).map(|(fp, _)| *fp).collect()
    }

    pub fn metadata_only(&self) -> BTreeSet<Fingerprint> {
        self.entries.iter().filter(|(_, e)| e.kind.is_none()).map(|(fp, _)| *fp).collect()
    }

    /// Non-home copies with content.
    pub fn cached(&self) -> BTreeSet<Fingerprint> {
        self.entries.iter().filter(|(_, e)| !e.home && e.kind.is_some()).map(|(fp, _)| *fp).collect()
    }

    pub fn holds_content(&self, fp: &Fingerprint) -> bool {
        self.entries.get(fp).is_some_and(|e| e.kind.is_some())
    }

    fn provenance(&self) -> Provenance {
        Provenance { path: vec![self.config.node_id], server_owner: self.config.owner.clone() }
    }

    fn check_submitter(&self, submitter: &Identity) -> Result<(), StoreError> {
        match self.config.mode {
            StoreMode::P2p if self.config.owner.as_ref() != Some(submitter) => Err(StoreError::NotOwner),
            StoreMode::P2p => Ok(()),
            StoreMode::Institutional => match &self.config.submission_policy {
                SubmissionPolicy::Open => Ok(()),
                SubmissionPolicy::AffiliatedOnly(aff) if submitter.affiliation.as_deref() == Some(aff.as_str()) => Ok(()),
                SubmissionPolicy::AffiliatedOnly(aff) => {
                    Err(StoreError::SubmissionRefused(format!("submitter is not affiliated with {aff}")))
                }
            },
        }
    }

    /// Accepts an object from an author. The accepting node becomes its home.
    pub fn submit(&mut self, object: &PublishedObject, submitter: &Identity) -> Result<DocumentHandle, StoreError> {
        self.submit_with_handle(object, make_handle(object, None, None, Vec::new()), submitter)
    }

    /// As [`submit`](Self::submit), recording the display fields of `handle`.
    pub fn submit_with_handle(
        &mut self,
        object: &PublishedObject,
        handle: DocumentHandle,
        submitter: &Identity,
    ) -> Result<DocumentHandle, StoreError> {
        self.check_submitter(submitter)?;
        if handle.fingerprint != object.fingerprint() {
            return Err(StoreError::IntegrityMismatch(handle.fingerprint));
        }
        self.insert(object, handle, true)
    }

    /// Keeps a copy fetched from elsewhere. Never demotes a home copy.
    pub fn cache_copy(&mut self, object: &PublishedObject, handle: Option<DocumentHandle>) -> Result<(), StoreError> {
        let fp = object.fingerprint();
        if let Some(h) = &handle {
            if h.fingerprint != fp {
                return Err(StoreError::IntegrityMismatch(h.fingerprint));
            }
        }
        if self.holds_content(&fp) {
            return Ok(());
        }
        let handle = handle.or_else(|| self.entries.get(&fp).map(|e| e.handle.clone())).unwrap_or_else(|| DocumentHandle::bare(fp));
        self.insert(object, handle, false)?;
        self.touch(&fp);
        Ok(())
    }

    /// Indexes a work by handle alone, without content.
    pub fn index_metadata(&mut self, handle: DocumentHandle) -> Result<(), StoreError> {
        if self.holds_content(&handle.fingerprint) {
            return Ok(());
        }
        let record = IndexRecord::Put { handle: handle.clone(), kind: None, home: false };
        self.append(&record)?;
        self.entries.insert(handle.fingerprint, Entry { handle, kind: None, home: false });
        Ok(())
    }

    /// Makes this node an additional home for a locally held object.
    pub fn add_home(&mut self, fp: &Fingerprint) -> Result<(), StoreError> {
        let entry = self.entries.get(fp).filter(|e| e.kind.is_some()).ok_or(StoreError::NotStored(*fp))?.clone();
        if entry.home {
            return Ok(());
        }
        self.append(&IndexRecord::Put { handle: entry.handle.clone(), kind: entry.kind.clone(), home: true })?;
        self.entries.insert(*fp, Entry { home: true, ..entry });
        Ok(())
    }

    fn insert(&mut self, object: &PublishedObject, handle: DocumentHandle, home: bool) -> Result<DocumentHandle, StoreError> {
        let fp = handle.fingerprint;
        if let Some(existing) = self.entries.get(&fp) {
            if existing.kind.is_some() && (existing.home || !home) {
                return Ok(existing.handle.clone());
            }
        }
        self.backend.put(&fp, &object.canonical_bytes())?;
        let kind = Some(match object {
            PublishedObject::Blob { media_type, .. } => ObjectKind::Blob { media_type: media_type.clone() },
            PublishedObject::Dictionary { .. } => ObjectKind::Dictionary,
        });
        self.append(&IndexRecord::Put { handle: handle.clone(), kind: kind.clone(), home })?;
        self.entries.insert(fp, Entry { handle: handle.clone(), kind, home });
        Ok(handle)
    }

    fn append(&mut self, record: &IndexRecord) -> Result<(), StoreError> {
        let bytes = canonical_encode(record).expect("index records are encodable");
        self.backend.append_record(bytes.as_bytes())?;
        Ok(())
    }

    fn touch(&self, fp: &Fingerprint) {
        let t = self.served_clock.fetch_add(1, Ordering::Relaxed);
        self.last_served.lock().expect("served map").insert(*fp, t);
    }

    /// Reads and re-fingerprints a local copy. Copies that fail the check are
    /// treated as missing.
    fn load(&self, fp: &Fingerprint) -> Option<PublishedObject> {
        let kind = self.entries.get(fp)?.kind.as_ref()?;
        let bytes = self.backend.get(fp).ok()??;
        let object = match kind {
            ObjectKind::Blob { media_type } => PublishedObject::blob(bytes, media_type.clone()),
            ObjectKind::Dictionary => {
                #[derive(Deserialize)]
                struct Form {
                    dictionary: BTreeMap<String, Fingerprint>,
                }
                PublishedObject::Dictionary { entries: canonical_decode::<Form>(&bytes).ok()?.dictionary }
            }
        };
        (object.fingerprint() == *fp).then_some(object)
    }

    /// Local lookup only.
    pub fn get(&self, fp: &Fingerprint) -> LookupOutcome {
        if let Some(object) = self.load(fp) {
            self.touch(fp);
            return LookupOutcome::Found { object, provenance: self.provenance() };
        }
        if let Some(e) = self.entries.get(fp) {
            return LookupOutcome::MetadataOnly { handle: e.handle.clone(), provenance: self.provenance() };
        }
        match self.config.mode {
            StoreMode::Institutional => LookupOutcome::DefinitelyAbsent,
            StoreMode::P2p => LookupOutcome::PossiblyAbsent,
        }
    }

    pub fn get_metadata(&self, fp: &Fingerprint) -> Option<DocumentHandle> {
        self.entries.get(fp).map(|e| e.handle.clone())
    }

    /// Drops least-recently-served non-home copies until at most
    /// `cache_capacity` remain. Home copies are never touched.
    pub fn evict_non_home(&mut self) -> Result<Vec<Fingerprint>, StoreError> {
        let mut cached: Vec<(u64, Fingerprint)> = {
            let served = self.last_served.lock().expect("served map");
            self.cached().into_iter().map(|fp| (served.get(&fp).copied().unwrap_or(0), fp)).collect()
        };
        if cached.len() <= self.config.cache_capacity {
            return Ok(Vec::new());
        }
        cached.sort();
        let excess = cached.len() - self.config.cache_capacity;
        let mut evicted = Vec::with_capacity(excess);
        for (_, fp) in cached.into_iter().take(excess) {
            self.append(&IndexRecord::Evict { fingerprint: fp })?;
            self.backend.remove(&fp)?;
            self.entries.remove(&fp);
            self.last_served.lock().expect("served map").remove(&fp);
            evicted.push(fp);
        }
        Ok(evicted)
    }

    /// Answers requests that do not change node state.
    pub fn handle_read(&self, request: &Request) -> Option<Response> {
        Some(match request {
            Request::GetObject { fingerprint } => match self.get(fingerprint) {
                LookupOutcome::Found { object, provenance } => Response::Object { object, provenance },
                LookupOutcome::MetadataOnly { handle, .. } => Response::Metadata { handle },
                _ => Response::Absent,
            },
            Request::GetMetadata { fingerprint } => match self.get_metadata(fingerprint) {
                Some(handle) => Response::Metadata { handle },
                None => Response::Absent,
            },
            Request::GetPeers => Response::Nodes { nodes: self.config.peers.clone() },
            Request::FindNode { target } => Response::Nodes { nodes: self.routing.closest(target, self.routing.k()) },
            Request::FindValue { fingerprint } => match self.load(fingerprint) {
                Some(object) => {
                    self.touch(fingerprint);
                    Response::Object { object, provenance: self.provenance() }
                }
                None => {
                    let key = NodeId::of_fingerprint(fingerprint);
                    let nodes = self.routing.closest(&key, self.routing.k());
                    match self.providers.get(fingerprint) {
                        Some(p) if !p.is_empty() => Response::Providers { providers: p.iter().copied().collect(), nodes },
                        _ => Response::Nodes { nodes },
                    }
                }
            },
            Request::PutObject { .. } | Request::Announce { .. } => return None,
        })
    }

    /// Answers any request.
    pub fn handle(&mut self, request: Request) -> Response {
        if let Some(r) = self.handle_read(&request) {
            return r;
        }
        match request {
            Request::PutObject { object, submitter, handle } => {
                let handle = handle.unwrap_or_else(|| make_handle(&object, None, None, Vec::new()));
                match self.submit_with_handle(&object, handle, &submitter) {
                    Ok(handle) => Response::Stored { handle },
                    Err(e) => Response::Refused { reason: e.to_string() },
                }
            }
            Request::Announce { fingerprint, provider } => {
                self.providers.entry(fingerprint).or_default().insert(provider);
                self.routing.insert(provider);
                Response::Ack
            }
            _ => unreachable!("read requests answered above"),
        }
    }
}
