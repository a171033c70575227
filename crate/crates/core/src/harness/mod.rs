//! Deterministic discrete-event simulation of store networks and review
//! scenarios.
//!
//! Everything runs on one thread against a logical clock. Message delivery
//! goes through an event queue ordered by `(tick, sequence)`, link faults are
//! drawn from the world's seeded generator, and every event is appended to a
//! tab-separated log. The same seed and parameters give the same log, byte
//! for byte.

mod scenarios;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use chrono::{Days, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::canonical::{canonical_encode, Fingerprint};
use crate::store::{NodeId, Request, Response, StoreError, StoreNode, Transport};

pub use self::scenarios::{run_scenario, simulate, Check, ScenarioReport, SCENARIOS};

/// Tick 0 of every scenario; one tick is one day.
pub fn epoch() -> NaiveDate {
    NaiveDate::from_ymd_opt(2014, 1, 1).expect("valid date")
}

pub fn tick_date(tick: u64) -> NaiveDate {
    epoch().checked_add_days(Days::new(tick)).expect("date in range")
}

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("unknown scenario {0:?}")]
    UnknownScenario(String),
    #[error("unknown fault target {0}")]
    UnknownTarget(String),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("scenario step failed: {0}")]
    Step(String),
}

/// Scenario parameters; the file form is their canonical encoding.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioParams {
    pub seed: u64,
    pub nodes: u32,
    pub lookups: u32,
    /// Per-message loss probability, in thousandths.
    pub drop_permille: u32,
    pub alpha: u32,
    pub k: u32,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        ScenarioParams { seed: 0, nodes: 64, lookups: 100, drop_permille: 0, alpha: 3, k: 8 }
    }
}

impl ScenarioParams {
    pub fn with_seed(seed: u64) -> Self {
        ScenarioParams { seed, ..Self::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Link {
    pub latency: u64,
    pub drop_permille: u32,
}

impl Default for Link {
    fn default() -> Self {
        Link { latency: 1, drop_permille: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// Loss probability on both directions of one link.
    DropLink { a: NodeId, b: NodeId, permille: u32 },
    /// The node stops answering.
    KillNode { node: NodeId },
    /// Extra latency on every message the node receives.
    Delay { node: NodeId, ticks: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogLine {
    pub tick: u64,
    pub node: String,
    pub kind: String,
    pub digest: Fingerprint,
}

/// Bytes that left the simulation for the public, e.g. published reviews.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PublicRecord {
    pub tick: u64,
    pub kind: String,
    pub bytes: Vec<u8>,
}

enum Event {
    Deliver { call: u64, from: NodeId, to: NodeId, request: Request },
    Reply { call: u64, to: NodeId, response: Response },
}

/// Nodes, links, clock, generator and trace of one simulation.
pub struct SimWorld {
    now: u64,
    seq: u64,
    next_call: u64,
    queue: BTreeMap<(u64, u64), Event>,
    rng: ChaCha8Rng,
    stores: BTreeMap<NodeId, StoreNode>,
    labels: BTreeMap<NodeId, String>,
    default_link: Link,
    links: BTreeMap<(NodeId, NodeId), Link>,
    killed: BTreeSet<NodeId>,
    delays: BTreeMap<NodeId, u64>,
    /// Round-trip budget; later replies count as timeouts.
    pub timeout: u64,
    log: Vec<LogLine>,
    public: Vec<PublicRecord>,
}

fn digest<T: Serialize + ?Sized>(payload: &T) -> Fingerprint {
    canonical_encode(payload).map(|b| b.fingerprint()).unwrap_or_else(|_| Fingerprint::sha256(b""))
}

fn request_kind(r: &Request) -> &'static str {
    match r {
        Request::GetObject { .. } => "get_object",
        Request::GetMetadata { .. } => "get_metadata",
        Request::PutObject { .. } => "put_object",
        Request::GetPeers => "get_peers",
        Request::FindNode { .. } => "find_node",
        Request::FindValue { .. } => "find_value",
        Request::Announce { .. } => "announce",
    }
}

fn response_kind(r: &Response) -> &'static str {
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

impl SimWorld {
    pub fn new(seed: u64) -> Self {
        SimWorld {
            now: 0,
            seq: 0,
            next_call: 0,
            queue: BTreeMap::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            stores: BTreeMap::new(),
            labels: BTreeMap::new(),
            default_link: Link::default(),
            links: BTreeMap::new(),
            killed: BTreeSet::new(),
            delays: BTreeMap::new(),
            timeout: 32,
            log: Vec::new(),
            public: Vec::new(),
        }
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    pub fn date(&self) -> NaiveDate {
        tick_date(self.now)
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    pub fn set_default_link(&mut self, link: Link) {
        self.default_link = link;
    }

    pub fn set_link(&mut self, a: NodeId, b: NodeId, link: Link) {
        self.links.insert((a, b), link);
        self.links.insert((b, a), link);
    }

    pub fn add_store(&mut self, label: impl Into<String>, node: StoreNode) -> NodeId {
        let id = node.id();
        self.labels.insert(id, label.into());
        self.stores.insert(id, node);
        id
    }

    /// Names a participant that is not a store (a client, an author).
    pub fn add_label(&mut self, id: NodeId, label: impl Into<String>) {
        self.labels.insert(id, label.into());
    }

    pub fn store(&self, id: &NodeId) -> Option<&StoreNode> {
        self.stores.get(id)
    }

    pub fn store_mut(&mut self, id: &NodeId) -> Option<&mut StoreNode> {
        self.stores.get_mut(id)
    }

    pub fn store_ids(&self) -> Vec<NodeId> {
        self.stores.keys().copied().collect()
    }

    pub fn label(&self, id: &NodeId) -> String {
        self.labels.get(id).cloned().unwrap_or_else(|| id.short())
    }

    /// Runs `f` with one node taken out of the world, so the node can use the
    /// world as its transport.
    pub fn with_store<R>(&mut self, id: NodeId, f: impl FnOnce(&mut StoreNode, &mut SimWorld) -> R) -> Result<R, HarnessError> {
        let mut node = self.stores.remove(&id).ok_or_else(|| HarnessError::UnknownTarget(id.to_string()))?;
        let out = f(&mut node, self);
        self.stores.insert(id, node);
        Ok(out)
    }

    pub fn inject_fault(&mut self, fault: Fault) -> Result<(), HarnessError> {
        let check = |w: &SimWorld, id: &NodeId| {
            if w.stores.contains_key(id) {
                Ok(())
            } else {
                Err(HarnessError::UnknownTarget(id.to_string()))
            }
        };
        match fault {
            Fault::DropLink { a, b, permille } => {
                check(self, &a)?;
                check(self, &b)?;
                let latency = self.link(a, b).latency;
                self.set_link(a, b, Link { latency, drop_permille: permille });
                self.record(&a, "fault.drop_link", &(b, permille));
            }
            Fault::KillNode { node } => {
                check(self, &node)?;
                self.killed.insert(node);
                self.record(&node, "fault.kill", &node);
            }
            Fault::Delay { node, ticks } => {
                check(self, &node)?;
                self.delays.insert(node, ticks);
                self.record(&node, "fault.delay", &ticks);
            }
        }
        Ok(())
    }

    fn link(&self, from: NodeId, to: NodeId) -> Link {
        self.links.get(&(from, to)).copied().unwrap_or(self.default_link)
    }

    fn lost(&mut self, from: NodeId, to: NodeId) -> bool {
        let p = self.link(from, to).drop_permille;
        p > 0 && self.rng.gen_range(0..1000) < p
    }

    fn latency(&self, from: NodeId, to: NodeId) -> u64 {
        self.link(from, to).latency + self.delays.get(&to).copied().unwrap_or(0)
    }

    fn schedule(&mut self, at: u64, event: Event) {
        self.seq += 1;
        self.queue.insert((at, self.seq), event);
    }

    /// Appends a log line at the current tick.
    pub fn record<T: Serialize + ?Sized>(&mut self, node: &NodeId, kind: &str, payload: &T) {
        let node = self.label(node);
        self.record_as(&node, kind, payload);
    }

    pub fn record_as<T: Serialize + ?Sized>(&mut self, node: &str, kind: &str, payload: &T) {
        self.log.push(LogLine { tick: self.now, node: node.to_owned(), kind: kind.to_owned(), digest: digest(payload) });
    }

    /// Releases bytes to the public and logs their digest.
    pub fn publish(&mut self, node: &str, kind: &str, bytes: Vec<u8>) {
        self.log.push(LogLine { tick: self.now, node: node.to_owned(), kind: kind.to_owned(), digest: Fingerprint::sha256(&bytes) });
        self.public.push(PublicRecord { tick: self.now, kind: kind.to_owned(), bytes });
    }

    pub fn advance_to(&mut self, tick: u64) {
        self.now = self.now.max(tick);
    }

    pub fn advance(&mut self, ticks: u64) {
        self.now += ticks;
    }

    pub fn log(&self) -> &[LogLine] {
        &self.log
    }

    pub fn public(&self) -> &[PublicRecord] {
        &self.public
    }

    /// One line per event: tick, node, kind, payload digest.
    pub fn render_log(&self) -> String {
        let mut out = String::new();
        for l in &self.log {
            let _ = writeln!(out, "{}\t{}\t{}\t{}", l.tick, l.node, l.kind, l.digest);
        }
        out
    }

    /// Runs the event queue until the reply to `call` arrives or nothing is
    /// left in flight.
    fn pump(&mut self, call: u64, sent: u64) -> Option<Response> {
        while let Some(((at, _), event)) = self.queue.pop_first() {
            self.now = self.now.max(at);
            match event {
                Event::Deliver { call: c, from, to, request } => {
                    if self.killed.contains(&to) {
                        self.record(&to, "lost.dead", &request);
                        continue;
                    }
                    let Some(node) = self.stores.get_mut(&to) else {
                        self.record(&to, "lost.unknown", &request);
                        continue;
                    };
                    let response = node.handle(request);
                    self.record(&to, &format!("recv.{}", response_kind(&response)), &response);
                    if self.lost(to, from) {
                        self.record(&to, "drop.reply", &response);
                        continue;
                    }
                    let at = self.now + self.latency(to, from);
                    self.schedule(at, Event::Reply { call: c, to: from, response });
                }
                Event::Reply { call: c, to, response } => {
                    if c != call {
                        continue;
                    }
                    if self.now - sent > self.timeout {
                        self.record(&to, "late", &response);
                        return None;
                    }
                    return Some(response);
                }
            }
        }
        None
    }
}

impl Transport for SimWorld {
    fn call(&mut self, from: NodeId, to: NodeId, request: Request) -> Option<Response> {
        let call = self.next_call;
        self.next_call += 1;
        let sent = self.now;
        let kind = request_kind(&request);
        self.record(&from, &format!("send.{kind}"), &request);
        if self.lost(from, to) {
            self.record(&from, &format!("drop.{kind}"), &request);
        } else {
            let at = sent + self.latency(from, to);
            self.schedule(at, Event::Deliver { call, from, to, request });
        }
        let reply = self.pump(call, sent);
        if reply.is_none() {
            self.now = self.now.max(sent + self.timeout);
            self.record(&from, "timeout", &to);
        }
        reply
    }
}
