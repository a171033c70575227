use std::collections::{BTreeMap, BTreeSet};

use super::propagate::Transport;
use super::wire::{Request, Response};
use super::{LookupOutcome, NodeId, Provenance, StoreError, StoreMode, StoreNode};
use crate::canonical::Fingerprint;
use crate::model::PublishedObject;

pub(crate) const DEFAULT_K: usize = 8;

/// Lookup parameters. One hop is one parallel round of up to `alpha` requests.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DhtConfig {
    pub k: usize,
    pub alpha: usize,
    /// Attempts per provider when fetching the object itself.
    pub fetch_retries: usize,
}

impl Default for DhtConfig {
    fn default() -> Self {
        DhtConfig { k: DEFAULT_K, alpha: 3, fetch_retries: 3 }
    }
}

/// Kademlia k-buckets indexed by the length of the shared id prefix.
#[derive(Debug, Clone)]
pub struct RoutingTable {
    own: NodeId,
    k: usize,
    buckets: Vec<Vec<NodeId>>,
}

fn bucket_index(distance: &[u8; 32]) -> Option<usize> {
    let mut zeros = 0;
    for b in distance {
        if *b == 0 {
            zeros += 8;
        } else {
            return Some(zeros + b.leading_zeros() as usize);
        }
    }
    None
}

impl RoutingTable {
    pub fn new(own: NodeId, k: usize) -> Self {
        RoutingTable { own, k, buckets: vec![Vec::new(); 256] }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.buckets.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Records a contact. Known contacts move to the tail of their bucket;
    /// a full bucket keeps its older contacts and returns `false`.
    pub fn insert(&mut self, id: NodeId) -> bool {
        let Some(i) = bucket_index(&self.own.distance(&id)) else {
            return false;
        };
        let bucket = &mut self.buckets[i];
        if let Some(pos) = bucket.iter().position(|n| *n == id) {
            bucket.remove(pos);
            bucket.push(id);
            true
        } else if bucket.len() < self.k {
            bucket.push(id);
            true
        } else {
            false
        }
    }

    pub fn remove(&mut self, id: &NodeId) {
        if let Some(i) = bucket_index(&self.own.distance(id)) {
            self.buckets[i].retain(|n| n != id);
        }
    }

    pub fn contains(&self, id: &NodeId) -> bool {
        bucket_index(&self.own.distance(id)).is_some_and(|i| self.buckets[i].contains(id))
    }

    /// Up to `n` known contacts, nearest to `target` first.
    pub fn closest(&self, target: &NodeId, n: usize) -> Vec<NodeId> {
        let mut all: Vec<NodeId> = self.buckets.iter().flatten().copied().collect();
        all.sort_by_key(|id| id.distance(target));
        all.truncate(n);
        all
    }
}

/// Result of a DHT lookup with its cost.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DhtLookup {
    pub outcome: LookupOutcome,
    pub hops: u32,
    pub messages: u32,
}

struct Shortlist {
    key: NodeId,
    nodes: BTreeMap<[u8; 32], NodeId>,
    queried: BTreeSet<NodeId>,
    k: usize,
}

impl Shortlist {
    fn add(&mut self, id: NodeId) {
        self.nodes.entry(id.distance(&self.key)).or_insert(id);
    }

    fn drop_node(&mut self, id: &NodeId) {
        self.nodes.remove(&id.distance(&self.key));
    }

    /// The next unqueried nodes among the `k` nearest known.
    fn next(&self, alpha: usize) -> Vec<NodeId> {
        self.nodes.values().take(self.k).filter(|n| !self.queried.contains(n)).take(alpha).copied().collect()
    }

    fn nearest(&self) -> Vec<NodeId> {
        self.nodes.values().take(self.k).copied().collect()
    }
}

fn check_p2p(node: &StoreNode) -> Result<(), StoreError> {
    if node.mode() == StoreMode::P2p {
        Ok(())
    } else {
        Err(StoreError::WrongMode(StoreMode::P2p))
    }
}

/// Iterative node lookup; returns the `k` nearest responsive nodes to `key`.
fn find_nodes(origin: &mut StoreNode, key: NodeId, cfg: &DhtConfig, transport: &mut dyn Transport, messages: &mut u32) -> Vec<NodeId> {
    let me = origin.id();
    let mut list = Shortlist { key, nodes: BTreeMap::new(), queried: BTreeSet::new(), k: cfg.k };
    for n in origin.routing().closest(&key, cfg.k) {
        list.add(n);
    }
    loop {
        let batch = list.next(cfg.alpha);
        if batch.is_empty() {
            return list.nearest();
        }
        for n in batch {
            list.queried.insert(n);
            *messages += 1;
            match transport.call(me, n, Request::FindNode { target: key }) {
                Some(Response::Nodes { nodes }) => {
                    origin.routing_mut().insert(n);
                    for m in nodes.into_iter().filter(|m| *m != me) {
                        list.add(m);
                    }
                }
                _ => list.drop_node(&n),
            }
        }
    }
}

/// Announces that `origin` holds `fp` to the nodes nearest the key. Returns
/// how many acknowledged.
pub fn dht_publish(origin: &mut StoreNode, fp: &Fingerprint, cfg: &DhtConfig, transport: &mut dyn Transport) -> Result<usize, StoreError> {
    check_p2p(origin)?;
    if !origin.holds_content(fp) {
        return Err(StoreError::NotStored(*fp));
    }
    let me = origin.id();
    let mut messages = 0;
    let nearest = find_nodes(origin, NodeId::of_fingerprint(fp), cfg, transport, &mut messages);
    let acks = nearest
        .into_iter()
        .filter(|n| matches!(transport.call(me, *n, Request::Announce { fingerprint: *fp, provider: me }), Some(Response::Ack)))
        .count();
    Ok(acks)
}

fn fetch(me: NodeId, provider: NodeId, fp: &Fingerprint, cfg: &DhtConfig, transport: &mut dyn Transport, messages: &mut u32) -> Option<(PublishedObject, Provenance)> {
    for _ in 0..cfg.fetch_retries.max(1) {
        *messages += 1;
        match transport.call(me, provider, Request::GetObject { fingerprint: *fp }) {
            Some(Response::Object { object, provenance }) if object.fingerprint() == *fp => return Some((object, provenance)),
            Some(_) => return None,
            None => continue,
        }
    }
    None
}

/// Iterative FIND_VALUE over XOR distance. A found copy is re-fingerprinted
/// and cached at `origin`, so a repeated lookup costs zero hops. Failure is
/// always `PossiblyAbsent`.
pub fn dht_lookup(origin: &mut StoreNode, fp: &Fingerprint, cfg: &DhtConfig, transport: &mut dyn Transport) -> Result<DhtLookup, StoreError> {
    check_p2p(origin)?;
    if let found @ LookupOutcome::Found { .. } = origin.get(fp) {
        return Ok(DhtLookup { outcome: found, hops: 0, messages: 0 });
    }
    let me = origin.id();
    let key = NodeId::of_fingerprint(fp);
    let mut list = Shortlist { key, nodes: BTreeMap::new(), queried: BTreeSet::new(), k: cfg.k };
    for n in origin.routing().closest(&key, cfg.k) {
        list.add(n);
    }
    let (mut hops, mut messages) = (0u32, 0u32);
    let mut tried_providers = BTreeSet::new();
    let found = 'search: loop {
        let batch = list.next(cfg.alpha);
        if batch.is_empty() {
            break None;
        }
        hops += 1;
        let mut providers = Vec::new();
        for n in batch {
            list.queried.insert(n);
            messages += 1;
            match transport.call(me, n, Request::FindValue { fingerprint: *fp }) {
                Some(Response::Object { object, provenance }) if object.fingerprint() == *fp => {
                    break 'search Some((n, object, provenance));
                }
                Some(Response::Providers { providers: p, nodes }) => {
                    origin.routing_mut().insert(n);
                    providers.extend(p);
                    nodes.into_iter().filter(|m| *m != me).for_each(|m| list.add(m));
                }
                Some(Response::Nodes { nodes }) => {
                    origin.routing_mut().insert(n);
                    nodes.into_iter().filter(|m| *m != me).for_each(|m| list.add(m));
                }
                _ => list.drop_node(&n),
            }
        }
        providers.sort_by_key(|p| p.distance(&key));
        providers.dedup();
        let fresh: Vec<NodeId> = providers.into_iter().filter(|p| *p != me && tried_providers.insert(*p)).collect();
        if !fresh.is_empty() {
            hops += 1;
            for p in fresh {
                if let Some((object, provenance)) = fetch(me, p, fp, cfg, transport, &mut messages) {
                    break 'search Some((p, object, provenance));
                }
            }
        }
    };
    let outcome = match found {
        Some((server, object, provenance)) => {
            origin.cache_copy(&object, None)?;
            origin.evict_non_home()?;
            LookupOutcome::Found { object, provenance: Provenance { path: vec![me, server], server_owner: provenance.server_owner } }
        }
        None => LookupOutcome::PossiblyAbsent,
    };
    Ok(DhtLookup { outcome, hops, messages })
}
