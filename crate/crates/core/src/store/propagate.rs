use std::collections::{BTreeMap, BTreeSet, VecDeque};

use super::wire::{Request, Response};
use super::{LookupOutcome, NodeId, Provenance, StoreError, StoreMode, StoreNode};
use crate::canonical::Fingerprint;
use crate::model::DocumentHandle;

/// Message delivery between nodes. `None` stands for a lost message or a
/// peer that did not answer in time.
pub trait Transport {
    fn call(&mut self, from: NodeId, to: NodeId, request: Request) -> Option<Response>;
}

fn path_to(parents: &BTreeMap<NodeId, NodeId>, origin: NodeId, mut node: NodeId) -> Vec<NodeId> {
    let mut path = vec![node];
    while node != origin {
        node = parents[&node];
        path.push(node);
    }
    path.reverse();
    path
}

/// Floods a request for `fp` along peering links, breadth first, up to `ttl`
/// hops from `origin`. Nodes in `visited` are treated as already asked.
///
/// The verdict is `DefinitelyAbsent` only when every peer within `ttl`
/// answered, none holds the object, and no peer lies beyond `ttl`. A found
/// copy is re-fingerprinted and cached at `origin` as a non-home copy.
pub fn propagate_request(
    origin: &mut StoreNode,
    fp: &Fingerprint,
    ttl: u32,
    visited: &BTreeSet<NodeId>,
    transport: &mut dyn Transport,
) -> Result<LookupOutcome, StoreError> {
    if origin.mode() != StoreMode::Institutional {
        return Err(StoreError::WrongMode(StoreMode::Institutional));
    }
    let me = origin.id();
    let mut metadata: Option<(DocumentHandle, Provenance)> = None;
    match origin.get(fp) {
        found @ LookupOutcome::Found { .. } => return Ok(found),
        LookupOutcome::MetadataOnly { handle, provenance } => metadata = Some((handle, provenance)),
        _ => {}
    }

    let mut seen: BTreeSet<NodeId> = visited.clone();
    seen.insert(me);
    let mut parents = BTreeMap::new();
    let mut queue = VecDeque::new();
    let mut complete = true;
    for &p in origin.peers() {
        if seen.insert(p) {
            if ttl == 0 {
                complete = false;
            } else {
                parents.insert(p, me);
                queue.push_back((p, 1u32));
            }
        }
    }

    while let Some((node, depth)) = queue.pop_front() {
        match transport.call(me, node, Request::GetObject { fingerprint: *fp }) {
            Some(Response::Object { object, provenance }) if object.fingerprint() == *fp => {
                let path = path_to(&parents, me, node);
                origin.cache_copy(&object, metadata.as_ref().map(|(h, _)| h.clone()))?;
                return Ok(LookupOutcome::Found { object, provenance: Provenance { path, server_owner: provenance.server_owner } });
            }
            Some(Response::Metadata { handle }) if handle.fingerprint == *fp => {
                if metadata.is_none() {
                    metadata = Some((handle, Provenance { path: path_to(&parents, me, node), server_owner: None }));
                }
            }
            Some(Response::Absent) => {}
            // Silence, forged copies and unexpected answers all leave the verdict open.
            _ => complete = false,
        }
        let Some(Response::Nodes { nodes }) = transport.call(me, node, Request::GetPeers) else {
            complete = false;
            continue;
        };
        for n in nodes {
            if seen.contains(&n) {
                continue;
            }
            if depth == ttl {
                complete = false;
                break;
            }
            seen.insert(n);
            parents.insert(n, node);
            queue.push_back((n, depth + 1));
        }
    }

    Ok(match metadata {
        Some((handle, provenance)) => LookupOutcome::MetadataOnly { handle, provenance },
        None if complete => LookupOutcome::DefinitelyAbsent,
        None => LookupOutcome::PossiblyAbsent,
    })
}
