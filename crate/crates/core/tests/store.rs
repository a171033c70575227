mod support;

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use scholnet::canonical::Fingerprint;
use scholnet::model::{DocumentHandle, Identity, PublishedObject};
use scholnet::store::{
    dht_lookup, dht_publish, propagate_request, DhtConfig, LookupOutcome, NodeId, StoreConfig, StoreError, StoreNode,
};
use support::netcheck::*;

#[test]
fn exhaustive_small_topologies_match_reachability_oracle() {
    let report = exhaustive_check(6);
    // Connected labelled graphs on 1..=6 nodes: 1 + 1 + 4 + 38 + 728 + 26704.
    assert_eq!(report.graphs, 27476);
    assert_eq!(report.unsound_absent, 0);
    assert_eq!(report.integrity_failures, 0);
    assert!(report.mismatches.is_empty(), "{} mismatches, first: {}", report.mismatches.len(), report.mismatches[0]);
}

#[test]
fn three_node_clique_finds_remote_object() {
    let mut net = build(3, &[(0, 1), (1, 2), (0, 2)], 8);
    let obj = object(2);
    net.nodes.get_mut(&node_id(2)).unwrap().submit(&obj, &Identity::new("A")).unwrap();
    match net.lookup(node_id(0), &obj.fingerprint(), 6) {
        LookupOutcome::Found { provenance, .. } => {
            assert!(provenance.path.len() <= 3);
            assert_eq!(provenance.server_owner, Some(Identity::new("Library 2")));
        }
        other => panic!("{other:?}"),
    }
    // The origin now holds a non-home copy.
    assert!(net.nodes[&node_id(0)].cached().contains(&obj.fingerprint()));
}

#[test]
fn line_verdicts_depend_on_ttl() {
    let line = [(0, 1), (1, 2), (2, 3)];
    let mut net = build(4, &line, 8);
    let nowhere = Fingerprint::sha256(b"nowhere");
    assert_eq!(net.lookup(node_id(0), &nowhere, 3), LookupOutcome::DefinitelyAbsent);
    assert_eq!(net.lookup(node_id(0), &nowhere, 2), LookupOutcome::PossiblyAbsent);
    let far = object(3);
    net.nodes.get_mut(&node_id(3)).unwrap().submit(&far, &Identity::new("A")).unwrap();
    assert_eq!(net.lookup(node_id(0), &far.fingerprint(), 2), LookupOutcome::PossiblyAbsent);
    assert!(net.lookup(node_id(0), &far.fingerprint(), 3).is_found());
}

#[test]
fn silent_home_degrades_to_possibly_absent() {
    let mut net = build(3, &[(0, 1), (1, 2)], 8);
    let obj = object(2);
    net.nodes.get_mut(&node_id(2)).unwrap().submit(&obj, &Identity::new("A")).unwrap();
    net.dead.insert(node_id(2));
    assert_eq!(net.lookup(node_id(0), &obj.fingerprint(), 6), LookupOutcome::PossiblyAbsent);
    assert_eq!(net.lookup(node_id(0), &Fingerprint::sha256(b"x"), 6), LookupOutcome::PossiblyAbsent);
}

#[test]
fn visited_nodes_are_skipped() {
    let mut net = build(3, &[(0, 1), (1, 2)], 8);
    let obj = object(1);
    net.nodes.get_mut(&node_id(1)).unwrap().submit(&obj, &Identity::new("A")).unwrap();
    let mut origin = net.nodes.remove(&node_id(0)).unwrap();
    let visited = BTreeSet::from([node_id(1)]);
    let out = propagate_request(&mut origin, &obj.fingerprint(), 6, &visited, &mut net).unwrap();
    assert_eq!(out, LookupOutcome::DefinitelyAbsent);
}

#[test]
fn metadata_only_network_reports_handle_without_content() {
    let mut net = build(2, &[(0, 1)], 8);
    let fp = Fingerprint::sha256(b"legacy journal article");
    let mut handle = DocumentHandle::bare(fp);
    handle.title = Some("Legacy article".into());
    net.nodes.get_mut(&node_id(1)).unwrap().index_metadata(handle).unwrap();
    match net.lookup(node_id(0), &fp, 6) {
        LookupOutcome::MetadataOnly { handle, provenance } => {
            assert_eq!(handle.title.as_deref(), Some("Legacy article"));
            assert_eq!(provenance.path, vec![node_id(0), node_id(1)]);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn p2p_nodes_cannot_propagate_and_institutional_cannot_use_dht() {
    let mut p = StoreNode::in_memory(StoreConfig::p2p(NodeId::from_label("p"), Identity::new("Owner"))).unwrap();
    let mut net = LocalNet::default();
    let fp = Fingerprint::sha256(b"x");
    assert!(matches!(propagate_request(&mut p, &fp, 3, &BTreeSet::new(), &mut net), Err(StoreError::WrongMode(_))));
    let mut i = StoreNode::in_memory(StoreConfig::institutional(NodeId::from_label("i"))).unwrap();
    assert!(matches!(dht_lookup(&mut i, &fp, &DhtConfig::default(), &mut net), Err(StoreError::WrongMode(_))));
}

/// Random submit / fetch / evict / restart sequences over on-disk nodes:
/// every object keeps being served by each of its homes.
#[test]
fn home_objects_survive_eviction_and_restart() {
    for seed in 0..25u64 {
        if let Err(e) = home_durability_trial(seed, 60) {
            panic!("{e}");
        }
    }
}

#[test]
fn evicted_copy_still_resolves_from_its_home() {
    let mut net = build(3, &[(0, 1), (1, 2)], 0);
    let obj = object(2);
    net.nodes.get_mut(&node_id(2)).unwrap().submit(&obj, &Identity::new("A")).unwrap();
    assert!(net.lookup(node_id(0), &obj.fingerprint(), 6).is_found());
    assert_eq!(net.nodes.get_mut(&node_id(0)).unwrap().evict_non_home().unwrap(), vec![obj.fingerprint()]);
    assert!(!net.nodes[&node_id(0)].holds_content(&obj.fingerprint()));
    assert!(net.lookup(node_id(0), &obj.fingerprint(), 6).is_found());
}

fn p2p_net(n: usize, seed: u64) -> (LocalNet, Vec<NodeId>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ids: Vec<NodeId> = (0..n).map(|_| NodeId::from_bytes(rng.gen())).collect();
    let mut net = LocalNet::default();
    for (i, id) in ids.iter().enumerate() {
        let mut node = StoreNode::in_memory(StoreConfig::p2p(*id, Identity::new(format!("Owner {i}")))).unwrap();
        for other in &ids {
            node.routing_mut().insert(*other);
        }
        net.nodes.insert(*id, node);
    }
    (net, ids)
}

#[test]
fn small_dht_lookup_and_cache() {
    let (mut net, ids) = p2p_net(16, 7);
    let cfg = DhtConfig::default();
    let obj = PublishedObject::blob(b"shared preprint".to_vec(), "application/pdf");
    let fp = obj.fingerprint();
    let mut owner = net.nodes.remove(&ids[3]).unwrap();
    owner.submit(&obj, &Identity::new("Owner 3")).unwrap();
    assert!(dht_publish(&mut owner, &fp, &cfg, &mut net).unwrap() > 0);
    net.nodes.insert(ids[3], owner);

    let mut origin = net.nodes.remove(&ids[11]).unwrap();
    let first = dht_lookup(&mut origin, &fp, &cfg, &mut net).unwrap();
    match &first.outcome {
        LookupOutcome::Found { object, provenance } => {
            assert_eq!(object.fingerprint(), fp);
            assert_eq!(provenance.server_owner, Some(Identity::new("Owner 3")));
        }
        other => panic!("{other:?}"),
    }
    let second = dht_lookup(&mut origin, &fp, &cfg, &mut net).unwrap();
    assert!(second.outcome.is_found());
    assert!(second.hops < first.hops);
    let absent = dht_lookup(&mut origin, &Fingerprint::sha256(b"never inserted"), &cfg, &mut net).unwrap();
    assert_eq!(absent.outcome, LookupOutcome::PossiblyAbsent);
}
