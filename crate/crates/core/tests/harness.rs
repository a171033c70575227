use std::collections::BTreeSet;

use scholnet::canonical::Fingerprint;
use scholnet::harness::{simulate, Fault, HarnessError, ScenarioParams, SimWorld, SCENARIOS};
use scholnet::model::{Identity, PublishedObject};
use scholnet::store::{propagate_request, LookupOutcome, NodeId, StoreConfig, StoreNode};

fn report(name: &str, params: &ScenarioParams) -> scholnet::harness::ScenarioReport {
    let r = simulate(name, params).unwrap();
    for c in &r.checks {
        assert!(c.passed, "{name} seed {}: check failed: {}\n{}", params.seed, c.name, r.output);
    }
    r
}

#[test]
fn every_scenario_passes_its_own_checks() {
    for name in SCENARIOS {
        let mut params = ScenarioParams::with_seed(42);
        params.lookups = 20;
        let r = report(name, &params);
        assert!(!r.checks.is_empty());
        assert!(r.log.lines().all(|l| l.split('\t').count() == 4), "{name}");
    }
}

#[test]
fn credit_loss_is_reproducible() {
    let a = report("credit_loss", &ScenarioParams::with_seed(42));
    let b = report("credit_loss", &ScenarioParams::with_seed(42));
    assert_eq!(a.render(), b.render());
    let c = report("credit_loss", &ScenarioParams::with_seed(43));
    assert_ne!(a.log, c.log);
    assert!(a.output.contains("posthoc-expansion"));
}

#[test]
fn double_blind_rounds_over_many_seeds() {
    for seed in 0..10 {
        let r = report("double_blind_round", &ScenarioParams::with_seed(seed));
        assert!(r.metric("reviews") > 0);
    }
}

#[test]
fn unknown_names_are_errors() {
    assert!(matches!(simulate("no_such", &ScenarioParams::default()), Err(HarnessError::UnknownScenario(_))));
    let mut w = SimWorld::new(1);
    let ghost = NodeId::from_label("ghost");
    assert!(matches!(w.inject_fault(Fault::KillNode { node: ghost }), Err(HarnessError::UnknownTarget(_))));
}

fn line(world: &mut SimWorld, n: usize) -> Vec<NodeId> {
    let ids: Vec<NodeId> = (0..n).map(|i| NodeId::from_label(&format!("n{i}"))).collect();
    for (i, id) in ids.iter().enumerate() {
        let mut cfg = StoreConfig::institutional(*id);
        if i > 0 {
            cfg.peers.push(ids[i - 1]);
        }
        if i + 1 < n {
            cfg.peers.push(ids[i + 1]);
        }
        world.add_store(format!("n{i}"), StoreNode::in_memory(cfg).unwrap());
    }
    ids
}

fn lookup(world: &mut SimWorld, from: NodeId, fp: &Fingerprint) -> LookupOutcome {
    world.with_store(from, |node, w| propagate_request(node, fp, 6, &BTreeSet::new(), w).unwrap()).unwrap()
}

#[test]
fn killing_the_only_home_degrades_to_possibly_absent() {
    let mut w = SimWorld::new(7);
    let ids = line(&mut w, 3);
    let obj = PublishedObject::blob(b"only copy".to_vec(), "text/plain");
    w.store_mut(&ids[2]).unwrap().submit(&obj, &Identity::new("A")).unwrap();
    w.inject_fault(Fault::KillNode { node: ids[2] }).unwrap();
    assert_eq!(lookup(&mut w, ids[0], &obj.fingerprint()), LookupOutcome::PossiblyAbsent);
    assert!(w.render_log().contains("lost.dead"));
}

#[test]
fn certain_loss_isolates_a_node() {
    let mut w = SimWorld::new(7);
    let ids = line(&mut w, 2);
    let obj = PublishedObject::blob(b"behind a dead link".to_vec(), "text/plain");
    w.store_mut(&ids[1]).unwrap().submit(&obj, &Identity::new("A")).unwrap();
    w.inject_fault(Fault::DropLink { a: ids[0], b: ids[1], permille: 1000 }).unwrap();
    assert_eq!(lookup(&mut w, ids[0], &obj.fingerprint()), LookupOutcome::PossiblyAbsent);
    assert!(!w.render_log().contains("recv."));
}

#[test]
fn delay_without_loss_still_delivers() {
    let mut w = SimWorld::new(7);
    let ids = line(&mut w, 3);
    let obj = PublishedObject::blob(b"slow but there".to_vec(), "text/plain");
    w.store_mut(&ids[2]).unwrap().submit(&obj, &Identity::new("A")).unwrap();
    w.inject_fault(Fault::Delay { node: ids[2], ticks: 9 }).unwrap();
    let before = w.now();
    assert!(lookup(&mut w, ids[0], &obj.fingerprint()).is_found());
    assert!(w.now() >= before + 10);
    let recv_ticks: Vec<u64> = w.log().iter().filter(|l| l.node == "n2" && l.kind == "recv.object").map(|l| l.tick).collect();
    assert_eq!(recv_ticks.len(), 1);
    assert!(recv_ticks[0] >= 10);
}

#[test]
fn dht_under_loss() {
    let clean = report("drop_and_retry", &ScenarioParams { seed: 3, lookups: 40, ..ScenarioParams::default() });
    assert_eq!(clean.metric("found_within_bound"), 40);
    assert!(clean.metric("max_hops") <= 8);
    let lossy = report("drop_and_retry", &ScenarioParams { seed: 3, lookups: 40, drop_permille: 100, ..ScenarioParams::default() });
    assert!(lossy.metric("found") >= 38);
}
