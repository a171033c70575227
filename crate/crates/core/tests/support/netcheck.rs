//! In-process institutional networks and the reachability oracle used to
//! check request propagation exhaustively.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use scholnet::canonical::Fingerprint;
use scholnet::model::{Identity, PublishedObject};
use scholnet::store::{
    propagate_request, DirBackend, LookupOutcome, NodeId, Request, Response, StoreConfig, StoreNode, Transport,
};

/// Direct delivery to nodes held in a map; ids in `dead` never answer.
#[derive(Default)]
pub struct LocalNet {
    pub nodes: BTreeMap<NodeId, StoreNode>,
    pub dead: BTreeSet<NodeId>,
}

impl Transport for LocalNet {
    fn call(&mut self, _from: NodeId, to: NodeId, request: Request) -> Option<Response> {
        if self.dead.contains(&to) {
            return None;
        }
        self.nodes.get_mut(&to).map(|n| n.handle(request))
    }
}

impl LocalNet {
    /// Runs a propagated lookup from `origin`, taking it out of the map meanwhile.
    pub fn lookup(&mut self, origin: NodeId, fp: &Fingerprint, ttl: u32) -> LookupOutcome {
        let mut node = self.nodes.remove(&origin).expect("origin exists");
        let out = propagate_request(&mut node, fp, ttl, &BTreeSet::new(), self).expect("institutional origin");
        self.nodes.insert(origin, node);
        out
    }
}

pub fn node_id(i: usize) -> NodeId {
    NodeId::from_label(&format!("inst-{i}"))
}

pub fn object(i: usize) -> PublishedObject {
    PublishedObject::blob(format!("object placed at node {i}").into_bytes(), "text/plain")
}

/// Institutional network over `n` nodes with the given undirected edges.
pub fn build(n: usize, edges: &[(usize, usize)], cache_capacity: usize) -> LocalNet {
    let mut net = LocalNet::default();
    for i in 0..n {
        let mut cfg = StoreConfig::institutional(node_id(i));
        cfg.owner = Some(Identity::new(format!("Library {i}")));
        cfg.cache_capacity = cache_capacity;
        net.nodes.insert(node_id(i), StoreNode::in_memory(cfg).unwrap());
    }
    for &(a, b) in edges {
        net.nodes.get_mut(&node_id(a)).unwrap().add_peer(node_id(b));
        net.nodes.get_mut(&node_id(b)).unwrap().add_peer(node_id(a));
    }
    net
}

/// Hop distances from node 0; `None` for unreachable nodes.
pub fn distances(n: usize, edges: &[(usize, usize)]) -> Vec<Option<u32>> {
    let mut dist = vec![None; n];
    dist[0] = Some(0);
    let mut q = VecDeque::from([0usize]);
    while let Some(u) = q.pop_front() {
        for &(a, b) in edges {
            for (x, y) in [(a, b), (b, a)] {
                if x == u && dist[y].is_none() {
                    dist[y] = Some(dist[u].unwrap() + 1);
                    q.push_back(y);
                }
            }
        }
    }
    dist
}

/// Every connected labelled simple graph on `n` nodes, as edge lists.
pub fn connected_graphs(n: usize) -> Vec<Vec<(usize, usize)>> {
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect();
    (0u32..1 << pairs.len())
        .map(|mask| pairs.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, p)| *p).collect::<Vec<_>>())
        .filter(|edges| distances(n, edges).iter().all(Option::is_some))
        .collect()
}

#[derive(Debug, Default)]
pub struct ExhaustiveReport {
    pub graphs: usize,
    pub lookups: usize,
    pub mismatches: Vec<String>,
    /// DefinitelyAbsent answered while the object was stored somewhere.
    pub unsound_absent: usize,
    pub integrity_failures: usize,
}

/// For every connected graph on 1..=max_n nodes, every placement of one
/// object (each node, or nowhere) and every ttl up to one past the origin's
/// eccentricity (larger ttls cannot change the verdict), compares the
/// propagated verdict from node 0 against the reachability oracle.
pub fn exhaustive_check(max_n: usize) -> ExhaustiveReport {
    let mut report = ExhaustiveReport::default();
    let absent = Fingerprint::sha256(b"stored nowhere");
    for n in 1..=max_n {
        for edges in connected_graphs(n) {
            report.graphs += 1;
            let mut net = build(n, &edges, 0);
            for i in 0..n {
                let obj = object(i);
                net.nodes.get_mut(&node_id(i)).unwrap().submit(&obj, &Identity::new("Author")).unwrap();
            }
            let dist = distances(n, &edges);
            let ecc = dist.iter().map(|d| d.unwrap()).max().unwrap();
            for ttl in 0..=ecc + 1 {
                for placement in (0..n).map(Some).chain([None]) {
                    let fp = placement.map_or(absent, |i| object(i).fingerprint());
                    let got = net.lookup(node_id(0), &fp, ttl);
                    report.lookups += 1;
                    let ok = match (placement, &got) {
                        (Some(i), LookupOutcome::Found { object, provenance }) => {
                            if object.fingerprint() != fp {
                                report.integrity_failures += 1;
                            }
                            let d = dist[i].unwrap();
                            d <= ttl && provenance.path.len() == d as usize + 1 && provenance.path.last() == Some(&node_id(i))
                        }
                        (Some(i), LookupOutcome::PossiblyAbsent) => dist[i].unwrap() > ttl,
                        (Some(_), LookupOutcome::DefinitelyAbsent) => {
                            report.unsound_absent += 1;
                            false
                        }
                        (None, LookupOutcome::DefinitelyAbsent) => ecc <= ttl,
                        (None, LookupOutcome::PossiblyAbsent) => ecc > ttl,
                        _ => false,
                    };
                    if !ok {
                        report.mismatches.push(format!("n={n} edges={edges:?} ttl={ttl} placement={placement:?} got={}", got.label()));
                    }
                    // Drop the origin's cached copy so the next ttl starts cold.
                    net.nodes.get_mut(&node_id(0)).unwrap().evict_non_home().unwrap();
                }
            }
        }
    }
    report
}

/// One random sequence of submissions, lookups, evictions, restarts and
/// peering agreements over a four-node ring with on-disk stores. After every
/// step each home must still serve its objects intact. Returns the number of
/// home checks made.
pub fn home_durability_trial(seed: u64, steps: usize) -> Result<usize, String> {
    let edges = [(0, 1), (1, 2), (2, 3), (3, 0)];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dirs: Vec<_> = (0..4).map(|_| tempfile::tempdir().map_err(|e| e.to_string())).collect::<Result<_, _>>()?;
    let configs: Vec<StoreConfig> = (0..4)
        .map(|i| {
            let mut c = StoreConfig::institutional(node_id(i));
            c.cache_capacity = rng.gen_range(0..3);
            for &(a, b) in &edges {
                if a == i {
                    c.peers.push(node_id(b));
                } else if b == i {
                    c.peers.push(node_id(a));
                }
            }
            c
        })
        .collect();
    let open = |i: usize| StoreNode::open(configs[i].clone(), Box::new(DirBackend::open(dirs[i].path()).unwrap())).unwrap();
    let mut net = LocalNet::default();
    for i in 0..4 {
        net.nodes.insert(node_id(i), open(i));
    }
    let mut homes: BTreeMap<Fingerprint, BTreeSet<usize>> = BTreeMap::new();
    let mut checks = 0;
    for step in 0..steps {
        let i = rng.gen_range(0..4);
        match rng.gen_range(0..5) {
            0 => {
                let obj = PublishedObject::blob(format!("seed {seed} step {step}").into_bytes(), "text/plain");
                net.nodes.get_mut(&node_id(i)).unwrap().submit(&obj, &Identity::new("A")).map_err(|e| e.to_string())?;
                homes.entry(obj.fingerprint()).or_default().insert(i);
            }
            1 if !homes.is_empty() => {
                let fp = *homes.keys().nth(rng.gen_range(0..homes.len())).unwrap();
                if !net.lookup(node_id(i), &fp, 6).is_found() {
                    return Err(format!("seed {seed} step {step}: lookup of {fp} from {i} failed"));
                }
            }
            2 => {
                net.nodes.get_mut(&node_id(i)).unwrap().evict_non_home().map_err(|e| e.to_string())?;
            }
            3 => {
                net.nodes.remove(&node_id(i));
                net.nodes.insert(node_id(i), open(i));
            }
            _ if !homes.is_empty() => {
                // Explicit peering agreement: a node holding a copy becomes another home.
                let fp = *homes.keys().nth(rng.gen_range(0..homes.len())).unwrap();
                let node = net.nodes.get_mut(&node_id(i)).unwrap();
                if node.holds_content(&fp) {
                    node.add_home(&fp).map_err(|e| e.to_string())?;
                    homes.get_mut(&fp).unwrap().insert(i);
                }
            }
            _ => {}
        }
        for (fp, hs) in &homes {
            for h in hs {
                let node = &net.nodes[&node_id(*h)];
                if !node.home_of().contains(fp) {
                    return Err(format!("seed {seed} step {step}: node {h} forgot it is home of {fp}"));
                }
                match node.get(fp) {
                    LookupOutcome::Found { object, .. } if object.fingerprint() == *fp => checks += 1,
                    other => return Err(format!("seed {seed} step {step}: home {h} lost {fp}: {}", other.label())),
                }
            }
        }
    }
    Ok(checks)
}
