use std::collections::BTreeMap;
use std::fmt::Write as _;

use chrono::NaiveDate;
use rand::seq::SliceRandom;
use rand::Rng;

use super::{tick_date, HarnessError, Link, PublicRecord, ScenarioParams, SimWorld};
use crate::canonical::Fingerprint;
use crate::coe::{AuthorityId, TimestampAuthority};
use crate::escrow::EscrowService;
use crate::model::{
    make_handle, review_as_object, AuthorKnown, DocumentHandle, Grade, Identity, PostHocCitation, PublishedObject, Relation, ReviewObject,
    ReviewProcessSpec, ReviewerAttribution, ReviewerKnownWhen, ReviewerMode, TextAudience, TextPublishedWhen, WorkPublic,
};
use crate::query::{execute, feed, results_canonical, results_text, Filter, KnowledgeGraph, ResultEntry, SavedQuery};
use crate::review_proc::{start_round, verify_double_blind_link, RoundMode, RoundWork};
use crate::store::{dht_lookup, dht_publish, DhtConfig, LookupOutcome, NodeId, Request, Response, StoreConfig, StoreNode};

pub const SCENARIOS: [&str; 4] = ["credit_loss", "double_blind_round", "dual_network_consult", "drop_and_retry"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
}

/// Everything a scenario run produced.
#[derive(Debug, Clone)]
pub struct ScenarioReport {
    pub scenario: String,
    pub params: ScenarioParams,
    /// Rendered event log.
    pub log: String,
    pub public: Vec<PublicRecord>,
    pub metrics: BTreeMap<String, u64>,
    pub checks: Vec<Check>,
    /// Final human-readable artefact (query results, lookup summary).
    pub output: String,
}

impl ScenarioReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn metric(&self, name: &str) -> u64 {
        self.metrics.get(name).copied().unwrap_or(0)
    }

    /// Log, metrics, checks and output, in that order.
    pub fn render(&self) -> String {
        let mut out = self.log.clone();
        for (k, v) in &self.metrics {
            let _ = writeln!(out, "metric\t{k}\t{v}");
        }
        for c in &self.checks {
            let _ = writeln!(out, "check\t{}\t{}", c.name, if c.passed { "pass" } else { "fail" });
        }
        out.push_str(&self.output);
        out
    }
}

struct Run<'w> {
    world: &'w mut SimWorld,
    metrics: BTreeMap<String, u64>,
    checks: Vec<Check>,
    output: String,
}

impl Run<'_> {
    fn check(&mut self, name: &str, passed: bool) {
        self.world.record_as("harness", &format!("check.{}", if passed { "pass" } else { "fail" }), name);
        self.checks.push(Check { name: name.to_owned(), passed });
    }

    fn metric(&mut self, name: &str, v: u64) {
        self.metrics.insert(name.to_owned(), v);
    }
}

/// Builds a world from `params.seed` and runs the named scenario in it.
pub fn simulate(name: &str, params: &ScenarioParams) -> Result<ScenarioReport, HarnessError> {
    run_scenario(&mut SimWorld::new(params.seed), name, params)
}

pub fn run_scenario(world: &mut SimWorld, name: &str, params: &ScenarioParams) -> Result<ScenarioReport, HarnessError> {
    let mut run = Run { world, metrics: BTreeMap::new(), checks: Vec::new(), output: String::new() };
    run.world.record_as("harness", "scenario.start", &(name, params));
    match name {
        "credit_loss" => credit_loss(&mut run)?,
        "double_blind_round" => double_blind_round(&mut run)?,
        "dual_network_consult" => dual_network_consult(&mut run)?,
        "drop_and_retry" => drop_and_retry(&mut run, params)?,
        other => return Err(HarnessError::UnknownScenario(other.to_owned())),
    }
    run.world.record_as("harness", "scenario.end", name);
    let Run { world, metrics, checks, output } = run;
    Ok(ScenarioReport { scenario: name.to_owned(), params: params.clone(), log: world.render_log(), public: world.public().to_vec(), metrics, checks, output })
}

const GIVEN: [&str; 12] = ["Ada", "Bruno", "Chiara", "Dmitri", "Elif", "Farah", "Goran", "Hana", "Ivo", "Jun", "Kalani", "Lucia"];
const FAMILY: [&str; 12] =
    ["Okonkwo", "Lindqvist", "Moreau", "Tanaka", "Varga", "Castellanos", "Rahman", "Novak", "Achterberg", "Quispe", "Haddad", "Zielinski"];

fn person<R: Rng>(rng: &mut R, affiliation: &str) -> Identity {
    let name = format!("{} {}", GIVEN.choose(rng).expect("non-empty"), FAMILY.choose(rng).expect("non-empty"));
    Identity::new(name).with_affiliation(affiliation)
}

/// Distinct people, so that name scans are meaningful.
fn people<R: Rng>(rng: &mut R, n: usize, affiliation: &str) -> Vec<Identity> {
    let mut out: Vec<Identity> = Vec::new();
    while out.len() < n {
        let p = person(rng, affiliation);
        if !out.iter().any(|q| q.name == p.name) {
            out.push(p);
        }
    }
    out
}

fn step(e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Step(e.to_string())
}

fn open_process(start: NaiveDate, end: NaiveDate, coordinator: Identity) -> ReviewProcessSpec {
    ReviewProcessSpec {
        start_date: start,
        end_date: end,
        author_identity_known_to_reviewer: AuthorKnown::Prior,
        reviewer_identity_mode: ReviewerMode::Open,
        reviewer_identity_known_when: ReviewerKnownWhen::Immediate,
        review_text_published_when: TextPublishedWhen::Immediate,
        review_text_audience: TextAudience::Public,
        reviewed_work_public: WorkPublic::Prior,
        acceptance_threshold: None,
        coordinators: vec![coordinator],
        escrow_board: Vec::new(),
    }
}

fn contains(hay: &[u8], needle: &[u8]) -> bool {
    !needle.is_empty() && hay.windows(needle.len()).any(|w| w == needle)
}

/// Submits through the simulated network and indexes the result.
fn publish_to(
    run: &mut Run<'_>,
    client: NodeId,
    store: NodeId,
    object: &PublishedObject,
    handle: DocumentHandle,
    submitter: &Identity,
    graph: &mut KnowledgeGraph,
) -> Result<(), HarnessError> {
    use crate::store::Transport;
    let request = Request::PutObject { object: object.clone(), submitter: submitter.clone(), handle: Some(handle.clone()) };
    match run.world.call(client, store, request) {
        Some(Response::Stored { .. }) => {}
        other => return Err(step(format!("submission not stored: {other:?}"))),
    }
    graph.index(object, Some(&handle));
    run.world.publish(&run.world.label(&client), "publish", object.canonical_bytes());
    Ok(())
}

fn open_review(reviewer: &Identity, target: &DocumentHandle, value: i64, process: &ReviewProcessSpec, comments: &str) -> ReviewObject {
    ReviewObject {
        author: ReviewerAttribution::Open(reviewer.clone()),
        title: format!("Review of {}", target.title.as_deref().unwrap_or("an untitled work")),
        targets: vec![target.clone()],
        grades: vec![Grade::higher_is_better("Overall", value, 3)],
        comments: comments.to_owned(),
        process: process.clone(),
    }
}

/// A tool author stamps privately, a competitor publishes a derivative that
/// collects good reviews, then a post-hoc citation and its endorsements bring
/// the original into the same query results.
fn credit_loss(run: &mut Run<'_>) -> Result<(), HarnessError> {
    let mut rng_seed = [0u8; 32];
    run.world.rng().fill(&mut rng_seed);
    let tsa = TimestampAuthority::from_seed(AuthorityId::new("tsa").map_err(step)?, rng_seed);

    let lib_a = run.world.add_store("library-a", StoreNode::in_memory(StoreConfig::institutional(NodeId::from_label("library-a")))?);
    let lib_b = run.world.add_store("library-b", StoreNode::in_memory(StoreConfig::institutional(NodeId::from_label("library-b")))?);
    run.world.store_mut(&lib_a).expect("exists").add_peer(lib_b);
    run.world.store_mut(&lib_b).expect("exists").add_peer(lib_a);

    let cast = {
        let rng = run.world.rng();
        people(rng, 8, "Independent")
    };
    let (tool_author, competitor, reviewers, endorsers) = (&cast[0], &cast[1], &cast[2..5], &cast[5..8]);
    let author_client = NodeId::from_label("client-author");
    let rival_client = NodeId::from_label("client-rival");
    run.world.add_label(author_client, "author");
    run.world.add_label(rival_client, "rival");
    let editors = Identity::new("Sparse Methods Editors");
    let query = SavedQuery::public("sparse-solvers", editors.clone(), Filter::TitleTerms(vec!["sparse".into()]));
    let mut graph = KnowledgeGraph::new();

    // The tool exists; only its fingerprint leaves the author's machine.
    run.world.advance_to(10);
    let tool = PublishedObject::blob(b"LapKit 1.0: preconditioned iterative methods for graph Laplacians\n".to_vec(), "text/x-source");
    let tool_coe = tsa.stamp_registry(&tool.fingerprint(), run.world.date());
    run.world.record(&author_client, "stamp", &tool.fingerprint());

    // A derivative is published with its own, later certificate.
    let jitter = run.world.rng().gen_range(0..5);
    run.world.advance_to(40 + jitter);
    let derivative = PublishedObject::blob(b"A fast sparse solver: LapKit's preconditioner, rebranded\n".to_vec(), "application/pdf");
    let derivative_coe = tsa.stamp_registry(&derivative.fingerprint(), run.world.date());
    let derivative_handle =
        make_handle(&derivative, Some("Fast sparse solver for graph Laplacians".into()), Some(vec![competitor.name.clone()]), vec![derivative_coe]);
    publish_to(run, rival_client, lib_b, &derivative, derivative_handle.clone(), competitor, &mut graph)?;

    let start = run.world.date();
    for (i, r) in reviewers.iter().enumerate() {
        let client = NodeId::from_label(&r.name);
        run.world.add_label(client, format!("reviewer-{i}"));
        let pause = run.world.rng().gen_range(1..4);
        run.world.advance(pause);
        let v = run.world.rng().gen_range(2..=3);
        let process = open_process(start, tick_date(90), editors.clone());
        let review = open_review(r, &derivative_handle, v, &process, "Impressive speed-ups on the benchmark suite.");
        let (obj, handle) = review_as_object(&review).map_err(step)?;
        publish_to(run, client, lib_b, &obj, handle, r, &mut graph)?;
    }
    let before = execute(&graph, &query, None).map_err(step)?;
    run.world.record_as("harness", "query.before", &results_canonical(&before));
    let original_seen_before = before.iter().any(|e| e.handle.fingerprint == tool.fingerprint());

    // The author publishes the tool with the early certificate and files a citation.
    run.world.advance_to(70);
    let tool_handle = make_handle(
        &tool,
        Some("LapKit: iterative methods for graph Laplacians".into()),
        Some(vec![tool_author.name.clone()]),
        vec![tool_coe],
    );
    publish_to(run, author_client, lib_a, &tool, tool_handle.clone(), tool_author, &mut graph)?;
    let citation = PostHocCitation {
        source: derivative_handle.clone(),
        target: tool_handle.clone(),
        relation: Relation::PriorWork,
        statement: Some("The preconditioner is LapKit's, certified a month earlier.".into()),
        author: tool_author.clone(),
    };
    let citation_obj = citation.to_object().map_err(step)?;
    let citation_handle = make_handle(&citation_obj, Some("Post-hoc citation: LapKit is prior work".into()), Some(vec![tool_author.name.clone()]), Vec::new());
    publish_to(run, author_client, lib_a, &citation_obj, citation_handle.clone(), tool_author, &mut graph)?;

    let start = run.world.date();
    for (i, e) in endorsers.iter().enumerate() {
        let client = NodeId::from_label(&e.name);
        run.world.add_label(client, format!("endorser-{i}"));
        let pause = run.world.rng().gen_range(1..4);
        run.world.advance(pause);
        let process = open_process(start, tick_date(120), editors.clone());
        let review = open_review(e, &citation_handle, 3, &process, "Confirmed: same preconditioner, earlier certificate.");
        let (obj, handle) = review_as_object(&review).map_err(step)?;
        publish_to(run, client, lib_a, &obj, handle, e, &mut graph)?;
    }

    // The original is fetched through peering from the other library.
    let fetched = run.world.with_store(lib_b, |node, world| {
        crate::store::propagate_request(node, &tool.fingerprint(), node.config().request_ttl, &Default::default(), world)
    })??;
    run.world.record(&lib_b, &format!("lookup.{}", fetched.label()), &tool.fingerprint());

    let after = execute(&graph, &query, None).map_err(step)?;
    let canonical = results_canonical(&after);
    run.world.publish("query-engine", "query.after", canonical);
    let position = |fp: &Fingerprint| after.iter().position(|e| e.handle.fingerprint == *fp);
    let derivative_entry = position(&derivative.fingerprint()).map(|i| &after[i]);
    let original_entry = position(&tool.fingerprint()).map(|i| &after[i]);
    let context = |e: Option<&ResultEntry>| {
        e.is_some_and(|e| e.notes.iter().any(|n| n.target == tool.fingerprint() && n.source == derivative.fingerprint() && n.grades.len() == endorsers.len()))
    };

    run.metric("results_before", before.len() as u64);
    run.metric("results_after", after.len() as u64);
    run.check("original absent before the citation", !original_seen_before);
    run.check("derivative in final results", derivative_entry.is_some());
    run.check("original in final results", original_entry.is_some());
    run.check("citation context on both sides", context(derivative_entry) && context(original_entry));
    run.check(
        "original certificate predates derivative",
        tool_handle.earliest_coe_date() < derivative_handle.earliest_coe_date(),
    );
    run.check("original reachable through peering", fetched.is_found());
    run.output = results_text(&after);
    run.output.push_str(&feed(&graph, &query, 10, run.world.date()).map_err(step)?);
    if !run.output.ends_with('\n') {
        run.output.push('\n');
    }
    Ok(())
}

/// A double-blind round: anonymized deliverables, held reviews, link
/// verification at reveal.
fn double_blind_round(run: &mut Run<'_>) -> Result<(), HarnessError> {
    let mut seed = [0u8; 32];
    run.world.rng().fill(&mut seed);
    let tsa = TimestampAuthority::from_seed(AuthorityId::new("tsa").map_err(step)?, seed);
    let (authors, reviewers, board, chair) = {
        let rng = run.world.rng();
        let all = people(rng, 12, "Somewhere");
        (all[0..6].to_vec(), all[6..9].to_vec(), all[9..11].to_vec(), all[11].clone())
    };
    let committee = NodeId::from_label("committee");
    run.world.add_label(committee, "committee");

    run.world.advance_to(20);
    let mut works = Vec::new();
    for (i, pair) in authors.chunks(2).enumerate() {
        let names: Vec<String> = pair.iter().map(|a| a.name.clone()).collect();
        let body = format!("Submission {i}: on the convergence of gossip averaging. Result {}.", run.world.rng().gen::<u32>());
        let private_object = PublishedObject::blob(format!("{body}\nAuthors: {}\n", names.join(", ")).into_bytes(), "text/plain");
        let anonymized_object = PublishedObject::blob(format!("{body}\nAuthors: withheld for review\n").into_bytes(), "text/plain");
        let coe = tsa.stamp_registry(&private_object.fingerprint(), run.world.date());
        let handle = make_handle(&private_object, Some(format!("Gossip averaging, part {i}")), Some(names), vec![coe]);
        run.world.record(&committee, "work.stamped", &handle.fingerprint);
        works.push(RoundWork { private_object, anonymized_object: Some(anonymized_object), handle });
    }

    let (start, end) = (30u64, 60u64);
    let spec = ReviewProcessSpec {
        start_date: tick_date(start),
        end_date: tick_date(end),
        author_identity_known_to_reviewer: AuthorKnown::Afterwards,
        reviewer_identity_mode: ReviewerMode::Anonymized,
        reviewer_identity_known_when: ReviewerKnownWhen::Afterwards,
        review_text_published_when: TextPublishedWhen::EndOfProcess,
        review_text_audience: TextAudience::Public,
        reviewed_work_public: WorkPublic::Afterwards,
        acceptance_threshold: None,
        coordinators: vec![chair],
        escrow_board: board.clone(),
    };
    let mut escrow = EscrowService::new("the program committee", board);
    let pseudonyms: Vec<String> = {
        let mut out = Vec::new();
        for r in &reviewers {
            out.push(escrow.register(r.clone(), run.world.rng()));
        }
        out
    };

    run.world.advance_to(start);
    let mut round = start_round(spec, works.clone(), RoundMode::DoubleBlind, run.world.date()).map_err(step)?;
    run.world.publish("committee", "round.description", round.description());
    let packets = round.packets();
    let mut deliverables_clean = true;
    for p in &packets {
        let bytes = p.bytes();
        run.world.record(&committee, "packet.sent", &Fingerprint::sha256(&bytes));
        deliverables_clean &= !authors.iter().any(|a| contains(&bytes, a.name.as_bytes()));
    }

    let mut submitted: Vec<(ReviewObject, usize)> = Vec::new();
    let mut plan: Vec<(u64, usize, usize)> = Vec::new();
    for r in 0..reviewers.len() {
        for w in 0..packets.len() {
            plan.push((run.world.rng().gen_range(start + 1..end), r, w));
        }
    }
    plan.sort();
    for (tick, r, w) in plan {
        run.world.advance_to(tick);
        let grade = run.world.rng().gen_range(1..=3);
        let attribution = escrow.attribution(&pseudonyms[r]).map_err(step)?;
        let review = packets[w].template.fill(attribution, vec![Grade::higher_is_better("Overall", grade, 3)], "Careful analysis; see the remarks on the mixing time.");
        let receipt = round.submit_review(review.clone(), Some(&mut escrow)).map_err(step)?;
        run.world.record_as(&pseudonyms[r], "review.submitted", &receipt.review.fingerprint);
        let visible: Vec<Vec<u8>> = round.public_reviews().iter().map(|(o, _)| o.canonical_bytes()).collect();
        run.world.publish("committee", "round.public_reviews", crate::canonical::canonical_encode(&visible).map_err(step)?.into_vec());
        submitted.push((review, w));
    }

    run.world.advance_to(end);
    let release = round.release(run.world.date()).map_err(step)?;
    for (obj, _) in &release.reviews {
        run.world.publish("committee", "release.review", obj.canonical_bytes());
    }
    for (obj, _) in &release.works {
        run.world.publish("committee", "release.work", obj.canonical_bytes());
    }

    // Reveal: each review links to its own work and to nothing else.
    let mut exact = true;
    for (review, w) in &submitted {
        for (j, work) in works.iter().enumerate() {
            exact &= verify_double_blind_link(review, &work.private_object) == (j == *w);
            exact &= !verify_double_blind_link(review, work.anonymized_object.as_ref().expect("double blind"));
        }
    }
    let review_bytes: Vec<Vec<u8>> = submitted.iter().map(|(r, _)| review_as_object(r).map(|(o, _)| o.canonical_bytes())).collect::<Result<_, _>>().map_err(step)?;
    let early_leak = run.world.public().iter().filter(|p| p.tick < end).any(|p| review_bytes.iter().any(|r| contains(&p.bytes, r)));
    let sealed_leak = run.world.public().iter().any(|p| escrow.scan_for_sealed(&p.bytes));

    run.metric("reviews", submitted.len() as u64);
    run.metric("end_tick", end);
    run.check("link verified exactly for the matching reveal", exact);
    run.check("no review bytes public before end date", !early_leak);
    run.check("anonymized deliverables free of author names", deliverables_clean);
    run.check("no reviewer identity in public output", !sealed_leak);
    run.check("all reviews released at end", release.reviews.len() == submitted.len());
    let _ = writeln!(run.output, "released {} reviews and {} works at tick {end}", release.reviews.len(), release.works.len());
    Ok(())
}

fn p2p_world(run: &mut Run<'_>, n: usize, k: usize) -> Result<Vec<NodeId>, HarnessError> {
    let mut ids = Vec::with_capacity(n);
    for i in 0..n {
        let id = NodeId::from_bytes(run.world.rng().gen());
        let owner = Identity::new(format!("Owner {i}"));
        let mut cfg = StoreConfig::p2p(id, owner);
        cfg.cache_capacity = 64;
        let mut node = StoreNode::in_memory(cfg)?;
        *node.routing_mut() = crate::store::RoutingTable::new(id, k);
        run.world.add_store(format!("peer-{i}"), node);
        ids.push(id);
    }
    // Bootstrap: every node learns every id, in its own random order; full
    // buckets keep the contacts they learned first.
    for id in &ids {
        let mut order = ids.clone();
        order.shuffle(run.world.rng());
        let node = run.world.store_mut(id).expect("exists");
        for other in order {
            node.routing_mut().insert(other);
        }
    }
    Ok(ids)
}

/// A legacy work is indexed by metadata only on the institutional side; a
/// peer shares the bytes and the provenance names it.
fn dual_network_consult(run: &mut Run<'_>) -> Result<(), HarnessError> {
    use crate::store::Transport;
    let library = run.world.add_store("library", StoreNode::in_memory(StoreConfig::institutional(NodeId::from_label("library")))?);
    let ids = p2p_world(run, 16, 8)?;
    let reader = NodeId::from_label("reader");
    run.world.add_label(reader, "reader");

    let legacy = PublishedObject::blob(b"Proceedings 1987, pp. 12-19: a legacy article\n".to_vec(), "application/pdf");
    let fp = legacy.fingerprint();
    let handle = make_handle(&legacy, Some("A legacy article".into()), Some(vec!["Old Author".into()]), Vec::new());
    run.world.store_mut(&library).expect("exists").index_metadata(handle)?;

    let sharer_index = run.world.rng().gen_range(0..ids.len());
    let sharer = ids[sharer_index];
    let sharer_owner = Identity::new(format!("Owner {sharer_index}"));
    run.world.store_mut(&sharer).expect("exists").submit(&legacy, &sharer_owner)?;
    let cfg = DhtConfig::default();
    let announced = run.world.with_store(sharer, |node, world| dht_publish(node, &fp, &cfg, world))??;

    let institutional = run.world.call(reader, library, Request::GetObject { fingerprint: fp });
    let metadata_only = matches!(&institutional, Some(Response::Metadata { handle }) if handle.fingerprint == fp);

    let origin = *ids.iter().find(|i| **i != sharer).expect("more than one peer");
    let lookup = run.world.with_store(origin, |node, world| dht_lookup(node, &fp, &cfg, world))??;
    let (refingerprints, names_sharer) = match &lookup.outcome {
        LookupOutcome::Found { object, provenance } => (object.fingerprint() == fp, provenance.server_owner.as_ref() == Some(&sharer_owner)),
        _ => (false, false),
    };
    run.world.record(&origin, &format!("lookup.{}", lookup.outcome.label()), &fp);

    run.metric("announced", announced as u64);
    run.metric("hops", lookup.hops as u64);
    run.check("institutional answer is metadata only", metadata_only);
    run.check("peer-to-peer lookup returns content", lookup.outcome.is_found());
    run.check("content re-fingerprints to the handle", refingerprints);
    run.check("provenance names the sharing owner", names_sharer);
    let _ = writeln!(run.output, "institutional: metadata-only; p2p: {} from {} in {} hops", lookup.outcome.label(), sharer_owner.name, lookup.hops);
    Ok(())
}

/// DHT inserts and lookups under a configurable message loss rate.
fn drop_and_retry(run: &mut Run<'_>, params: &ScenarioParams) -> Result<(), HarnessError> {
    let n = params.nodes.max(2) as usize;
    let cfg = DhtConfig { k: params.k.max(1) as usize, alpha: params.alpha.max(1) as usize, ..DhtConfig::default() };
    let ids = p2p_world(run, n, cfg.k)?;
    run.world.set_default_link(Link { latency: 1, drop_permille: params.drop_permille });
    let bound = (usize::BITS - (n - 1).leading_zeros()) as u32 + 2;

    let (mut found, mut within, mut max_hops, mut faster, mut absent_ok) = (0u64, 0u64, 0u32, 0u64, 0u64);
    for i in 0..params.lookups {
        let owner_i = run.world.rng().gen_range(0..n);
        let owner = ids[owner_i];
        let object = PublishedObject::blob(format!("object {i} from peer {owner_i}: {}", run.world.rng().gen::<u64>()).into_bytes(), "text/plain");
        let fp = object.fingerprint();
        run.world.store_mut(&owner).expect("exists").submit(&object, &Identity::new(format!("Owner {owner_i}")))?;
        run.world.with_store(owner, |node, world| dht_publish(node, &fp, &cfg, world))??;

        let origin = loop {
            let o = ids[run.world.rng().gen_range(0..n)];
            if o != owner {
                break o;
            }
        };
        let first = run.world.with_store(origin, |node, world| dht_lookup(node, &fp, &cfg, world))??;
        run.world.record(&origin, &format!("lookup.{}", first.outcome.label()), &(fp, first.hops));
        if let LookupOutcome::Found { object: got, .. } = &first.outcome {
            if got.fingerprint() == fp {
                found += 1;
                within += (first.hops <= bound) as u64;
                max_hops = max_hops.max(first.hops);
                let second = run.world.with_store(origin, |node, world| dht_lookup(node, &fp, &cfg, world))??;
                faster += (second.outcome.is_found() && second.hops < first.hops) as u64;
            }
        }

        let missing = Fingerprint::sha256(format!("never inserted {i}").as_bytes());
        let probe = run.world.with_store(origin, |node, world| dht_lookup(node, &missing, &cfg, world))??;
        absent_ok += (probe.outcome == LookupOutcome::PossiblyAbsent) as u64;
    }

    let lookups = params.lookups as u64;
    run.metric("lookups", lookups);
    run.metric("found", found);
    run.metric("found_within_bound", within);
    run.metric("hop_bound", bound as u64);
    run.metric("max_hops", max_hops as u64);
    run.metric("second_lookup_faster", faster);
    run.metric("absent_possibly", absent_ok);
    if params.drop_permille == 0 {
        run.check("every lookup found within the hop bound", within == lookups);
    } else {
        run.check("at least 95% of lookups found", found * 100 >= lookups * 95);
    }
    run.check("absent keys are only possibly absent", absent_ok == lookups);
    run.check("repeat lookups are served from the origin cache", faster == found);
    let _ = writeln!(run.output, "found {found}/{lookups} (within {bound} hops: {within}), max hops {max_hops}, drop {}/1000", params.drop_permille);
    Ok(())
}
