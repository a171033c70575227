use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use num_rational::BigRational;
use num_traits::Zero;

use super::filter::Facts;
use super::score::{review_grade, weight, ReviewSource};
use super::{CitationNote, ResultEntry, SavedQuery};
use crate::canonical::{canonical_decode, canonical_encode, Fingerprint};
use crate::model::{DocumentHandle, PostHocCitation, PublishedObject, ReviewObject, CITATION_MEDIA_TYPE, REVIEW_MEDIA_TYPE};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NodeKind {
    Work,
    Review(Box<ReviewObject>),
    Citation(Box<PostHocCitation>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphNode {
    pub handle: DocumentHandle,
    pub kind: NodeKind,
    /// Known only by reference; the object itself was never indexed.
    pub unresolved: bool,
}

/// Works, reviews and citations with their typed edges.
///
/// Indexing is idempotent per fingerprint and the result does not depend on
/// the order objects arrive in.
#[derive(Debug, Clone, Default)]
pub struct KnowledgeGraph {
    nodes: BTreeMap<Fingerprint, GraphNode>,
    reviews_of: BTreeMap<Fingerprint, BTreeSet<Fingerprint>>,
    citations_of: BTreeMap<Fingerprint, BTreeSet<Fingerprint>>,
    escrow_status: BTreeMap<Fingerprint, bool>,
}

struct Ctx<'a> {
    graph: &'a KnowledgeGraph,
    blacklist: &'a [Fingerprint],
}

impl ReviewSource for Ctx<'_> {
    fn dismissed(&self, review: &Fingerprint) -> bool {
        match self.graph.review(review).and_then(|r| r.author.escrow_board_id()) {
            Some(board) => !self.graph.is_responsive(&board) || self.blacklist.contains(&board),
            None => false,
        }
    }

    fn grade(&self, review: &Fingerprint) -> Option<BigRational> {
        self.graph.review(review).and_then(review_grade)
    }

    fn meta_reviews(&self, target: &Fingerprint) -> Vec<Fingerprint> {
        self.graph.reviews_of.get(target).map(|s| s.iter().copied().collect()).unwrap_or_default()
    }
}

impl KnowledgeGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, fp: &Fingerprint) -> Option<&GraphNode> {
        self.nodes.get(fp)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &GraphNode> {
        self.nodes.values()
    }

    pub fn review(&self, fp: &Fingerprint) -> Option<&ReviewObject> {
        match &self.nodes.get(fp)?.kind {
            NodeKind::Review(r) => Some(r),
            _ => None,
        }
    }

    /// Reviews whose targets include `fp`.
    pub fn reviews_of(&self, fp: &Fingerprint) -> impl Iterator<Item = &Fingerprint> {
        self.reviews_of.get(fp).into_iter().flatten()
    }

    pub fn citations_of(&self, fp: &Fingerprint) -> impl Iterator<Item = &Fingerprint> {
        self.citations_of.get(fp).into_iter().flatten()
    }

    pub fn set_escrow_responsive(&mut self, board: Fingerprint, responsive: bool) {
        self.escrow_status.insert(board, responsive);
    }

    pub fn is_responsive(&self, board: &Fingerprint) -> bool {
        self.escrow_status.get(board).copied().unwrap_or(true)
    }

    /// Indexes a published object. Reviews and citations are recognized by
    /// media type; anything else, including malformed reviews, is a work.
    pub fn index(&mut self, object: &PublishedObject, meta: Option<&DocumentHandle>) {
        let fp = object.fingerprint();
        let mut handle = meta.cloned().unwrap_or_else(|| DocumentHandle::bare(fp));
        handle.fingerprint = fp;
        let kind = match object {
            PublishedObject::Blob { bytes, media_type } if media_type == REVIEW_MEDIA_TYPE => {
                canonical_decode::<ReviewObject>(bytes).map(|r| NodeKind::Review(Box::new(r))).unwrap_or(NodeKind::Work)
            }
            PublishedObject::Blob { bytes, media_type } if media_type == CITATION_MEDIA_TYPE => canonical_decode::<PostHocCitation>(bytes)
                .map(|c| NodeKind::Citation(Box::new(c)))
                .unwrap_or(NodeKind::Work),
            _ => NodeKind::Work,
        };
        if let NodeKind::Review(r) = &kind {
            if handle.title.is_none() {
                handle.title = Some(r.title.clone());
            }
            if handle.authors.is_none() {
                handle.authors = Some(vec![r.author.display().to_owned()]);
            }
        }
        self.insert(handle, kind);
    }

    /// Indexes a work known by handle only, e.g. a legacy work without content.
    pub fn index_handle(&mut self, handle: &DocumentHandle) {
        self.insert(handle.clone(), NodeKind::Work);
    }

    fn insert(&mut self, handle: DocumentHandle, kind: NodeKind) {
        let fp = handle.fingerprint;
        match self.nodes.get(&fp) {
            Some(existing) if !existing.unresolved => {
                // Same bytes, same node; only merge display metadata deterministically.
                if prefer(&handle, &existing.handle) {
                    self.nodes.get_mut(&fp).expect("present").handle = handle;
                }
                return;
            }
            Some(placeholder) if prefer(&placeholder.handle, &handle) => {
                let display = placeholder.handle.clone();
                return self.insert_new(display, kind);
            }
            _ => {}
        }
        self.insert_new(handle, kind);
    }

    fn insert_new(&mut self, handle: DocumentHandle, kind: NodeKind) {
        let fp = handle.fingerprint;
        match &kind {
            NodeKind::Review(r) => {
                for t in &r.targets {
                    self.reference(t);
                    self.reviews_of.entry(t.fingerprint).or_default().insert(fp);
                }
            }
            NodeKind::Citation(c) => {
                for side in [&c.source, &c.target] {
                    self.reference(side);
                    self.citations_of.entry(side.fingerprint).or_default().insert(fp);
                }
            }
            NodeKind::Work => {}
        }
        self.nodes.insert(fp, GraphNode { handle, kind, unresolved: false });
    }

    fn reference(&mut self, h: &DocumentHandle) {
        match self.nodes.get_mut(&h.fingerprint) {
            None => {
                self.nodes.insert(h.fingerprint, GraphNode { handle: h.clone(), kind: NodeKind::Work, unresolved: true });
            }
            Some(n) if prefer(h, &n.handle) => n.handle = h.clone(),
            Some(_) => {}
        }
    }

    /// Score of one work, or `None` when no effective graded review exists.
    pub fn score(&self, work: &Fingerprint, spec: &super::RankingSpec) -> Option<BigRational> {
        self.score_with(work, spec, &[])
    }

    fn score_with(&self, work: &Fingerprint, spec: &super::RankingSpec, blacklist: &[Fingerprint]) -> Option<BigRational> {
        let ctx = Ctx { graph: self, blacklist };
        let lambda = spec.damping.to_big();
        let mut num = BigRational::zero();
        let mut den = BigRational::zero();
        for r in self.reviews_of(work) {
            let Some(g) = ctx.grade(r) else { continue };
            let mut path = BTreeSet::from([*work]);
            let w = weight(&ctx, r, spec.max_depth, &lambda, &mut path);
            num += &w * g;
            den += w;
        }
        (!den.is_zero()).then(|| num / den)
    }

    fn is_work(&self, fp: &Fingerprint) -> bool {
        matches!(self.nodes.get(fp), Some(GraphNode { kind: NodeKind::Work, .. }))
    }

    fn reviewed_by(&self, work: &Fingerprint, board: &Fingerprint) -> bool {
        self.reviews_of(work)
            .filter_map(|r| self.review(r))
            .any(|r| r.author.escrow_board_id().as_ref() == Some(board))
    }

    pub(crate) fn run(&self, q: &SavedQuery) -> Vec<ResultEntry> {
        let mut results: Vec<ResultEntry> = Vec::new();
        for (fp, node) in &self.nodes {
            if !self.is_work(fp) {
                continue;
            }
            let score = self.score_with(fp, &q.ranking, &q.blacklist);
            let boards = |b: &Fingerprint| self.reviewed_by(fp, b);
            let facts = Facts {
                title: node.handle.title.as_deref(),
                authors: node.handle.authors.as_deref().unwrap_or(&[]),
                earliest: node.handle.earliest_coe_date(),
                score: score.as_ref(),
                boards: &boards,
            };
            if q.filter.matches(&facts) {
                results.push(ResultEntry { handle: node.handle.clone(), score, expanded: false, notes: Vec::new() });
            }
        }
        results.sort_by(rank_order);

        let mut present: BTreeSet<Fingerprint> = results.iter().map(|r| r.handle.fingerprint).collect();
        let mut expansions = Vec::new();
        for entry in &mut results {
            for c in self.citations_of(&entry.handle.fingerprint) {
                let Some(GraphNode { kind: NodeKind::Citation(cit), .. }) = self.nodes.get(c) else { continue };
                let note = self.note(c, cit);
                entry.notes.push(note.clone());
                let other = if cit.source.fingerprint == entry.handle.fingerprint { cit.target.fingerprint } else { cit.source.fingerprint };
                if present.insert(other) {
                    let handle = self.nodes.get(&other).map(|n| n.handle.clone()).unwrap_or_else(|| DocumentHandle::bare(other));
                    let score = self.score_with(&other, &q.ranking, &q.blacklist);
                    expansions.push(ResultEntry { handle, score, expanded: true, notes: vec![note] });
                }
            }
        }
        results.extend(expansions);
        results
    }

    fn note(&self, fp: &Fingerprint, c: &PostHocCitation) -> CitationNote {
        let grades = self.reviews_of(fp).filter_map(|r| self.review(r)).flat_map(|r| r.grades.iter().cloned()).collect();
        CitationNote {
            citation: *fp,
            relation: c.relation,
            source: c.source.fingerprint,
            target: c.target.fingerprint,
            statement: c.statement.clone(),
            grades,
        }
    }
}

/// Deterministic choice between two display copies of the same handle: the
/// more informative one wins, then the smaller encoding. Being a total order,
/// the surviving copy does not depend on indexing order.
fn prefer(candidate: &DocumentHandle, current: &DocumentHandle) -> bool {
    let info = |h: &DocumentHandle| (h.title.is_some() as usize + h.authors.is_some() as usize, h.coes.len());
    let a = canonical_encode(candidate).map(|b| b.into_vec()).unwrap_or_default();
    let b = canonical_encode(current).map(|b| b.into_vec()).unwrap_or_default();
    info(candidate).cmp(&info(current)).reverse().then(a.cmp(&b)) == Ordering::Less
}

/// Score descending with unscored last, then earliest CoE date descending
/// (undated last), then fingerprint ascending.
pub(crate) fn rank_order(a: &ResultEntry, b: &ResultEntry) -> Ordering {
    match (&a.score, &b.score) {
        (Some(x), Some(y)) => y.cmp(x),
        (Some(_), None) => Ordering::Less,
        (None, Some(_)) => Ordering::Greater,
        (None, None) => Ordering::Equal,
    }
    .then_with(|| match (a.handle.earliest_coe_date(), b.handle.earliest_coe_date()) {
        (Some(x), Some(y)) => y.cmp(&x),
        (Some(_), None) => Ordering::Less,
        (None, Some(_)) => Ordering::Greater,
        (None, None) => Ordering::Equal,
    })
    .then_with(|| a.handle.fingerprint.cmp(&b.handle.fingerprint))
}
