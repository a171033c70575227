//! Random review corpora, a builder that turns them into a knowledge graph,
//! and a brute-force ranking evaluator written independently of the engine.

#![allow(dead_code)]

use chrono::NaiveDate;
use num_bigint::BigInt;
use num_rational::BigRational;
use rand::Rng;
use scholnet::canonical::Fingerprint;
use scholnet::coe::CoERef;
use scholnet::model::{
    make_handle, review_as_object, AuthorKnown, DocumentHandle, Grade, Identity, Orientation, PublishedObject, ReviewObject,
    ReviewProcessSpec, ReviewerAttribution, ReviewerKnownWhen, ReviewerMode, TextAudience, TextPublishedWhen, WorkPublic,
};
use scholnet::query::KnowledgeGraph;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Work(usize),
    Review(usize),
}

#[derive(Debug, Clone)]
pub struct OReview {
    pub target: Target,
    /// (value, scale_max, higher_is_better)
    pub grades: Vec<(i64, i64, bool)>,
    pub board: usize,
}

#[derive(Debug, Clone)]
pub struct Corpus {
    pub work_days: Vec<Option<u32>>,
    pub reviews: Vec<OReview>,
    pub boards: usize,
    pub flagged: Vec<bool>,
}

pub fn random_corpus<R: Rng>(rng: &mut R, max_works: usize, max_reviews: usize) -> Corpus {
    let works = rng.gen_range(1..=max_works);
    let boards = rng.gen_range(1..=3);
    let n = rng.gen_range(0..=max_reviews);
    let mut reviews = Vec::new();
    for i in 0..n {
        let target = if i > 0 && rng.gen_bool(0.35) { Target::Review(rng.gen_range(0..i)) } else { Target::Work(rng.gen_range(0..works)) };
        let grades = (0..rng.gen_range(0..=2))
            .map(|_| {
                let max = rng.gen_range(1..=5);
                (rng.gen_range(0..=max), max, rng.gen_bool(0.8))
            })
            .collect();
        reviews.push(OReview { target, grades, board: rng.gen_range(0..boards) });
    }
    Corpus {
        work_days: (0..works).map(|_| if rng.gen_bool(0.8) { Some(rng.gen_range(1..=4)) } else { None }).collect(),
        reviews,
        boards,
        flagged: (0..boards).map(|_| false).collect(),
    }
}

pub fn board_members(k: usize) -> Vec<Identity> {
    vec![Identity::new(format!("Board {k} member"))]
}

pub fn process() -> ReviewProcessSpec {
    ReviewProcessSpec {
        start_date: NaiveDate::from_ymd_opt(2020, 1, 1).unwrap(),
        end_date: NaiveDate::from_ymd_opt(2020, 2, 1).unwrap(),
        author_identity_known_to_reviewer: AuthorKnown::Prior,
        reviewer_identity_mode: ReviewerMode::Anonymized,
        reviewer_identity_known_when: ReviewerKnownWhen::Prior,
        review_text_published_when: TextPublishedWhen::Immediate,
        review_text_audience: TextAudience::Public,
        reviewed_work_public: WorkPublic::Prior,
        acceptance_threshold: None,
        coordinators: vec![],
        escrow_board: vec![Identity::new("Escrow")],
    }
}

pub struct Built {
    pub works: Vec<(PublishedObject, DocumentHandle)>,
    pub reviews: Vec<(PublishedObject, DocumentHandle)>,
}

pub fn work(i: usize, day: Option<u32>) -> (PublishedObject, DocumentHandle) {
    let obj = PublishedObject::blob(format!("work {i}").into_bytes(), "text/plain");
    let coes: Vec<CoERef> = day.map(|d| format!("arxiv:2020-01-{d:02}:w{i}").parse().unwrap()).into_iter().collect();
    let h = make_handle(&obj, Some(format!("Work number {i}")), Some(vec![format!("Author {i}")]), coes);
    (obj, h)
}

pub fn review_object(idx: usize, r: &OReview, target: DocumentHandle) -> ReviewObject {
    ReviewObject {
        author: ReviewerAttribution::Pseudonymous {
            pseudonym: format!("Anonymous reviewer {idx} mandated by board {}", r.board),
            escrow_board: board_members(r.board),
        },
        title: format!("Review {idx}"),
        targets: vec![target],
        grades: r
            .grades
            .iter()
            .map(|&(v, m, hi)| Grade {
                name: "g".into(),
                value: v,
                scale_max: m,
                orientation: if hi { Orientation::HigherIsBetter } else { Orientation::LowerIsBetter },
            })
            .collect(),
        comments: format!("comment {idx}"),
        process: process(),
    }
}

pub fn build(c: &Corpus) -> Built {
    let works: Vec<_> = c.work_days.iter().enumerate().map(|(i, d)| work(i, *d)).collect();
    let mut reviews: Vec<(PublishedObject, DocumentHandle)> = Vec::new();
    for (i, r) in c.reviews.iter().enumerate() {
        let target = match r.target {
            Target::Work(w) => works[w].1.clone(),
            Target::Review(j) => reviews[j].1.clone(),
        };
        reviews.push(review_as_object(&review_object(i, r, target)).unwrap());
    }
    Built { works, reviews }
}

pub fn graph_in_order(c: &Corpus, b: &Built, order: &[usize]) -> KnowledgeGraph {
    let mut g = KnowledgeGraph::new();
    let all: Vec<_> = b.works.iter().chain(&b.reviews).collect();
    for &i in order {
        g.index(&all[i].0, Some(&all[i].1));
    }
    for k in 0..c.boards {
        if c.flagged[k] {
            g.set_escrow_responsive(scholnet::model::board_id(&board_members(k)), false);
        }
    }
    g
}

pub fn graph(c: &Corpus, b: &Built) -> KnowledgeGraph {
    let order: Vec<usize> = (0..b.works.len() + b.reviews.len()).collect();
    graph_in_order(c, b, &order)
}

// ---- brute-force evaluator -------------------------------------------------

fn q(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

pub fn oracle_grade(r: &OReview) -> Option<BigRational> {
    if r.grades.is_empty() {
        return None;
    }
    let mut total = q(0, 1);
    for &(v, m, hi) in &r.grades {
        total += if hi { q(v, m) } else { q(m - v, m) };
    }
    Some(total / q(r.grades.len() as i64, 1))
}

fn oracle_weight(c: &Corpus, r: usize, depth_left: u32, lambda: &BigRational, on_path: &mut Vec<usize>) -> BigRational {
    if c.flagged[c.reviews[r].board] {
        return q(0, 1);
    }
    if depth_left == 0 {
        return q(1, 1);
    }
    on_path.push(r);
    let mut sum = q(0, 1);
    for m in 0..c.reviews.len() {
        if c.reviews[m].target != Target::Review(r) || on_path.contains(&m) {
            continue;
        }
        if let Some(gm) = oracle_grade(&c.reviews[m]) {
            sum += (q(2, 1) * gm - q(1, 1)) * oracle_weight(c, m, depth_left - 1, lambda, on_path);
        }
    }
    on_path.pop();
    let w = q(1, 1) + lambda * sum;
    if w < q(0, 1) {
        q(0, 1)
    } else {
        w
    }
}

pub fn oracle_score(c: &Corpus, work: usize, lambda: &BigRational, depth: u32) -> Option<BigRational> {
    let mut num = q(0, 1);
    let mut den = q(0, 1);
    for (i, r) in c.reviews.iter().enumerate() {
        if r.target != Target::Work(work) {
            continue;
        }
        let Some(g) = oracle_grade(r) else { continue };
        let w = oracle_weight(c, i, depth, lambda, &mut Vec::new());
        num += w.clone() * g;
        den += w;
    }
    if den == q(0, 1) {
        None
    } else {
        Some(num / den)
    }
}

/// Work indices in rank order, by selection sort over pairwise "beats".
pub fn oracle_order(c: &Corpus, fps: &[Fingerprint], lambda: &BigRational, depth: u32) -> Vec<usize> {
    let scores: Vec<_> = (0..c.work_days.len()).map(|w| oracle_score(c, w, lambda, depth)).collect();
    let beats = |a: usize, b: usize| -> bool {
        match (&scores[a], &scores[b]) {
            (Some(x), Some(y)) if x != y => return x > y,
            (Some(_), None) => return true,
            (None, Some(_)) => return false,
            _ => {}
        }
        match (c.work_days[a], c.work_days[b]) {
            (Some(x), Some(y)) if x != y => return x > y,
            (Some(_), None) => return true,
            (None, Some(_)) => return false,
            _ => {}
        }
        fps[a] < fps[b]
    };
    let mut left: Vec<usize> = (0..c.work_days.len()).collect();
    let mut out = Vec::new();
    while !left.is_empty() {
        let best = (0..left.len()).find(|&i| left.iter().all(|&o| o == left[i] || beats(left[i], o))).unwrap();
        out.push(left.remove(best));
    }
    out
}
