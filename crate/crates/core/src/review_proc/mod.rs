//! Review rounds as release-gated state machines.
//!
//! A round starts from a process description and a set of works, hands each
//! reviewer a packet (the object to read plus a pre-filled template), holds
//! submitted reviews privately, and releases reviews and works together once
//! the logical date reaches the end of the process. Time is always supplied
//! by the caller.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::canonical::{canonical_encode, Fingerprint};
use crate::coe::CoERef;
use crate::escrow::EscrowService;
use crate::model::{
    review_as_object, validate_review, DocumentHandle, Grade, PublishedObject, ReviewObject, ReviewProcessSpec, ReviewerAttribution,
    ReviewerMode, TextPublishedWhen, Violation, WorkPublic,
};
use crate::query::{KnowledgeGraph, RankingSpec};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RoundError {
    #[error("invalid process: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join(", "))]
    SpecInvalid(Vec<Violation>),
    #[error("work {0} has no usable anonymized variant")]
    MissingAnonymizedVariant(usize),
    #[error("anonymized variant of work {0} still names an author")]
    AnonymizationLeak(usize),
    #[error("work {0} has no certificate of existence")]
    MissingCoE(usize),
    #[error("work {0}: handle fingerprint does not match its content")]
    WorkMismatch(usize),
    #[error("round is not accepting this operation in its current phase")]
    WrongPhase,
    #[error("review targets a work outside this round")]
    TargetMismatch,
    #[error("review describes a different process than the round's")]
    ProcessMismatch,
    #[error("review attribution does not fit the round's reviewer mode")]
    AttributionMismatch,
    #[error("pseudonym has no sealed record with the round's escrow")]
    Unaccountable,
    #[error("review reveals its author's identity")]
    IdentityLeak,
    #[error("invalid review: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join(", "))]
    InvalidReview(Vec<Violation>),
    #[error("release is only possible from {end}")]
    TooEarly { end: NaiveDate },
    #[error("time cannot move backwards")]
    ClockRegression,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoundMode {
    Blind,
    DoubleBlind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Setup,
    Invitation,
    Reviewing,
    Released,
}

/// A work entered into a round. `handle` names the non-anonymized version
/// and must carry its certificate of existence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundWork {
    pub private_object: PublishedObject,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anonymized_object: Option<PublishedObject>,
    pub handle: DocumentHandle,
}

impl RoundWork {
    pub fn nonanon_fingerprint(&self) -> Fingerprint {
        self.handle.fingerprint
    }

    pub fn nonanon_coe(&self) -> Option<&CoERef> {
        self.handle.coes.first()
    }

    /// The public link between the anonymized and the real version.
    pub fn link(&self) -> Option<DoubleBlindLink> {
        Some(DoubleBlindLink {
            anonymized_fingerprint: self.anonymized_object.as_ref()?.fingerprint(),
            nonanon_fingerprint: self.handle.fingerprint,
            nonanon_coe: self.nonanon_coe()?.clone(),
        })
    }

    /// What reviewers are told to target: in double-blind rounds, the
    /// non-anonymized fingerprint and certificate without any names.
    fn target_handle(&self, mode: RoundMode) -> DocumentHandle {
        match mode {
            RoundMode::Blind => self.handle.clone(),
            RoundMode::DoubleBlind => DocumentHandle {
                title: None,
                authors: None,
                fingerprint: self.handle.fingerprint,
                coes: self.handle.coes.clone(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DoubleBlindLink {
    pub anonymized_fingerprint: Fingerprint,
    pub nonanon_fingerprint: Fingerprint,
    pub nonanon_coe: CoERef,
}

/// Pre-filled review: the reviewer adds attribution, grades and comments.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewTemplate {
    pub title: String,
    pub targets: Vec<DocumentHandle>,
    pub process: ReviewProcessSpec,
}

impl ReviewTemplate {
    pub fn fill(&self, author: ReviewerAttribution, grades: Vec<Grade>, comments: impl Into<String>) -> ReviewObject {
        ReviewObject {
            author,
            title: self.title.clone(),
            targets: self.targets.clone(),
            grades,
            comments: comments.into(),
            process: self.process.clone(),
        }
    }
}

/// Everything delivered to a reviewer for one work.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReviewerPacket {
    pub object: PublishedObject,
    pub template: ReviewTemplate,
}

impl ReviewerPacket {
    /// The delivered bytes, for anonymity audits.
    pub fn bytes(&self) -> Vec<u8> {
        let mut out = self.object.canonical_bytes();
        out.extend(canonical_encode(&self.template).expect("templates are encodable").into_vec());
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubmissionReceipt {
    pub review: DocumentHandle,
    pub published_now: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Release {
    pub reviews: Vec<(PublishedObject, DocumentHandle)>,
    pub works: Vec<(PublishedObject, DocumentHandle)>,
    /// Works kept out of this round's output by threshold gating. Their
    /// authors remain free to publish them independently.
    pub withheld: Vec<Fingerprint>,
}

impl Release {
    pub fn all(&self) -> impl Iterator<Item = &(PublishedObject, DocumentHandle)> {
        self.reviews.iter().chain(&self.works)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct Held {
    object: PublishedObject,
    handle: DocumentHandle,
    published: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundState {
    spec: ReviewProcessSpec,
    mode: RoundMode,
    phase: Phase,
    works: Vec<RoundWork>,
    pending: Vec<Held>,
    logical_now: NaiveDate,
}

#[derive(Serialize)]
struct Description<'a> {
    spec: &'a ReviewProcessSpec,
    mode: RoundMode,
    works: Vec<DescribedWork>,
}

#[derive(Serialize)]
struct DescribedWork {
    fingerprint: Fingerprint,
    #[serde(skip_serializing_if = "Option::is_none")]
    coe: Option<CoERef>,
    #[serde(skip_serializing_if = "Option::is_none")]
    anonymized: Option<Fingerprint>,
}

pub fn start_round(spec: ReviewProcessSpec, works: Vec<RoundWork>, mode: RoundMode, now: NaiveDate) -> Result<RoundState, RoundError> {
    let violations = spec.violations();
    if !violations.is_empty() {
        return Err(RoundError::SpecInvalid(violations));
    }
    for (i, w) in works.iter().enumerate() {
        if w.private_object.fingerprint() != w.handle.fingerprint {
            return Err(RoundError::WorkMismatch(i));
        }
        if w.handle.coes.is_empty() {
            return Err(RoundError::MissingCoE(i));
        }
        if mode == RoundMode::DoubleBlind {
            let anon = w.anonymized_object.as_ref().ok_or(RoundError::MissingAnonymizedVariant(i))?;
            if anon.fingerprint() == w.handle.fingerprint {
                return Err(RoundError::MissingAnonymizedVariant(i));
            }
            let bytes = anon.canonical_bytes();
            let names = w.handle.authors.iter().flatten();
            if names.filter(|n| !n.is_empty()).any(|n| crate::model::contains_subslice(&bytes, n.as_bytes())) {
                return Err(RoundError::AnonymizationLeak(i));
            }
        }
    }
    Ok(RoundState { spec, mode, phase: Phase::Reviewing, works, pending: Vec::new(), logical_now: now })
}

impl RoundState {
    pub fn spec(&self) -> &ReviewProcessSpec {
        &self.spec
    }

    pub fn mode(&self) -> RoundMode {
        self.mode
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn works(&self) -> &[RoundWork] {
        &self.works
    }

    pub fn now(&self) -> NaiveDate {
        self.logical_now
    }

    pub fn pending_len(&self) -> usize {
        self.pending.len()
    }

    pub fn advance(&mut self, now: NaiveDate) -> Result<(), RoundError> {
        if now < self.logical_now {
            return Err(RoundError::ClockRegression);
        }
        self.logical_now = now;
        Ok(())
    }

    /// One packet per work, as delivered to its reviewers.
    pub fn packets(&self) -> Vec<ReviewerPacket> {
        self.works
            .iter()
            .map(|w| {
                let object = match self.mode {
                    RoundMode::Blind => w.private_object.clone(),
                    RoundMode::DoubleBlind => w.anonymized_object.clone().expect("checked at start"),
                };
                let title = match (self.mode, &w.handle.title) {
                    (RoundMode::Blind, Some(t)) => format!("Review of {t}"),
                    _ => format!("Review of {}", w.handle.fingerprint),
                };
                ReviewerPacket { object, template: ReviewTemplate { title, targets: vec![w.target_handle(self.mode)], process: self.spec.clone() } }
            })
            .collect()
    }

    /// Canonical round description: process, mode and work fingerprints.
    pub fn description(&self) -> Vec<u8> {
        let d = Description {
            spec: &self.spec,
            mode: self.mode,
            works: self
                .works
                .iter()
                .map(|w| DescribedWork {
                    fingerprint: w.handle.fingerprint,
                    coe: w.nonanon_coe().cloned(),
                    anonymized: w.anonymized_object.as_ref().map(PublishedObject::fingerprint),
                })
                .collect(),
        };
        canonical_encode(&d).expect("descriptions are encodable").into_vec()
    }

    /// Accepts a review into the round. Pseudonymous reviews must be
    /// accountable to `escrow`, which also learns the review's fingerprint.
    pub fn submit_review(&mut self, review: ReviewObject, escrow: Option<&mut EscrowService>) -> Result<SubmissionReceipt, RoundError> {
        if self.phase != Phase::Reviewing {
            return Err(RoundError::WrongPhase);
        }
        let violations = validate_review(&review);
        if !violations.is_empty() {
            return Err(RoundError::InvalidReview(violations));
        }
        if review.targets.iter().any(|t| !self.works.iter().any(|w| w.handle.fingerprint == t.fingerprint)) {
            return Err(RoundError::TargetMismatch);
        }
        if review.process != self.spec {
            return Err(RoundError::ProcessMismatch);
        }
        let (object, handle) = review_as_object(&review).map_err(|e| match e {
            crate::model::ModelError::InvalidReview(v) => RoundError::InvalidReview(v),
            crate::model::ModelError::Canonical(_) => RoundError::InvalidReview(Vec::new()),
        })?;
        match (&review.author, self.spec.reviewer_identity_mode) {
            (ReviewerAttribution::Open(_), ReviewerMode::Open) => {}
            (ReviewerAttribution::Pseudonymous { pseudonym, .. }, ReviewerMode::Anonymized | ReviewerMode::AnonymizedToAuthorsOnly) => {
                let escrow = escrow.ok_or(RoundError::Unaccountable)?;
                if !escrow.has_record(pseudonym) {
                    return Err(RoundError::Unaccountable);
                }
                if escrow.leaks_identity(&review) {
                    return Err(RoundError::IdentityLeak);
                }
                escrow.bind_review(handle.fingerprint, pseudonym).map_err(|_| RoundError::Unaccountable)?;
            }
            _ => return Err(RoundError::AttributionMismatch),
        }
        let published = self.spec.review_text_published_when == TextPublishedWhen::Immediate;
        if !self.pending.iter().any(|h| h.handle.fingerprint == handle.fingerprint) {
            self.pending.push(Held { object, handle: handle.clone(), published });
        }
        Ok(SubmissionReceipt { review: handle, published_now: published })
    }

    /// The only public read path for reviews held by the round.
    pub fn public_reviews(&self) -> Vec<(PublishedObject, DocumentHandle)> {
        self.pending
            .iter()
            .filter(|h| h.published || self.phase == Phase::Released)
            .map(|h| (h.object.clone(), h.handle.clone()))
            .collect()
    }

    /// Ends the round. Reviews are always released; works are released
    /// unless the process gates them on a score threshold they miss.
    pub fn release(&mut self, now: NaiveDate) -> Result<Release, RoundError> {
        if self.phase != Phase::Reviewing {
            return Err(RoundError::WrongPhase);
        }
        if now < self.spec.end_date {
            return Err(RoundError::TooEarly { end: self.spec.end_date });
        }
        self.advance(now)?;
        let mut graph = KnowledgeGraph::new();
        for h in &self.pending {
            graph.index(&h.object, Some(&h.handle));
        }
        let mut out = Release::default();
        for w in &self.works {
            let admitted = match (self.spec.reviewed_work_public, &self.spec.acceptance_threshold) {
                (WorkPublic::AfterwardsBeyondThreshold, Some(t)) => {
                    graph.score(&w.handle.fingerprint, &RankingSpec::default()).is_some_and(|s| s >= t.to_big())
                }
                _ => true,
            };
            if admitted {
                out.works.push((w.private_object.clone(), w.handle.clone()));
            } else {
                out.withheld.push(w.handle.fingerprint);
            }
        }
        for h in &mut self.pending {
            h.published = true;
            out.reviews.push((h.object.clone(), h.handle.clone()));
        }
        self.phase = Phase::Released;
        Ok(out)
    }
}

/// True iff `revealed` is exactly the work the review targets.
pub fn verify_double_blind_link(review: &ReviewObject, revealed: &PublishedObject) -> bool {
    match review.targets.as_slice() {
        [only] => only.fingerprint == revealed.fingerprint(),
        _ => false,
    }
}
