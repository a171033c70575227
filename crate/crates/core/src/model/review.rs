use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{make_handle, DocumentHandle, Fraction, Identity, ModelError, PublishedObject, Violation, ViolationKind};
use crate::canonical::{canonical_decode, canonical_encode, CanonicalError, Fingerprint};

pub const REVIEW_MEDIA_TYPE: &str = "application/vnd.scholnet.review";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    HigherIsBetter,
    LowerIsBetter,
}

/// A grade that carries its own scale, so it can be interpreted without context.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grade {
    pub name: String,
    pub value: i64,
    pub scale_max: i64,
    pub orientation: Orientation,
}

impl Grade {
    pub fn higher_is_better(name: impl Into<String>, value: i64, scale_max: i64) -> Self {
        Grade { name: name.into(), value, scale_max, orientation: Orientation::HigherIsBetter }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuthorKnown {
    Prior,
    Afterwards,
    AfterFirstRelease,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReviewerMode {
    Open,
    Anonymized,
    AnonymizedToAuthorsOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReviewerKnownWhen {
    Prior,
    Immediate,
    Afterwards,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TextPublishedWhen {
    Immediate,
    EndOfProcess,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TextAudience {
    Public,
    AuthorsAndCommittee,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WorkPublic {
    Prior,
    Afterwards,
    AfterwardsBeyondThreshold,
}

/// Declarative description of the process that produced a review.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReviewProcessSpec {
    #[serde(rename = "start")]
    pub start_date: NaiveDate,
    #[serde(rename = "end")]
    pub end_date: NaiveDate,
    #[serde(rename = "author_known")]
    pub author_identity_known_to_reviewer: AuthorKnown,
    #[serde(rename = "reviewer_mode")]
    pub reviewer_identity_mode: ReviewerMode,
    #[serde(rename = "reviewer_known_when")]
    pub reviewer_identity_known_when: ReviewerKnownWhen,
    #[serde(rename = "text_published_when")]
    pub review_text_published_when: TextPublishedWhen,
    #[serde(rename = "text_audience")]
    pub review_text_audience: TextAudience,
    #[serde(rename = "work_public")]
    pub reviewed_work_public: WorkPublic,
    #[serde(rename = "threshold", default, skip_serializing_if = "Option::is_none")]
    pub acceptance_threshold: Option<Fraction>,
    pub coordinators: Vec<Identity>,
    #[serde(rename = "escrow")]
    pub escrow_board: Vec<Identity>,
}

impl ReviewProcessSpec {
    pub fn violations(&self) -> Vec<Violation> {
        let mut v = Vec::new();
        if self.start_date > self.end_date {
            v.push(Violation::new("process.end", ViolationKind::DateOrder));
        }
        if self.reviewer_identity_mode != ReviewerMode::Open && self.escrow_board.is_empty() {
            v.push(Violation::new("process.escrow", ViolationKind::EscrowMissing));
        }
        if self.reviewed_work_public == WorkPublic::AfterwardsBeyondThreshold && self.acceptance_threshold.is_none() {
            v.push(Violation::new("process.threshold", ViolationKind::ThresholdMissing));
        }
        for (i, p) in self.coordinators.iter().enumerate() {
            if p.name.trim().is_empty() {
                v.push(Violation::new(format!("process.coordinators[{i}].name"), ViolationKind::EmptyName));
            }
        }
        for (i, p) in self.escrow_board.iter().enumerate() {
            if p.name.trim().is_empty() {
                v.push(Violation::new(format!("process.escrow[{i}].name"), ViolationKind::EmptyName));
            }
        }
        v
    }
}

/// Who wrote a review, as far as the public is concerned.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReviewerAttribution {
    Open(Identity),
    Pseudonymous {
        pseudonym: String,
        #[serde(rename = "escrow")]
        escrow_board: Vec<Identity>,
    },
}

impl ReviewerAttribution {
    pub fn display(&self) -> &str {
        match self {
            ReviewerAttribution::Open(id) => &id.name,
            ReviewerAttribution::Pseudonymous { pseudonym, .. } => pseudonym,
        }
    }

    /// Stable identifier of the escrow board vouching for a pseudonymous reviewer.
    pub fn escrow_board_id(&self) -> Option<Fingerprint> {
        match self {
            ReviewerAttribution::Open(_) => None,
            ReviewerAttribution::Pseudonymous { escrow_board, .. } => Some(board_id(escrow_board)),
        }
    }
}

/// Fingerprint of the canonical board member list.
pub fn board_id(board: &[Identity]) -> Fingerprint {
    canonical_encode(board).expect("identities are encodable").fingerprint()
}

/// A self-contained, publishable review.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReviewObject {
    pub author: ReviewerAttribution,
    pub title: String,
    pub targets: Vec<DocumentHandle>,
    pub grades: Vec<Grade>,
    pub comments: String,
    pub process: ReviewProcessSpec,
}

impl ReviewObject {
    pub fn to_canonical(&self) -> Result<Vec<u8>, CanonicalError> {
        Ok(canonical_encode(self)?.into_vec())
    }

    pub fn from_canonical(bytes: &[u8]) -> Result<Self, CanonicalError> {
        canonical_decode(bytes)
    }

    /// Reports a violation if the serialized review mentions `real`'s name anywhere.
    pub fn leaks_identity(&self, real: &Identity) -> bool {
        let bytes = match self.to_canonical() {
            Ok(b) => b,
            Err(_) => return false,
        };
        !real.name.is_empty() && contains_subslice(&bytes, real.name.as_bytes())
    }
}

pub(crate) fn contains_subslice(haystack: &[u8], needle: &[u8]) -> bool {
    needle.is_empty() || haystack.windows(needle.len()).any(|w| w == needle)
}

pub fn validate_review(review: &ReviewObject) -> Vec<Violation> {
    let mut v = Vec::new();
    match &review.author {
        ReviewerAttribution::Open(id) => {
            if id.name.trim().is_empty() {
                v.push(Violation::new("author.name", ViolationKind::EmptyName));
            }
        }
        ReviewerAttribution::Pseudonymous { pseudonym, escrow_board } => {
            if pseudonym.trim().is_empty() {
                v.push(Violation::new("author.pseudonym", ViolationKind::EmptyName));
            }
            if escrow_board.is_empty() {
                v.push(Violation::new("author.escrow", ViolationKind::EscrowMissing));
            }
        }
    }
    if review.title.trim().is_empty() {
        v.push(Violation::new("title", ViolationKind::EmptyTitle));
    }
    if review.targets.is_empty() {
        v.push(Violation::new("targets", ViolationKind::NoTargets));
    }
    for (i, g) in review.grades.iter().enumerate() {
        if g.scale_max < 1 {
            v.push(Violation::new(format!("grades[{i}].scale_max"), ViolationKind::InvalidScale));
        } else if g.value < 0 || g.value > g.scale_max {
            v.push(Violation::new(format!("grades[{i}].value"), ViolationKind::GradeOutOfRange));
        }
    }
    v.extend(review.process.violations());
    v
}

/// Wraps a valid review as a publishable blob plus its handle.
///
/// The handle reuses the review's title and attribution.
pub fn review_as_object(review: &ReviewObject) -> Result<(PublishedObject, DocumentHandle), ModelError> {
    let violations = validate_review(review);
    if !violations.is_empty() {
        return Err(ModelError::InvalidReview(violations));
    }
    let object = PublishedObject::blob(review.to_canonical()?, REVIEW_MEDIA_TYPE);
    let handle = make_handle(&object, Some(review.title.clone()), Some(vec![review.author.display().to_owned()]), vec![]);
    Ok((object, handle))
}
