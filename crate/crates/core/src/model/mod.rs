//! Domain objects: published objects, document handles, review objects,
//! review-process descriptions and post-hoc citations.
//!
//! Every type here is an immutable value with a canonical encoding, so it can
//! itself be published and fingerprinted.

mod citation;
mod fraction;
mod handle;
mod object;
mod review;

use serde::{Deserialize, Serialize};

pub use self::citation::{validate_posthoc, PostHocCitation, Relation, CITATION_MEDIA_TYPE};
pub use self::fraction::Fraction;
pub use self::handle::{make_handle, DocumentHandle};
pub use self::object::{traverse, PublishedObject, TraversalEntry, TraversalStatus, MAX_TRAVERSAL_DEPTH};
pub(crate) use self::review::contains_subslice;
pub use self::review::{
    board_id, review_as_object, validate_review, AuthorKnown, Grade, Orientation, ReviewObject, ReviewProcessSpec, ReviewerAttribution,
    ReviewerKnownWhen, ReviewerMode, TextAudience, TextPublishedWhen, WorkPublic, REVIEW_MEDIA_TYPE,
};

/// A person named in reviews, escrow boards and citations.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Identity {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub affiliation: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contact: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "serde_bytes")]
    pub verify_key: Option<Vec<u8>>,
}

impl Identity {
    pub fn new(name: impl Into<String>) -> Self {
        Identity { name: name.into(), affiliation: None, contact: None, verify_key: None }
    }

    pub fn with_affiliation(mut self, affiliation: impl Into<String>) -> Self {
        self.affiliation = Some(affiliation.into());
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    GradeOutOfRange,
    InvalidScale,
    EscrowMissing,
    NoTargets,
    DateOrder,
    ThresholdMissing,
    EmptyName,
    EmptyTitle,
    IdentityLeak,
    SelfCitation,
    StatementRequired,
}

/// One broken validation rule, naming the offending field.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Violation {
    pub field: String,
    pub kind: ViolationKind,
}

impl Violation {
    pub(crate) fn new(field: impl Into<String>, kind: ViolationKind) -> Self {
        Violation { field: field.into(), kind }
    }
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {:?}", self.field, self.kind)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ModelError {
    #[error("invalid review: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join(", "))]
    InvalidReview(Vec<Violation>),
    #[error(transparent)]
    Canonical(#[from] crate::canonical::CanonicalError),
}
