use serde::{Deserialize, Serialize};

use super::{DocumentHandle, Identity, PublishedObject, Violation, ViolationKind};
use crate::canonical::{canonical_encode, CanonicalError};

pub const CITATION_MEDIA_TYPE: &str = "application/vnd.scholnet.citation";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    PriorWork,
    Influence,
    Plagiarism,
}

/// A relation between two already-published works, declared after the fact.
///
/// The source need not predate the target; the point is to record links
/// that the original authors did not.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PostHocCitation {
    pub source: DocumentHandle,
    pub target: DocumentHandle,
    pub relation: Relation,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub statement: Option<String>,
    pub author: Identity,
}

impl PostHocCitation {
    pub fn to_object(&self) -> Result<PublishedObject, CanonicalError> {
        Ok(PublishedObject::blob(canonical_encode(self)?.into_vec(), CITATION_MEDIA_TYPE))
    }
}

pub fn validate_posthoc(c: &PostHocCitation) -> Vec<Violation> {
    let mut v = Vec::new();
    if c.source.fingerprint == c.target.fingerprint {
        v.push(Violation::new("target", ViolationKind::SelfCitation));
    }
    if c.relation == Relation::Plagiarism && c.statement.as_deref().map_or(true, |s| s.trim().is_empty()) {
        v.push(Violation::new("statement", ViolationKind::StatementRequired));
    }
    if c.author.name.trim().is_empty() {
        v.push(Violation::new("author.name", ViolationKind::EmptyName));
    }
    v
}
