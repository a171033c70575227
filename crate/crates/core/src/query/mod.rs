//! Query engine: a knowledge graph of works, reviews and post-hoc
//! citations, a review-weighted ranking, public saved queries, and feeds.

mod feed;
mod filter;
mod graph;
mod score;

use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::canonical::{canonical_encode, Fingerprint};
use crate::model::{DocumentHandle, Fraction, Grade, Identity, Relation};

pub use self::feed::{feed, results_canonical, results_text};
pub use self::filter::{words, Filter};
pub use self::graph::{GraphNode, KnowledgeGraph, NodeKind};
pub use self::score::{review_grade, RankingSpec, UnreviewedPolicy};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum QueryError {
    #[error("query {0:?} is private")]
    QueryPrivate(String),
}

/// A persisted filter + ranking definition. Journals are public saved queries.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SavedQuery {
    pub id: String,
    pub owner: Identity,
    pub filter: Filter,
    #[serde(default)]
    pub ranking: RankingSpec,
    pub public: bool,
    /// Escrow boards whose reviews this query ignores.
    #[serde(default)]
    pub blacklist: Vec<Fingerprint>,
}

impl SavedQuery {
    pub fn public(id: impl Into<String>, owner: Identity, filter: Filter) -> Self {
        SavedQuery { id: id.into(), owner, filter, ranking: RankingSpec::default(), public: true, blacklist: Vec::new() }
    }

    /// The definition as published for transparency.
    pub fn definition(&self) -> Vec<u8> {
        canonical_encode(self).expect("query definitions are encodable").into_vec()
    }
}

/// Context attached to a result that takes part in a post-hoc citation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CitationNote {
    pub citation: Fingerprint,
    pub relation: Relation,
    pub source: Fingerprint,
    pub target: Fingerprint,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub statement: Option<String>,
    /// Grades from reviews of the citation itself.
    pub grades: Vec<Grade>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResultEntry {
    pub handle: DocumentHandle,
    pub score: Option<BigRational>,
    /// Present because a citation linked it to a filtered result, not because it matched.
    pub expanded: bool,
    pub notes: Vec<CitationNote>,
}

impl ResultEntry {
    pub fn label(&self) -> &'static str {
        if self.expanded {
            "posthoc-expansion"
        } else {
            "match"
        }
    }
}

/// Runs a saved query. Private queries only run for their owner.
pub fn execute(graph: &KnowledgeGraph, q: &SavedQuery, caller: Option<&Identity>) -> Result<Vec<ResultEntry>, QueryError> {
    if !q.public && caller != Some(&q.owner) {
        return Err(QueryError::QueryPrivate(q.id.clone()));
    }
    Ok(graph.run(q))
}

pub(crate) fn fraction_text(r: &BigRational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

pub(crate) fn default_damping() -> Fraction {
    Fraction::new(1, 2).expect("non-zero denominator")
}
