use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use super::PublishedObject;
use crate::canonical::Fingerprint;
use crate::coe::CoERef;

/// The public name of a work: `(title, authors, fingerprint, CoEs)`.
///
/// Only the fingerprint (and the certificates) are authoritative; title and
/// authors are display copies. Equality, ordering and hashing therefore look
/// at the fingerprint alone.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DocumentHandle {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub authors: Option<Vec<String>>,
    pub fingerprint: Fingerprint,
    #[serde(default)]
    pub coes: Vec<CoERef>,
}

impl DocumentHandle {
    pub fn bare(fingerprint: Fingerprint) -> Self {
        DocumentHandle { title: None, authors: None, fingerprint, coes: Vec::new() }
    }

    /// Earliest calendar date among the attached certificates.
    pub fn earliest_coe_date(&self) -> Option<chrono::NaiveDate> {
        self.coes.iter().filter_map(CoERef::date).min()
    }

    /// Field-by-field equality, for callers that care about display copies too.
    pub fn same_tuple(&self, other: &DocumentHandle) -> bool {
        self.title == other.title && self.authors == other.authors && self.fingerprint == other.fingerprint && self.coes == other.coes
    }
}

impl PartialEq for DocumentHandle {
    fn eq(&self, other: &Self) -> bool {
        self.fingerprint == other.fingerprint
    }
}

impl Eq for DocumentHandle {}

impl Hash for DocumentHandle {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.fingerprint.hash(state);
    }
}

impl PartialOrd for DocumentHandle {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for DocumentHandle {
    fn cmp(&self, other: &Self) -> Ordering {
        self.fingerprint.cmp(&other.fingerprint)
    }
}

/// Four-line rendering: title, authors, fingerprint, certificates.
impl fmt::Display for DocumentHandle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Title: {}", self.title.as_deref().unwrap_or("-"))?;
        match &self.authors {
            Some(a) => writeln!(f, "Authors: {}", a.iter().map(|s| format!("{s:?}")).collect::<Vec<_>>().join(", "))?,
            None => writeln!(f, "Authors: -")?,
        }
        writeln!(f, "Fingerprint: {}", self.fingerprint)?;
        if self.coes.is_empty() {
            write!(f, "CoEs: -")
        } else {
            write!(f, "CoEs: {}", self.coes.iter().map(ToString::to_string).collect::<Vec<_>>().join(" "))
        }
    }
}

pub fn make_handle(object: &PublishedObject, title: Option<String>, authors: Option<Vec<String>>, coes: Vec<CoERef>) -> DocumentHandle {
    DocumentHandle { title, authors, fingerprint: object.fingerprint(), coes }
}
