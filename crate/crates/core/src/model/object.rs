use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::canonical::{canonical_encode, Fingerprint};

/// Something that can be published: a single file, or a named collection of
/// other objects referenced by fingerprint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PublishedObject {
    Blob {
        #[serde(with = "serde_bytes")]
        bytes: Vec<u8>,
        media_type: String,
    },
    Dictionary { entries: BTreeMap<String, Fingerprint> },
}

#[derive(Serialize)]
struct DictionaryForm<'a> {
    dictionary: &'a BTreeMap<String, Fingerprint>,
}

impl PublishedObject {
    pub fn blob(bytes: impl Into<Vec<u8>>, media_type: impl Into<String>) -> Self {
        PublishedObject::Blob { bytes: bytes.into(), media_type: media_type.into() }
    }

    /// The bytes the fingerprint is computed over.
    ///
    /// A blob is its own content: a file's fingerprint is the plain digest of
    /// the file. A dictionary is the canonical map of its entries.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        match self {
            PublishedObject::Blob { bytes, .. } => bytes.clone(),
            PublishedObject::Dictionary { entries } => canonical_encode(&DictionaryForm { dictionary: entries })
                .expect("dictionary entries are encodable")
                .into_vec(),
        }
    }

    pub fn fingerprint(&self) -> Fingerprint {
        Fingerprint::sha256(&self.canonical_bytes())
    }

    pub fn media_type(&self) -> Option<&str> {
        match self {
            PublishedObject::Blob { media_type, .. } => Some(media_type),
            PublishedObject::Dictionary { .. } => None,
        }
    }

    /// Names that break the dictionary rules (empty names).
    pub fn invalid_entry_names(&self) -> Vec<&str> {
        match self {
            PublishedObject::Dictionary { entries } => entries.keys().filter(|k| k.is_empty()).map(String::as_str).collect(),
            PublishedObject::Blob { .. } => Vec::new(),
        }
    }
}

pub const MAX_TRAVERSAL_DEPTH: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraversalStatus {
    Resolved,
    Dangling,
    Cycle,
    TooDeep,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraversalEntry {
    pub path: Vec<String>,
    pub fingerprint: Fingerprint,
    pub status: TraversalStatus,
}

/// Walks a dictionary tree depth-first, resolving fingerprints through `lookup`.
///
/// Dangling references are reported rather than treated as errors. A visited
/// set and a depth limit guarantee termination even on crafted cycles.
pub fn traverse<F>(root: Fingerprint, mut lookup: F) -> Vec<TraversalEntry>
where
    F: FnMut(&Fingerprint) -> Option<PublishedObject>,
{
    let mut out = Vec::new();
    let mut on_path = BTreeSet::new();
    walk(root, Vec::new(), &mut lookup, &mut on_path, &mut out);
    out
}

fn walk<F>(fp: Fingerprint, path: Vec<String>, lookup: &mut F, on_path: &mut BTreeSet<Fingerprint>, out: &mut Vec<TraversalEntry>)
where
    F: FnMut(&Fingerprint) -> Option<PublishedObject>,
{
    if path.len() > MAX_TRAVERSAL_DEPTH {
        out.push(TraversalEntry { path, fingerprint: fp, status: TraversalStatus::TooDeep });
        return;
    }
    if on_path.contains(&fp) {
        out.push(TraversalEntry { path, fingerprint: fp, status: TraversalStatus::Cycle });
        return;
    }
    let Some(obj) = lookup(&fp) else {
        out.push(TraversalEntry { path, fingerprint: fp, status: TraversalStatus::Dangling });
        return;
    };
    out.push(TraversalEntry { path: path.clone(), fingerprint: fp, status: TraversalStatus::Resolved });
    if let PublishedObject::Dictionary { entries } = obj {
        on_path.insert(fp);
        for (name, child) in entries {
            let mut child_path = path.clone();
            child_path.push(name);
            walk(child, child_path, lookup, on_path, out);
        }
        on_path.remove(&fp);
    }
}
