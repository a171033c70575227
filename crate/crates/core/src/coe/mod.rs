//! Certificates of existence.
//!
//! Two sources are supported side by side: registry stamps, where an
//! authority signs `(authority, date, fingerprint)`, and linked stamps, where
//! fingerprints are batched into rounds whose Merkle roots are chained into a
//! published head list. Neither path ever sees document bytes.

mod anchors;
mod authority;
mod merkle;
mod text;

use chrono::NaiveDate;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub use self::anchors::{verify_coe, Anchor, AnchoredHead, TrustAnchors, Verdict};
pub use self::authority::{parse_heads_file, AuthorityState, PendingReceipt, PublishedHead, TimestampAuthority};
pub use self::merkle::{chain_head, fold_audit_path, merkle_levels, node_hash, GENESIS_HEAD, MAX_AUDIT_PATH};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CoeError {
    #[error("round has no pending fingerprints")]
    EmptyRound,
    #[error("malformed certificate of existence {text:?}: {reason}")]
    Malformed { text: String, reason: String },
    #[error("invalid authority id {0:?}")]
    InvalidAuthorityId(String),
    #[error("malformed head publication line {line}: {reason}")]
    MalformedHeads { line: usize, reason: String },
    #[error("invalid signing key material")]
    InvalidKey,
}

/// Identifier of a timestamping authority or registry, e.g. `arxiv`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AuthorityId(String);

impl AuthorityId {
    pub fn new(id: impl Into<String>) -> Result<Self, CoeError> {
        let id = id.into();
        let ok = !id.is_empty()
            && id != "link"
            && id.bytes().next().is_some_and(|c| c.is_ascii_lowercase() || c.is_ascii_digit())
            && id.bytes().all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || matches!(c, b'.' | b'_' | b'-'));
        if ok {
            Ok(AuthorityId(id))
        } else {
            Err(CoeError::InvalidAuthorityId(id))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl std::fmt::Display for AuthorityId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl Serialize for AuthorityId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for AuthorityId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        AuthorityId::new(String::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignatureScheme {
    Ed25519,
}

impl SignatureScheme {
    pub fn id(self) -> &'static str {
        match self {
            SignatureScheme::Ed25519 => "ed25519",
        }
    }

    pub fn from_id(id: &str) -> Option<Self> {
        (id == "ed25519").then_some(SignatureScheme::Ed25519)
    }
}

/// A registry-issued certificate: `authority:YYYY-MM-DD:external_id`.
///
/// Registries that do not sign (legacy identifiers) produce stamps with no
/// signature; those never verify as valid but still serve as references.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RegistryStamp {
    pub authority: AuthorityId,
    pub date: NaiveDate,
    pub external_id: String,
    pub signature: Option<(SignatureScheme, Vec<u8>)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
}

/// One sibling on the way from a leaf to its round root.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PathNode {
    pub side: Side,
    #[serde(with = "serde_bytes")]
    pub digest: Vec<u8>,
}

/// A receipt from a linked timestamping round.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LinkedStamp {
    pub authority: AuthorityId,
    pub round: u64,
    pub leaf_index: u64,
    pub audit_path: Vec<PathNode>,
    pub round_head: [u8; 32],
    pub prev_head: [u8; 32],
}

/// A certificate of existence attached to a document handle.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CoERef {
    Registry(RegistryStamp),
    Linked(LinkedStamp),
}

impl CoERef {
    pub fn authority(&self) -> &AuthorityId {
        match self {
            CoERef::Registry(r) => &r.authority,
            CoERef::Linked(l) => &l.authority,
        }
    }

    /// Calendar date carried by the certificate; linked stamps are ordered by round only.
    pub fn date(&self) -> Option<NaiveDate> {
        match self {
            CoERef::Registry(r) => Some(r.date),
            CoERef::Linked(_) => None,
        }
    }

    /// Parses the textual grammar (`authority:date:id[;scheme=sig]` or `link:authority:round:receipt`).
    pub fn parse(s: &str) -> Result<Self, CoeError> {
        text::parse(s)
    }
}

impl std::fmt::Display for CoERef {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&text::render(self))
    }
}

impl std::str::FromStr for CoERef {
    type Err = CoeError;
    fn from_str(s: &str) -> Result<Self, CoeError> {
        text::parse(s)
    }
}

impl Serialize for CoERef {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&text::render(self))
    }
}

impl<'de> Deserialize<'de> for CoERef {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        text::parse(&String::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}
