use std::fmt;
use std::str::FromStr;

use base64::engine::general_purpose::URL_SAFE_NO_PAD;
use base64::Engine;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FingerprintError {
    #[error("unknown fingerprint algorithm {0:?}")]
    UnknownAlgorithm(String),
    #[error("malformed fingerprint {text:?}: {reason}")]
    MalformedFingerprint { text: String, reason: &'static str },
}

/// Registered digest algorithms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Algorithm {
    Sha256,
}

impl Algorithm {
    pub const ALL: [Algorithm; 1] = [Algorithm::Sha256];

    pub fn id(self) -> &'static str {
        match self {
            Algorithm::Sha256 => "sha256",
        }
    }

    /// The byte prefixed to the digest in the compact textual form.
    pub fn tag(self) -> u8 {
        match self {
            Algorithm::Sha256 => 0x01,
        }
    }

    pub fn output_len(self) -> usize {
        match self {
            Algorithm::Sha256 => 32,
        }
    }

    pub fn from_id(id: &str) -> Result<Self, FingerprintError> {
        Self::ALL
            .into_iter()
            .find(|a| a.id() == id)
            .ok_or_else(|| FingerprintError::UnknownAlgorithm(id.to_owned()))
    }

    fn from_tag(tag: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.tag() == tag)
    }
}

/// Content identity of a byte sequence.
///
/// Renders as `sha256/<64 lowercase hex>`; also parses the compact form
/// `fp:<base64url(tag || digest)>`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Fingerprint {
    algorithm: Algorithm,
    digest: [u8; 32],
}

impl Fingerprint {
    pub fn sha256(data: &[u8]) -> Self {
        Fingerprint { algorithm: Algorithm::Sha256, digest: Sha256::digest(data).into() }
    }

    pub fn from_digest(algorithm: Algorithm, digest: &[u8]) -> Result<Self, FingerprintError> {
        let digest: [u8; 32] = digest.try_into().map_err(|_| FingerprintError::MalformedFingerprint {
            text: hex::encode(digest),
            reason: "wrong digest length",
        })?;
        Ok(Fingerprint { algorithm, digest })
    }

    pub fn algorithm(&self) -> Algorithm {
        self.algorithm
    }

    pub fn digest(&self) -> &[u8; 32] {
        &self.digest
    }

    pub fn to_path_form(&self) -> String {
        format!("{}/{}", self.algorithm.id(), hex::encode(self.digest))
    }

    pub fn to_compact_form(&self) -> String {
        let mut raw = Vec::with_capacity(1 + self.digest.len());
        raw.push(self.algorithm.tag());
        raw.extend_from_slice(&self.digest);
        format!("fp:{}", URL_SAFE_NO_PAD.encode(raw))
    }

    /// Relative storage path: `<algorithm>/<first 2 hex>/<remaining hex>`.
    pub fn storage_path(&self) -> std::path::PathBuf {
        let h = hex::encode(self.digest);
        [self.algorithm.id(), &h[..2], &h[2..]].iter().collect()
    }
}

/// Hashes `data` under the algorithm named `algorithm`.
pub fn fingerprint(data: &[u8], algorithm: &str) -> Result<Fingerprint, FingerprintError> {
    let mut h = Hasher::new(Algorithm::from_id(algorithm)?);
    h.update(data);
    Ok(h.finish())
}

/// Parses either textual form of a fingerprint.
pub fn parse_fingerprint(text: &str) -> Result<Fingerprint, FingerprintError> {
    let malformed = |reason| FingerprintError::MalformedFingerprint { text: text.to_owned(), reason };
    if let Some(compact) = text.strip_prefix("fp:") {
        let raw = URL_SAFE_NO_PAD.decode(compact).map_err(|_| malformed("invalid base64url"))?;
        // Non-canonical trailing bits decode leniently in some engines; insist on the exact spelling.
        if URL_SAFE_NO_PAD.encode(&raw) != compact {
            return Err(malformed("non-canonical base64url"));
        }
        let (&tag, digest) = raw.split_first().ok_or_else(|| malformed("empty compact form"))?;
        let algorithm = Algorithm::from_tag(tag).ok_or_else(|| malformed("unknown algorithm tag"))?;
        if digest.len() != algorithm.output_len() {
            return Err(malformed("wrong digest length"));
        }
        return Fingerprint::from_digest(algorithm, digest).map_err(|_| malformed("wrong digest length"));
    }
    let (alg, hex_digest) = text.split_once('/').ok_or_else(|| malformed("missing algorithm prefix"))?;
    let algorithm = Algorithm::from_id(alg).map_err(|_| malformed("unknown algorithm prefix"))?;
    if !hex_digest.bytes().all(|c| matches!(c, b'0'..=b'9' | b'a'..=b'f')) {
        return Err(malformed("illegal characters in digest"));
    }
    if hex_digest.len() != 2 * algorithm.output_len() {
        return Err(malformed("wrong digest length"));
    }
    let digest = hex::decode(hex_digest).map_err(|_| malformed("illegal characters in digest"))?;
    Fingerprint::from_digest(algorithm, &digest).map_err(|_| malformed("wrong digest length"))
}

/// Incremental hashing for callers that feed data in chunks.
pub struct Hasher {
    algorithm: Algorithm,
    inner: Sha256,
}

impl Hasher {
    pub fn new(algorithm: Algorithm) -> Self {
        match algorithm {
            Algorithm::Sha256 => Hasher { algorithm, inner: Sha256::new() },
        }
    }

    pub fn update(&mut self, chunk: &[u8]) {
        self.inner.update(chunk);
    }

    pub fn finish(self) -> Fingerprint {
        Fingerprint { algorithm: self.algorithm, digest: self.inner.finalize().into() }
    }
}

impl fmt::Display for Fingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_path_form())
    }
}

impl fmt::Debug for Fingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Fingerprint({})", self.to_path_form())
    }
}

impl FromStr for Fingerprint {
    type Err = FingerprintError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_fingerprint(s)
    }
}

impl Serialize for Fingerprint {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_path_form())
    }
}

impl<'de> Deserialize<'de> for Fingerprint {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        parse_fingerprint(&s).map_err(serde::de::Error::custom)
    }
}
