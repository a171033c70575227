use std::collections::BTreeMap;

use ed25519_dalek::{Signature, VerifyingKey};
use serde::{Deserialize, Serialize};

use super::authority::{registry_message, TimestampAuthority};
use super::merkle::{chain_head, fold_audit_path, GENESIS_HEAD};
use super::{AuthorityId, CoERef, LinkedStamp, RegistryStamp, SignatureScheme};
use crate::canonical::Fingerprint;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Valid,
    Invalid,
    UnknownAuthority,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Valid => "valid",
            Verdict::Invalid => "invalid",
            Verdict::UnknownAuthority => "unknown_authority",
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnchoredHead {
    #[serde(with = "serde_bytes")]
    pub head: Vec<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "serde_bytes")]
    pub root: Option<Vec<u8>>,
}

/// What a verifier trusts about one authority: its key and/or its published heads.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Anchor {
    #[serde(default, skip_serializing_if = "Option::is_none", with = "serde_bytes")]
    pub verify_key: Option<Vec<u8>>,
    /// Keyed by round; written with decimal text keys since canonical maps key on text.
    #[serde(default, with = "round_keys")]
    pub heads: BTreeMap<u64, AnchoredHead>,
}

mod round_keys {
    use std::collections::BTreeMap;

    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use super::AnchoredHead;

    pub fn serialize<S: Serializer>(heads: &BTreeMap<u64, AnchoredHead>, s: S) -> Result<S::Ok, S::Error> {
        heads.iter().map(|(k, v)| (k.to_string(), v)).collect::<BTreeMap<_, _>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<u64, AnchoredHead>, D::Error> {
        BTreeMap::<String, AnchoredHead>::deserialize(d)?
            .into_iter()
            .map(|(k, v)| match k.parse::<u64>() {
                Ok(n) if n.to_string() == k => Ok((n, v)),
                _ => Err(D::Error::custom(format!("bad round key {k:?}"))),
            })
            .collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrustAnchors {
    pub anchors: BTreeMap<AuthorityId, Anchor>,
}

impl TrustAnchors {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn trust_key(&mut self, authority: AuthorityId, key: [u8; 32]) -> &mut Self {
        self.anchors.entry(authority).or_default().verify_key = Some(key.to_vec());
        self
    }

    pub fn trust_head(&mut self, authority: AuthorityId, round: u64, head: [u8; 32], root: Option<[u8; 32]>) -> &mut Self {
        self.anchors
            .entry(authority)
            .or_default()
            .heads
            .insert(round, AnchoredHead { head: head.to_vec(), root: root.map(|r| r.to_vec()) });
        self
    }

    /// Anchors everything an authority has published: its key and all closed rounds.
    pub fn trust_authority(&mut self, authority: &TimestampAuthority) -> &mut Self {
        self.trust_key(authority.id().clone(), authority.verify_key());
        for h in authority.published_heads() {
            let head = h.head.as_slice().try_into().expect("32-byte head");
            let root = h.root.as_slice().try_into().ok();
            self.trust_head(authority.id().clone(), h.round, head, root);
        }
        self
    }

    pub fn remove(&mut self, authority: &AuthorityId) -> Option<Anchor> {
        self.anchors.remove(authority)
    }
}

/// Third-party verification of a certificate against a fingerprint.
pub fn verify_coe(coe: &CoERef, fp: &Fingerprint, anchors: &TrustAnchors) -> Verdict {
    match coe {
        CoERef::Registry(stamp) => verify_registry(stamp, fp, anchors),
        CoERef::Linked(stamp) => verify_linked(stamp, fp, anchors),
    }
}

fn verify_registry(stamp: &RegistryStamp, fp: &Fingerprint, anchors: &TrustAnchors) -> Verdict {
    let Some(key) = anchors.anchors.get(&stamp.authority).and_then(|a| a.verify_key.as_ref()) else {
        return Verdict::UnknownAuthority;
    };
    let Some((SignatureScheme::Ed25519, sig)) = &stamp.signature else {
        return Verdict::Invalid;
    };
    let Ok(key) = <[u8; 32]>::try_from(key.as_slice()) else { return Verdict::Invalid };
    let Ok(key) = VerifyingKey::from_bytes(&key) else { return Verdict::Invalid };
    let Ok(sig) = Signature::from_slice(sig) else { return Verdict::Invalid };
    match key.verify_strict(&registry_message(&stamp.authority, stamp.date, fp), &sig) {
        Ok(()) => Verdict::Valid,
        Err(_) => Verdict::Invalid,
    }
}

fn head_of(anchor: &Anchor, round: u64) -> Option<[u8; 32]> {
    anchor.heads.get(&round).and_then(|h| h.head.as_slice().try_into().ok())
}

fn verify_linked(stamp: &LinkedStamp, fp: &Fingerprint, anchors: &TrustAnchors) -> Verdict {
    let Some(anchor) = anchors.anchors.get(&stamp.authority).filter(|a| !a.heads.is_empty()) else {
        return Verdict::UnknownAuthority;
    };
    let Some(anchored) = head_of(anchor, stamp.round) else { return Verdict::Invalid };
    let Some(root) = fold_audit_path(fp.digest(), stamp.leaf_index, &stamp.audit_path) else {
        return Verdict::Invalid;
    };
    let computed = chain_head(&stamp.prev_head, &root);
    if computed != stamp.round_head || computed != anchored {
        return Verdict::Invalid;
    }
    let expected_prev = if stamp.round == 0 { Some(GENESIS_HEAD) } else { head_of(anchor, stamp.round - 1) };
    if expected_prev != Some(stamp.prev_head) {
        return Verdict::Invalid;
    }
    // Where roots were published, the whole chain up to this round must be consistent.
    for (&round, entry) in anchor.heads.range(..=stamp.round) {
        let Some(root) = entry.root.as_deref().and_then(|r| <[u8; 32]>::try_from(r).ok()) else { continue };
        let prev = if round == 0 { Some(GENESIS_HEAD) } else { head_of(anchor, round - 1) };
        let Some(prev) = prev else { continue };
        if head_of(anchor, round) != Some(chain_head(&prev, &root)) {
            return Verdict::Invalid;
        }
    }
    Verdict::Valid
}
