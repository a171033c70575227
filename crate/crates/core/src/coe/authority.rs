use chrono::NaiveDate;
use ed25519_dalek::{Signer, SigningKey};
use rand::{CryptoRng, RngCore};
use serde::{Deserialize, Serialize};

use super::merkle::{audit_path, chain_head, merkle_levels, GENESIS_HEAD};
use super::{AuthorityId, CoERef, CoeError, LinkedStamp, RegistryStamp, SignatureScheme};
use crate::canonical::{canonical_encode, Fingerprint};

/// A round head as published by an authority.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PublishedHead {
    pub round: u64,
    #[serde(with = "serde_bytes")]
    pub head: Vec<u8>,
    #[serde(with = "serde_bytes")]
    pub root: Vec<u8>,
    pub note: String,
}

/// Where a fingerprint sits in the currently open round.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PendingReceipt {
    pub round: u64,
    pub leaf_index: u64,
}

/// Persistent form of a [`TimestampAuthority`], including its secret key.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuthorityState {
    pub id: AuthorityId,
    #[serde(with = "serde_bytes")]
    pub secret_key: Vec<u8>,
    pub heads: Vec<PublishedHead>,
    pub pending: Vec<Fingerprint>,
}

/// Issues registry stamps and runs linked timestamping rounds.
///
/// Single writer: `round_append` and `round_close` take `&mut self`.
pub struct TimestampAuthority {
    id: AuthorityId,
    key: SigningKey,
    heads: Vec<PublishedHead>,
    pending: Vec<Fingerprint>,
}

pub(crate) fn registry_message(authority: &AuthorityId, date: NaiveDate, fp: &Fingerprint) -> Vec<u8> {
    #[derive(Serialize)]
    struct Signed<'a> {
        authority: &'a AuthorityId,
        date: NaiveDate,
        fingerprint: &'a Fingerprint,
    }
    canonical_encode(&Signed { authority, date, fingerprint: fp }).expect("encodable").into_vec()
}

impl TimestampAuthority {
    pub fn from_seed(id: AuthorityId, seed: [u8; 32]) -> Self {
        TimestampAuthority { id, key: SigningKey::from_bytes(&seed), heads: Vec::new(), pending: Vec::new() }
    }

    pub fn generate<R: RngCore + CryptoRng>(id: AuthorityId, rng: &mut R) -> Self {
        let mut seed = [0u8; 32];
        rng.fill_bytes(&mut seed);
        Self::from_seed(id, seed)
    }

    pub fn id(&self) -> &AuthorityId {
        &self.id
    }

    pub fn verify_key(&self) -> [u8; 32] {
        self.key.verifying_key().to_bytes()
    }

    pub fn published_heads(&self) -> &[PublishedHead] {
        &self.heads
    }

    pub fn pending_len(&self) -> usize {
        self.pending.len()
    }

    pub fn next_round(&self) -> u64 {
        self.heads.last().map_or(0, |h| h.round + 1)
    }

    fn last_head(&self) -> [u8; 32] {
        self.heads.last().map_or(GENESIS_HEAD, |h| h.head.as_slice().try_into().expect("32-byte head"))
    }

    /// Signs `(authority, date, fingerprint)`. The external id is derived from the signature.
    pub fn stamp_registry(&self, fp: &Fingerprint, date: NaiveDate) -> CoERef {
        let sig = self.key.sign(&registry_message(&self.id, date, fp)).to_bytes();
        let external_id = hex::encode(&sig[..8]);
        self.stamp_registry_with_id(fp, date, external_id)
    }

    /// Same as [`stamp_registry`](Self::stamp_registry) for registries that assign their own identifiers.
    pub fn stamp_registry_with_id(&self, fp: &Fingerprint, date: NaiveDate, external_id: impl Into<String>) -> CoERef {
        let sig = self.key.sign(&registry_message(&self.id, date, fp)).to_bytes();
        CoERef::Registry(RegistryStamp {
            authority: self.id.clone(),
            date,
            external_id: external_id.into(),
            signature: Some((SignatureScheme::Ed25519, sig.to_vec())),
        })
    }

    pub fn round_append(&mut self, fp: Fingerprint) -> PendingReceipt {
        self.pending.push(fp);
        PendingReceipt { round: self.next_round(), leaf_index: (self.pending.len() - 1) as u64 }
    }

    /// Closes the open round: builds the Merkle tree over pending fingerprints,
    /// chains its root onto the previous head and returns one receipt per leaf.
    pub fn round_close(&mut self, note: impl Into<String>) -> Result<(PublishedHead, Vec<CoERef>), CoeError> {
        if self.pending.is_empty() {
            return Err(CoeError::EmptyRound);
        }
        let leaves: Vec<[u8; 32]> = self.pending.iter().map(|fp| *fp.digest()).collect();
        let levels = merkle_levels(&leaves);
        let root = levels.last().expect("root level")[0];
        let prev_head = self.last_head();
        let head = chain_head(&prev_head, &root);
        let round = self.next_round();
        let receipts = (0..leaves.len())
            .map(|i| {
                CoERef::Linked(LinkedStamp {
                    authority: self.id.clone(),
                    round,
                    leaf_index: i as u64,
                    audit_path: audit_path(&levels, i),
                    round_head: head,
                    prev_head,
                })
            })
            .collect();
        let published = PublishedHead { round, head: head.to_vec(), root: root.to_vec(), note: note.into() };
        self.heads.push(published.clone());
        self.pending.clear();
        Ok((published, receipts))
    }

    /// Head publication file: one `round <n> <hex head> <hex root>` line per closed round.
    pub fn heads_file(&self) -> String {
        self.heads
            .iter()
            .map(|h| format!("round {} {} {}\n", h.round, hex::encode(&h.head), hex::encode(&h.root)))
            .collect()
    }

    pub fn to_state(&self) -> AuthorityState {
        AuthorityState {
            id: self.id.clone(),
            secret_key: self.key.to_bytes().to_vec(),
            heads: self.heads.clone(),
            pending: self.pending.clone(),
        }
    }

    pub fn from_state(state: AuthorityState) -> Result<Self, CoeError> {
        let seed: [u8; 32] = state.secret_key.as_slice().try_into().map_err(|_| CoeError::InvalidKey)?;
        let mut rounds = state.heads.iter().map(|h| h.round);
        if let Some(first) = rounds.next() {
            let mut prev = first;
            for r in rounds {
                if r <= prev {
                    return Err(CoeError::MalformedHeads { line: r as usize, reason: "rounds not increasing".into() });
                }
                prev = r;
            }
        }
        Ok(TimestampAuthority { id: state.id, key: SigningKey::from_bytes(&seed), heads: state.heads, pending: state.pending })
    }
}

/// Parses a head publication file into `(round, head, optional root)` triples.
pub fn parse_heads_file(text: &str) -> Result<Vec<(u64, [u8; 32], Option<[u8; 32]>)>, CoeError> {
    let mut out: Vec<(u64, [u8; 32], Option<[u8; 32]>)> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |reason: &str| CoeError::MalformedHeads { line: lineno, reason: reason.to_owned() };
        let fields: Vec<&str> = line.split(' ').collect();
        if !(3..=4).contains(&fields.len()) || fields[0] != "round" {
            return Err(bad("expected `round <n> <hex head> [<hex root>]`"));
        }
        let round: u64 = fields[1].parse().map_err(|_| bad("invalid round number"))?;
        let decode32 = |s: &str| -> Result<[u8; 32], CoeError> {
            hex::decode(s).ok().and_then(|v| v.try_into().ok()).ok_or_else(|| bad("expected 64 hex digits"))
        };
        let head = decode32(fields[2])?;
        let root = fields.get(3).map(|r| decode32(r)).transpose()?;
        if out.last().is_some_and(|(prev, _, _)| *prev >= round) {
            return Err(bad("rounds must be strictly increasing"));
        }
        out.push((round, head, root));
    }
    Ok(out)
}
