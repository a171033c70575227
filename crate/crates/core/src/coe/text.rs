use base64::engine::general_purpose::URL_SAFE_NO_PAD;
use base64::Engine;
use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{AuthorityId, CoERef, CoeError, LinkedStamp, PathNode, RegistryStamp, SignatureScheme, MAX_AUDIT_PATH};
use crate::canonical::{canonical_decode, canonical_encode};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Receipt {
    #[serde(with = "serde_bytes")]
    head: Vec<u8>,
    index: u64,
    path: Vec<PathNode>,
    #[serde(with = "serde_bytes")]
    prev: Vec<u8>,
}

pub(super) fn render(coe: &CoERef) -> String {
    match coe {
        CoERef::Registry(r) => {
            let mut s = format!("{}:{}:{}", r.authority, r.date.format("%Y-%m-%d"), r.external_id);
            if let Some((scheme, sig)) = &r.signature {
                s.push(';');
                s.push_str(scheme.id());
                s.push('=');
                s.push_str(&URL_SAFE_NO_PAD.encode(sig));
            }
            s
        }
        CoERef::Linked(l) => {
            let receipt = Receipt {
                head: l.round_head.to_vec(),
                index: l.leaf_index,
                path: l.audit_path.clone(),
                prev: l.prev_head.to_vec(),
            };
            let bytes = canonical_encode(&receipt).expect("receipt is always encodable");
            format!("link:{}:{}:{}", l.authority, l.round, URL_SAFE_NO_PAD.encode(bytes.as_bytes()))
        }
    }
}

pub(super) fn parse(s: &str) -> Result<CoERef, CoeError> {
    let malformed = |reason: &str| CoeError::Malformed { text: s.to_owned(), reason: reason.to_owned() };
    if let Some(rest) = s.strip_prefix("link:") {
        let mut parts = rest.splitn(3, ':');
        let (Some(auth), Some(round), Some(receipt)) = (parts.next(), parts.next(), parts.next()) else {
            return Err(malformed("expected link:<authority>:<round>:<receipt>"));
        };
        let authority = AuthorityId::new(auth).map_err(|_| malformed("invalid authority"))?;
        if round.is_empty() || (round.starts_with('0') && round != "0") {
            return Err(malformed("non-canonical round number"));
        }
        let round: u64 = round.parse().map_err(|_| malformed("invalid round number"))?;
        let raw = URL_SAFE_NO_PAD.decode(receipt).map_err(|_| malformed("receipt is not base64url"))?;
        let r: Receipt = canonical_decode(&raw).map_err(|e| malformed(&format!("receipt: {e}")))?;
        if r.path.len() > MAX_AUDIT_PATH {
            return Err(malformed("audit path too long"));
        }
        let round_head: [u8; 32] = r.head.try_into().map_err(|_| malformed("round head must be 32 bytes"))?;
        let prev_head: [u8; 32] = r.prev.try_into().map_err(|_| malformed("previous head must be 32 bytes"))?;
        return Ok(CoERef::Linked(LinkedStamp {
            authority,
            round,
            leaf_index: r.index,
            audit_path: r.path,
            round_head,
            prev_head,
        }));
    }

    let (body, sig) = match s.split_once(';') {
        Some((body, sig)) => (body, Some(sig)),
        None => (s, None),
    };
    let (auth, rest) = body.split_once(':').ok_or_else(|| malformed("expected authority:YYYY-MM-DD:id"))?;
    let authority = AuthorityId::new(auth).map_err(|_| malformed("invalid authority"))?;
    let (date, external_id) = rest.split_once(':').ok_or_else(|| malformed("expected authority:YYYY-MM-DD:id"))?;
    if date.len() != 10 {
        return Err(malformed("date must be YYYY-MM-DD"));
    }
    let date = NaiveDate::parse_from_str(date, "%Y-%m-%d").map_err(|_| malformed("date must be YYYY-MM-DD"))?;
    if external_id.is_empty() || external_id.chars().any(|c| c.is_whitespace() || c.is_control()) {
        return Err(malformed("invalid external id"));
    }
    let signature = match sig {
        None => None,
        Some(sig) => {
            let (scheme, b64) = sig.split_once('=').ok_or_else(|| malformed("signature must be scheme=base64url"))?;
            let scheme = SignatureScheme::from_id(scheme).ok_or_else(|| malformed("unknown signature scheme"))?;
            let bytes = URL_SAFE_NO_PAD.decode(b64).map_err(|_| malformed("signature is not base64url"))?;
            Some((scheme, bytes))
        }
    };
    Ok(CoERef::Registry(RegistryStamp { authority, date, external_id: external_id.to_owned(), signature }))
}
