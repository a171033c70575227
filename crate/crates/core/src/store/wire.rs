use std::io::{self, Read, Write};

use serde::{Deserialize, Serialize};

use super::{NodeId, Provenance};
use crate::canonical::{canonical_decode, canonical_encode, Fingerprint};
use crate::model::{DocumentHandle, Identity, PublishedObject};

/// Frames larger than this are refused before allocation.
pub const MAX_FRAME: u32 = 64 * 1024 * 1024;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Request {
    GetObject { fingerprint: Fingerprint },
    GetMetadata { fingerprint: Fingerprint },
    PutObject {
        object: PublishedObject,
        submitter: Identity,
        /// Display fields to record; defaults to a bare handle.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        handle: Option<DocumentHandle>,
    },
    /// Institutional peering links of the receiving node.
    GetPeers,
    FindNode { target: NodeId },
    /// DHT lookup step: the object, provider records, or closer nodes.
    FindValue { fingerprint: Fingerprint },
    /// Provider record: `provider` holds `fingerprint`.
    Announce { fingerprint: Fingerprint, provider: NodeId },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Response {
    Object { object: PublishedObject, provenance: Provenance },
    Metadata { handle: DocumentHandle },
    Absent,
    Stored { handle: DocumentHandle },
    Refused { reason: String },
    Nodes { nodes: Vec<NodeId> },
    Providers { providers: Vec<NodeId>, nodes: Vec<NodeId> },
    Ack,
}

/// `u32` big-endian length, then the canonical encoding.
pub fn encode_frame<T: Serialize>(msg: &T) -> Vec<u8> {
    let body = canonical_encode(msg).expect("wire messages are encodable").into_vec();
    let mut out = Vec::with_capacity(4 + body.len());
    out.extend_from_slice(&(body.len() as u32).to_be_bytes());
    out.extend_from_slice(&body);
    out
}

pub fn write_frame<W: Write, T: Serialize>(w: &mut W, msg: &T) -> io::Result<()> {
    w.write_all(&encode_frame(msg))?;
    w.flush()
}

/// Reads one frame. `Ok(None)` on a clean end of stream.
pub fn read_frame<R: Read, T: serde::de::DeserializeOwned>(r: &mut R) -> io::Result<Option<T>> {
    let mut len = [0u8; 4];
    match r.read_exact(&mut len) {
        Ok(()) => {}
        Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(e),
    }
    let len = u32::from_be_bytes(len);
    if len > MAX_FRAME {
        return Err(io::Error::new(io::ErrorKind::InvalidData, "frame too large"));
    }
    let mut body = vec![0u8; len as usize];
    r.read_exact(&mut body)?;
    canonical_decode(&body).map(Some).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
}
