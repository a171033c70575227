//! Deterministic byte encoding and content fingerprints.
//!
//! Every semantic object in the fabric (reviews, handles, citations, round
//! descriptions, log payloads) is hashed through the encoding defined here,
//! so that two logically identical objects always produce the same bytes.
//!
//! The grammar is a strict, JSON-like text format:
//!
//! ```text
//! value := map | list | text | int | bool | bytes
//! map   := '{' [ text ':' value { ',' text ':' value } ] '}'   keys sorted by code point, unique
//! list  := '[' [ value { ',' value } ] ']'
//! text  := '"' { char | '\"' | '\\' | '\u00XX' } '"'          NFC, only C0 controls escaped
//! int   := '0' | [ '-' ] [1-9] { [0-9] }                        signed 64-bit
//! bool  := 'true' | 'false'
//! bytes := 'x"' { lowercase hex pair } '"'
//! ```
//!
//! Decoding is strict: any input that is not the canonical spelling of its
//! value (whitespace, unsorted keys, leading zeros, uppercase hex, non-NFC
//! text) is rejected, so `encode(decode(b)) == b` for every accepted `b`.

mod de;
mod fingerprint;
mod ser;

use std::collections::BTreeMap;
use std::fmt;

use serde::de::DeserializeOwned;
use serde::Serialize;
use unicode_normalization::{is_nfc, UnicodeNormalization};

pub use self::fingerprint::{fingerprint, parse_fingerprint, Algorithm, Fingerprint, FingerprintError, Hasher};

/// Errors raised while encoding or decoding canonical bytes.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CanonicalError {
    #[error("unencodable value: {0}")]
    UnencodableValue(String),
    #[error("malformed canonical bytes at offset {offset}: {reason}")]
    Malformed { offset: usize, reason: String },
    #[error("type mismatch: {0}")]
    Mismatch(String),
}

impl serde::ser::Error for CanonicalError {
    fn custom<T: fmt::Display>(msg: T) -> Self {
        CanonicalError::UnencodableValue(msg.to_string())
    }
}

impl serde::de::Error for CanonicalError {
    fn custom<T: fmt::Display>(msg: T) -> Self {
        CanonicalError::Mismatch(msg.to_string())
    }
}

/// A semantic value: the tree shape every canonical encoding describes.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Value {
    Map(BTreeMap<String, Value>),
    List(Vec<Value>),
    Text(String),
    Int(i64),
    Bool(bool),
    Bytes(Vec<u8>),
}

impl Value {
    pub fn text(s: impl Into<String>) -> Self {
        Value::Text(s.into())
    }

    pub fn as_map(&self) -> Option<&BTreeMap<String, Value>> {
        match self {
            Value::Map(m) => Some(m),
            _ => None,
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            Value::Text(s) => Some(s),
            _ => None,
        }
    }

    /// Encodes this value into its canonical bytes.
    pub fn encode(&self) -> CanonicalBytes {
        let mut out = Vec::new();
        write_value(self, &mut out);
        CanonicalBytes(out)
    }

    /// Returns a copy with every text and map key NFC-normalized, which is
    /// exactly the value `decode(encode(self))` yields.
    pub fn normalized(&self) -> Value {
        match self {
            Value::Text(s) => Value::Text(s.nfc().collect()),
            Value::List(items) => Value::List(items.iter().map(Value::normalized).collect()),
            Value::Map(m) => {
                let mut out = BTreeMap::new();
                for (k, v) in m {
                    out.insert(k.nfc().collect::<String>(), v.normalized());
                }
                Value::Map(out)
            }
            other => other.clone(),
        }
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::Text(s.to_owned())
    }
}

impl From<i64> for Value {
    fn from(i: i64) -> Self {
        Value::Int(i)
    }
}

impl From<bool> for Value {
    fn from(b: bool) -> Self {
        Value::Bool(b)
    }
}

/// Canonical encoding of some value.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct CanonicalBytes(Vec<u8>);

impl CanonicalBytes {
    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<u8> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn fingerprint(&self) -> Fingerprint {
        Fingerprint::sha256(&self.0)
    }
}

impl AsRef<[u8]> for CanonicalBytes {
    fn as_ref(&self) -> &[u8] {
        &self.0
    }
}

impl fmt::Debug for CanonicalBytes {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match std::str::from_utf8(&self.0) {
            Ok(s) => write!(f, "CanonicalBytes({s})"),
            Err(_) => write!(f, "CanonicalBytes({:?})", self.0),
        }
    }
}

/// Encodes any serializable value canonically.
pub fn canonical_encode<T: Serialize + ?Sized>(value: &T) -> Result<CanonicalBytes, CanonicalError> {
    Ok(to_value(value)?.encode())
}

/// Converts a serializable value to the canonical value tree.
pub fn to_value<T: Serialize + ?Sized>(value: &T) -> Result<Value, CanonicalError> {
    value.serialize(ser::ValueSerializer)
}

/// Rebuilds a typed value from its value tree.
pub fn from_value<T: DeserializeOwned>(value: Value) -> Result<T, CanonicalError> {
    T::deserialize(value)
}

/// Decodes canonical bytes into a typed value.
pub fn canonical_decode<T: DeserializeOwned>(bytes: &[u8]) -> Result<T, CanonicalError> {
    from_value(decode(bytes)?)
}

fn write_value(v: &Value, out: &mut Vec<u8>) {
    match v {
        Value::Map(m) => {
            // Keys may need normalizing, which can reorder them.
            let sorted: BTreeMap<String, &Value> = m.iter().map(|(k, v)| (k.nfc().collect(), v)).collect();
            out.push(b'{');
            for (i, (k, v)) in sorted.iter().enumerate() {
                if i > 0 {
                    out.push(b',');
                }
                write_text(k, out);
                out.push(b':');
                write_value(v, out);
            }
            out.push(b'}');
        }
        Value::List(items) => {
            out.push(b'[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(b',');
                }
                write_value(item, out);
            }
            out.push(b']');
        }
        Value::Text(s) => write_text(s, out),
        Value::Int(i) => out.extend_from_slice(i.to_string().as_bytes()),
        Value::Bool(true) => out.extend_from_slice(b"true"),
        Value::Bool(false) => out.extend_from_slice(b"false"),
        Value::Bytes(b) => {
            out.extend_from_slice(b"x\"");
            out.extend_from_slice(hex::encode(b).as_bytes());
            out.push(b'"');
        }
    }
}

fn write_text(s: &str, out: &mut Vec<u8>) {
    out.push(b'"');
    let normalized: String = if is_nfc(s) { s.to_owned() } else { s.nfc().collect() };
    for ch in normalized.chars() {
        match ch {
            '"' => out.extend_from_slice(b"\\\""),
            '\\' => out.extend_from_slice(b"\\\\"),
            c if (c as u32) < 0x20 => out.extend_from_slice(format!("\\u{:04x}", c as u32).as_bytes()),
            c => {
                let mut buf = [0u8; 4];
                out.extend_from_slice(c.encode_utf8(&mut buf).as_bytes());
            }
        }
    }
    out.push(b'"');
}

/// Decodes canonical bytes into a value tree, rejecting non-canonical input.
pub fn decode(bytes: &[u8]) -> Result<Value, CanonicalError> {
    let mut p = Parser { input: bytes, pos: 0, depth: 0 };
    let v = p.value()?;
    if p.pos != bytes.len() {
        return Err(p.err("trailing bytes"));
    }
    Ok(v)
}

const MAX_DEPTH: usize = 128;

struct Parser<'a> {
    input: &'a [u8],
    pos: usize,
    depth: usize,
}

impl<'a> Parser<'a> {
    fn err(&self, reason: &str) -> CanonicalError {
        CanonicalError::Malformed { offset: self.pos, reason: reason.to_owned() }
    }

    fn peek(&self) -> Option<u8> {
        self.input.get(self.pos).copied()
    }

    fn expect(&mut self, b: u8) -> Result<(), CanonicalError> {
        if self.peek() == Some(b) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(&format!("expected '{}'", b as char)))
        }
    }

    fn literal(&mut self, lit: &[u8]) -> bool {
        if self.input[self.pos..].starts_with(lit) {
            self.pos += lit.len();
            true
        } else {
            false
        }
    }

    fn value(&mut self) -> Result<Value, CanonicalError> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return Err(self.err("nesting too deep"));
        }
        let v = match self.peek() {
            Some(b'{') => self.map(),
            Some(b'[') => self.list(),
            Some(b'"') => self.text().map(Value::Text),
            Some(b'x') => self.bytes(),
            Some(b't') if self.literal(b"true") => Ok(Value::Bool(true)),
            Some(b'f') if self.literal(b"false") => Ok(Value::Bool(false)),
            Some(b'-' | b'0'..=b'9') => self.int(),
            Some(_) => Err(self.err("unexpected byte")),
            None => Err(self.err("unexpected end of input")),
        };
        self.depth -= 1;
        v
    }

    fn map(&mut self) -> Result<Value, CanonicalError> {
        self.expect(b'{')?;
        let mut m = BTreeMap::new();
        let mut last: Option<String> = None;
        if self.peek() == Some(b'}') {
            self.pos += 1;
            return Ok(Value::Map(m));
        }
        loop {
            let key_at = self.pos;
            let key = self.text()?;
            if let Some(prev) = &last {
                if *prev >= key {
                    self.pos = key_at;
                    return Err(self.err("map keys not strictly ascending"));
                }
            }
            self.expect(b':')?;
            let v = self.value()?;
            last = Some(key.clone());
            m.insert(key, v);
            match self.peek() {
                Some(b',') => self.pos += 1,
                Some(b'}') => {
                    self.pos += 1;
                    return Ok(Value::Map(m));
                }
                _ => return Err(self.err("expected ',' or '}'")),
            }
        }
    }

    fn list(&mut self) -> Result<Value, CanonicalError> {
        self.expect(b'[')?;
        let mut items = Vec::new();
        if self.peek() == Some(b']') {
            self.pos += 1;
            return Ok(Value::List(items));
        }
        loop {
            items.push(self.value()?);
            match self.peek() {
                Some(b',') => self.pos += 1,
                Some(b']') => {
                    self.pos += 1;
                    return Ok(Value::List(items));
                }
                _ => return Err(self.err("expected ',' or ']'")),
            }
        }
    }

    fn text(&mut self) -> Result<String, CanonicalError> {
        self.expect(b'"')?;
        let mut raw = Vec::new();
        loop {
            match self.peek() {
                None => return Err(self.err("unterminated text")),
                Some(b'"') => {
                    self.pos += 1;
                    break;
                }
                Some(b'\\') => {
                    self.pos += 1;
                    match self.peek() {
                        Some(b'"') => raw.push(b'"'),
                        Some(b'\\') => raw.push(b'\\'),
                        Some(b'u') => {
                            let hex = self.input.get(self.pos + 1..self.pos + 5).ok_or_else(|| self.err("short escape"))?;
                            let code = std::str::from_utf8(hex)
                                .ok()
                                .filter(|h| h.bytes().all(|c| matches!(c, b'0'..=b'9' | b'a'..=b'f')))
                                .and_then(|h| u32::from_str_radix(h, 16).ok())
                                .ok_or_else(|| self.err("bad escape"))?;
                            if code >= 0x20 {
                                return Err(self.err("escape of a printable character"));
                            }
                            raw.push(code as u8);
                            self.pos += 4;
                        }
                        _ => return Err(self.err("bad escape")),
                    }
                    self.pos += 1;
                }
                Some(c) if c < 0x20 => return Err(self.err("unescaped control character")),
                Some(c) => {
                    raw.push(c);
                    self.pos += 1;
                }
            }
        }
        let s = String::from_utf8(raw).map_err(|_| self.err("invalid utf-8"))?;
        if !is_nfc(&s) {
            return Err(self.err("text not in NFC"));
        }
        Ok(s)
    }

    fn bytes(&mut self) -> Result<Value, CanonicalError> {
        self.expect(b'x')?;
        self.expect(b'"')?;
        let start = self.pos;
        while let Some(c) = self.peek() {
            match c {
                b'0'..=b'9' | b'a'..=b'f' => self.pos += 1,
                b'"' => break,
                _ => return Err(self.err("non-lowercase-hex byte in blob")),
            }
        }
        let hex_part = &self.input[start..self.pos];
        self.expect(b'"')?;
        if hex_part.len() % 2 != 0 {
            return Err(self.err("odd-length hex blob"));
        }
        let decoded = hex::decode(hex_part).map_err(|_| self.err("bad hex"))?;
        Ok(Value::Bytes(decoded))
    }

    fn int(&mut self) -> Result<Value, CanonicalError> {
        let start = self.pos;
        if self.peek() == Some(b'-') {
            self.pos += 1;
        }
        let digits_start = self.pos;
        while matches!(self.peek(), Some(b'0'..=b'9')) {
            self.pos += 1;
        }
        let digits = &self.input[digits_start..self.pos];
        if digits.is_empty() {
            return Err(self.err("missing digits"));
        }
        if digits[0] == b'0' && (digits.len() > 1 || digits_start != start) {
            return Err(self.err("leading zero or negative zero"));
        }
        let s = std::str::from_utf8(&self.input[start..self.pos]).expect("ascii digits");
        s.parse::<i64>().map(Value::Int).map_err(|_| self.err("integer out of range"))
    }
}
