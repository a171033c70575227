use chacha20poly1305::aead::{Aead, KeyInit};
use chacha20poly1305::{ChaCha20Poly1305, Key, Nonce};
use rand::RngCore;
use sha2::Sha256;

const MAGIC: &[u8; 6] = b"SNESC1";
const SALT_LEN: usize = 16;
const NONCE_LEN: usize = 12;
const HEADER_LEN: usize = MAGIC.len() + 4 + SALT_LEN + NONCE_LEN;

/// PBKDF2 rounds used when the caller has no reason to choose otherwise.
pub const DEFAULT_KDF_ROUNDS: u32 = 100_000;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SealError {
    #[error("not a sealed escrow file")]
    BadHeader,
    #[error("wrong passphrase or damaged file")]
    Decrypt,
    #[error("sealed state is corrupt")]
    Corrupt,
}

fn derive_key(passphrase: &str, salt: &[u8], rounds: u32) -> Key {
    let mut key = [0u8; 32];
    pbkdf2::pbkdf2_hmac::<Sha256>(passphrase.as_bytes(), salt, rounds, &mut key);
    key.into()
}

/// Layout: magic, rounds (u32 BE), salt, nonce, ciphertext with tag.
pub fn seal<R: RngCore>(plain: &[u8], passphrase: &str, rounds: u32, rng: &mut R) -> Vec<u8> {
    let mut salt = [0u8; SALT_LEN];
    let mut nonce = [0u8; NONCE_LEN];
    rng.fill_bytes(&mut salt);
    rng.fill_bytes(&mut nonce);
    let cipher = ChaCha20Poly1305::new(&derive_key(passphrase, &salt, rounds));
    let ct = cipher.encrypt(Nonce::from_slice(&nonce), plain).expect("in-memory encryption");
    let mut out = Vec::with_capacity(HEADER_LEN + ct.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&rounds.to_be_bytes());
    out.extend_from_slice(&salt);
    out.extend_from_slice(&nonce);
    out.extend_from_slice(&ct);
    out
}

pub fn open_sealed(data: &[u8], passphrase: &str) -> Result<Vec<u8>, SealError> {
    if data.len() < HEADER_LEN || &data[..MAGIC.len()] != MAGIC {
        return Err(SealError::BadHeader);
    }
    let mut at = MAGIC.len();
    let rounds = u32::from_be_bytes(data[at..at + 4].try_into().expect("4 bytes"));
    at += 4;
    let salt = &data[at..at + SALT_LEN];
    at += SALT_LEN;
    let nonce = &data[at..at + NONCE_LEN];
    at += NONCE_LEN;
    if rounds == 0 {
        return Err(SealError::BadHeader);
    }
    let cipher = ChaCha20Poly1305::new(&derive_key(passphrase, salt, rounds));
    cipher.decrypt(Nonce::from_slice(nonce), &data[at..]).map_err(|_| SealError::Decrypt)
}
