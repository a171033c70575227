use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use rand::rngs::OsRng;
use serde::de::DeserializeOwned;
use serde::Serialize;

use scholnet::canonical::{canonical_decode, canonical_encode, Fingerprint};
use scholnet::coe::{AuthorityId, AuthorityState, CoERef, TimestampAuthority, TrustAnchors};
use scholnet::escrow::{EscrowService, DEFAULT_KDF_ROUNDS};
use scholnet::model::DocumentHandle;
use scholnet::store::{DirBackend, NodeId, StoreConfig, StoreNode};

use crate::config::{trim_newline, Loaded};

/// Environment variable holding the passphrase that unlocks escrow state.
pub const PASSPHRASE_ENV: &str = "SCHOLNET_ESCROW_PASSPHRASE";

/// The on-disk state behind the CLI. Created on first use.
pub struct DataDir {
    root: PathBuf,
    node_file: PathBuf,
    anchors_file: PathBuf,
}

impl DataDir {
    pub fn open(cfg: &Loaded) -> Result<Self> {
        let root = cfg.data_dir();
        fs::create_dir_all(&root).with_context(|| format!("creating {}", root.display()))?;
        Ok(DataDir { root, node_file: cfg.node_file(), anchors_file: cfg.anchors_file() })
    }

    pub fn path(&self, rel: impl AsRef<Path>) -> PathBuf {
        self.root.join(rel)
    }

    pub fn read<T: DeserializeOwned>(&self, path: &Path) -> Result<Option<T>> {
        match fs::read(path) {
            Ok(bytes) => canonical_decode(trim_newline(&bytes)).map(Some).map_err(|e| anyhow!("{}: {e}", path.display())),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e).with_context(|| format!("reading {}", path.display())),
        }
    }

    pub fn write<T: Serialize + ?Sized>(&self, path: &Path, value: &T) -> Result<()> {
        let mut bytes = canonical_encode(value).map_err(|e| anyhow!("{e}"))?.into_vec();
        bytes.push(b'\n');
        write_atomic(path, &bytes)
    }

    fn authority_file(&self, id: &AuthorityId) -> PathBuf {
        self.path(format!("authorities/{}.canon", id.as_str()))
    }

    /// Loads a local timestamp authority, generating its key on first use.
    pub fn authority(&self, id: &str) -> Result<TimestampAuthority> {
        let id = AuthorityId::new(id).map_err(|e| anyhow!("{e}"))?;
        let path = self.authority_file(&id);
        match self.read::<AuthorityState>(&path)? {
            Some(state) => TimestampAuthority::from_state(state).map_err(|e| anyhow!("{e}")),
            None => {
                let a = TimestampAuthority::generate(id, &mut OsRng);
                self.save_authority(&a)?;
                Ok(a)
            }
        }
    }

    /// Persists the authority and re-anchors trust in its key and heads.
    pub fn save_authority(&self, a: &TimestampAuthority) -> Result<()> {
        self.write(&self.authority_file(a.id()), &a.to_state())?;
        let mut anchors = self.anchors()?;
        anchors.trust_authority(a);
        self.write(&self.anchors_file, &anchors)?;
        let heads = self.path(format!("authorities/{}.heads", a.id().as_str()));
        write_atomic(&heads, a.heads_file().as_bytes())
    }

    pub fn anchors(&self) -> Result<TrustAnchors> {
        Ok(self.read(&self.anchors_file)?.unwrap_or_default())
    }

    fn certs_file(&self) -> PathBuf {
        self.path("certs.canon")
    }

    /// Certificates collected for each fingerprint, keyed by path form.
    pub fn certs(&self) -> Result<BTreeMap<String, Vec<CoERef>>> {
        Ok(self.read(&self.certs_file())?.unwrap_or_default())
    }

    pub fn certs_of(&self, fp: &Fingerprint) -> Result<Vec<CoERef>> {
        Ok(self.certs()?.remove(&fp.to_path_form()).unwrap_or_default())
    }

    pub fn add_cert(&self, fp: &Fingerprint, coe: CoERef) -> Result<()> {
        let mut all = self.certs()?;
        let list = all.entry(fp.to_path_form()).or_default();
        if !list.contains(&coe) {
            list.push(coe);
        }
        self.write(&self.certs_file(), &all)
    }

    pub fn node_config(&self) -> Result<StoreConfig> {
        match self.read(&self.node_file)? {
            Some(c) => Ok(c),
            None => {
                let label = fs::canonicalize(&self.root).unwrap_or_else(|_| self.root.clone());
                let c = StoreConfig::institutional(NodeId::from_label(&label.to_string_lossy()));
                self.write(&self.node_file, &c)?;
                Ok(c)
            }
        }
    }

    pub fn store(&self, config: StoreConfig) -> Result<StoreNode> {
        let backend = DirBackend::open(self.path("store")).context("opening store")?;
        StoreNode::open(config, Box::new(backend)).map_err(|e| anyhow!("{e}"))
    }

    pub fn local_store(&self) -> Result<StoreNode> {
        self.store(self.node_config()?)
    }

    /// The best known handle for a fingerprint: the store's copy, else the
    /// local certificates on a bare handle.
    pub fn handle_for(&self, store: &StoreNode, fp: Fingerprint) -> Result<DocumentHandle> {
        if let Some(h) = store.get_metadata(&fp) {
            return Ok(h);
        }
        let mut h = DocumentHandle::bare(fp);
        h.coes = self.certs_of(&fp)?;
        Ok(h)
    }

    fn escrow_file(&self, label: &str) -> Result<PathBuf> {
        check_name(label)?;
        Ok(self.path(format!("escrow/{label}.sealed")))
    }

    pub fn escrow_exists(&self, label: &str) -> Result<bool> {
        Ok(self.escrow_file(label)?.exists())
    }

    pub fn load_escrow(&self, label: &str) -> Result<EscrowService> {
        let path = self.escrow_file(label)?;
        let data = fs::read(&path).with_context(|| format!("no escrow {label:?}"))?;
        EscrowService::load_sealed(&data, &passphrase()?).map_err(|e| anyhow!("escrow {label:?}: {e}"))
    }

    /// Seals the full state and refreshes the public status file next to it.
    pub fn save_escrow(&self, e: &EscrowService) -> Result<()> {
        let path = self.escrow_file(e.label())?;
        let sealed = e.save_sealed(&passphrase()?, DEFAULT_KDF_ROUNDS, &mut OsRng);
        write_atomic(&path, &sealed)?;
        write_atomic(&path.with_extension("public"), &e.public_status())
    }

    pub fn escrow_public(&self) -> Result<Vec<Vec<u8>>> {
        let dir = self.path("escrow");
        let mut out = Vec::new();
        let Ok(entries) = fs::read_dir(&dir) else { return Ok(out) };
        let mut paths: Vec<PathBuf> = entries.filter_map(|e| e.ok().map(|e| e.path())).collect();
        paths.sort();
        for p in paths.into_iter().filter(|p| p.extension().is_some_and(|x| x == "public")) {
            out.push(fs::read(&p).with_context(|| format!("reading {}", p.display()))?);
        }
        Ok(out)
    }

    pub fn round_file(&self, name: &str) -> Result<PathBuf> {
        check_name(name)?;
        Ok(self.path(format!("rounds/{name}.canon")))
    }

    pub fn query_file(&self, id: &str) -> Result<PathBuf> {
        check_name(id)?;
        Ok(self.path(format!("queries/{id}.canon")))
    }
}

fn check_name(name: &str) -> Result<()> {
    if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.') || name.starts_with('.') {
        bail!("bad name {name:?}: use letters, digits, '-', '_' and '.'");
    }
    Ok(())
}

fn passphrase() -> Result<String> {
    std::env::var(PASSPHRASE_ENV).map_err(|_| anyhow!("{PASSPHRASE_ENV} is not set"))
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("writing {}", path.display()))
}
