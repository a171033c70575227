use std::collections::BTreeMap;
use std::fs;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};

use crate::canonical::{parse_fingerprint, Fingerprint};

/// Raw persistence under a store node: content files plus an append-only
/// metadata index.
pub trait Backend: Send + Sync {
    fn put(&mut self, fp: &Fingerprint, bytes: &[u8]) -> io::Result<()>;
    fn get(&self, fp: &Fingerprint) -> io::Result<Option<Vec<u8>>>;
    fn remove(&mut self, fp: &Fingerprint) -> io::Result<bool>;
    fn contains(&self, fp: &Fingerprint) -> bool;
    fn list(&self) -> io::Result<Vec<Fingerprint>>;
    fn append_record(&mut self, record: &[u8]) -> io::Result<()>;
    fn records(&self) -> io::Result<Vec<Vec<u8>>>;
}

#[derive(Debug, Default, Clone)]
pub struct MemoryBackend {
    objects: BTreeMap<Fingerprint, Vec<u8>>,
    index: Vec<Vec<u8>>,
}

impl MemoryBackend {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Backend for MemoryBackend {
    fn put(&mut self, fp: &Fingerprint, bytes: &[u8]) -> io::Result<()> {
        self.objects.entry(*fp).or_insert_with(|| bytes.to_vec());
        Ok(())
    }

    fn get(&self, fp: &Fingerprint) -> io::Result<Option<Vec<u8>>> {
        Ok(self.objects.get(fp).cloned())
    }

    fn remove(&mut self, fp: &Fingerprint) -> io::Result<bool> {
        Ok(self.objects.remove(fp).is_some())
    }

    fn contains(&self, fp: &Fingerprint) -> bool {
        self.objects.contains_key(fp)
    }

    fn list(&self) -> io::Result<Vec<Fingerprint>> {
        Ok(self.objects.keys().copied().collect())
    }

    fn append_record(&mut self, record: &[u8]) -> io::Result<()> {
        self.index.push(record.to_vec());
        Ok(())
    }

    fn records(&self) -> io::Result<Vec<Vec<u8>>> {
        Ok(self.index.clone())
    }
}

/// Directory layout: `objects/<algorithm>/<2 hex>/<62 hex>` and `index.log`,
/// one canonical record per line.
#[derive(Debug, Clone)]
pub struct DirBackend {
    root: PathBuf,
}

impl DirBackend {
    pub fn open(root: impl Into<PathBuf>) -> io::Result<Self> {
        let root = root.into();
        fs::create_dir_all(root.join("objects"))?;
        Ok(DirBackend { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn path(&self, fp: &Fingerprint) -> PathBuf {
        self.root.join("objects").join(fp.storage_path())
    }

    fn index_path(&self) -> PathBuf {
        self.root.join("index.log")
    }
}

impl Backend for DirBackend {
    fn put(&mut self, fp: &Fingerprint, bytes: &[u8]) -> io::Result<()> {
        let path = self.path(fp);
        if path.exists() {
            return Ok(());
        }
        let dir = path.parent().expect("sharded path has a parent");
        fs::create_dir_all(dir)?;
        let tmp = dir.join(format!(".{}.tmp", std::process::id()));
        fs::write(&tmp, bytes)?;
        fs::rename(&tmp, &path)
    }

    fn get(&self, fp: &Fingerprint) -> io::Result<Option<Vec<u8>>> {
        match fs::read(self.path(fp)) {
            Ok(b) => Ok(Some(b)),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e),
        }
    }

    fn remove(&mut self, fp: &Fingerprint) -> io::Result<bool> {
        match fs::remove_file(self.path(fp)) {
            Ok(()) => Ok(true),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(false),
            Err(e) => Err(e),
        }
    }

    fn contains(&self, fp: &Fingerprint) -> bool {
        self.path(fp).is_file()
    }

    fn list(&self) -> io::Result<Vec<Fingerprint>> {
        let mut out = Vec::new();
        let base = self.root.join("objects");
        for alg in fs::read_dir(&base)? {
            let alg = alg?;
            let alg_name = alg.file_name().to_string_lossy().into_owned();
            for shard in fs::read_dir(alg.path())? {
                let shard = shard?;
                let prefix = shard.file_name().to_string_lossy().into_owned();
                for file in fs::read_dir(shard.path())? {
                    let name = file?.file_name().to_string_lossy().into_owned();
                    if let Ok(fp) = parse_fingerprint(&format!("{alg_name}/{prefix}{name}")) {
                        out.push(fp);
                    }
                }
            }
        }
        out.sort();
        Ok(out)
    }

    fn append_record(&mut self, record: &[u8]) -> io::Result<()> {
        let mut f = fs::OpenOptions::new().create(true).append(true).open(self.index_path())?;
        f.write_all(record)?;
        f.write_all(b"\n")?;
        f.sync_data()
    }

    fn records(&self) -> io::Result<Vec<Vec<u8>>> {
        let f = match fs::File::open(self.index_path()) {
            Ok(f) => f,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(e),
        };
        // A torn final line (crash mid-append) is dropped by the caller's decoder.
        io::BufReader::new(f).split(b'\n').collect()
    }
}
