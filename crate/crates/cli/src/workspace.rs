//! On-disk pipeline state: artifacts plus a manifest recording, per stage,
//! the content hashes of its inputs and outputs.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tempfile::NamedTempFile;

use crate::error::{CliError, CliResult};

pub const MANIFEST: &str = "manifest.json";
pub const LOCK: &str = ".lock";

pub const SEQUENCES: &str = "sequences.csv";
pub const INGEST_REPORT: &str = "ingest_report.json";
pub const DISTANCES: &str = "distances.pmdm";
pub const DISTANCES_TEXT: &str = "distances.csv";
pub const DENDROGRAM: &str = "dendrogram.csv";
pub const ASSIGNMENTS: &str = "assignments.csv";
pub const CLUSTER_STATS: &str = "cluster_stats.json";
pub const SILHOUETTE: &str = "silhouette.json";
pub const GRAPH_SUMMARY: &str = "graph_summary.json";

const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageRecord {
    pub inputs: BTreeMap<String, String>,
    pub params: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub manifest_version: u32,
    pub tool_version: String,
    pub config_hash: Option<String>,
    pub stages: BTreeMap<String, StageRecord>,
}

impl Default for Manifest {
    fn default() -> Self {
        Self {
            manifest_version: MANIFEST_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").to_owned(),
            config_hash: None,
            stages: BTreeMap::new(),
        }
    }
}

/// Inputs and parameters that key a stage's cached outputs.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StageKey {
    pub inputs: BTreeMap<String, String>,
    pub params: BTreeMap<String, String>,
}

impl StageKey {
    pub fn input(mut self, name: &str, hash: String) -> Self {
        self.inputs.insert(name.to_owned(), hash);
        self
    }

    pub fn param(mut self, name: &str, value: impl ToString) -> Self {
        self.params.insert(name.to_owned(), value.to_string());
        self
    }
}

struct LockGuard(PathBuf);

impl Drop for LockGuard {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.0);
    }
}

/// An exclusively locked workspace directory.
pub struct Workspace {
    dir: PathBuf,
    manifest: Manifest,
    _lock: LockGuard,
}

pub fn sha256_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> io::Result<String> {
    let mut file = File::open(path)?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

impl Workspace {
    /// Creates the directory if needed and takes the lock.
    pub fn open(dir: &Path) -> CliResult<Self> {
        fs::create_dir_all(dir)
            .map_err(|e| CliError::data(format!("cannot create workspace {}: {e}", dir.display())))?;
        let lock_path = dir.join(LOCK);
        match OpenOptions::new().write(true).create_new(true).open(&lock_path) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
            }
            Err(e) if e.kind() == io::ErrorKind::AlreadyExists => {
                return Err(CliError::data(format!(
                    "workspace {} is locked by another run (delete {} if it is stale)",
                    dir.display(),
                    lock_path.display()
                )));
            }
            Err(e) => return Err(CliError::data(format!("cannot lock workspace: {e}"))),
        }
        let lock = LockGuard(lock_path);
        let manifest_path = dir.join(MANIFEST);
        let manifest = if manifest_path.exists() {
            let text = fs::read_to_string(&manifest_path)
                .map_err(|e| CliError::data(format!("cannot read manifest: {e}")))?;
            let m: Manifest = serde_json::from_str(&text)
                .map_err(|e| CliError::data(format!("corrupt manifest {}: {e}", manifest_path.display())))?;
            if m.manifest_version != MANIFEST_VERSION {
                Manifest::default()
            } else {
                m
            }
        } else {
            Manifest::default()
        };
        Ok(Self {
            dir: dir.to_owned(),
            manifest,
            _lock: lock,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn hash_artifact(&self, name: &str) -> CliResult<String> {
        let path = self.path(name);
        sha256_file(&path).map_err(|e| match e.kind() {
            io::ErrorKind::NotFound => CliError::config(format!(
                "{} is missing from the workspace; run the stage that produces it first",
                name
            )),
            _ => CliError::data(format!("cannot read {}: {e}", path.display())),
        })
    }

    /// True when the stage last ran with this key and its outputs are
    /// still on disk unchanged.
    pub fn is_fresh(&self, stage: &str, key: &StageKey) -> bool {
        let Some(rec) = self.manifest.stages.get(stage) else {
            return false;
        };
        rec.inputs == key.inputs
            && rec.params == key.params
            && rec
                .outputs
                .iter()
                .all(|(name, hash)| sha256_file(&self.path(name)).is_ok_and(|h| &h == hash))
    }

    /// Writes via a temporary file and rename, so an interrupted run never
    /// leaves a truncated artifact behind. Returns the content hash.
    pub fn write_artifact(&self, name: &str, bytes: &[u8]) -> CliResult<String> {
        atomic_write(&self.path(name), bytes)?;
        Ok(sha256_bytes(bytes))
    }

    /// Streaming variant of [`Workspace::write_artifact`] for artifacts too
    /// large to buffer.
    pub fn write_artifact_with<F>(&self, name: &str, fill: F) -> CliResult<String>
    where
        F: FnOnce(&mut dyn Write) -> pathmine::Result<()>,
    {
        let path = self.path(name);
        let fail = |e: io::Error| CliError::data(format!("cannot write {}: {e}", path.display()));
        let tmp = NamedTempFile::new_in(&self.dir).map_err(fail)?;
        let mut w = HashingWriter {
            inner: io::BufWriter::with_capacity(1 << 20, tmp),
            hasher: Sha256::new(),
        };
        fill(&mut w)?;
        let hash = hex::encode(w.hasher.finalize());
        let tmp = w.inner.into_inner().map_err(|e| fail(e.into_error()))?;
        tmp.as_file().sync_all().map_err(fail)?;
        tmp.persist(&path).map_err(|e| fail(e.error))?;
        Ok(hash)
    }

    pub fn record(&mut self, stage: &str, key: StageKey, outputs: BTreeMap<String, String>) -> CliResult<()> {
        self.manifest.stages.insert(
            stage.to_owned(),
            StageRecord {
                inputs: key.inputs,
                params: key.params,
                outputs,
            },
        );
        self.save_manifest()
    }

    pub fn set_config_hash(&mut self, hash: String) {
        self.manifest.config_hash = Some(hash);
    }

    fn save_manifest(&self) -> CliResult<()> {
        let mut text = serde_json::to_string_pretty(&self.manifest).expect("manifest serializes");
        text.push('\n');
        atomic_write(&self.path(MANIFEST), text.as_bytes())
    }
}

struct HashingWriter<W> {
    inner: W,
    hasher: Sha256,
}

impl<W: Write> Write for HashingWriter<W> {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        let n = self.inner.write(buf)?;
        self.hasher.update(&buf[..n]);
        Ok(n)
    }

    fn flush(&mut self) -> io::Result<()> {
        self.inner.flush()
    }
}

pub fn atomic_write(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let fail = |e: io::Error| CliError::data(format!("cannot write {}: {e}", path.display()));
    let mut tmp = NamedTempFile::new_in(dir).map_err(fail)?;
    tmp.write_all(bytes).map_err(fail)?;
    tmp.as_file().sync_all().map_err(fail)?;
    tmp.persist(path).map_err(|e| fail(e.error))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn second_open_is_refused_until_first_drops() {
        let dir = tempfile::tempdir().unwrap();
        let ws = Workspace::open(dir.path()).unwrap();
        let err = Workspace::open(dir.path()).err().unwrap();
        assert_eq!(err.exit_code(), 1);
        drop(ws);
        assert!(Workspace::open(dir.path()).is_ok());
    }

    #[test]
    fn freshness_tracks_inputs_params_and_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let mut ws = Workspace::open(dir.path()).unwrap();
        let key = StageKey::default().input("x", "abc".into()).param("k", 3);
        assert!(!ws.is_fresh("s", &key));

        let h = ws.write_artifact("out.txt", b"hello").unwrap();
        ws.record("s", key.clone(), [("out.txt".to_owned(), h)].into()).unwrap();
        assert!(ws.is_fresh("s", &key));
        assert!(!ws.is_fresh("s", &key.clone().param("k", 4)));
        assert!(!ws.is_fresh("s", &key.clone().input("x", "abd".into())));

        fs::write(ws.path("out.txt"), b"tampered").unwrap();
        assert!(!ws.is_fresh("s", &key));
    }

    #[test]
    fn streamed_artifact_hash_matches_file() {
        let dir = tempfile::tempdir().unwrap();
        let ws = Workspace::open(dir.path()).unwrap();
        let h = ws
            .write_artifact_with("big.bin", |w| {
                for i in 0..100_000u32 {
                    w.write_all(&i.to_le_bytes())?;
                }
                Ok(())
            })
            .unwrap();
        assert_eq!(h, sha256_file(&ws.path("big.bin")).unwrap());
        assert_eq!(fs::metadata(ws.path("big.bin")).unwrap().len(), 400_000);
    }

    #[test]
    fn manifest_persists_across_opens() {
        let dir = tempfile::tempdir().unwrap();
        {
            let mut ws = Workspace::open(dir.path()).unwrap();
            ws.set_config_hash("cafe".into());
            ws.record("s", StageKey::default(), BTreeMap::new()).unwrap();
        }
        let ws = Workspace::open(dir.path()).unwrap();
        assert_eq!(ws.manifest().config_hash.as_deref(), Some("cafe"));
        assert!(ws.manifest().stages.contains_key("s"));
    }
}
