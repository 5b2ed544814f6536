//! Atomic artifact writes, the run manifest and the operator cache.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crackprobe::dnmap::{read_archive, write_archive, DiscreteBoundaryMap, MapKind, ARCHIVE_VERSION};
use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::config::hex;
use crate::CliError;

/// Writes `bytes` to a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("artifact");
    let tmp = dir.join(format!(".{name}.tmp-{}", std::process::id()));
    let mut f = fs::File::create(&tmp)?;
    f.write_all(bytes)?;
    f.sync_all()?;
    drop(f);
    fs::rename(&tmp, path)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

#[derive(Debug, Clone, Serialize)]
pub struct ManifestEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

/// Outputs of one command, listed in `<command>.manifest.json` on `finish`.
pub struct Artifacts {
    dir: PathBuf,
    config_hash: String,
    entries: Vec<ManifestEntry>,
}

impl Artifacts {
    pub fn new(dir: PathBuf, config_hash: String) -> Self {
        Self { dir, config_hash, entries: Vec::new() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn config_hash(&self) -> &str {
        &self.config_hash
    }

    pub fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<(), CliError> {
        write_atomic(&self.dir.join(rel), bytes)?;
        self.entries.retain(|e| e.path != rel);
        self.entries.push(ManifestEntry { path: rel.to_string(), sha256: sha256_hex(bytes), bytes: bytes.len() });
        Ok(())
    }

    /// JSON report with `config_hash` as its first field.
    pub fn write_json(&mut self, rel: &str, body: serde_json::Value) -> Result<(), CliError> {
        let mut obj = serde_json::Map::new();
        obj.insert("config_hash".into(), json!(self.config_hash));
        match body {
            serde_json::Value::Object(m) => obj.extend(m),
            other => {
                obj.insert("data".into(), other);
            }
        }
        let mut text = serde_json::to_vec_pretty(&serde_json::Value::Object(obj)).expect("json");
        text.push(b'\n');
        self.write(rel, &text)
    }

    /// CSV preceded by a `# config_hash = …` comment line.
    pub fn write_csv(&mut self, rel: &str, body: &[u8]) -> Result<(), CliError> {
        let mut text = format!("# config_hash = {}\n", self.config_hash).into_bytes();
        text.extend_from_slice(body);
        self.write(rel, &text)
    }

    pub fn entries(&self) -> &[ManifestEntry] {
        &self.entries
    }

    /// Writes the manifest. Contains no timings, so equal configs give equal
    /// manifests.
    pub fn finish(mut self, command: &str) -> Result<PathBuf, CliError> {
        self.entries.sort_by(|a, b| a.path.cmp(&b.path));
        let manifest = json!({
            "command": command,
            "config_hash": self.config_hash,
            "version": env!("CARGO_PKG_VERSION"),
            "outputs": self.entries,
        });
        let mut text = serde_json::to_vec_pretty(&manifest).expect("json");
        text.push(b'\n');
        let path = self.dir.join(format!("{command}.manifest.json"));
        write_atomic(&path, &text)?;
        Ok(path)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CacheStatus {
    Hit,
    Miss,
    Disabled,
}

/// Directory of operator archives keyed by map hash and kind.
#[derive(Debug, Clone)]
pub struct Cache {
    dir: Option<PathBuf>,
}

impl Cache {
    pub fn new(dir: Option<PathBuf>) -> Self {
        Self { dir }
    }

    /// `CRACKPROBE_CACHE` if set, else `<out>/.cache`.
    pub fn default_dir(out: &Path) -> PathBuf {
        std::env::var_os("CRACKPROBE_CACHE").map(PathBuf::from).unwrap_or_else(|| out.join(".cache"))
    }

    pub fn file(&self, key: &str, kind: MapKind) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(format!("{}-{key}.cpmap", kind.as_str())))
    }

    /// Loads the map stored under `key`, or builds and stores it. Unreadable
    /// entries are rebuilt with a warning.
    pub fn load_or_build<F>(
        &self,
        key: &str,
        kind: MapKind,
        build: F,
    ) -> Result<(DiscreteBoundaryMap, CacheStatus), CliError>
    where
        F: FnOnce() -> crackprobe::Result<DiscreteBoundaryMap>,
    {
        let Some(path) = self.file(key, kind) else {
            return Ok((build().map_err(|e| CliError::numerical("dnmap", e))?, CacheStatus::Disabled));
        };
        if path.exists() {
            match fs::File::open(&path).map_err(crackprobe::Error::from).and_then(|f| read_archive(std::io::BufReader::new(f))) {
                Ok(m) if m.kind == kind && m.provenance == key => return Ok((m, CacheStatus::Hit)),
                Ok(_) => eprintln!("warning: cache entry {} does not match its key, rebuilding", path.display()),
                Err(e) => eprintln!("warning: cache entry {} unreadable ({e}), rebuilding", path.display()),
            }
        }
        let map = build().map_err(|e| CliError::numerical("dnmap", e))?;
        let mut bytes = Vec::new();
        write_archive(&map, &mut bytes).map_err(|e| CliError::numerical("dnmap", e))?;
        write_atomic(&path, &bytes)?;
        Ok((map, CacheStatus::Miss))
    }
}

/// Cache key of a map: hash of everything that determines it.
pub fn map_key(parts: &serde_json::Value) -> String {
    let v = json!({ "archive": ARCHIVE_VERSION, "build": env!("CARGO_PKG_VERSION"), "map": parts });
    sha256_hex(&serde_json::to_vec(&v).expect("json"))
}
