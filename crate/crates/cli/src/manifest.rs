//! `manifest.json`: what was run, with which settings, and what it produced.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::ScenarioConfig;
use crate::error::CliError;

pub const FILE_NAME: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    /// Relative to the output directory, `/`-separated.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub versions: BTreeMap<String, String>,
    pub mode: String,
    /// The scenario exactly as read, so a run can be repeated from here.
    pub config_toml: String,
    pub config: ScenarioConfig,
    pub applied_defaults: BTreeMap<String, serde_json::Value>,
    pub seeds: BTreeMap<String, u64>,
    pub threads: usize,
    pub wall_clock_seconds: f64,
    pub files: Vec<FileEntry>,
}

pub fn versions() -> BTreeMap<String, String> {
    BTreeMap::from([
        ("qfd".to_string(), env!("CARGO_PKG_VERSION").to_string()),
        ("qfd_core".to_string(), qfd_core::VERSION.to_string()),
    ])
}

pub fn sha256_file(path: &Path) -> std::io::Result<(String, u64)> {
    let mut f = File::open(path)?;
    let mut h = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    let mut total = 0u64;
    loop {
        let n = f.read(&mut buf)?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
        total += n as u64;
    }
    Ok((format!("{:x}", h.finalize()), total))
}

fn collect(dir: &Path, root: &Path, out: &mut Vec<PathBuf>) -> std::io::Result<()> {
    for entry in std::fs::read_dir(dir)? {
        let p = entry?.path();
        if p.is_dir() {
            collect(&p, root, out)?;
        } else if p.strip_prefix(root).map_or(true, |r| r != Path::new(FILE_NAME)) {
            out.push(p);
        }
    }
    Ok(())
}

/// Every file under `dir` except the manifest, sorted by relative path.
pub fn scan(dir: &Path) -> Result<Vec<FileEntry>, CliError> {
    let mut paths = Vec::new();
    collect(dir, dir, &mut paths)?;
    let mut files = paths
        .iter()
        .map(|p| {
            let (sha256, bytes) = sha256_file(p)?;
            let rel = p.strip_prefix(dir).expect("under dir");
            let path = rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/");
            Ok(FileEntry { path, sha256, bytes })
        })
        .collect::<std::io::Result<Vec<_>>>()?;
    files.sort_by(|a, b| a.path.cmp(&b.path));
    Ok(files)
}

impl Manifest {
    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(self).map_err(|e| CliError::Io(e.to_string()))?;
        std::fs::write(dir.join(FILE_NAME), text + "\n")?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
    }

    /// Files whose size or checksum no longer match, or that are missing.
    pub fn verify(&self, dir: &Path) -> Vec<String> {
        self.files
            .iter()
            .filter_map(|f| match sha256_file(&dir.join(&f.path)) {
                Ok((sha, bytes)) if sha == f.sha256 && bytes == f.bytes => None,
                Ok(_) => Some(format!("{}: checksum mismatch", f.path)),
                Err(e) => Some(format!("{}: {e}", f.path)),
            })
            .collect()
    }
}
