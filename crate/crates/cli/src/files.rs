//! File helpers: JSONL in and out, digests and run manifests.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

pub fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(io_err(path))
}

/// Reads one JSON value per non-empty line.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = std::fs::File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line).map_err(|e| CliError::Data {
            context: format!("{}:{}: ", path.display(), i + 1),
            source: e.into(),
        })?;
        out.push(value);
    }
    Ok(out)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_slice(&read_bytes(path)?).map_err(|e| CliError::Data {
        context: format!("{}: ", path.display()),
        source: e.into(),
    })
}

pub fn jsonl_bytes<T: Serialize>(rows: &[T]) -> Vec<u8> {
    let mut buf = Vec::new();
    for row in rows {
        serde_json::to_writer(&mut buf, row).expect("in-memory serialization");
        buf.push(b'\n');
    }
    buf
}

pub fn json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut buf = serde_json::to_vec_pretty(value).expect("in-memory serialization");
    buf.push(b'\n');
    buf
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: Vec<String>,
    pub seeds: BTreeMap<String, u64>,
    pub version: &'static str,
    pub threads: usize,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub elapsed_ms: u128,
}

/// Tracks a run's inputs and writes each output next to its manifest.
pub struct Run {
    started: Instant,
    seeds: BTreeMap<String, u64>,
    inputs: Vec<FileDigest>,
}

impl Run {
    pub fn start() -> Self {
        Run {
            started: Instant::now(),
            seeds: BTreeMap::new(),
            inputs: Vec::new(),
        }
    }

    pub fn seed(&mut self, name: &str, value: u64) {
        self.seeds.insert(name.into(), value);
    }

    /// Reads an input file and records its digest.
    pub fn input(&mut self, path: &Path) -> Result<Vec<u8>> {
        let bytes = read_bytes(path)?;
        self.note_input(path, &bytes);
        Ok(bytes)
    }

    pub fn note_input(&mut self, path: &Path, bytes: &[u8]) {
        self.inputs.push(FileDigest {
            path: path.to_path_buf(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
        });
    }

    /// Writes `bytes` to `path` and its manifest to `<path>.manifest.json`.
    pub fn output(&self, path: &Path, bytes: &[u8]) -> Result<RunManifest> {
        write_new(path, bytes)?;
        let manifest = RunManifest {
            command: std::env::args().collect(),
            seeds: self.seeds.clone(),
            version: env!("CARGO_PKG_VERSION"),
            threads: rayon::current_num_threads(),
            inputs: self.inputs.clone(),
            outputs: vec![FileDigest {
                path: path.to_path_buf(),
                sha256: sha256_hex(bytes),
                bytes: bytes.len() as u64,
            }],
            elapsed_ms: self.started.elapsed().as_millis(),
        };
        write_new(&manifest_path(path), &json_bytes(&manifest))?;
        Ok(manifest)
    }
}

pub fn manifest_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

fn write_new(path: &Path, bytes: &[u8]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    w.write_all(bytes).map_err(io_err(path))?;
    w.flush().map_err(io_err(path))
}
