//! Versioned record snapshot files.
//!
//! ```text
//! MHSNAP <version> <record count> <sha256 of body, hex>\n
//! <body: one JSON object per line>
//! ```
//!
//! Version is currently 1. Files are written to a sibling temp file and
//! renamed into place, so a reader sees either the old or the new snapshot.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

const MAGIC: &str = "MHSNAP";
pub const SNAPSHOT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("corrupt snapshot: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn encode<T: Serialize>(items: impl IntoIterator<Item = T>) -> Vec<u8> {
    let mut body = Vec::new();
    let mut count = 0usize;
    for item in items {
        serde_json::to_writer(&mut body, &item).expect("snapshot items serialize");
        body.push(b'\n');
        count += 1;
    }
    let digest = Sha256::digest(&body);
    let mut out = format!("{MAGIC} {SNAPSHOT_VERSION} {count} {}\n", hex(&digest)).into_bytes();
    out.extend_from_slice(&body);
    out
}

pub fn decode<T: DeserializeOwned>(bytes: &[u8]) -> Result<Vec<T>, SnapshotError> {
    let corrupt = |m: &str| SnapshotError::Corrupt(m.to_string());
    let nl = bytes.iter().position(|&b| b == b'\n').ok_or_else(|| corrupt("missing header"))?;
    let header = std::str::from_utf8(&bytes[..nl]).map_err(|_| corrupt("header is not UTF-8"))?;
    let body = &bytes[nl + 1..];
    let parts: Vec<&str> = header.split(' ').collect();
    let [magic, version, count, checksum] = parts[..] else { return Err(corrupt("malformed header")) };
    if magic != MAGIC {
        return Err(corrupt("bad magic"));
    }
    if version != SNAPSHOT_VERSION.to_string() {
        return Err(SnapshotError::Corrupt(format!("unsupported version {version}")));
    }
    let count: usize = count.parse().map_err(|_| corrupt("bad record count"))?;
    if hex(&Sha256::digest(body)) != checksum {
        return Err(corrupt("checksum mismatch"));
    }
    let text = std::str::from_utf8(body).map_err(|_| corrupt("body is not UTF-8"))?;
    let records = text
        .lines()
        .map(|l| serde_json::from_str(l).map_err(|e| SnapshotError::Corrupt(e.to_string())))
        .collect::<Result<Vec<_>, _>>()?;
    if records.len() != count {
        return Err(corrupt("record count mismatch"));
    }
    Ok(records)
}

/// Writes `bytes` to `path` via a temp file, fsync and rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let mut tmp_name = path.file_name().unwrap_or_default().to_os_string();
    tmp_name.push(format!(".tmp{}", std::process::id()));
    let tmp = dir.join(tmp_name);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    if let Ok(d) = fs::File::open(dir) {
        let _ = d.sync_all();
    }
    Ok(())
}

pub fn save<T: Serialize>(path: &Path, items: impl IntoIterator<Item = T>) -> Result<(), SnapshotError> {
    Ok(write_atomic(path, &encode(items))?)
}

pub fn load<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, SnapshotError> {
    decode(&fs::read(path)?)
}
