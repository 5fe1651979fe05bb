//! File helpers shared by every artifact writer.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

/// Writes `bytes` to `path` through a temporary file in the same directory
/// followed by a rename, so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.flush().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_slice(&bytes)?)
}

pub fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Version envelope wrapped around every persisted model container.
#[derive(Debug, Serialize, serde::Deserialize)]
pub struct Versioned<T> {
    pub format: String,
    pub version: u32,
    pub payload: T,
}

pub fn write_versioned<T: Serialize>(path: &Path, format: &str, version: u32, payload: &T) -> Result<()> {
    #[derive(Serialize)]
    struct Envelope<'a, T> {
        format: &'a str,
        version: u32,
        payload: &'a T,
    }
    write_json(
        path,
        &Envelope {
            format,
            version,
            payload,
        },
    )
}

/// Reads a container written by [`write_versioned`], refusing other formats
/// and versions before the payload is decoded.
pub fn read_versioned<T: DeserializeOwned>(path: &Path, format: &str, version: u32) -> Result<T> {
    let raw: Versioned<serde_json::Value> = read_json(path)?;
    if raw.format != format {
        return Err(Error::Input(format!(
            "{}: expected a '{format}' container, found '{}'",
            path.display(),
            raw.format
        )));
    }
    if raw.version != version {
        return Err(Error::VersionMismatch {
            found: raw.version,
            expected: version,
        });
    }
    Ok(serde_json::from_value(raw.payload)?)
}
