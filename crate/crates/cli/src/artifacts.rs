//! Artifact emission: atomic writes, and the JSON/CSV/OFF encodings of results.

use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use shellxy_core::field::write_field_csv;
use shellxy_core::mesh::write_off;
use shellxy_core::{DiscreteField, Triangulation};

/// Writes `bytes` to `path` through a temporary file in the same directory and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("temporary file in {}", dir.display()))?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path)
        .with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

/// Pretty JSON with a trailing newline. Floats use the shortest representation that reads back
/// to the same double.
pub fn json_bytes(value: &impl Serialize) -> Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(value)?;
    out.push(b'\n');
    Ok(out)
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    write_atomic(path, &json_bytes(value)?)
}

/// CSV body preceded by a `# config_hash=` comment line.
pub fn write_csv(path: &Path, config_hash: &str, body: &str) -> Result<()> {
    write_atomic(
        path,
        format!("# config_hash={config_hash}\n{body}").as_bytes(),
    )
}

pub fn off_bytes(tri: &Triangulation, config_hash: &str) -> Result<Vec<u8>> {
    let mut buf = format!("# config_hash={config_hash}\n").into_bytes();
    write_off(tri, &mut buf)?;
    Ok(buf)
}

pub fn field_bytes(field: &DiscreteField, mesh_hash: &str, config_hash: &str) -> Result<Vec<u8>> {
    let mut buf = format!("# config_hash={config_hash}\n").into_bytes();
    write_field_csv(field, mesh_hash, &mut buf)?;
    Ok(buf)
}

/// Reads the `# config_hash=` line of a text artifact, if present.
pub fn embedded_config_hash(text: &str) -> Option<&str> {
    text.lines().find_map(|l| l.strip_prefix("# config_hash="))
}
