//! Deterministic artifact output: every run writes its files through one
//! writer that records a SHA-256 digest per file and finishes with a
//! `manifest.txt`. The manifest is written even when the run aborts, so a
//! failed run still leaves a verifiable record of what it produced.

use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut hex = String::with_capacity(64);
    for byte in digest {
        use std::fmt::Write;
        write!(hex, "{byte:02x}").expect("writing to a String cannot fail");
    }
    hex
}

/// Writes artifacts into one output directory and accumulates their hashes.
#[derive(Debug)]
pub struct ArtifactWriter {
    dir: PathBuf,
    entries: Vec<(String, String)>,
}

impl ArtifactWriter {
    pub fn create(dir: &Path) -> io::Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            entries: Vec::new(),
        })
    }

    /// Writes one artifact (flat name, no subdirectories) and records its
    /// digest for the manifest.
    pub fn write(&mut self, name: &str, bytes: &[u8]) -> io::Result<()> {
        debug_assert!(
            !name.contains('/') && !name.contains('\\'),
            "artifacts live flat in the output directory"
        );
        std::fs::write(self.dir.join(name), bytes)?;
        self.entries.push((name.to_string(), sha256_hex(bytes)));
        Ok(())
    }

    /// Serializes `value` as pretty JSON with a trailing newline. Field
    /// order follows the struct definitions and maps are sorted, so the
    /// bytes are a pure function of the value.
    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> io::Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?;
        bytes.push(b'\n');
        self.write(name, &bytes)
    }

    /// Writes `manifest.txt` (`<sha256>  <name>` per line, sorted by name)
    /// covering every artifact written so far.
    pub fn finish(self) -> io::Result<PathBuf> {
        let mut entries = self.entries;
        entries.sort();
        let mut manifest = String::new();
        for (name, hash) in &entries {
            manifest.push_str(hash);
            manifest.push_str("  ");
            manifest.push_str(name);
            manifest.push('\n');
        }
        let path = self.dir.join("manifest.txt");
        std::fs::write(&path, manifest.as_bytes())?;
        Ok(path)
    }
}

/// Renders rows as CSV. Fields are plain numbers or bare words throughout
/// this crate, so no quoting is needed; floats use Rust's shortest
/// round-trip formatting, which is byte-stable.
pub fn csv(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut text = String::new();
    text.push_str(&header.join(","));
    text.push('\n');
    for row in rows {
        debug_assert_eq!(row.len(), header.len());
        text.push_str(&row.join(","));
        text.push('\n');
    }
    text
}
