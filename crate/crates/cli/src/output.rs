use std::io::Write;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::CliResult;

/// Output files held in memory until the subcommand has finished, then
/// written together. Each file goes through a temporary file in the target
/// directory and a rename; if any write fails the files already placed are
/// removed again.
#[derive(Debug, Default)]
pub struct Staged {
    files: Vec<(String, Vec<u8>)>,
}

impl Staged {
    pub fn add(&mut self, name: impl Into<String>, contents: impl Into<Vec<u8>>) {
        self.files.push((name.into(), contents.into()));
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.files.iter().map(|(n, _)| n.as_str())
    }

    pub fn commit(self, dir: &Path) -> CliResult<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut placed: Vec<PathBuf> = Vec::new();
        for (name, bytes) in &self.files {
            let target = dir.join(name);
            let result = (|| -> std::io::Result<()> {
                let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
                tmp.write_all(bytes)?;
                tmp.as_file().sync_all()?;
                tmp.persist(&target).map_err(|e| e.error)?;
                Ok(())
            })();
            if let Err(e) = result {
                for p in &placed {
                    let _ = std::fs::remove_file(p);
                }
                return Err(e.into());
            }
            placed.push(target);
        }
        Ok(placed)
    }
}

/// First 16 hex digits of the SHA-256 of `bytes`.
pub fn short_hash(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().take(8).map(|b| format!("{b:02x}")).collect()
}

/// `t,value` CSV preceded by `# key: value` header lines.
pub fn curve_csv(header: &[(&str, String)], t: &[f64], value: &[f64]) -> String {
    let mut s = String::new();
    for (k, v) in header {
        s.push_str(&format!("# {k}: {v}\n"));
    }
    s.push_str("t,value\n");
    for (t, v) in t.iter().zip(value) {
        s.push_str(&format!("{t},{v}\n"));
    }
    s
}

pub fn to_json(value: &impl serde::Serialize) -> CliResult<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}
