//! All-or-nothing artifact output.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

/// Files staged in memory and written together by [`Artifacts::commit`].
#[derive(Default)]
pub struct Artifacts {
    files: Vec<(String, Vec<u8>)>,
}

impl Artifacts {
    pub fn add(&mut self, name: &str, bytes: impl Into<Vec<u8>>) {
        self.files.push((name.to_string(), bytes.into()));
    }

    pub fn names(&self) -> Vec<String> {
        self.files.iter().map(|(n, _)| n.clone()).collect()
    }

    /// Writes every file as `<name>.tmp` first and renames only once all
    /// writes succeeded. On failure the temporaries are removed.
    pub fn commit(self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let mut staged = Vec::new();
        let result = (|| -> Result<()> {
            for (name, bytes) in &self.files {
                let tmp = dir.join(format!("{name}.tmp"));
                staged.push(tmp.clone());
                std::fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
            }
            Ok(())
        })();
        if let Err(e) = result {
            for tmp in &staged {
                let _ = std::fs::remove_file(tmp);
            }
            return Err(e);
        }
        let mut out = Vec::new();
        for ((name, _), tmp) in self.files.iter().zip(&staged) {
            let path = dir.join(name);
            std::fs::rename(tmp, &path).with_context(|| format!("renaming {}", tmp.display()))?;
            out.push(path);
        }
        Ok(out)
    }
}

/// Serializes records as one JSON object per line.
pub fn jsonl<T: serde::Serialize>(records: &[T]) -> Result<String> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    Ok(out)
}
