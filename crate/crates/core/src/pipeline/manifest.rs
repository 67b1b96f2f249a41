use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SPLITS: [u32; 3] = [1, 2, 3];

/// One manifest line. `path` is relative to the manifest's directory
/// unless absolute.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub path: String,
    pub label: usize,
    pub split: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    base_dir: PathBuf,
    entries: Vec<ManifestEntry>,
}

impl Manifest {
    /// Labels must cover `0..num_classes` and splits must be 1, 2 or 3.
    pub fn new(base_dir: impl Into<PathBuf>, entries: Vec<ManifestEntry>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Usage("manifest has no entries".into()));
        }
        if let Some(e) = entries.iter().find(|e| !SPLITS.contains(&e.split)) {
            return Err(Error::Config(format!(
                "{}: split {} is not in 1..=3",
                e.path, e.split
            )));
        }
        let num_classes = entries.iter().map(|e| e.label).max().unwrap() + 1;
        if let Some(c) = (0..num_classes).find(|c| !entries.iter().any(|e| e.label == *c)) {
            return Err(Error::Config(format!(
                "labels are not dense: class {c} of 0..{num_classes} has no clips"
            )));
        }
        Ok(Self {
            base_dir: base_dir.into(),
            entries,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let e: ManifestEntry = serde_json::from_str(line)
                .map_err(|err| Error::Config(format!("{}:{}: {err}", path.display(), i + 1)))?;
            entries.push(e);
        }
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::new(base, entries)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        for e in &self.entries {
            serde_json::to_writer(&mut f, e)?;
            f.write_all(b"\n")?;
        }
        f.flush()?;
        Ok(())
    }

    pub fn entries(&self) -> &[ManifestEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn base_dir(&self) -> &Path {
        &self.base_dir
    }

    pub fn num_classes(&self) -> usize {
        self.entries.iter().map(|e| e.label).max().map_or(0, |m| m + 1)
    }

    pub fn resolve(&self, entry: &ManifestEntry) -> PathBuf {
        let p = Path::new(&entry.path);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Indices of training and test entries. Split `s` tests on entries
    /// tagged `s` and trains on the rest; `None` uses every entry for both.
    pub fn partition(&self, split: Option<u32>) -> Result<(Vec<usize>, Vec<usize>)> {
        let all: Vec<usize> = (0..self.entries.len()).collect();
        let Some(s) = split else {
            return Ok((all.clone(), all));
        };
        if !SPLITS.contains(&s) {
            return Err(Error::Usage(format!("split must be 1, 2 or 3, got {s}")));
        }
        let (test, train): (Vec<usize>, Vec<usize>) = all.into_iter().partition(|&i| self.entries[i].split == s);
        if train.is_empty() || test.is_empty() {
            return Err(Error::Usage(format!(
                "split {s} leaves {} training and {} test clips",
                train.len(),
                test.len()
            )));
        }
        Ok((train, test))
    }
}
