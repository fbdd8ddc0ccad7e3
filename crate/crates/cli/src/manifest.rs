//! Run manifests: ordered `key = value` documents.
//!
//! Every command writes one next to its primary output (at
//! `<output>.manifest`), echoing the fully resolved configuration, seeds,
//! and input paths. Manifests contain nothing volatile — no timestamps, no
//! hostnames — so identical runs produce identical manifests, and the
//! recorded configuration re-runs to identical outputs.

use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Manifest {
    entries: Vec<(String, String)>,
}

impl Manifest {
    #[must_use]
    pub fn new(command: &str) -> Self {
        let mut m = Manifest::default();
        m.push("command", command);
        m
    }

    /// Appends an entry; insertion order is preserved in the file.
    pub fn push(&mut self, key: &str, value: impl Display) {
        let value = value.to_string();
        assert!(
            !key.is_empty() && !key.contains(['=', '\n', ' ']),
            "manifest key {key:?} must be a single token without '='"
        );
        assert!(!value.contains('\n'), "manifest value for {key:?} has a newline");
        self.entries.push((key.to_string(), value));
    }

    #[must_use]
    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    #[must_use]
    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    /// Manifest path for an output file: the full file name plus
    /// `.manifest`, so `scores.tsv` pairs with `scores.tsv.manifest`.
    #[must_use]
    pub fn path_for(output: &Path) -> PathBuf {
        let mut name = output.as_os_str().to_owned();
        name.push(".manifest");
        PathBuf::from(name)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for (k, v) in &self.entries {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(v);
            out.push('\n');
        }
        fs::write(path, out).with_context(|| format!("writing manifest {}", path.display()))
    }

    /// Writes the manifest next to the given output file.
    pub fn write_for(&self, output: &Path) -> Result<()> {
        self.write(&Self::path_for(output))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let content = fs::read_to_string(path)
            .with_context(|| format!("reading manifest {}", path.display()))?;
        let mut m = Manifest::default();
        for (ix, line) in content.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once(" = ") else {
                bail!(
                    "{} line {}: expected `key = value`, got {line:?}",
                    path.display(),
                    ix + 1
                );
            };
            m.entries.push((key.to_string(), value.to_string()));
        }
        Ok(m)
    }

    /// Reads the manifest paired with an output file, if one exists.
    pub fn read_for(output: &Path) -> Result<Option<Self>> {
        let path = Self::path_for(output);
        if path.exists() {
            Ok(Some(Self::read(&path)?))
        } else {
            Ok(None)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifests_round_trip_in_order() {
        let mut m = Manifest::new("train");
        m.push("seed", 42u64);
        m.push("lr", 0.0001f64);
        m.push("data", "corpus/root path with spaces");
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("model.bin");
        m.write_for(&out).unwrap();

        let path = Manifest::path_for(&out);
        assert!(path.to_string_lossy().ends_with("model.bin.manifest"));
        let back = Manifest::read(&path).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.get("command"), Some("train"));
        assert_eq!(back.get("lr"), Some("0.0001"));
        assert_eq!(back.get("missing"), None);
        assert_eq!(
            Manifest::read_for(&out).unwrap().as_ref(),
            Some(&m)
        );
        assert_eq!(Manifest::read_for(&dir.path().join("nope")).unwrap(), None);
    }

    #[test]
    fn malformed_manifest_lines_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.manifest");
        fs::write(&path, "no separator here\n").unwrap();
        let err = Manifest::read(&path).unwrap_err().to_string();
        assert!(err.contains("line 1"), "{err}");
    }
}
