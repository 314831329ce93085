//! Deterministic CSV and JSON emission.
//!
//! CSV files start with `# key=value` metadata lines, use LF line endings
//! and `.` decimals, and print non-finite or undefined values as `NA`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::VERSION;

/// Identity stamped into every output file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Stamp {
    pub version: String,
    pub seed: u64,
    pub config_hash: String,
}

impl Stamp {
    /// Hashes the JSON encoding of the resolved inputs.
    pub fn new<T: Serialize>(seed: u64, inputs: &T) -> Result<Self> {
        let bytes = serde_json::to_vec(inputs)
            .map_err(|e| Error::config(format!("cannot encode inputs: {e}")))?;
        Ok(Self {
            version: VERSION.to_string(),
            seed,
            config_hash: hex::encode(Sha256::digest(&bytes)),
        })
    }

    fn lines(&self) -> Vec<(String, String)> {
        vec![
            ("version".into(), self.version.clone()),
            ("seed".into(), self.seed.to_string()),
            ("config_hash".into(), self.config_hash.clone()),
        ]
    }
}

/// Shortest round-trip decimal, `NA` when not finite.
pub fn number(x: f64) -> String {
    if x.is_finite() {
        format!("{x}")
    } else {
        "NA".to_string()
    }
}

pub fn optional(x: Option<f64>) -> String {
    x.map_or_else(|| "NA".to_string(), number)
}

/// Output directory, created on demand.
#[derive(Debug, Clone)]
pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root)?;
        Ok(Self {
            root: root.to_path_buf(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write_csv(
        &self,
        name: &str,
        stamp: &Stamp,
        extra: &[(String, String)],
        header: &[String],
        rows: &[Vec<String>],
    ) -> Result<PathBuf> {
        let mut buf = String::new();
        for (k, v) in stamp.lines().iter().chain(extra) {
            buf.push_str(&format!("# {k}={v}\n"));
        }
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(header).map_err(csv_error)?;
        for r in rows {
            if r.len() != header.len() {
                return Err(Error::Precondition(format!(
                    "{name}: row of {} fields under a header of {}",
                    r.len(),
                    header.len()
                )));
            }
            w.write_record(r).map_err(csv_error)?;
        }
        let body = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        buf.push_str(&String::from_utf8(body).expect("csv output is UTF-8"));
        let path = self.path(name);
        fs::write(&path, buf)?;
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(value)
            .map_err(|e| Error::Precondition(format!("cannot encode {name}: {e}")))?;
        text.push('\n');
        let path = self.path(name);
        fs::write(&path, text)?;
        Ok(path)
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_and_na() {
        assert_eq!(number(0.5), "0.5");
        assert_eq!(number(1e-8), "0.00000001");
        assert_eq!(number(1234567.0), "1234567");
        assert_eq!(number(f64::NAN), "NA");
        assert_eq!(optional(None), "NA");
    }

    #[test]
    fn csv_layout() {
        let dir = tempfile::tempdir().unwrap();
        let out = OutDir::create(dir.path()).unwrap();
        let stamp = Stamp::new(3, &("x", 1)).unwrap();
        assert_eq!(stamp.config_hash.len(), 64);
        let p = out
            .write_csv(
                "t.csv",
                &stamp,
                &[("k".into(), "2".into())],
                &["a".into(), "b".into()],
                &[vec!["{1,2}".into(), "NA".into()]],
            )
            .unwrap();
        let text = fs::read_to_string(p).unwrap();
        assert!(!text.contains('\r'));
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], format!("# version={VERSION}"));
        assert_eq!(lines[1], "# seed=3");
        assert_eq!(lines[3], "# k=2");
        assert_eq!(lines[4], "a,b");
        assert_eq!(lines[5], "\"{1,2}\",NA");
        assert!(out
            .write_csv("u.csv", &stamp, &[], &["a".into()], &[vec![]])
            .is_err());
    }
}
