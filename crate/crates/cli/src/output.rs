//! Buffered output files, committed together once a command has succeeded.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::CliError;

#[derive(Default)]
pub struct Outputs {
    files: Vec<(String, Vec<u8>)>,
}

impl Outputs {
    pub fn add(&mut self, name: impl Into<String>, bytes: Vec<u8>) {
        self.files.push((name.into(), bytes));
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut bytes = serde_json::to_vec_pretty(value)
            .map_err(|e| CliError::Numerical(format!("cannot encode {name}: {e}")))?;
        bytes.push(b'\n');
        self.add(name, bytes);
        Ok(())
    }

    /// Writes rows with `header` as the first record.
    pub fn csv<I, R>(&mut self, name: &str, header: &[&str], rows: I) -> Result<(), CliError>
    where
        I: IntoIterator<Item = R>,
        R: IntoIterator<Item = String>,
    {
        let mut w = csv::Writer::from_writer(Vec::new());
        let enc = |e: csv::Error| CliError::Numerical(format!("cannot encode {name}: {e}"));
        w.write_record(header).map_err(enc)?;
        for r in rows {
            w.write_record(r).map_err(enc)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| CliError::Numerical(format!("cannot encode {name}: {e}")))?;
        self.add(name, bytes);
        Ok(())
    }

    /// Writes every file to a temporary name first and renames them only
    /// once all writes succeeded, so a failure leaves no partial outputs.
    pub fn commit(self, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
        fs::create_dir_all(dir)
            .map_err(|e| CliError::Input(format!("cannot create {}: {e}", dir.display())))?;
        let mut staged: Vec<(PathBuf, PathBuf)> = Vec::new();
        let cleanup = |staged: &[(PathBuf, PathBuf)]| {
            for (tmp, _) in staged {
                let _ = fs::remove_file(tmp);
            }
        };
        for (name, bytes) in &self.files {
            let dest = dir.join(name);
            let tmp = dir.join(format!(".{name}.partial"));
            if let Err(e) = fs::write(&tmp, bytes) {
                let _ = fs::remove_file(&tmp);
                cleanup(&staged);
                return Err(CliError::Input(format!(
                    "cannot write {}: {e}",
                    dest.display()
                )));
            }
            staged.push((tmp, dest));
        }
        let mut written = Vec::with_capacity(staged.len());
        for (i, (tmp, dest)) in staged.iter().enumerate() {
            if let Err(e) = fs::rename(tmp, dest) {
                cleanup(&staged[i..]);
                return Err(CliError::Input(format!(
                    "cannot write {}: {e}",
                    dest.display()
                )));
            }
            written.push(dest.clone());
        }
        Ok(written)
    }
}

/// Shortest round-trip formatting for CSV cells.
pub fn num(v: f64) -> String {
    format!("{v}")
}
