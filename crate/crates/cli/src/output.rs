//! File emission. CSV files start with `#` metadata lines (schema name and
//! version first), then one header row; column order is part of the schema.
//! Files written through an [`OutputSet`] are deleted again unless the run
//! commits, so a failed run leaves no partial results behind.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;

pub fn io_error(path: &Path, source: std::io::Error) -> CliError {
    CliError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Shortest round-tripping decimal, switching to exponent form for very large
/// or very small magnitudes.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || (1e-4..1e15).contains(&a) || !x.is_finite() {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

pub fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// A CSV table assembled in memory.
#[derive(Debug, Clone)]
pub struct Csv {
    text: String,
    columns: usize,
}

impl Csv {
    pub fn new(schema: &str, meta: &[(&str, String)], columns: &[&str]) -> Self {
        let mut text = format!("# schema: {schema}/{SCHEMA_VERSION}\n");
        for (k, v) in meta {
            let _ = writeln!(text, "# {k}: {v}");
        }
        text.push_str(&columns.join(","));
        text.push('\n');
        Self {
            text,
            columns: columns.len(),
        }
    }

    pub fn row<S: AsRef<str>>(&mut self, fields: &[S]) {
        debug_assert_eq!(fields.len(), self.columns);
        for (i, f) in fields.iter().enumerate() {
            if i > 0 {
                self.text.push(',');
            }
            self.text.push_str(f.as_ref());
        }
        self.text.push('\n');
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("summary serialises");
    s.push('\n');
    s
}

/// Files written by one run, removed on drop unless committed.
#[derive(Debug)]
pub struct OutputSet {
    dir: PathBuf,
    written: Vec<PathBuf>,
    committed: bool,
}

impl OutputSet {
    pub fn create(dir: &Path) -> CliResult<Self> {
        fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
            committed: false,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, name: &str, contents: &str) -> CliResult<PathBuf> {
        let path = self.dir.join(name);
        // recorded first, so a half-written file is removed as well
        self.written.push(path.clone());
        fs::write(&path, contents).map_err(|e| io_error(&path, e))?;
        Ok(path)
    }

    pub fn write_csv(&mut self, name: &str, csv: &Csv) -> CliResult<PathBuf> {
        self.write(name, csv.as_str())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<PathBuf> {
        self.write(name, &to_json(value))
    }

    pub fn commit(mut self) -> Vec<PathBuf> {
        self.committed = true;
        std::mem::take(&mut self.written)
    }
}

impl Drop for OutputSet {
    fn drop(&mut self) {
        if !self.committed {
            for p in &self.written {
                let _ = fs::remove_file(p);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_format() {
        assert_eq!(num(1.5), "1.5");
        assert_eq!(num(0.0), "0");
        assert_eq!(num(1e-7), "1e-7");
        assert_eq!(num(-2.5e20), "-2.5e20");
        assert_eq!(opt_num(None), "");
    }

    #[test]
    fn csv_layout() {
        let mut c = Csv::new("qho.test", &[("seed", "3".into())], &["a", "b"]);
        c.row(&["1", ""]);
        assert_eq!(c.as_str(), "# schema: qho.test/1\n# seed: 3\na,b\n1,\n");
    }

    #[test]
    fn uncommitted_files_are_removed() {
        let dir = tempfile::tempdir().unwrap();
        let path = {
            let mut set = OutputSet::create(dir.path()).unwrap();
            set.write("x.csv", "1\n").unwrap()
        };
        assert!(!path.exists());
        let mut set = OutputSet::create(dir.path()).unwrap();
        let p = set.write("y.csv", "1\n").unwrap();
        set.commit();
        assert!(p.exists());
    }
}
