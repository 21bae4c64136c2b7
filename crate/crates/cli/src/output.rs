//! Artifact files: fixed-format CSV and pretty JSON.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::CliError;

/// Writes artifacts into one directory and records their names.
pub struct ArtifactDir {
    root: PathBuf,
    files: Vec<String>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// `{:.16e}`: 17 significant digits, locale-free.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

impl ArtifactDir {
    pub fn create(root: PathBuf) -> Result<Self, CliError> {
        std::fs::create_dir_all(&root).map_err(io_err(&root))?;
        Ok(Self { root, files: Vec::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// File names written so far, sorted.
    pub fn files(&self) -> Vec<String> {
        let mut f = self.files.clone();
        f.sort();
        f
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.root.join(name);
        std::fs::write(&path, contents).map_err(io_err(&path))?;
        if !self.files.iter().any(|f| f == name) {
            self.files.push(name.to_string());
        }
        Ok(())
    }

    pub fn csv(&mut self, name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<(), CliError> {
        let mut out = header.join(",");
        out.push('\n');
        for row in rows {
            let cells: Vec<String> = row.into_iter().map(fmt_float).collect();
            writeln!(out, "{}", cells.join(",")).expect("write to string");
        }
        self.write(name, &out)
    }

    pub fn json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).expect("report serializes");
        text.push('\n');
        self.write(name, &text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_have_seventeen_significant_digits() {
        assert_eq!(fmt_float(1.0), "1.0000000000000000e0");
        assert_eq!(fmt_float(-0.1), "-1.0000000000000001e-1");
        let x = std::f64::consts::PI;
        assert_eq!(fmt_float(x).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn csv_layout() {
        let dir = tempfile::tempdir().unwrap();
        let mut a = ArtifactDir::create(dir.path().join("x")).unwrap();
        a.csv("c.csv", &["t", "v"], vec![vec![0.0, 1.5], vec![1.0, -2.0]]).unwrap();
        a.json("r.json", &[1, 2]).unwrap();
        let text = std::fs::read_to_string(dir.path().join("x/c.csv")).unwrap();
        assert_eq!(text, "t,v\n0.0000000000000000e0,1.5000000000000000e0\n1.0000000000000000e0,-2.0000000000000000e0\n");
        assert_eq!(a.files(), vec!["c.csv", "r.json"]);
    }
}
