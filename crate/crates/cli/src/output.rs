//! Report files: `<command>.json` and `<command>.csv` in the output
//! directory.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use crate::commands::Outcome;

/// Comma-separated table built row by row. Numbers are written in Rust's
/// shortest round-trip form, so identical values give identical bytes.
#[derive(Debug, Clone)]
pub struct Csv {
    text: String,
    width: usize,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        Self {
            text: header.join(",") + "\n",
            width: header.len(),
        }
    }

    pub fn row(&mut self, cells: &[String]) {
        assert_eq!(cells.len(), self.width, "CSV row width");
        self.text.push_str(&cells.join(","));
        self.text.push('\n');
    }

    pub fn finish(self) -> String {
        self.text
    }
}

/// Writes the outcome and returns the paths written.
pub fn write(outcome: &Outcome, dir: &Path) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let json = dir.join(format!("{}.json", outcome.command));
    let mut text = serde_json::to_string_pretty(&outcome.document()).map_err(io::Error::other)?;
    text.push('\n');
    fs::write(&json, text)?;
    written.push(json);
    if let Some(csv) = &outcome.csv {
        let path = dir.join(format!("{}.csv", outcome.command));
        fs::write(&path, csv)?;
        written.push(path);
    }
    Ok(written)
}
