//! Small helpers for the tab-separated file formats used throughout.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::{Error, Result};

/// Non-blank lines of a file as `(1-based line number, fields)`.
pub fn read_records(path: &Path) -> Result<Vec<(usize, Vec<String>)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(parse_records(&text))
}

pub fn parse_records(text: &str) -> Vec<(usize, Vec<String>)> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| (i + 1, l.split('\t').map(str::to_string).collect()))
        .collect()
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Fixed-precision score rendering shared by every ranking and table file.
pub fn fmt_score(x: f64) -> String {
    format!("{x:.6}")
}

/// `id<TAB>score` lines in the given order.
pub fn render_scores<'a>(rows: impl IntoIterator<Item = (&'a str, f64)>) -> String {
    let mut out = String::new();
    for (id, s) in rows {
        let _ = writeln!(out, "{id}\t{}", fmt_score(s));
    }
    out
}

/// Reads `id<TAB>score` files.
pub fn read_scores(path: &Path) -> Result<Vec<(String, f64)>> {
    read_records(path)?
        .into_iter()
        .map(|(line, f)| {
            if f.len() < 2 {
                return Err(Error::parse(path, line, "expected id<TAB>score"));
            }
            let v = f[1]
                .trim()
                .parse::<f64>()
                .map_err(|e| Error::parse(path, line, format!("bad score: {e}")))?;
            Ok((f[0].clone(), v))
        })
        .collect()
}

/// One id per line (first TSV column), e.g. restriction and exclusion lists.
pub fn read_id_list(path: &Path) -> Result<Vec<String>> {
    Ok(read_records(path)?
        .into_iter()
        .map(|(_, f)| f[0].trim().to_string())
        .collect())
}
