//! Model files.
//!
//! The triplet format has one entry per line, `<i> <j> <rate>`, with 1-based
//! states and `j = 0` for killing; `#` starts a comment line. Rates are
//! written with the shortest decimal text that round-trips exactly.
//!
//! A JSON manifest may wrap the triplets:
//!
//! ```json
//! { "format": "qmatrix-triplets-v1", "states": 2, "entries": [[1, 2, 1.0], [1, 0, 1.0], [2, 1, 1.0]] }
//! ```
//!
//! where `entries` is either an inline list or a path to a triplet file,
//! relative to the manifest.

use std::fmt::Write as _;
use std::path::Path;

use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{build_model_with_states, GeneratorModel};

pub const MANIFEST_FORMAT: &str = "qmatrix-triplets-v1";

pub type Triplet = (usize, usize, f64);

pub fn parse_triplets(text: &str) -> Result<Vec<Triplet>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line_no = n + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(Error::Parse { line: line_no, message: format!("expected 3 fields, found {}", fields.len()) });
        }
        let index = |s: &str| {
            s.parse::<usize>().map_err(|_| Error::Parse { line: line_no, message: format!("invalid state index {s:?}") })
        };
        let rate = fields[2]
            .parse::<f64>()
            .map_err(|_| Error::Parse { line: line_no, message: format!("invalid rate {:?}", fields[2]) })?;
        out.push((index(fields[0])?, index(fields[1])?, rate));
    }
    Ok(out)
}

/// Canonical triplet text of a model: rows in order, killing last.
pub fn write_triplets(model: &GeneratorModel) -> String {
    let mut s = String::new();
    for (i, j, r) in model.entries() {
        writeln!(s, "{i} {j} {r}").expect("writing to a String cannot fail");
    }
    s
}

/// Hex SHA-256 of the canonical triplet text.
pub fn model_digest(model: &GeneratorModel) -> String {
    hex::encode(Sha256::digest(write_triplets(model).as_bytes()))
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum ManifestEntries {
    Path(String),
    Inline(Vec<(usize, usize, f64)>),
}

#[derive(Debug, Deserialize)]
struct Manifest {
    format: String,
    states: Option<usize>,
    entries: ManifestEntries,
}

/// Parses a manifest; `base` resolves relative entry paths.
pub fn parse_manifest(text: &str, base: Option<&Path>) -> Result<GeneratorModel> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| Error::Parse { line: e.line(), message: e.to_string() })?;
    match value.get("format").and_then(|f| f.as_str()) {
        Some(MANIFEST_FORMAT) => {}
        Some(other) => return Err(Error::UnsupportedFormat(other.to_string())),
        None => return Err(Error::UnsupportedFormat("missing format tag".into())),
    }
    let manifest: Manifest =
        serde_json::from_value(value).map_err(|e| Error::Parse { line: 0, message: e.to_string() })?;
    debug_assert_eq!(manifest.format, MANIFEST_FORMAT);
    let entries = match manifest.entries {
        ManifestEntries::Inline(list) => list,
        ManifestEntries::Path(p) => {
            let path = match base {
                Some(b) => b.join(&p),
                None => p.into(),
            };
            parse_triplets(&std::fs::read_to_string(path)?)?
        }
    };
    build_model_with_states(manifest.states, &entries)
}

/// Loads a triplet file, or a manifest when the content is a JSON object.
pub fn load_model(path: &Path) -> Result<GeneratorModel> {
    let text = std::fs::read_to_string(path)?;
    if text.trim_start().starts_with('{') {
        parse_manifest(&text, path.parent())
    } else {
        build_model_with_states(None, &parse_triplets(&text)?)
    }
}

pub fn save_model(model: &GeneratorModel, path: &Path) -> Result<()> {
    std::fs::write(path, write_triplets(model))?;
    Ok(())
}
