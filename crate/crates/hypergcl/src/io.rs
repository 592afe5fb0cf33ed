//! Text and JSON dataset formats and parameter checkpoints.
//!
//! Text datasets are UTF-8 with LF line endings:
//!
//! * hyperedges: one hyperedge per line, space-separated 0-based vertex ids;
//! * features: one vertex per line, space-separated reals;
//! * labels: one class index per line;
//! * sensitive: one `0`/`1` per line.
//!
//! A directory dataset holds these as `hyperedges.txt`, `features.txt` and
//! optionally `labels.txt` and `sensitive.txt`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use hypergcl_core::diffnum::Tensor;
use hypergcl_core::generator::VhgaeParams;
use hypergcl_core::hypergraph::Hypergraph;
use hypergcl_core::model::{ModelParams, Parameters};
use serde::{Deserialize, Serialize};

use crate::error::{DataError, Result};

pub const HYPEREDGES_FILE: &str = "hyperedges.txt";
pub const FEATURES_FILE: &str = "features.txt";
pub const LABELS_FILE: &str = "labels.txt";
pub const SENSITIVE_FILE: &str = "sensitive.txt";

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| DataError::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| DataError::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| DataError::io(path, e))
}

/// Non-final lines of `text` with 1-based numbers. A trailing LF does not
/// open an extra line.
fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    let body = text.strip_suffix('\n').unwrap_or(text);
    let count = if text.is_empty() { 0 } else { usize::MAX };
    body.split('\n').take(count).enumerate().map(|(i, l)| (i + 1, l))
}

fn parse_tokens<T: FromStr>(path: &Path, line: usize, content: &str, what: &str) -> Result<Vec<T>> {
    let content = content.trim_end_matches('\r');
    if content.trim().is_empty() {
        return Err(DataError::parse(path, line, "empty line"));
    }
    content
        .split_whitespace()
        .map(|tok| tok.parse().map_err(|_| DataError::parse(path, line, format!("`{tok}` is not a valid {what}"))))
        .collect()
}

pub fn parse_hyperedges(path: &Path, text: &str) -> Result<Vec<Vec<usize>>> {
    lines(text).map(|(n, l)| parse_tokens(path, n, l, "vertex index")).collect()
}

pub fn parse_features(path: &Path, text: &str) -> Result<Tensor> {
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (n, l) in lines(text) {
        let row: Vec<f64> = parse_tokens(path, n, l, "real number")?;
        if let Some(bad) = row.iter().find(|x| !x.is_finite()) {
            return Err(DataError::parse(path, n, format!("non-finite feature {bad}")));
        }
        match cols {
            None => cols = Some(row.len()),
            Some(c) if c != row.len() => {
                return Err(DataError::parse(path, n, format!("expected {c} features, found {}", row.len())))
            }
            _ => {}
        }
        data.extend(row);
        rows += 1;
    }
    Ok(Tensor::matrix(rows, cols.unwrap_or(0), data)?)
}

fn parse_column<T: FromStr>(path: &Path, text: &str, what: &str) -> Result<Vec<T>> {
    lines(text)
        .map(|(n, l)| {
            let mut v = parse_tokens::<T>(path, n, l, what)?;
            if v.len() != 1 {
                return Err(DataError::parse(path, n, format!("expected one {what}, found {}", v.len())));
            }
            Ok(v.pop().unwrap())
        })
        .collect()
}

pub fn parse_labels(path: &Path, text: &str) -> Result<Vec<usize>> {
    parse_column(path, text, "class index")
}

pub fn parse_sensitive(path: &Path, text: &str) -> Result<Vec<u8>> {
    let values: Vec<u8> = parse_column(path, text, "0/1 value")?;
    if let Some(i) = values.iter().position(|&s| s > 1) {
        return Err(DataError::parse(path, i + 1, format!("sensitive value must be 0 or 1, got {}", values[i])));
    }
    Ok(values)
}

/// Builds a validated hypergraph from parsed columns, reporting file
/// positions for out-of-range indices and row-count mismatches.
fn assemble(
    hyperedges: (&Path, Vec<Vec<usize>>),
    features: Tensor,
    labels: Option<(&Path, Vec<usize>)>,
    sensitive: Option<(&Path, Vec<u8>)>,
) -> Result<Hypergraph> {
    let n = features.rows();
    let (hpath, edges) = hyperedges;
    for (i, members) in edges.iter().enumerate() {
        if let Some(v) = members.iter().find(|&&v| v >= n) {
            return Err(DataError::parse(hpath, i + 1, format!("vertex {v} out of range for {n} feature rows")));
        }
    }
    let mut h = Hypergraph::from_hyperedges(n, &edges, features)?;
    if let Some((path, labels)) = labels {
        if labels.len() != n {
            return Err(DataError::parse(
                path,
                labels.len().min(n) + 1,
                format!("{} labels for {n} feature rows", labels.len()),
            ));
        }
        h = h.with_labels(labels)?;
    }
    if let Some((path, s)) = sensitive {
        if s.len() != n {
            return Err(DataError::parse(
                path,
                s.len().min(n) + 1,
                format!("{} sensitive values for {n} feature rows", s.len()),
            ));
        }
        h = h.with_sensitive(s)?;
    }
    Ok(h)
}

pub fn load_hypergraph(
    hyperedges: &Path,
    features: &Path,
    labels: Option<&Path>,
    sensitive: Option<&Path>,
) -> Result<Hypergraph> {
    let edges = parse_hyperedges(hyperedges, &read_text(hyperedges)?)?;
    let x = parse_features(features, &read_text(features)?)?;
    let y = labels.map(|p| Ok::<_, DataError>((p, parse_labels(p, &read_text(p)?)?))).transpose()?;
    let s = sensitive.map(|p| Ok::<_, DataError>((p, parse_sensitive(p, &read_text(p)?)?))).transpose()?;
    assemble((hyperedges, edges), x, y, s)
}

/// Loads `hyperedges.txt`, `features.txt` and, when present, `labels.txt`
/// and `sensitive.txt` from `dir`.
pub fn load_dir(dir: &Path) -> Result<Hypergraph> {
    let optional = |name: &str| Some(dir.join(name)).filter(|p| p.exists());
    let labels = optional(LABELS_FILE);
    let sensitive = optional(SENSITIVE_FILE);
    load_hypergraph(&dir.join(HYPEREDGES_FILE), &dir.join(FEATURES_FILE), labels.as_deref(), sensitive.as_deref())
}

pub fn format_hyperedges(h: &Hypergraph) -> String {
    let mut out = String::new();
    for members in h.hyperedges() {
        let line: Vec<String> = members.iter().map(usize::to_string).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

/// Shortest round-trip decimal form of every feature.
pub fn format_features(x: &Tensor) -> String {
    let mut out = String::new();
    for r in 0..x.rows() {
        let line: Vec<String> = x.row(r).iter().map(|v| format!("{v}")).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

fn format_column<T: std::fmt::Display>(values: &[T]) -> String {
    values.iter().fold(String::new(), |mut s, v| {
        let _ = writeln!(s, "{v}");
        s
    })
}

/// Writes the text files of [`load_dir`] into `dir`.
pub fn write_dir(dir: &Path, h: &Hypergraph) -> Result<Vec<PathBuf>> {
    let mut written = vec![dir.join(HYPEREDGES_FILE), dir.join(FEATURES_FILE)];
    write_text(&written[0], &format_hyperedges(h))?;
    write_text(&written[1], &format_features(h.features()))?;
    if let Some(y) = h.labels() {
        written.push(dir.join(LABELS_FILE));
        write_text(written.last().unwrap(), &format_column(y))?;
    }
    if let Some(s) = h.sensitive() {
        written.push(dir.join(SENSITIVE_FILE));
        write_text(written.last().unwrap(), &format_column(s))?;
    }
    Ok(written)
}

/// Single-file JSON dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bundle {
    pub n: usize,
    pub hyperedges: Vec<Vec<usize>>,
    pub features: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sensitive: Option<Vec<u8>>,
}

impl Bundle {
    pub fn from_hypergraph(h: &Hypergraph) -> Self {
        let x = h.features();
        Self {
            n: h.num_vertices(),
            hyperedges: h.hyperedges(),
            features: (0..x.rows()).map(|r| x.row(r).to_vec()).collect(),
            labels: h.labels().map(<[usize]>::to_vec),
            sensitive: h.sensitive().map(<[u8]>::to_vec),
        }
    }

    pub fn into_hypergraph(self, path: &Path) -> Result<Hypergraph> {
        if self.features.len() != self.n {
            return Err(DataError::format(path, format!("n = {} but {} feature rows", self.n, self.features.len())));
        }
        let cols = self.features.first().map_or(0, Vec::len);
        if let Some(i) = self.features.iter().position(|r| r.len() != cols) {
            return Err(DataError::format(
                path,
                format!("feature row {i} has {} values, expected {cols}", self.features[i].len()),
            ));
        }
        for (i, members) in self.hyperedges.iter().enumerate() {
            if members.is_empty() {
                return Err(DataError::format(path, format!("hyperedge {i} is empty")));
            }
            if let Some(v) = members.iter().find(|&&v| v >= self.n) {
                return Err(DataError::format(
                    path,
                    format!("hyperedge {i}: vertex {v} out of range for n = {}", self.n),
                ));
            }
        }
        let x = Tensor::matrix(self.n, cols, self.features.into_iter().flatten().collect())?;
        let mut h = Hypergraph::from_hyperedges(self.n, &self.hyperedges, x)?;
        if let Some(y) = self.labels {
            h = h.with_labels(y)?;
        }
        if let Some(s) = self.sensitive {
            if s.iter().any(|&v| v > 1) {
                return Err(DataError::format(path, "sensitive values must be 0 or 1"));
            }
            h = h.with_sensitive(s)?;
        }
        Ok(h)
    }
}

pub fn load_bundle(path: &Path) -> Result<Hypergraph> {
    let bundle: Bundle =
        serde_json::from_str(&read_text(path)?).map_err(|e| DataError::parse(path, e.line(), e.to_string()))?;
    bundle.into_hypergraph(path)
}

pub fn save_bundle(path: &Path, h: &Hypergraph) -> Result<()> {
    let json = serde_json::to_string(&Bundle::from_hypergraph(h)).expect("bundle serializes");
    write_text(path, &(json + "\n"))
}

/// One entry of a parameter checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    /// Row-major.
    pub values: Vec<f64>,
}

pub fn checkpoint_json(params: &impl Parameters) -> String {
    let entries: Vec<NamedTensor> = params
        .named()
        .into_iter()
        .map(|(name, t)| NamedTensor { name, shape: t.shape().to_vec(), values: t.data().to_vec() })
        .collect();
    serde_json::to_string_pretty(&entries).expect("checkpoint serializes") + "\n"
}

pub fn save_checkpoint(path: &Path, params: &impl Parameters) -> Result<()> {
    write_text(path, &checkpoint_json(params))
}

pub fn read_checkpoint(path: &Path) -> Result<Vec<(String, Tensor)>> {
    let entries: Vec<NamedTensor> =
        serde_json::from_str(&read_text(path)?).map_err(|e| DataError::parse(path, e.line(), e.to_string()))?;
    entries
        .into_iter()
        .map(|e| {
            let t = Tensor::new(e.shape, e.values)
                .map_err(|err| DataError::format(path, format!("`{}`: {err}", e.name)))?;
            Ok((e.name, t))
        })
        .collect()
}

pub fn load_model(path: &Path) -> Result<ModelParams> {
    ModelParams::from_named(&read_checkpoint(path)?).map_err(|e| DataError::format(path, e.to_string()))
}

pub fn load_generator(path: &Path) -> Result<VhgaeParams> {
    VhgaeParams::from_named(&read_checkpoint(path)?).map_err(|e| DataError::format(path, e.to_string()))
}
