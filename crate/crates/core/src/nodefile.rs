//! Plain-text node tables.
//!
//! ```text
//! # symnodes node file
//! # version: 1
//! # element: tri
//! # degree: 2
//! # count: 6
//! # source: optimized
//! # config: 3f1c…
//! -1.0000000000000000e0 -1.0000000000000000e0
//! …
//! ```
//!
//! Coordinates use 17 significant digits, enough to round-trip every
//! `f64`, so write → read → write reproduces the file byte for byte.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::ElementKind;
use crate::symmetry::{NodalDistribution, Source};

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "# symnodes node file";

#[derive(Debug, Clone, PartialEq)]
pub struct NodeFile {
    pub kind: ElementKind,
    pub degree: usize,
    /// `optimized`, a baseline name, or a free-form tag.
    pub source: String,
    /// Hash of the settings that produced the nodes.
    pub config_hash: String,
    pub nodes: Vec<Vec<f64>>,
}

/// Lowercase hex SHA-256 of `text`.
pub fn config_hash(text: &str) -> String {
    let digest = Sha256::digest(text.as_bytes());
    let mut out = String::with_capacity(64);
    for b in digest.iter() {
        write!(out, "{b:02x}").unwrap();
    }
    out
}

pub fn source_tag(source: &Source) -> String {
    match source {
        Source::Optimized => "optimized".into(),
        Source::Baseline(name) => name.clone(),
        Source::File(name) => name.clone(),
    }
}

impl NodeFile {
    pub fn from_distribution(dist: &NodalDistribution, config_hash: String) -> Self {
        NodeFile {
            kind: dist.kind,
            degree: dist.degree,
            source: source_tag(&dist.source),
            config_hash,
            nodes: dist.nodes.clone(),
        }
    }

    /// Validated distribution (count, containment, distinct nodes).
    pub fn to_distribution(&self) -> Result<NodalDistribution> {
        let source = match self.source.as_str() {
            "optimized" => Source::Optimized,
            "gll" | "uniform" => Source::Baseline(self.source.clone()),
            other => Source::File(other.to_string()),
        };
        NodalDistribution::new(self.kind, self.degree, self.nodes.clone(), source)
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        writeln!(s, "{MAGIC}").unwrap();
        writeln!(s, "# version: {FORMAT_VERSION}").unwrap();
        writeln!(s, "# element: {}", self.kind).unwrap();
        writeln!(s, "# degree: {}", self.degree).unwrap();
        writeln!(s, "# count: {}", self.nodes.len()).unwrap();
        writeln!(s, "# source: {}", self.source).unwrap();
        writeln!(s, "# config: {}", self.config_hash).unwrap();
        for x in &self.nodes {
            let cols: Vec<String> = x.iter().map(|v| format!("{:.16e}", v + 0.0)).collect();
            writeln!(s, "{}", cols.join(" ")).unwrap();
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut kind = None;
        let mut degree = None;
        let mut count = None;
        let mut source = String::from("file");
        let mut config = String::new();
        let mut nodes = Vec::new();
        let mut last_line = 0;
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            last_line = line_no;
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            let perr = |message: String| Error::Parse { line: line_no, message };
            if let Some(rest) = line.strip_prefix('#') {
                let Some((key, value)) = rest.split_once(':') else {
                    continue;
                };
                let value = value.trim();
                match key.trim() {
                    "version" => {
                        let v: u32 = value.parse().map_err(|_| perr(format!("bad version '{value}'")))?;
                        if v != FORMAT_VERSION {
                            return Err(perr(format!("unsupported format version {v}")));
                        }
                    }
                    "element" => kind = Some(value.parse::<ElementKind>().map_err(|e| perr(e.to_string()))?),
                    "degree" => degree = Some(value.parse::<usize>().map_err(|_| perr(format!("bad degree '{value}'")))?),
                    "count" => count = Some(value.parse::<usize>().map_err(|_| perr(format!("bad count '{value}'")))?),
                    "source" => source = value.to_string(),
                    "config" => config = value.to_string(),
                    _ => {}
                }
                continue;
            }
            let kind = kind.ok_or_else(|| perr("node data before the element header".into()))?;
            let x = line
                .split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|_| perr(format!("bad number '{t}'"))))
                .collect::<Result<Vec<f64>>>()?;
            if x.len() != kind.dim() {
                return Err(perr(format!("expected {} coordinates, found {}", kind.dim(), x.len())));
            }
            if x.iter().any(|v| !v.is_finite()) {
                return Err(perr("non-finite coordinate".into()));
            }
            nodes.push(x);
        }
        let missing = |what: &str| Error::Parse {
            line: last_line,
            message: format!("missing '{what}' header"),
        };
        let kind = kind.ok_or_else(|| missing("element"))?;
        let degree = degree.ok_or_else(|| missing("degree"))?;
        let count = count.ok_or_else(|| missing("count"))?;
        if count != nodes.len() {
            return Err(Error::Parse {
                line: last_line,
                message: format!("node count mismatch: header declares {count}, body has {}", nodes.len()),
            });
        }
        Ok(NodeFile {
            kind,
            degree,
            source,
            config_hash: config,
            nodes,
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        NodeFile::parse(&text)
    }

    /// Read and validate in one step.
    pub fn read_distribution(path: &Path) -> Result<NodalDistribution> {
        NodeFile::read(path)?.to_distribution()
    }

    /// Write through a temporary sibling and rename, so readers never see
    /// a partial file.
    pub fn write_atomic(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.render().as_bytes())
    }
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(format!(".tmp{}", std::process::id()));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}
