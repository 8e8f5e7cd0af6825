//! Delimited-text network input.
//!
//! Edge files hold one `src,dst` pair of node labels per line, without a
//! header. Attribute files start with a `node,attr1,attr2,...` header; a
//! column whose non-missing cells all parse as numbers is numeric, any other
//! column is categorical. Empty cells and `NA` are missing.
//!
//! Nodes are indexed in order of first appearance, edges first. A node that
//! only appears in the attribute file becomes an isolate. Blank lines and
//! lines starting with `#` are skipped.

use std::collections::HashMap;
use std::path::Path;

use thiserror::Error;

use crate::network::{AttributeColumn, Network, NetworkError};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{file} line {line}: {reason}")]
    Malformed {
        file: &'static str,
        line: u64,
        reason: String,
    },
    #[error("edge file line {line}: self-loop at `{node}`")]
    SelfLoop { line: u64, node: String },
    #[error("attribute file line {line}: node `{node}` listed twice")]
    DuplicateNode { line: u64, node: String },
    #[error(transparent)]
    Network(#[from] NetworkError),
}

fn reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes())
}

fn malformed(file: &'static str, line: u64, reason: impl Into<String>) -> IngestError {
    IngestError::Malformed {
        file,
        line,
        reason: reason.into(),
    }
}

fn is_missing(cell: &str) -> bool {
    cell.is_empty() || cell.eq_ignore_ascii_case("na")
}

#[derive(Default)]
struct Labels {
    index: HashMap<String, usize>,
    names: Vec<String>,
}

impl Labels {
    fn id(&mut self, label: &str) -> usize {
        if let Some(&i) = self.index.get(label) {
            return i;
        }
        self.names.push(label.to_owned());
        self.index.insert(label.to_owned(), self.names.len() - 1);
        self.names.len() - 1
    }
}

/// Builds a network from the text of an edge file and an optional attribute file.
pub fn parse_network(
    edges: &str,
    attributes: Option<&str>,
    directed: bool,
) -> Result<Network, IngestError> {
    let mut labels = Labels::default();
    let mut pairs = Vec::new();
    for rec in reader(edges).records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            malformed("edge file", line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        if rec.len() != 2 {
            return Err(malformed(
                "edge file",
                line,
                format!("expected 2 fields, found {}", rec.len()),
            ));
        }
        let (a, b) = (&rec[0], &rec[1]);
        if a.is_empty() || b.is_empty() {
            return Err(malformed("edge file", line, "empty node label"));
        }
        if a == b {
            return Err(IngestError::SelfLoop {
                line,
                node: a.to_owned(),
            });
        }
        pairs.push((labels.id(a), labels.id(b)));
    }

    let mut columns: Vec<(String, Vec<(usize, String)>)> = Vec::new();
    if let Some(text) = attributes {
        let mut rows = reader(text).into_records();
        let header = loop {
            match rows.next() {
                None => return Err(malformed("attribute file", 1, "missing header")),
                Some(Err(e)) => return Err(malformed("attribute file", 1, e.to_string())),
                Some(Ok(r)) if r.len() == 1 && r[0].is_empty() => continue,
                Some(Ok(r)) => break r,
            }
        };
        if header.len() < 2 {
            return Err(malformed(
                "attribute file",
                1,
                "header needs a node column and at least one attribute",
            ));
        }
        columns = header
            .iter()
            .skip(1)
            .map(|h| (h.to_owned(), Vec::new()))
            .collect();
        let mut seen = HashMap::new();
        for rec in rows {
            let rec = rec.map_err(|e| {
                let line = e.position().map_or(0, |p| p.line());
                malformed("attribute file", line, e.to_string())
            })?;
            let line = rec.position().map_or(0, |p| p.line());
            if rec.len() == 1 && rec[0].is_empty() {
                continue;
            }
            if rec.len() != header.len() {
                return Err(malformed(
                    "attribute file",
                    line,
                    format!("expected {} fields, found {}", header.len(), rec.len()),
                ));
            }
            let node = labels.id(&rec[0]);
            if seen.insert(node, line).is_some() {
                return Err(IngestError::DuplicateNode {
                    line,
                    node: rec[0].to_owned(),
                });
            }
            for (k, (_, col)) in columns.iter_mut().enumerate() {
                col.push((node, rec[k + 1].to_owned()));
            }
        }
    }

    let n = labels.names.len();
    let mut net = Network::from_edges(n, directed, pairs)?;
    for (name, cells) in columns {
        let mut raw: Vec<Option<String>> = vec![None; n];
        for (node, cell) in cells {
            if !is_missing(&cell) {
                raw[node] = Some(cell);
            }
        }
        let numeric: Option<Vec<Option<f64>>> = raw
            .iter()
            .map(|c| match c {
                None => Some(None),
                Some(s) => s.parse::<f64>().ok().filter(|x| x.is_finite()).map(Some),
            })
            .collect();
        let column = match numeric {
            Some(values) if raw.iter().any(Option::is_some) => AttributeColumn::numeric(values),
            _ => AttributeColumn::categorical(&raw),
        };
        net = net.with_attribute(name, column)?;
    }
    Ok(net.with_labels(labels.names))
}

fn read(path: &Path) -> Result<String, IngestError> {
    std::fs::read_to_string(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn read_network(
    edges: &Path,
    attributes: Option<&Path>,
    directed: bool,
) -> Result<Network, IngestError> {
    let e = read(edges)?;
    let a = attributes.map(read).transpose()?;
    parse_network(&e, a.as_deref(), directed)
}
