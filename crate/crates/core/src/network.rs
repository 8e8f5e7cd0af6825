//! Binary networks with typed node attributes.
//!
//! Adjacency is held as one bit row per node (out-neighbours) plus, for
//! directed graphs, one bit row per node of in-neighbours. Shared-partner
//! counts then reduce to a popcount over the AND of two rows.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetworkError {
    #[error("self-loop requested at node {0}")]
    SelfLoop(usize),
    #[error("node {node} out of range for a network of {n} nodes")]
    NodeOutOfRange { node: usize, n: usize },
    #[error("attribute `{name}` has {got} entries, expected {expected}")]
    AttributeLength {
        name: String,
        got: usize,
        expected: usize,
    },
    #[error("numeric attribute `{0}` contains a non-finite value")]
    NonFinite(String),
    #[error("categorical attribute `{0}` has no observed level")]
    NoLevels(String),
}

/// Fixed-width bit row.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub(crate) struct BitRow(Vec<u64>);

impl BitRow {
    fn new(n: usize) -> Self {
        BitRow(vec![0; n.div_ceil(64)])
    }

    #[inline]
    pub(crate) fn get(&self, i: usize) -> bool {
        self.0[i >> 6] >> (i & 63) & 1 == 1
    }

    #[inline]
    fn set(&mut self, i: usize, v: bool) {
        let mask = 1u64 << (i & 63);
        if v {
            self.0[i >> 6] |= mask;
        } else {
            self.0[i >> 6] &= !mask;
        }
    }

    #[inline]
    pub(crate) fn count(&self) -> u32 {
        self.0.iter().map(|w| w.count_ones()).sum()
    }

    #[inline]
    pub(crate) fn and_count(&self, other: &BitRow) -> u32 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a & b).count_ones())
            .sum()
    }

    /// Indices set in `self & other`.
    pub(crate) fn and_iter<'a>(&'a self, other: &'a BitRow) -> impl Iterator<Item = usize> + 'a {
        self.0
            .iter()
            .zip(&other.0)
            .enumerate()
            .flat_map(|(w, (a, b))| BitIter(a & b).map(move |bit| (w << 6) + bit))
    }

    pub(crate) fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0
            .iter()
            .enumerate()
            .flat_map(|(w, &word)| BitIter(word).map(move |bit| (w << 6) + bit))
    }
}

struct BitIter(u64);

impl Iterator for BitIter {
    type Item = usize;
    #[inline]
    fn next(&mut self) -> Option<usize> {
        if self.0 == 0 {
            return None;
        }
        let tz = self.0.trailing_zeros() as usize;
        self.0 &= self.0 - 1;
        Some(tz)
    }
}

/// A per-node attribute column. Missing entries are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AttributeColumn {
    Categorical {
        /// Distinct observed labels, sorted lexicographically.
        levels: Vec<String>,
        /// Index into `levels` for every node.
        codes: Vec<Option<usize>>,
    },
    Numeric {
        values: Vec<Option<f64>>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttributeKind {
    Categorical,
    Numeric,
}

impl AttributeColumn {
    pub fn categorical<S: AsRef<str>>(values: &[Option<S>]) -> Self {
        let levels: BTreeSet<&str> = values.iter().flatten().map(|s| s.as_ref()).collect();
        let levels: Vec<String> = levels.into_iter().map(str::to_owned).collect();
        let codes = values
            .iter()
            .map(|v| {
                v.as_ref().map(|s| {
                    levels
                        .binary_search_by(|l| l.as_str().cmp(s.as_ref()))
                        .unwrap()
                })
            })
            .collect();
        AttributeColumn::Categorical { levels, codes }
    }

    pub fn numeric(values: Vec<Option<f64>>) -> Self {
        AttributeColumn::Numeric { values }
    }

    pub fn kind(&self) -> AttributeKind {
        match self {
            AttributeColumn::Categorical { .. } => AttributeKind::Categorical,
            AttributeColumn::Numeric { .. } => AttributeKind::Numeric,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            AttributeColumn::Categorical { codes, .. } => codes.len(),
            AttributeColumn::Numeric { values } => values.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn has_missing(&self) -> bool {
        match self {
            AttributeColumn::Categorical { codes, .. } => codes.iter().any(Option::is_none),
            AttributeColumn::Numeric { values } => values.iter().any(Option::is_none),
        }
    }

    /// Number of distinct observed values.
    pub fn distinct(&self) -> usize {
        match self {
            AttributeColumn::Categorical { levels, .. } => levels.len(),
            AttributeColumn::Numeric { values } => {
                let mut v: Vec<f64> = values.iter().flatten().copied().collect();
                v.sort_by(f64::total_cmp);
                v.dedup();
                v.len()
            }
        }
    }

    /// A column supports attribute terms when it is complete and not constant.
    pub fn usable(&self) -> bool {
        !self.has_missing() && self.distinct() >= 2
    }

    #[inline]
    pub(crate) fn code(&self, i: usize) -> Option<usize> {
        match self {
            AttributeColumn::Categorical { codes, .. } => codes[i],
            AttributeColumn::Numeric { .. } => None,
        }
    }

    #[inline]
    pub(crate) fn value(&self, i: usize) -> Option<f64> {
        match self {
            AttributeColumn::Numeric { values } => values[i],
            AttributeColumn::Categorical { .. } => None,
        }
    }

    fn validate(&self, name: &str, n: usize) -> Result<(), NetworkError> {
        if self.len() != n {
            return Err(NetworkError::AttributeLength {
                name: name.to_owned(),
                got: self.len(),
                expected: n,
            });
        }
        match self {
            AttributeColumn::Categorical { levels, .. } if levels.is_empty() => {
                Err(NetworkError::NoLevels(name.to_owned()))
            }
            AttributeColumn::Numeric { values }
                if values.iter().flatten().any(|v| !v.is_finite()) =>
            {
                Err(NetworkError::NonFinite(name.to_owned()))
            }
            _ => Ok(()),
        }
    }
}

/// Immutable binary network on nodes `0..n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    n: usize,
    directed: bool,
    out: Vec<BitRow>,
    // identical to `out` for undirected networks
    inn: Vec<BitRow>,
    edge_count: usize,
    attributes: BTreeMap<String, AttributeColumn>,
    labels: Option<Vec<String>>,
}

impl Network {
    pub fn empty(n: usize, directed: bool) -> Self {
        Network {
            n,
            directed,
            out: vec![BitRow::new(n); n],
            inn: vec![BitRow::new(n); n],
            edge_count: 0,
            attributes: BTreeMap::new(),
            labels: None,
        }
    }

    /// Builds a network from an edge list. Duplicate edges collapse; for
    /// undirected networks `(i, j)` and `(j, i)` are the same edge.
    pub fn from_edges(
        n: usize,
        directed: bool,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self, NetworkError> {
        let mut net = Network::empty(n, directed);
        for (i, j) in edges {
            net.check_dyad(i, j)?;
            if !net.has_edge(i, j) {
                net.flip(i, j);
            }
        }
        Ok(net)
    }

    pub fn with_attribute(
        mut self,
        name: impl Into<String>,
        column: AttributeColumn,
    ) -> Result<Self, NetworkError> {
        let name = name.into();
        column.validate(&name, self.n)?;
        self.attributes.insert(name, column);
        Ok(self)
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Self {
        assert_eq!(labels.len(), self.n);
        self.labels = Some(labels);
        self
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    /// Ordered dyads for directed networks, unordered otherwise.
    pub fn dyad_count(&self) -> usize {
        dyad_count(self.n, self.directed)
    }

    pub fn density(&self) -> f64 {
        let nd = self.dyad_count();
        if nd == 0 {
            0.0
        } else {
            self.edge_count as f64 / nd as f64
        }
    }

    pub fn attributes(&self) -> &BTreeMap<String, AttributeColumn> {
        &self.attributes
    }

    pub fn attribute(&self, name: &str) -> Option<&AttributeColumn> {
        self.attributes.get(name)
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    #[inline]
    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.out[i].get(j)
    }

    pub fn out_degree(&self, i: usize) -> usize {
        self.out[i].count() as usize
    }

    pub fn in_degree(&self, i: usize) -> usize {
        self.inn[i].count() as usize
    }

    /// Degree in the undirected case; total degree (in + out) when directed.
    pub fn degree(&self, i: usize) -> usize {
        if self.directed {
            self.out_degree(i) + self.in_degree(i)
        } else {
            self.out_degree(i)
        }
    }

    #[inline]
    pub(crate) fn out_row(&self, i: usize) -> &BitRow {
        &self.out[i]
    }

    #[inline]
    pub(crate) fn in_row(&self, i: usize) -> &BitRow {
        &self.inn[i]
    }

    /// Edges as `(i, j)`; undirected edges are reported once with `i < j`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |i| {
            self.out[i]
                .iter()
                .filter(move |&j| self.directed || i < j)
                .map(move |j| (i, j))
        })
    }

    /// Every dyad in a fixed order: `(i, j)` with `i < j` when undirected,
    /// all ordered pairs `i != j` when directed.
    pub fn dyads(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let directed = self.directed;
        let n = self.n;
        (0..n).flat_map(move |i| {
            let start = if directed { 0 } else { i + 1 };
            (start..n).filter(move |&j| j != i).map(move |j| (i, j))
        })
    }

    pub(crate) fn check_dyad(&self, i: usize, j: usize) -> Result<(), NetworkError> {
        for node in [i, j] {
            if node >= self.n {
                return Err(NetworkError::NodeOutOfRange { node, n: self.n });
            }
        }
        if i == j {
            return Err(NetworkError::SelfLoop(i));
        }
        Ok(())
    }

    /// Returns a copy with dyad `(i, j)` flipped.
    pub fn toggle(&self, i: usize, j: usize) -> Result<Network, NetworkError> {
        self.check_dyad(i, j)?;
        let mut next = self.clone();
        next.flip(i, j);
        Ok(next)
    }

    /// In-place flip used by the sampler and the exact enumerator.
    /// Caller guarantees a valid dyad.
    pub(crate) fn flip(&mut self, i: usize, j: usize) {
        let now = !self.out[i].get(j);
        self.out[i].set(j, now);
        if self.directed {
            self.inn[j].set(i, now);
        } else {
            self.out[j].set(i, now);
            self.inn[i].set(j, now);
            self.inn[j].set(i, now);
        }
        if now {
            self.edge_count += 1;
        } else {
            self.edge_count -= 1;
        }
    }

    /// Number of mutual (reciprocated) pairs; zero for undirected networks.
    pub fn mutual_pairs(&self) -> usize {
        if !self.directed {
            return 0;
        }
        (0..self.n)
            .map(|i| {
                self.out[i]
                    .and_iter(&self.inn[i])
                    .filter(|&j| j > i)
                    .count()
            })
            .sum()
    }

    /// Undirected skeleton neighbour row.
    fn skeleton_row(&self, i: usize) -> BitRow {
        if !self.directed {
            return self.out[i].clone();
        }
        BitRow(
            self.out[i]
                .0
                .iter()
                .zip(&self.inn[i].0)
                .map(|(a, b)| a | b)
                .collect(),
        )
    }

    pub fn diagnostics(&self) -> Diagnostics {
        diagnostics(self)
    }

    pub fn metadata(&self) -> Metadata {
        Metadata {
            directed: self.directed,
            node_count: self.n,
            attributes: self
                .attributes
                .iter()
                .map(|(name, col)| AttributeInfo {
                    name: name.clone(),
                    kind: col.kind(),
                    levels: match col {
                        AttributeColumn::Categorical { levels, .. } => Some(levels.len()),
                        AttributeColumn::Numeric { .. } => None,
                    },
                    missing: col.has_missing(),
                    usable: col.usable(),
                })
                .collect(),
        }
    }
}

pub(crate) fn dyad_count(n: usize, directed: bool) -> usize {
    if directed {
        n * n.saturating_sub(1)
    } else {
        n * n.saturating_sub(1) / 2
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegreeSummary {
    pub min: usize,
    pub mean: f64,
    pub max: usize,
    /// Population standard deviation.
    pub sd: f64,
}

impl DegreeSummary {
    fn from_degrees(deg: &[usize]) -> Self {
        if deg.is_empty() {
            return DegreeSummary {
                min: 0,
                mean: 0.0,
                max: 0,
                sd: 0.0,
            };
        }
        let n = deg.len() as f64;
        let mean = deg.iter().sum::<usize>() as f64 / n;
        let var = deg.iter().map(|&d| (d as f64 - mean).powi(2)).sum::<f64>() / n;
        DegreeSummary {
            min: *deg.iter().min().unwrap(),
            mean,
            max: *deg.iter().max().unwrap(),
            sd: var.sqrt(),
        }
    }

    /// Variance over mean; 0 for an edgeless network.
    pub fn dispersion(&self) -> f64 {
        if self.mean > 0.0 {
            self.sd * self.sd / self.mean
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DegreeDiagnostics {
    Undirected {
        degree: DegreeSummary,
    },
    Directed {
        in_degree: DegreeSummary,
        out_degree: DegreeSummary,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub node_count: usize,
    pub dyad_count: usize,
    pub edge_count: usize,
    pub density: f64,
    pub degrees: DegreeDiagnostics,
    /// Global transitivity of the undirected skeleton.
    pub clustering: f64,
    /// Present iff directed.
    pub reciprocity: Option<f64>,
    /// Set when the network has no edges, so ratios were defined as 0.
    pub zero_edges: bool,
}

pub fn diagnostics(net: &Network) -> Diagnostics {
    let n = net.node_count();
    let degrees = if net.is_directed() {
        let ins: Vec<usize> = (0..n).map(|i| net.in_degree(i)).collect();
        let outs: Vec<usize> = (0..n).map(|i| net.out_degree(i)).collect();
        DegreeDiagnostics::Directed {
            in_degree: DegreeSummary::from_degrees(&ins),
            out_degree: DegreeSummary::from_degrees(&outs),
        }
    } else {
        let d: Vec<usize> = (0..n).map(|i| net.degree(i)).collect();
        DegreeDiagnostics::Undirected {
            degree: DegreeSummary::from_degrees(&d),
        }
    };
    let reciprocity = net.is_directed().then(|| {
        if net.edge_count() == 0 {
            0.0
        } else {
            2.0 * net.mutual_pairs() as f64 / net.edge_count() as f64
        }
    });
    Diagnostics {
        node_count: n,
        dyad_count: net.dyad_count(),
        edge_count: net.edge_count(),
        density: net.density(),
        degrees,
        clustering: transitivity(net),
        reciprocity,
        zero_edges: net.edge_count() == 0,
    }
}

/// 3 × triangles / connected triples on the undirected skeleton.
pub fn transitivity(net: &Network) -> f64 {
    let n = net.node_count();
    let rows: Vec<BitRow> = (0..n).map(|i| net.skeleton_row(i)).collect();
    let mut closed = 0u64; // each triangle counted 6 times
    let mut triples = 0u64; // each connected triple counted twice
    for row in &rows {
        let d = row.count() as u64;
        triples += d * d.saturating_sub(1);
        for j in row.iter() {
            closed += row.and_count(&rows[j]) as u64;
        }
    }
    if triples == 0 {
        0.0
    } else {
        closed as f64 / triples as f64
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeInfo {
    pub name: String,
    pub kind: AttributeKind,
    /// Level count for categorical columns.
    pub levels: Option<usize>,
    pub missing: bool,
    /// Complete and non-constant.
    pub usable: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Metadata {
    pub directed: bool,
    pub node_count: usize,
    pub attributes: Vec<AttributeInfo>,
}

/// Histogram of shortest-path lengths over all dyads.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeodesicHistogram {
    /// `counts[d - 1]` dyads at distance `d`, for `d` in `1..n`.
    pub counts: Vec<u64>,
    pub unreachable: u64,
}

impl GeodesicHistogram {
    pub fn at(&self, d: usize) -> u64 {
        if d == 0 {
            0
        } else {
            self.counts.get(d - 1).copied().unwrap_or(0)
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum::<u64>() + self.unreachable
    }
}

/// Breadth-first search from every source. Directed distances follow edge
/// direction and count ordered pairs; undirected ones count each pair once.
pub fn geodesic_distribution(net: &Network) -> GeodesicHistogram {
    let n = net.node_count();
    let mut counts = vec![0u64; n.saturating_sub(1)];
    let mut unreachable = 0u64;
    let mut dist = vec![usize::MAX; n];
    let mut queue = VecDeque::with_capacity(n);
    for src in 0..n {
        dist.iter_mut().for_each(|d| *d = usize::MAX);
        dist[src] = 0;
        queue.clear();
        queue.push_back(src);
        while let Some(u) = queue.pop_front() {
            for v in net.out_row(u).iter() {
                if dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        let targets = if net.is_directed() { 0..n } else { src + 1..n };
        for t in targets {
            if t == src {
                continue;
            }
            match dist[t] {
                usize::MAX => unreachable += 1,
                d => counts[d - 1] += 1,
            }
        }
    }
    GeodesicHistogram {
        counts,
        unreachable,
    }
}
