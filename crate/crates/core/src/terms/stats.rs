//! Statistic evaluation and change scores.
//!
//! Change scores use the convention `s(y with ij) - s(y without ij)`
//! whatever the current state of the dyad. Shared-partner quantities are
//! read off the current rows and corrected by the dyad's own indicator, so
//! no copy of the network is needed.

use crate::network::{AttributeColumn, AttributeKind, Network};

use super::{Family, ModelSpec, Term, TermError};

/// Geometric weights for one decay: `r = 1 - exp(-decay)`,
/// `w(k) = exp(decay) * (1 - r^k)`.
#[derive(Debug, Clone)]
struct GeoWeights {
    scale: f64,
    /// `r^k` for `k = 0..=n`.
    pow: Vec<f64>,
}

impl GeoWeights {
    fn new(decay: f64, n: usize) -> Self {
        let r = 1.0 - (-decay).exp();
        let mut pow = Vec::with_capacity(n + 2);
        let mut p = 1.0;
        for _ in 0..n + 2 {
            pow.push(p);
            p *= r;
        }
        GeoWeights {
            scale: decay.exp(),
            pow,
        }
    }

    #[inline]
    fn weight(&self, k: usize) -> f64 {
        self.scale * (1.0 - self.pow[k])
    }

    /// `w(k + 1) - w(k)`, which is `r^k`.
    #[inline]
    fn step(&self, k: usize) -> f64 {
        self.pow[k]
    }
}

#[derive(Debug, Clone)]
enum Compiled<'a> {
    Edges,
    Mutual,
    Triangle,
    Twopath,
    Gwesp(GeoWeights),
    Gwdsp(GeoWeights),
    Gwdegree(GeoWeights),
    Gwidegree(GeoWeights),
    Gwodegree(GeoWeights),
    Nodematch(&'a AttributeColumn),
    Nodefactor(&'a AttributeColumn),
    Nodecov(&'a AttributeColumn),
    Absdiff(&'a AttributeColumn),
}

fn inadmissible(term: &Term, reason: impl Into<String>) -> TermError {
    TermError::Inadmissible {
        term: term.to_string(),
        reason: reason.into(),
    }
}

fn compile<'a>(term: &Term, net: &'a Network) -> Result<Compiled<'a>, TermError> {
    let family = term.family();
    match family {
        Family::Mutual | Family::Gwidegree | Family::Gwodegree if !net.is_directed() => {
            return Err(inadmissible(term, "requires a directed network"))
        }
        Family::Gwdegree if net.is_directed() => {
            return Err(inadmissible(term, "requires an undirected network"))
        }
        _ => {}
    }
    let column = match (term.attribute(), family.attribute_kind()) {
        (Some(name), Some(kind)) => {
            let col = net
                .attribute(name)
                .ok_or_else(|| inadmissible(term, format!("no attribute named `{name}`")))?;
            if col.kind() != kind {
                let want = match kind {
                    AttributeKind::Categorical => "categorical",
                    AttributeKind::Numeric => "numeric",
                };
                return Err(inadmissible(
                    term,
                    format!("attribute `{name}` is not {want}"),
                ));
            }
            if col.has_missing() {
                return Err(inadmissible(
                    term,
                    format!("attribute `{name}` has missing values"),
                ));
            }
            Some(col)
        }
        _ => None,
    };
    let n = net.node_count();
    let geo = |d: super::Decay| GeoWeights::new(d.get(), n);
    Ok(match term {
        Term::Edges => Compiled::Edges,
        Term::Mutual => Compiled::Mutual,
        Term::Triangle => Compiled::Triangle,
        Term::Twopath => Compiled::Twopath,
        Term::Gwesp(d) => Compiled::Gwesp(geo(*d)),
        Term::Gwdsp(d) => Compiled::Gwdsp(geo(*d)),
        Term::Gwdegree(d) => Compiled::Gwdegree(geo(*d)),
        Term::Gwidegree(d) => Compiled::Gwidegree(geo(*d)),
        Term::Gwodegree(d) => Compiled::Gwodegree(geo(*d)),
        Term::Nodematch(_) => Compiled::Nodematch(column.unwrap()),
        Term::Nodefactor(_) => Compiled::Nodefactor(column.unwrap()),
        Term::Nodecov(_) => Compiled::Nodecov(column.unwrap()),
        Term::Absdiff(_) => Compiled::Absdiff(column.unwrap()),
    })
}

impl Compiled<'_> {
    fn value(&self, net: &Network) -> f64 {
        let n = net.node_count();
        let directed = net.is_directed();
        match self {
            Compiled::Edges => net.edge_count() as f64,
            Compiled::Mutual => net.mutual_pairs() as f64,
            Compiled::Triangle => {
                // directed: transitive triples i->j with i->k->j
                let closed: u64 = net
                    .edges()
                    .map(|(i, j)| net.out_row(i).and_count(net.in_row(j)) as u64)
                    .sum();
                if directed {
                    closed as f64
                } else {
                    (closed / 3) as f64
                }
            }
            Compiled::Twopath => {
                if directed {
                    (0..n)
                        .map(|k| {
                            let through = net.in_degree(k) * net.out_degree(k);
                            (through - net.in_row(k).and_count(net.out_row(k)) as usize) as f64
                        })
                        .sum()
                } else {
                    (0..n)
                        .map(|k| {
                            let d = net.degree(k);
                            (d * d.saturating_sub(1) / 2) as f64
                        })
                        .sum()
                }
            }
            Compiled::Gwesp(w) => net
                .edges()
                .map(|(i, j)| w.weight(net.out_row(i).and_count(net.in_row(j)) as usize))
                .sum(),
            Compiled::Gwdsp(w) => net
                .dyads()
                .map(|(i, j)| w.weight(net.out_row(i).and_count(net.in_row(j)) as usize))
                .sum(),
            Compiled::Gwdegree(w) => (0..n).map(|i| w.weight(net.degree(i))).sum(),
            Compiled::Gwidegree(w) => (0..n).map(|i| w.weight(net.in_degree(i))).sum(),
            Compiled::Gwodegree(w) => (0..n).map(|i| w.weight(net.out_degree(i))).sum(),
            _ => net.edges().map(|(i, j)| self.dyadic(i, j)).sum(),
        }
    }

    /// Change score of dyad-independent attribute terms.
    #[inline]
    fn dyadic(&self, i: usize, j: usize) -> f64 {
        match self {
            Compiled::Nodematch(c) => (c.code(i) == c.code(j)) as u8 as f64,
            // level 0 (first in lexicographic order) is the omitted baseline
            Compiled::Nodefactor(c) => {
                (c.code(i) != Some(0)) as u8 as f64 + (c.code(j) != Some(0)) as u8 as f64
            }
            Compiled::Nodecov(c) => c.value(i).unwrap() + c.value(j).unwrap(),
            Compiled::Absdiff(c) => (c.value(i).unwrap() - c.value(j).unwrap()).abs(),
            _ => unreachable!("not a dyadic term"),
        }
    }

    #[inline]
    fn change(&self, net: &Network, i: usize, j: usize) -> f64 {
        let y = net.has_edge(i, j) as usize;
        let directed = net.is_directed();
        match self {
            Compiled::Edges => 1.0,
            Compiled::Mutual => net.has_edge(j, i) as u8 as f64,
            Compiled::Triangle => {
                if directed {
                    (net.out_row(i).and_count(net.in_row(j))
                        + net.out_row(i).and_count(net.out_row(j))
                        + net.in_row(i).and_count(net.in_row(j))) as f64
                } else {
                    net.out_row(i).and_count(net.out_row(j)) as f64
                }
            }
            Compiled::Twopath => {
                if directed {
                    let back = net.has_edge(j, i) as usize;
                    ((net.out_degree(j) - back) + (net.in_degree(i) - back)) as f64
                } else {
                    ((net.degree(i) - y) + (net.degree(j) - y)) as f64
                }
            }
            Compiled::Gwesp(w) => {
                let own = w.weight(net.out_row(i).and_count(net.in_row(j)) as usize);
                if directed {
                    // edges i->b gain partner j; edges a->j gain partner i
                    let a: f64 = net
                        .out_row(i)
                        .and_iter(net.out_row(j))
                        .map(|b| w.step(net.out_row(i).and_count(net.in_row(b)) as usize - y))
                        .sum();
                    let b: f64 = net
                        .in_row(i)
                        .and_iter(net.in_row(j))
                        .map(|a| w.step(net.out_row(a).and_count(net.in_row(j)) as usize - y))
                        .sum();
                    own + a + b
                } else {
                    let rows = (net.out_row(i), net.out_row(j));
                    own + rows
                        .0
                        .and_iter(rows.1)
                        .map(|k| {
                            w.step(rows.0.and_count(net.out_row(k)) as usize - y)
                                + w.step(rows.1.and_count(net.out_row(k)) as usize - y)
                        })
                        .sum::<f64>()
                }
            }
            Compiled::Gwdsp(w) => {
                if directed {
                    let a: f64 = net
                        .out_row(j)
                        .iter()
                        .filter(|&b| b != i)
                        .map(|b| w.step(net.out_row(i).and_count(net.in_row(b)) as usize - y))
                        .sum();
                    let b: f64 = net
                        .in_row(i)
                        .iter()
                        .filter(|&a| a != j)
                        .map(|a| w.step(net.out_row(a).and_count(net.in_row(j)) as usize - y))
                        .sum();
                    a + b
                } else {
                    let ri = net.out_row(i);
                    let rj = net.out_row(j);
                    let a: f64 = rj
                        .iter()
                        .filter(|&k| k != i)
                        .map(|k| w.step(ri.and_count(net.out_row(k)) as usize - y))
                        .sum();
                    let b: f64 = ri
                        .iter()
                        .filter(|&k| k != j)
                        .map(|k| w.step(rj.and_count(net.out_row(k)) as usize - y))
                        .sum();
                    a + b
                }
            }
            Compiled::Gwdegree(w) => w.step(net.degree(i) - y) + w.step(net.degree(j) - y),
            Compiled::Gwodegree(w) => w.step(net.out_degree(i) - y),
            Compiled::Gwidegree(w) => w.step(net.in_degree(j) - y),
            _ => self.dyadic(i, j),
        }
    }
}

/// A model spec bound to one network's attributes and size.
#[derive(Debug, Clone)]
pub(crate) struct CompiledModel<'a> {
    terms: Vec<Compiled<'a>>,
}

impl<'a> CompiledModel<'a> {
    pub(crate) fn new(spec: &ModelSpec, net: &'a Network) -> Result<Self, TermError> {
        Ok(CompiledModel {
            terms: spec
                .terms()
                .iter()
                .map(|t| compile(t, net))
                .collect::<Result<_, _>>()?,
        })
    }

    pub(crate) fn len(&self) -> usize {
        self.terms.len()
    }

    /// Evaluates on `net`, which must share attributes with the compile-time network.
    pub(crate) fn values(&self, net: &Network) -> Vec<f64> {
        self.terms.iter().map(|t| t.value(net)).collect()
    }

    #[inline]
    pub(crate) fn changes_into(&self, net: &Network, i: usize, j: usize, out: &mut [f64]) {
        for (slot, t) in out.iter_mut().zip(&self.terms) {
            *slot = t.change(net, i, j);
        }
    }
}

/// Value of one statistic on `net`.
pub fn statistic(term: &Term, net: &Network) -> Result<f64, TermError> {
    Ok(compile(term, net)?.value(net))
}

/// `s(y with ij) - s(y without ij)` for one term.
pub fn change_score(term: &Term, net: &Network, i: usize, j: usize) -> Result<f64, TermError> {
    net.check_dyad(i, j)?;
    Ok(compile(term, net)?.change(net, i, j))
}

/// Change-score vector for every term of a spec.
pub fn change_scores(
    spec: &ModelSpec,
    net: &Network,
    i: usize,
    j: usize,
) -> Result<Vec<f64>, TermError> {
    net.check_dyad(i, j)?;
    let model = CompiledModel::new(spec, net)?;
    let mut out = vec![0.0; model.len()];
    model.changes_into(net, i, j, &mut out);
    Ok(out)
}

/// `s(y)` in spec order.
pub fn model_statistics(spec: &ModelSpec, net: &Network) -> Result<Vec<f64>, TermError> {
    Ok(CompiledModel::new(spec, net)?.values(net))
}
