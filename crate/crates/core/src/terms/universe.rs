//! Admissible term universe and the specification filter.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::network::{AttributeKind, Network};

use super::{Decay, Family, ModelSpec, Term};

/// Decays at which every geometrically weighted family is instantiated.
pub const DECAY_GRID: [f64; 3] = [0.25, 0.5, 0.75];

/// Upper bound on the number of terms in one specification.
pub const MAX_TERMS: usize = 8;

/// Terms admissible for one network, in canonical order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TermUniverse {
    directed: bool,
    terms: Vec<Term>,
}

impl TermUniverse {
    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn contains(&self, term: &Term) -> bool {
        self.terms.binary_search(term).is_ok()
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    pub fn names(&self) -> Vec<String> {
        self.terms.iter().map(Term::to_string).collect()
    }
}

pub fn enumerate_universe(net: &Network) -> TermUniverse {
    let directed = net.is_directed();
    let mut set = BTreeSet::new();
    set.insert(Term::Edges);
    set.insert(Term::Triangle);
    set.insert(Term::Twopath);
    if directed {
        set.insert(Term::Mutual);
    }
    for d in DECAY_GRID.iter().map(|&d| Decay::new(d).unwrap()) {
        set.insert(Term::Gwesp(d));
        set.insert(Term::Gwdsp(d));
        if directed {
            set.insert(Term::Gwidegree(d));
            set.insert(Term::Gwodegree(d));
        } else {
            set.insert(Term::Gwdegree(d));
        }
    }
    for (name, col) in net.attributes() {
        if !col.usable() {
            continue;
        }
        match col.kind() {
            AttributeKind::Categorical => {
                set.insert(Term::Nodematch(name.clone()));
                set.insert(Term::Nodefactor(name.clone()));
            }
            AttributeKind::Numeric => {
                set.insert(Term::Nodecov(name.clone()));
                set.insert(Term::Absdiff(name.clone()));
            }
        }
    }
    TermUniverse {
        directed,
        terms: set.into_iter().collect(),
    }
}

/// Why a specification was filtered out.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum Rejection {
    Empty,
    TooManyTerms { count: usize },
    MissingEdges,
    NotInUniverse { term: Term },
    Duplicate { term: Term },
    Conflict { first: Term, second: Term },
}

impl fmt::Display for Rejection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rejection::Empty => f.write_str("empty specification"),
            Rejection::TooManyTerms { count } => {
                write!(f, "{count} terms exceeds the limit of {MAX_TERMS}")
            }
            Rejection::MissingEdges => f.write_str("missing edges term"),
            Rejection::NotInUniverse { term } => write!(f, "`{term}` is not admissible"),
            Rejection::Duplicate { term } => write!(f, "`{term}` appears twice"),
            Rejection::Conflict { first, second } => {
                write!(f, "`{first}` conflicts with `{second}`")
            }
        }
    }
}

fn conflicting(a: &Term, b: &Term) -> bool {
    use Family::*;
    let (fa, fb) = (a.family(), b.family());
    let pair = |x: Family, y: Family| (fa == x && fb == y) || (fa == y && fb == x);
    pair(Triangle, Gwesp)
        || pair(Gwdegree, Gwidegree)
        || pair(Gwdegree, Gwodegree)
        // one family at two decays measures the same thing twice
        || (fa == fb && fa.is_geometric())
}

pub fn validate_spec(spec: &ModelSpec, universe: &TermUniverse) -> Result<(), Rejection> {
    let terms = spec.terms();
    if terms.is_empty() {
        return Err(Rejection::Empty);
    }
    if terms.len() > MAX_TERMS {
        return Err(Rejection::TooManyTerms { count: terms.len() });
    }
    if let Some(t) = terms.iter().find(|t| !universe.contains(t)) {
        return Err(Rejection::NotInUniverse { term: t.clone() });
    }
    if !spec.contains(&Term::Edges) {
        return Err(Rejection::MissingEdges);
    }
    for (k, a) in terms.iter().enumerate() {
        for b in &terms[k + 1..] {
            if a == b {
                return Err(Rejection::Duplicate { term: a.clone() });
            }
            if conflicting(a, b) {
                return Err(Rejection::Conflict {
                    first: a.clone(),
                    second: b.clone(),
                });
            }
        }
    }
    Ok(())
}
