//! ERGM statistic catalog.
//!
//! A [`Term`] is one sufficient statistic with its bound parameters
//! (attribute name or decay). A [`ModelSpec`] is an ordered list of terms.

mod grammar;
mod stats;
mod universe;

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use grammar::{parse_lenient, ParseTermError};
pub(crate) use stats::CompiledModel;
pub use stats::{change_score, change_scores, model_statistics, statistic};
pub use universe::{
    enumerate_universe, validate_spec, Rejection, TermUniverse, DECAY_GRID, MAX_TERMS,
};

use crate::network::AttributeKind;

/// Nonnegative, finite decay of a geometrically weighted term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decay(f64);

impl Decay {
    pub fn new(value: f64) -> Option<Decay> {
        (value.is_finite() && value >= 0.0).then_some(Decay(value))
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl Eq for Decay {}

impl PartialOrd for Decay {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Decay {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl std::hash::Hash for Decay {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.0.to_bits().hash(state)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Edges,
    Mutual,
    Gwesp,
    Gwdsp,
    Gwdegree,
    Gwidegree,
    Gwodegree,
    Nodematch,
    Nodefactor,
    Nodecov,
    Absdiff,
    Triangle,
    Twopath,
}

impl Family {
    pub const ALL: [Family; 13] = [
        Family::Edges,
        Family::Mutual,
        Family::Gwesp,
        Family::Gwdsp,
        Family::Gwdegree,
        Family::Gwidegree,
        Family::Gwodegree,
        Family::Nodematch,
        Family::Nodefactor,
        Family::Nodecov,
        Family::Absdiff,
        Family::Triangle,
        Family::Twopath,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Edges => "edges",
            Family::Mutual => "mutual",
            Family::Gwesp => "gwesp",
            Family::Gwdsp => "gwdsp",
            Family::Gwdegree => "gwdegree",
            Family::Gwidegree => "gwidegree",
            Family::Gwodegree => "gwodegree",
            Family::Nodematch => "nodematch",
            Family::Nodefactor => "nodefactor",
            Family::Nodecov => "nodecov",
            Family::Absdiff => "absdiff",
            Family::Triangle => "triangle",
            Family::Twopath => "twopath",
        }
    }

    pub fn from_name(name: &str) -> Option<Family> {
        Family::ALL.into_iter().find(|f| f.name() == name)
    }

    pub fn is_geometric(self) -> bool {
        matches!(
            self,
            Family::Gwesp
                | Family::Gwdsp
                | Family::Gwdegree
                | Family::Gwidegree
                | Family::Gwodegree
        )
    }

    /// Attribute kind the family requires, if any.
    pub fn attribute_kind(self) -> Option<AttributeKind> {
        match self {
            Family::Nodematch | Family::Nodefactor => Some(AttributeKind::Categorical),
            Family::Nodecov | Family::Absdiff => Some(AttributeKind::Numeric),
            _ => None,
        }
    }

    /// Statistics whose values are always integers.
    pub fn is_count(self) -> bool {
        matches!(
            self,
            Family::Edges
                | Family::Mutual
                | Family::Triangle
                | Family::Twopath
                | Family::Nodematch
                | Family::Nodefactor
        )
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One ERGM statistic with its bound parameters.
///
/// Ordering follows the family catalog order, then the parameter; it is
/// the canonical order used when listing universes and specifications.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Edges,
    Mutual,
    Gwesp(Decay),
    Gwdsp(Decay),
    Gwdegree(Decay),
    Gwidegree(Decay),
    Gwodegree(Decay),
    Nodematch(String),
    Nodefactor(String),
    Nodecov(String),
    Absdiff(String),
    Triangle,
    Twopath,
}

impl Term {
    pub fn family(&self) -> Family {
        match self {
            Term::Edges => Family::Edges,
            Term::Mutual => Family::Mutual,
            Term::Gwesp(_) => Family::Gwesp,
            Term::Gwdsp(_) => Family::Gwdsp,
            Term::Gwdegree(_) => Family::Gwdegree,
            Term::Gwidegree(_) => Family::Gwidegree,
            Term::Gwodegree(_) => Family::Gwodegree,
            Term::Nodematch(_) => Family::Nodematch,
            Term::Nodefactor(_) => Family::Nodefactor,
            Term::Nodecov(_) => Family::Nodecov,
            Term::Absdiff(_) => Family::Absdiff,
            Term::Triangle => Family::Triangle,
            Term::Twopath => Family::Twopath,
        }
    }

    pub fn attribute(&self) -> Option<&str> {
        match self {
            Term::Nodematch(a) | Term::Nodefactor(a) | Term::Nodecov(a) | Term::Absdiff(a) => {
                Some(a)
            }
            _ => None,
        }
    }

    pub fn decay(&self) -> Option<Decay> {
        match *self {
            Term::Gwesp(d)
            | Term::Gwdsp(d)
            | Term::Gwdegree(d)
            | Term::Gwidegree(d)
            | Term::Gwodegree(d) => Some(d),
            _ => None,
        }
    }

    /// Builds a term from its parts; `None` when the parts do not fit the family.
    pub fn from_parts(family: Family, attribute: Option<&str>, decay: Option<f64>) -> Option<Term> {
        let attr = || attribute.map(str::to_owned);
        let dec = || decay.and_then(Decay::new);
        let term = match (family, attribute.is_some(), decay.is_some()) {
            (Family::Edges, false, false) => Term::Edges,
            (Family::Mutual, false, false) => Term::Mutual,
            (Family::Triangle, false, false) => Term::Triangle,
            (Family::Twopath, false, false) => Term::Twopath,
            (Family::Gwesp, false, true) => Term::Gwesp(dec()?),
            (Family::Gwdsp, false, true) => Term::Gwdsp(dec()?),
            (Family::Gwdegree, false, true) => Term::Gwdegree(dec()?),
            (Family::Gwidegree, false, true) => Term::Gwidegree(dec()?),
            (Family::Gwodegree, false, true) => Term::Gwodegree(dec()?),
            (Family::Nodematch, true, false) => Term::Nodematch(attr()?),
            (Family::Nodefactor, true, false) => Term::Nodefactor(attr()?),
            (Family::Nodecov, true, false) => Term::Nodecov(attr()?),
            (Family::Absdiff, true, false) => Term::Absdiff(attr()?),
            _ => return None,
        };
        Some(term)
    }

    /// Same family with another decay; `None` for non-geometric terms.
    pub fn with_decay(&self, decay: Decay) -> Option<Term> {
        match self {
            Term::Gwesp(_) => Some(Term::Gwesp(decay)),
            Term::Gwdsp(_) => Some(Term::Gwdsp(decay)),
            Term::Gwdegree(_) => Some(Term::Gwdegree(decay)),
            Term::Gwidegree(_) => Some(Term::Gwidegree(decay)),
            Term::Gwodegree(_) => Some(Term::Gwodegree(decay)),
            _ => None,
        }
    }

    pub fn canonical_name(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let family = self.family().name();
        if let Some(d) = self.decay() {
            write!(f, "{family}(decay={})", d.get())
        } else if let Some(a) = self.attribute() {
            write!(f, "{family}(attr={a})")
        } else {
            f.write_str(family)
        }
    }
}

impl std::str::FromStr for Term {
    type Err = ParseTermError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        grammar::parse_canonical(s)
    }
}

impl Serialize for Term {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Term {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Ordered list of terms. Validity against a network is checked by
/// [`validate_spec`], not at construction.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ModelSpec {
    terms: Vec<Term>,
}

impl ModelSpec {
    pub fn new(terms: Vec<Term>) -> Self {
        ModelSpec { terms }
    }

    /// Parses a comma- or `+`-separated list of canonical term names.
    pub fn parse(list: &str) -> Result<Self, ParseTermError> {
        grammar::split_terms(list)
            .into_iter()
            .map(|t| t.parse())
            .collect::<Result<Vec<_>, _>>()
            .map(ModelSpec::new)
    }

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
        self.terms.contains(term)
    }

    pub fn position(&self, term: &Term) -> Option<usize> {
        self.terms.iter().position(|t| t == term)
    }

    /// Terms sorted into catalog order. Duplicates are kept so that the
    /// filter can still reject them.
    pub fn canonicalized(&self) -> ModelSpec {
        let mut terms = self.terms.clone();
        terms.sort();
        ModelSpec { terms }
    }

    pub fn with_added(&self, term: Term) -> ModelSpec {
        let mut terms = self.terms.clone();
        terms.push(term);
        ModelSpec { terms }
    }

    pub fn without(&self, term: &Term) -> ModelSpec {
        ModelSpec {
            terms: self.terms.iter().filter(|t| *t != term).cloned().collect(),
        }
    }

    pub fn replaced(&self, old: &Term, new: Term) -> ModelSpec {
        ModelSpec {
            terms: self
                .terms
                .iter()
                .map(|t| if t == old { new.clone() } else { t.clone() })
                .collect(),
        }
    }

    pub fn names(&self) -> Vec<String> {
        self.terms.iter().map(Term::canonical_name).collect()
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.names().join(" + "))
    }
}

impl From<Vec<Term>> for ModelSpec {
    fn from(terms: Vec<Term>) -> Self {
        ModelSpec::new(terms)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TermError {
    #[error("term `{term}` is not defined for this network: {reason}")]
    Inadmissible { term: String, reason: String },
    #[error(transparent)]
    Network(#[from] crate::network::NetworkError),
}
