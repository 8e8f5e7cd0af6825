//! Proposal and interpretation engines.
//!
//! An engine nominates terms, assembles candidate specifications, suggests
//! one local edit per refinement round and writes the final mechanism
//! summary. [`HeuristicEngine`] does all of this with fixed rules;
//! [`RemoteEngine`] asks a chat-completion endpoint.

mod heuristic;
mod metrics;
mod remote;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estim::FitResult;
use crate::gof::GofReport;
use crate::network::{Diagnostics, Metadata};
use crate::terms::{Family, ModelSpec, Term};

pub use heuristic::{
    HeuristicEngine, CLUSTERING_THRESHOLD, DISPERSION_THRESHOLD, RECIPROCITY_THRESHOLD,
};
pub use metrics::{score_interpretation, score_nominations, InterpretationScore, NominationScore};
pub use remote::{
    render_template, ChatMessage, ChatRequest, ChatTransport, HttpTransport, RemoteConfig,
    RemoteEngine, ResponseFormat, TransportError, DEFAULT_TOKEN_ENV, PROMPT_EDIT, PROMPT_SPECS,
    PROMPT_SYNTHESIS, PROMPT_TERMS,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mechanism {
    Baseline,
    Reciprocity,
    Closure,
    DegreeHeterogeneity,
    Homophily,
    /// Offered to remote engines; no catalog term supports it.
    Exposure,
}

impl Mechanism {
    pub const ALL: [Mechanism; 6] = [
        Mechanism::Baseline,
        Mechanism::Reciprocity,
        Mechanism::Closure,
        Mechanism::DegreeHeterogeneity,
        Mechanism::Homophily,
        Mechanism::Exposure,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Mechanism::Baseline => "baseline",
            Mechanism::Reciprocity => "reciprocity",
            Mechanism::Closure => "closure",
            Mechanism::DegreeHeterogeneity => "degree_heterogeneity",
            Mechanism::Homophily => "homophily",
            Mechanism::Exposure => "exposure",
        }
    }

    pub fn from_name(s: &str) -> Option<Mechanism> {
        let s = s.trim().to_ascii_lowercase().replace([' ', '-'], "_");
        Mechanism::ALL.into_iter().find(|m| m.name() == s)
    }
}

impl fmt::Display for Mechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Mechanism each term family speaks to.
pub fn mechanism_of(family: Family) -> Mechanism {
    match family {
        Family::Edges => Mechanism::Baseline,
        Family::Mutual => Mechanism::Reciprocity,
        Family::Gwesp | Family::Gwdsp | Family::Triangle | Family::Twopath => Mechanism::Closure,
        Family::Gwdegree | Family::Gwidegree | Family::Gwodegree => Mechanism::DegreeHeterogeneity,
        Family::Nodematch | Family::Nodefactor | Family::Nodecov | Family::Absdiff => {
            Mechanism::Homophily
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Increases,
    Decreases,
    Mixed,
}

impl Direction {
    pub fn of(theta: f64) -> Direction {
        if theta >= 0.0 {
            Direction::Increases
        } else {
            Direction::Decreases
        }
    }

    /// Common direction of several coefficients.
    pub fn combine(thetas: impl IntoIterator<Item = f64>) -> Option<Direction> {
        thetas
            .into_iter()
            .map(Direction::of)
            .reduce(|a, b| if a == b { a } else { Direction::Mixed })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strength {
    Weak,
    Moderate,
    Strong,
}

impl Strength {
    /// `|θ| < 0.2` weak, `< 1` moderate, otherwise strong.
    pub fn of(theta: f64) -> Strength {
        match theta.abs() {
            a if a < 0.2 => Strength::Weak,
            a if a < 1.0 => Strength::Moderate,
            _ => Strength::Strong,
        }
    }
}

/// One nominated term with the engine's reasons.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Nomination {
    /// Raw term text, not yet canonical.
    pub term: String,
    pub mechanism: String,
    pub justification: String,
}

/// A proposed specification as raw term strings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpecProposal {
    pub id: String,
    pub terms: Vec<String>,
    pub rationale: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EditKind {
    Add,
    Remove,
    Replace,
}

/// A single-term change to the current specification.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditProposal {
    pub kind: EditKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub removed: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub added: Option<String>,
    pub rationale: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EditError {
    #[error("{0:?} edit is missing or has extra terms")]
    Shape(EditKind),
    #[error("cannot parse edit term: {0}")]
    Parse(String),
    #[error("`{0}` is not in the current specification")]
    Absent(String),
}

impl EditProposal {
    pub fn add(term: &Term, rationale: impl Into<String>) -> Self {
        EditProposal {
            kind: EditKind::Add,
            removed: None,
            added: Some(term.to_string()),
            rationale: rationale.into(),
        }
    }

    pub fn remove(term: &Term, rationale: impl Into<String>) -> Self {
        EditProposal {
            kind: EditKind::Remove,
            removed: Some(term.to_string()),
            added: None,
            rationale: rationale.into(),
        }
    }

    pub fn replace(old: &Term, new: &Term, rationale: impl Into<String>) -> Self {
        EditProposal {
            kind: EditKind::Replace,
            removed: Some(old.to_string()),
            added: Some(new.to_string()),
            rationale: rationale.into(),
        }
    }

    /// Applies the edit, parsing its terms leniently.
    pub fn apply(&self, spec: &ModelSpec) -> Result<ModelSpec, EditError> {
        let parse = |s: &Option<String>| -> Result<Term, EditError> {
            let s = s.as_deref().ok_or(EditError::Shape(self.kind))?;
            crate::terms::parse_lenient(s).map_err(|e| EditError::Parse(e.to_string()))
        };
        let present = |t: Term| -> Result<Term, EditError> {
            if spec.contains(&t) {
                Ok(t)
            } else {
                Err(EditError::Absent(t.to_string()))
            }
        };
        match self.kind {
            EditKind::Add if self.removed.is_none() => Ok(spec.with_added(parse(&self.added)?)),
            EditKind::Remove if self.added.is_none() => {
                Ok(spec.without(&present(parse(&self.removed)?)?))
            }
            EditKind::Replace => {
                let old = present(parse(&self.removed)?)?;
                Ok(spec.replaced(&old, parse(&self.added)?))
            }
            kind => Err(EditError::Shape(kind)),
        }
    }
}

impl fmt::Display for EditProposal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.kind, &self.removed, &self.added) {
            (EditKind::Add, _, Some(a)) => write!(f, "add {a}"),
            (EditKind::Remove, Some(r), _) => write!(f, "remove {r}"),
            (EditKind::Replace, Some(r), Some(a)) => write!(f, "replace {r} with {a}"),
            (kind, _, _) => write!(f, "malformed {kind:?} edit"),
        }
    }
}

/// A fitted term's contribution to a mechanism claim.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermEffect {
    pub term: String,
    #[serde(with = "crate::float")]
    pub coefficient: f64,
    pub direction: Direction,
    pub strength: Strength,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MechanismClaim {
    pub mechanism: Mechanism,
    /// `None` when the claim states no direction.
    pub direction: Option<Direction>,
    pub strength: Option<Strength>,
    pub terms: Vec<TermEffect>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MechanismSummary {
    pub claims: Vec<MechanismClaim>,
    pub text: String,
}

impl MechanismSummary {
    pub fn mechanisms(&self) -> Vec<Mechanism> {
        self.claims.iter().map(|c| c.mechanism).collect()
    }

    pub fn claim(&self, m: Mechanism) -> Option<&MechanismClaim> {
        self.claims.iter().find(|c| c.mechanism == m)
    }

    /// Drops claims no fitted term supports and term references outside `spec`.
    pub fn filtered(mut self, spec: &ModelSpec) -> MechanismSummary {
        let names = spec.names();
        self.claims.retain(|c| {
            spec.terms()
                .iter()
                .any(|t| mechanism_of(t.family()) == c.mechanism)
        });
        for c in &mut self.claims {
            c.terms.retain(|t| names.contains(&t.term));
        }
        self
    }
}

/// Deterministic summary derived from the fitted spec alone.
pub fn reference_summary(spec: &ModelSpec, theta: &[f64]) -> MechanismSummary {
    let mut claims: Vec<MechanismClaim> = Vec::new();
    for (term, &coef) in spec.terms().iter().zip(theta) {
        let effect = TermEffect {
            term: term.to_string(),
            coefficient: coef,
            direction: Direction::of(coef),
            strength: Strength::of(coef),
        };
        let m = mechanism_of(term.family());
        match claims.iter_mut().find(|c| c.mechanism == m) {
            Some(c) => c.terms.push(effect),
            None => claims.push(MechanismClaim {
                mechanism: m,
                direction: None,
                strength: None,
                terms: vec![effect],
            }),
        }
    }
    claims.sort_by_key(|c| c.mechanism);
    for c in &mut claims {
        c.direction = Direction::combine(c.terms.iter().map(|t| t.coefficient));
        c.strength = c.terms.iter().map(|t| t.strength).max();
    }
    MechanismSummary {
        claims,
        text: String::new(),
    }
}

/// One request/response pair with a remote engine, kept verbatim.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exchange {
    pub role: String,
    pub attempt: u32,
    pub request: String,
    pub response: Option<String>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProposerError {
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("response does not match the expected schema: {0}")]
    Malformed(String),
    #[error("gave up after {attempts} attempts: {last}")]
    Exhausted { attempts: u32, last: String },
    #[error("credential variable `{0}` is not set")]
    MissingToken(String),
    #[error("no edit to propose: {0}")]
    NoEdit(String),
}

/// Everything a proposal engine has to answer.
pub trait ProposalEngine: Send + Sync {
    /// Short identifier written to run logs.
    fn id(&self) -> String;

    fn propose_terms(
        &self,
        diagnostics: &Diagnostics,
        metadata: &Metadata,
        query: &str,
    ) -> Result<Vec<Nomination>, ProposerError>;

    fn propose_specs(
        &self,
        admissible: &[Term],
        diagnostics: &Diagnostics,
        query: &str,
    ) -> Result<Vec<SpecProposal>, ProposerError>;

    fn propose_edit(
        &self,
        spec: &ModelSpec,
        fit: &FitResult,
        gof: &GofReport,
        admissible: &[Term],
    ) -> Result<EditProposal, ProposerError>;

    fn synthesize(
        &self,
        spec: &ModelSpec,
        theta: &[f64],
        metadata: &Metadata,
    ) -> Result<MechanismSummary, ProposerError>;

    /// Raw exchanges so far; empty for local engines.
    fn transcript(&self) -> Vec<Exchange> {
        Vec::new()
    }
}
