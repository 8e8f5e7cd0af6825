//! Parameter estimation: pseudolikelihood, Monte Carlo likelihood and an
//! exact enumeration oracle for tiny networks.

mod exact;
mod mcmle;
mod mple;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::float::Real;
use crate::sampler::{SimControls, SimError};
use crate::terms::{ModelSpec, Term, TermError};

pub use exact::{exact_fit, ExactModel, MAX_EXACT_DYADS};
pub use mcmle::{fit_mcmle, fit_mcmle_with, log_lik_mc, McmleOptions, BRIDGE_POINTS};
pub use mple::{fit_mple, SEPARATION_BOUND};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Mple,
    Mcmle,
    Exact,
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mple" => Ok(Method::Mple),
            "mcmle" => Ok(Method::Mcmle),
            "exact" => Ok(Method::Exact),
            _ => Err(format!("unknown method `{s}`")),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimError {
    #[error(transparent)]
    Term(#[from] TermError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("design matrix is rank deficient (collinear change scores)")]
    RankDeficient,
    #[error("sampled covariance is singular")]
    SingularFisher,
    #[error("estimate left the finite range")]
    NonFinite,
    #[error("{dyads} dyads is too many to enumerate (limit {limit})")]
    TooLarge { dyads: usize, limit: usize },
    #[error("initial value has {got} entries but the model has {want} terms")]
    Length { got: usize, want: usize },
}

/// `-2ℓ + k·ln(n_d)`.
pub fn bic(log_lik: f64, k: usize, dyads: usize) -> f64 {
    -2.0 * log_lik + k as f64 * (dyads as f64).ln()
}

/// Closed-form edges-only log-likelihood at the MLE.
pub fn bernoulli_log_lik(edges: usize, dyads: usize) -> f64 {
    let (m, n) = (edges as f64, dyads as f64);
    let term = |a: f64, p: f64| if a > 0.0 { a * p.ln() } else { 0.0 };
    term(m, m / n) + term(n - m, 1.0 - m / n)
}

/// One estimated model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "FitRecord", try_from = "FitRecord")]
pub struct FitResult {
    pub spec: ModelSpec,
    pub theta: Vec<f64>,
    pub method: Method,
    pub converged: bool,
    /// Pseudo, Monte Carlo or exact log-likelihood depending on `method`.
    pub log_lik: f64,
    pub bic: f64,
    pub dyads: usize,
    pub iterations: usize,
    pub controls: Option<SimControls>,
    /// Seeds of every simulated batch, in order of use.
    pub seeds: Vec<u64>,
    /// Largest `|s(y) - mean s(Y)| / sd` at the returned estimate.
    pub scaled_gradient: Option<f64>,
    pub note: Option<String>,
}

impl FitResult {
    pub fn coefficient(&self, term: &Term) -> Option<f64> {
        self.spec.position(term).map(|k| self.theta[k])
    }

    pub fn coefficients(&self) -> IndexMap<String, f64> {
        self.spec
            .names()
            .into_iter()
            .zip(self.theta.iter().copied())
            .collect()
    }

    pub(crate) fn with_log_lik(mut self, log_lik: f64) -> Self {
        self.log_lik = log_lik;
        self.bic = bic(log_lik, self.spec.len(), self.dyads);
        self
    }
}

#[derive(Serialize, Deserialize)]
struct FitRecord {
    spec: ModelSpec,
    coefficients: IndexMap<String, Real>,
    method: Method,
    converged: bool,
    log_lik: Real,
    bic: Real,
    dyads: usize,
    iterations: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    controls: Option<SimControls>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    seeds: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    scaled_gradient: Option<Real>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    note: Option<String>,
}

impl From<FitResult> for FitRecord {
    fn from(f: FitResult) -> Self {
        FitRecord {
            coefficients: f
                .spec
                .names()
                .into_iter()
                .zip(f.theta.iter().map(|&x| Real(x)))
                .collect(),
            spec: f.spec,
            method: f.method,
            converged: f.converged,
            log_lik: Real(f.log_lik),
            bic: Real(f.bic),
            dyads: f.dyads,
            iterations: f.iterations,
            controls: f.controls,
            seeds: f.seeds,
            scaled_gradient: f.scaled_gradient.map(Real),
            note: f.note,
        }
    }
}

impl TryFrom<FitRecord> for FitResult {
    type Error = String;

    fn try_from(r: FitRecord) -> Result<Self, String> {
        let theta = r
            .spec
            .names()
            .iter()
            .map(|n| {
                r.coefficients
                    .get(n)
                    .map(|x| x.0)
                    .ok_or_else(|| format!("no coefficient for `{n}`"))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(FitResult {
            spec: r.spec,
            theta,
            method: r.method,
            converged: r.converged,
            log_lik: r.log_lik.0,
            bic: r.bic.0,
            dyads: r.dyads,
            iterations: r.iterations,
            controls: r.controls,
            seeds: r.seeds,
            scaled_gradient: r.scaled_gradient.map(|x| x.0),
            note: r.note,
        })
    }
}
