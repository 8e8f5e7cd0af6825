//! Specification search: generation, screening, fallback refit, refinement
//! and interpretation.
//!
//! Each stage is a plain function over explicit inputs so the CLI can run
//! them one at a time from persisted artifacts. [`run_pipeline`] chains them
//! and collects the audit trail into a [`PipelineRun`].

use std::collections::BTreeSet;
use std::fmt;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estim::{bernoulli_log_lik, bic, fit_mcmle, fit_mple, FitResult};
use crate::gof::{gof_controls, gof_with_tau, GofReport, TAU};
use crate::network::{Diagnostics, Metadata, Network};
use crate::proposer::{
    score_interpretation, score_nominations, EditProposal, Exchange, InterpretationScore,
    MechanismSummary, Nomination, NominationScore, ProposalEngine, ProposerError,
};
use crate::sampler::{derive_seed, stability_probe, SimControls, Stability};
use crate::terms::{
    enumerate_universe, parse_lenient, validate_spec, ModelSpec, Term, TermUniverse,
};

/// Absolute tolerance for BIC equality.
pub const BIC_TOLERANCE: f64 = 1e-6;
pub const DEFAULT_ROUNDS: usize = 4;
pub const DEFAULT_FALLBACK: usize = 3;
/// Seed used when none is given.
pub const DEFAULT_SEED: u64 = 0x00e7_6d5e_a7c4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub query: String,
    pub seed: u64,
    #[serde(with = "crate::float")]
    pub tau: f64,
    /// Refinement rounds `T`.
    pub rounds: usize,
    /// Candidates tried by the fallback refit `J`.
    pub fallback: usize,
    /// Overrides the number of retained draws for MCMLE and GOF.
    #[serde(default)]
    pub draws: Option<usize>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            query: String::new(),
            seed: DEFAULT_SEED,
            tau: TAU,
            rounds: DEFAULT_ROUNDS,
            fallback: DEFAULT_FALLBACK,
            draws: None,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(format!("tau must be positive, got {}", self.tau));
        }
        if self.rounds == 0 {
            return Err("rounds must be at least 1".into());
        }
        if self.fallback == 0 {
            return Err("fallback must be at least 1".into());
        }
        if self.draws == Some(0) {
            return Err("draws must be at least 1".into());
        }
        Ok(())
    }

    fn mcmle_controls(&self, net: &Network, seed: u64) -> SimControls {
        let c = SimControls::default_for(net, seed);
        match self.draws {
            Some(d) => c.with_draws(d),
            None => c,
        }
    }

    fn gof_controls(&self, net: &Network, seed: u64) -> SimControls {
        let c = gof_controls(net, seed);
        match self.draws {
            Some(d) => c.with_draws(d),
            None => c,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Generate,
    Screen,
    Refine,
    Interpret,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Generate => "generate",
            Stage::Screen => "screen",
            Stage::Refine => "refine",
            Stage::Interpret => "interpret",
        }
    }

    /// Process exit status for a failure in this stage.
    pub fn exit_code(self) -> i32 {
        match self {
            Stage::Generate => 10,
            Stage::Screen => 11,
            Stage::Refine => 12,
            Stage::Interpret => 13,
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{stage} stage failed: {reason}")]
pub struct PipelineError {
    pub stage: Stage,
    pub reason: String,
}

impl PipelineError {
    fn new(stage: Stage, reason: impl Into<String>) -> Self {
        PipelineError {
            stage,
            reason: reason.into(),
        }
    }
}

// ---------------------------------------------------------------- generate

/// One proposed specification after canonicalization.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Candidate {
    pub id: String,
    pub raw_terms: Vec<String>,
    /// `None` when some raw term could not be parsed.
    pub spec: Option<ModelSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parse_error: Option<String>,
    pub rationale: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidatePool {
    pub proposer: String,
    pub query: String,
    pub nominations: Vec<Nomination>,
    /// Nominated terms that are in the universe, canonical and deduplicated.
    pub admissible: Vec<Term>,
    /// Raw nominations that failed to parse or fall outside the universe.
    pub offmenu: Vec<String>,
    pub nomination_score: NominationScore,
    pub candidates: Vec<Candidate>,
    /// Proposals dropped because an earlier one had the same canonical form.
    pub duplicates: Vec<String>,
}

fn proposer_failure(stage: Stage, e: ProposerError) -> PipelineError {
    PipelineError::new(stage, format!("proposer: {e}"))
}

pub fn stage1_generate(
    net: &Network,
    query: &str,
    engine: &dyn ProposalEngine,
) -> Result<CandidatePool, PipelineError> {
    if net.edge_count() == 0 || net.edge_count() == net.dyad_count() {
        return Err(PipelineError::new(
            Stage::Generate,
            format!(
                "network is empty or complete ({} of {} dyads)",
                net.edge_count(),
                net.dyad_count()
            ),
        ));
    }
    let diagnostics = net.diagnostics();
    let metadata = net.metadata();
    let universe = enumerate_universe(net);

    let nominations = engine
        .propose_terms(&diagnostics, &metadata, query)
        .map_err(|e| proposer_failure(Stage::Generate, e))?;
    let mut admissible = BTreeSet::new();
    let mut offmenu = Vec::new();
    for n in &nominations {
        match parse_lenient(&n.term) {
            Ok(t) if universe.contains(&t) => {
                admissible.insert(t);
            }
            _ => offmenu.push(n.term.clone()),
        }
    }
    let raw: Vec<&str> = nominations.iter().map(|n| n.term.as_str()).collect();
    let nomination_score = score_nominations(&raw, &universe);
    if admissible.is_empty() {
        return Err(PipelineError::new(
            Stage::Generate,
            format!(
                "no admissible terms among {} nominations",
                nominations.len()
            ),
        ));
    }
    let admissible: Vec<Term> = admissible.into_iter().collect();

    let proposals = engine
        .propose_specs(&admissible, &diagnostics, query)
        .map_err(|e| proposer_failure(Stage::Generate, e))?;
    let mut seen = BTreeSet::new();
    let mut candidates = Vec::new();
    let mut duplicates = Vec::new();
    for p in proposals {
        let parsed: Result<Vec<Term>, _> = p.terms.iter().map(|t| parse_lenient(t)).collect();
        let (spec, parse_error) = match parsed {
            Ok(terms) => (Some(ModelSpec::new(terms).canonicalized()), None),
            Err(e) => (None, Some(e.to_string())),
        };
        let key = spec
            .as_ref()
            .map(ModelSpec::to_string)
            .unwrap_or_else(|| p.terms.join(","));
        if !seen.insert(key) {
            duplicates.push(p.id);
            continue;
        }
        candidates.push(Candidate {
            id: p.id,
            raw_terms: p.terms,
            spec,
            parse_error,
            rationale: p.rationale,
        });
    }

    Ok(CandidatePool {
        proposer: engine.id(),
        query: query.to_owned(),
        nominations,
        admissible,
        offmenu,
        nomination_score,
        candidates,
        duplicates,
    })
}

// ------------------------------------------------------------------ screen

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ScreenStatus {
    /// Failed the specification filter.
    Rejected {
        reason: String,
    },
    FitFailed {
        reason: String,
    },
    /// Pseudo-BIC not below the edges-only baseline.
    NoImprovement,
    Unstable {
        reason: String,
    },
    Survived,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreenResult {
    pub candidate: String,
    pub spec: Option<ModelSpec>,
    #[serde(default, with = "crate::float::option")]
    pub bic_s: Option<f64>,
    #[serde(default, with = "crate::float::option_vec")]
    pub theta: Option<Vec<f64>>,
    #[serde(default)]
    pub stability: Option<Stability>,
    pub probe_seed: u64,
    pub status: ScreenStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Screening {
    /// Pseudo-BIC of the edges-only model.
    #[serde(with = "crate::float")]
    pub baseline_bic: f64,
    pub results: Vec<ScreenResult>,
    /// Indices into `results` of the survivors, best first.
    pub ranking: Vec<usize>,
    pub selected: ModelSpec,
}

impl Screening {
    pub fn survivors(&self) -> impl Iterator<Item = &ScreenResult> + '_ {
        self.ranking.iter().map(|&i| &self.results[i])
    }
}

/// Edges-only BIC; pseudo and exact likelihoods coincide for it.
pub fn null_bic(net: &Network) -> f64 {
    bic(
        bernoulli_log_lik(net.edge_count(), net.dyad_count()),
        1,
        net.dyad_count(),
    )
}

fn screen_one(
    c: &Candidate,
    net: &Network,
    universe: &TermUniverse,
    baseline: f64,
    probe_seed: u64,
) -> ScreenResult {
    let mut r = ScreenResult {
        candidate: c.id.clone(),
        spec: c.spec.clone(),
        bic_s: None,
        theta: None,
        stability: None,
        probe_seed,
        status: ScreenStatus::Survived,
    };
    let Some(spec) = &c.spec else {
        r.status = ScreenStatus::Rejected {
            reason: format!("unparseable: {}", c.parse_error.as_deref().unwrap_or("")),
        };
        return r;
    };
    if let Err(rej) = validate_spec(spec, universe) {
        r.status = ScreenStatus::Rejected {
            reason: rej.to_string(),
        };
        return r;
    }
    let fit = match fit_mple(spec, net) {
        Ok(f) => f,
        Err(e) => {
            r.status = ScreenStatus::FitFailed {
                reason: e.to_string(),
            };
            return r;
        }
    };
    r.bic_s = Some(fit.bic);
    r.theta = Some(fit.theta.clone());
    if !fit.converged {
        r.status = ScreenStatus::FitFailed {
            reason: fit.note.unwrap_or_else(|| "not converged".into()),
        };
        return r;
    }
    if fit.bic >= baseline - BIC_TOLERANCE {
        r.status = ScreenStatus::NoImprovement;
        return r;
    }
    match stability_probe(spec, &fit.theta, net, probe_seed) {
        Ok(s) => {
            if let Stability::Unstable { reason, .. } = &s {
                r.status = ScreenStatus::Unstable {
                    reason: reason.clone(),
                };
            }
            r.stability = Some(s);
        }
        Err(e) => {
            r.status = ScreenStatus::FitFailed {
                reason: e.to_string(),
            }
        }
    }
    r
}

/// Indices of surviving results ordered by pseudo-BIC, then term count,
/// then canonical name.
pub fn rank_survivors(results: &[ScreenResult]) -> Vec<usize> {
    let mut ranking: Vec<usize> = (0..results.len())
        .filter(|&i| {
            results[i].status == ScreenStatus::Survived
                && results[i].spec.is_some()
                && results[i].bic_s.is_some()
        })
        .collect();
    let key = |i: usize| {
        let r = &results[i];
        let spec = r.spec.as_ref().unwrap();
        (r.bic_s.unwrap(), spec.len(), spec.to_string())
    };
    ranking.sort_by(|&a, &b| {
        let (ba, la, na) = key(a);
        let (bb, lb, nb) = key(b);
        ba.total_cmp(&bb).then(la.cmp(&lb)).then(na.cmp(&nb))
    });
    ranking
}

/// Filters, pseudo-likelihood fits and probes every candidate, then ranks
/// the survivors by (BIC, term count, name).
pub fn stage2_screen(
    pool: &CandidatePool,
    net: &Network,
    seed: u64,
) -> Result<Screening, PipelineError> {
    if pool.candidates.is_empty() {
        return Err(PipelineError::new(Stage::Screen, "candidate pool is empty"));
    }
    let universe = enumerate_universe(net);
    let baseline = null_bic(net);
    let results: Vec<ScreenResult> = pool
        .candidates
        .par_iter()
        .enumerate()
        .map(|(i, c)| {
            screen_one(
                c,
                net,
                &universe,
                baseline,
                derive_seed(seed, "probe", i as u64),
            )
        })
        .collect();

    let ranking = rank_survivors(&results);
    let Some(&best) = ranking.first() else {
        return Err(PipelineError::new(Stage::Screen, "screening emptied pool"));
    };
    let selected = results[best].spec.clone().unwrap();
    Ok(Screening {
        baseline_bic: baseline,
        results,
        ranking,
        selected,
    })
}

// ------------------------------------------------------------------ refine

/// A fitted specification with its goodness of fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub spec: ModelSpec,
    pub fit: FitResult,
    pub gof: GofReport,
}

impl Evaluation {
    pub fn state(&self) -> RoundState {
        RoundState {
            adequate: self.gof.adequate,
            max_abs_z: self.gof.max_abs_z,
            bic: self.fit.bic,
            degenerate: self.gof.degenerate,
        }
    }
}

/// The quantities the acceptance rule looks at.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundState {
    pub adequate: bool,
    #[serde(with = "crate::float")]
    pub max_abs_z: f64,
    #[serde(with = "crate::float")]
    pub bic: f64,
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "decision", rename_all = "snake_case")]
pub enum Decision {
    Accepted,
    Rejected { reason: String },
}

impl Decision {
    fn reject(reason: impl Into<String>) -> Self {
        Decision::Rejected {
            reason: reason.into(),
        }
    }

    pub fn is_accepted(&self) -> bool {
        matches!(self, Decision::Accepted)
    }
}

/// Acceptance rule for a candidate edit.
///
/// A degenerate candidate is always rejected. From an adequate model the
/// candidate must stay adequate and lower BIC. From an inadequate one it
/// must lower max |z| and not raise BIC.
pub fn decide(current: &RoundState, candidate: &RoundState) -> Decision {
    if candidate.degenerate {
        return Decision::reject("candidate is degenerate");
    }
    if current.adequate {
        if !candidate.adequate {
            Decision::reject("candidate loses adequacy")
        } else if candidate.bic < current.bic - BIC_TOLERANCE {
            Decision::Accepted
        } else {
            Decision::reject("BIC does not decrease")
        }
    } else if !(candidate.max_abs_z < current.max_abs_z) {
        Decision::reject("max |z| does not improve")
    } else if candidate.bic > current.bic + BIC_TOLERANCE {
        Decision::reject("BIC increases")
    } else {
        Decision::Accepted
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub converged: bool,
    #[serde(with = "crate::float")]
    pub bic: f64,
    #[serde(with = "crate::float::vec")]
    pub theta: Vec<f64>,
}

impl From<&FitResult> for FitSummary {
    fn from(f: &FitResult) -> Self {
        FitSummary {
            converged: f.converged,
            bic: f.bic,
            theta: f.theta.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GofSummary {
    pub adequate: bool,
    pub degenerate: bool,
    #[serde(with = "crate::float")]
    pub max_abs_z: f64,
    #[serde(with = "crate::float")]
    pub sim_edge_mean: f64,
    pub worst_group: Option<String>,
}

impl From<&GofReport> for GofSummary {
    fn from(g: &GofReport) -> Self {
        GofSummary {
            adequate: g.adequate,
            degenerate: g.degenerate,
            max_abs_z: g.max_abs_z,
            sim_edge_mean: g.sim_edge_mean,
            worst_group: g.worst_group().map(|w| w.name().to_owned()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditLogEntry {
    pub round: usize,
    pub current: ModelSpec,
    pub edit: Option<EditProposal>,
    pub candidate: Option<ModelSpec>,
    pub fit: Option<FitSummary>,
    pub gof: Option<GofSummary>,
    pub decision: Decision,
    /// Consecutive rejections after this round.
    pub rejections: usize,
}

/// What the refinement loop needs from the outside world.
pub trait RefineBackend {
    fn propose(&mut self, current: &Evaluation) -> Result<EditProposal, ProposerError>;
    fn validate(&self, spec: &ModelSpec) -> Result<(), String>;
    /// Fits and scores `spec`; an error means the candidate is unusable.
    fn evaluate(
        &mut self,
        spec: &ModelSpec,
        round: usize,
        current: &Evaluation,
    ) -> Result<Evaluation, String>;
}

/// Runs at most `rounds` single-term edits, stopping after two rejections
/// in a row. Only proposer transport failures abort the loop.
pub fn refine_loop<B: RefineBackend>(
    initial: Evaluation,
    backend: &mut B,
    rounds: usize,
) -> Result<(Evaluation, Vec<EditLogEntry>), PipelineError> {
    let mut current = initial;
    let mut log = Vec::new();
    let mut rejections = 0;
    let mut round = 0;
    while round < rounds && rejections < 2 {
        let mut entry = EditLogEntry {
            round,
            current: current.spec.clone(),
            edit: None,
            candidate: None,
            fit: None,
            gof: None,
            decision: Decision::Accepted,
            rejections,
        };
        let mut next = None;
        entry.decision = match backend.propose(&current) {
            Err(ProposerError::NoEdit(why)) => Decision::reject(format!("no edit: {why}")),
            Err(e) => return Err(proposer_failure(Stage::Refine, e)),
            Ok(edit) => {
                let applied = edit.apply(&current.spec);
                entry.edit = Some(edit);
                match applied {
                    Err(e) => Decision::reject(format!("edit does not apply: {e}")),
                    Ok(spec) => {
                        let spec = spec.canonicalized();
                        entry.candidate = Some(spec.clone());
                        if let Err(why) = backend.validate(&spec) {
                            Decision::reject(format!("invalid candidate: {why}"))
                        } else {
                            match backend.evaluate(&spec, round, &current) {
                                Err(why) => Decision::reject(why),
                                Ok(ev) => {
                                    entry.fit = Some((&ev.fit).into());
                                    entry.gof = Some((&ev.gof).into());
                                    let d = decide(&current.state(), &ev.state());
                                    next = Some(ev);
                                    d
                                }
                            }
                        }
                    }
                }
            }
        };
        if entry.decision.is_accepted() {
            current = next.expect("accepted rounds carry an evaluation");
            rejections = 0;
        } else {
            rejections += 1;
        }
        entry.rejections = rejections;
        log.push(entry);
        round += 1;
    }
    Ok((current, log))
}

/// Backend that fits on a real network and asks a proposal engine for edits.
pub struct NetworkBackend<'a> {
    pub net: &'a Network,
    pub engine: &'a dyn ProposalEngine,
    pub universe: TermUniverse,
    pub config: &'a PipelineConfig,
}

/// Fits `spec` by MCMLE from `init` and runs GOF. Non-convergence is an error.
pub fn evaluate_spec(
    spec: &ModelSpec,
    net: &Network,
    init: &[f64],
    config: &PipelineConfig,
    fit_seed: u64,
    gof_seed: u64,
) -> Result<Evaluation, String> {
    let fit = fit_mcmle(spec, net, init, &config.mcmle_controls(net, fit_seed))
        .map_err(|e| format!("fit failed: {e}"))?;
    if !fit.converged {
        return Err("MCMLE did not converge".into());
    }
    let gof = gof_with_tau(
        spec,
        &fit.theta,
        net,
        &config.gof_controls(net, gof_seed),
        config.tau,
    )
    .map_err(|e| format!("gof failed: {e}"))?;
    Ok(Evaluation {
        spec: spec.clone(),
        fit,
        gof,
    })
}

/// Starting values: MPLE when it converges, else the current estimates for
/// shared terms and zero for new ones.
fn starting_values(spec: &ModelSpec, net: &Network, current: &Evaluation) -> Vec<f64> {
    match fit_mple(spec, net) {
        Ok(f) if f.converged => f.theta,
        _ => spec
            .terms()
            .iter()
            .map(|t| current.fit.coefficient(t).unwrap_or(0.0))
            .collect(),
    }
}

impl RefineBackend for NetworkBackend<'_> {
    fn propose(&mut self, current: &Evaluation) -> Result<EditProposal, ProposerError> {
        self.engine.propose_edit(
            &current.spec,
            &current.fit,
            &current.gof,
            self.universe.terms(),
        )
    }

    fn validate(&self, spec: &ModelSpec) -> Result<(), String> {
        validate_spec(spec, &self.universe).map_err(|r| r.to_string())
    }

    fn evaluate(
        &mut self,
        spec: &ModelSpec,
        round: usize,
        current: &Evaluation,
    ) -> Result<Evaluation, String> {
        let init = starting_values(spec, self.net, current);
        let seed = self.config.seed;
        evaluate_spec(
            spec,
            self.net,
            &init,
            self.config,
            derive_seed(seed, "refine", round as u64),
            derive_seed(seed, "refine-gof", round as u64),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FallbackAttempt {
    pub spec: ModelSpec,
    pub fit_seed: u64,
    pub gof_seed: u64,
    pub converged: bool,
    #[serde(with = "crate::float")]
    pub bic: f64,
    pub gof: Option<GofSummary>,
    pub accepted: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Refinement {
    pub fallback: Vec<FallbackAttempt>,
    /// Specification the loop started from.
    pub initial: ModelSpec,
    pub edits: Vec<EditLogEntry>,
    #[serde(rename = "final")]
    pub result: Evaluation,
}

/// Refits the top screened candidates until one converges without
/// degeneracy, then runs the edit loop from it.
pub fn stage3_refine(
    screening: &Screening,
    net: &Network,
    engine: &dyn ProposalEngine,
    config: &PipelineConfig,
) -> Result<Refinement, PipelineError> {
    let mut fallback = Vec::new();
    let mut start = None;
    for (j, r) in screening.survivors().take(config.fallback).enumerate() {
        let spec = r.spec.clone().expect("survivors have a spec");
        let init = r.theta.clone().expect("survivors have estimates");
        let fit_seed = derive_seed(config.seed, "fallback", j as u64);
        let gof_seed = derive_seed(config.seed, "fallback-gof", j as u64);
        let mut attempt = FallbackAttempt {
            spec: spec.clone(),
            fit_seed,
            gof_seed,
            converged: false,
            bic: f64::NAN,
            gof: None,
            accepted: false,
            reason: None,
        };
        let fit = match fit_mcmle(&spec, net, &init, &config.mcmle_controls(net, fit_seed)) {
            Ok(f) => f,
            Err(e) => {
                attempt.reason = Some(format!("fit failed: {e}"));
                fallback.push(attempt);
                continue;
            }
        };
        attempt.converged = fit.converged;
        attempt.bic = fit.bic;
        if !fit.converged {
            attempt.reason = Some("MCMLE did not converge".into());
            fallback.push(attempt);
            continue;
        }
        match gof_with_tau(
            &spec,
            &fit.theta,
            net,
            &config.gof_controls(net, gof_seed),
            config.tau,
        ) {
            Err(e) => attempt.reason = Some(format!("gof failed: {e}")),
            Ok(g) => {
                attempt.gof = Some((&g).into());
                if g.degenerate {
                    attempt.reason = Some("degenerate".into());
                } else {
                    attempt.accepted = true;
                    start = Some(Evaluation { spec, fit, gof: g });
                }
            }
        }
        fallback.push(attempt);
        if start.is_some() {
            break;
        }
    }
    let Some(start) = start else {
        return Err(PipelineError::new(
            Stage::Refine,
            format!(
                "initialization failed after {} fallback attempts",
                fallback.len()
            ),
        ));
    };
    let initial = start.spec.clone();
    let mut backend = NetworkBackend {
        net,
        engine,
        universe: enumerate_universe(net),
        config,
    };
    let (result, edits) = refine_loop(start, &mut backend, config.rounds)?;
    Ok(Refinement {
        fallback,
        initial,
        edits,
        result,
    })
}

// --------------------------------------------------------------- interpret

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interpretation {
    pub summary: MechanismSummary,
    pub score: InterpretationScore,
}

pub fn stage4_interpret(
    eval: &Evaluation,
    metadata: &Metadata,
    engine: &dyn ProposalEngine,
) -> Result<Interpretation, PipelineError> {
    let summary = engine
        .synthesize(&eval.spec, &eval.fit.theta, metadata)
        .map_err(|e| proposer_failure(Stage::Interpret, e))?;
    let score = score_interpretation(&summary, &eval.spec, &eval.fit.theta);
    Ok(Interpretation { summary, score })
}

// --------------------------------------------------------------------- run

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Started,
    Finished,
    Failed,
}

/// A stage transition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub stage: Stage,
    pub kind: EventKind,
    pub detail: String,
    pub elapsed_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: Stage,
    pub millis: u64,
}

/// Full audit trail of one search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineRun {
    pub config: PipelineConfig,
    pub proposer: String,
    pub diagnostics: Diagnostics,
    pub metadata: Metadata,
    pub universe: TermUniverse,
    pub pool: CandidatePool,
    pub screening: Screening,
    pub refinement: Refinement,
    #[serde(with = "crate::float")]
    pub null_bic: f64,
    pub interpretation: Interpretation,
    pub transcript: Vec<Exchange>,
    /// Wall-clock per stage; the only part that differs between reruns.
    pub timings: Vec<StageTiming>,
}

impl PipelineRun {
    pub fn selected(&self) -> &ModelSpec {
        &self.screening.selected
    }

    pub fn final_eval(&self) -> &Evaluation {
        &self.refinement.result
    }

    /// Relative BIC improvement of the final model over the edges-only one.
    pub fn improvement(&self) -> f64 {
        (self.null_bic - self.final_eval().fit.bic) / self.null_bic.abs()
    }

    /// Markdown report of the final model and its interpretation.
    pub fn summary_markdown(&self) -> String {
        let e = self.final_eval();
        let mut s = String::new();
        s.push_str("# Model search summary\n\n");
        if !self.config.query.is_empty() {
            s.push_str(&format!("Context: {}\n\n", self.config.query));
        }
        s.push_str(&format!("Final model: `{}`\n\n", e.spec));
        s.push_str("| term | estimate |\n|---|---|\n");
        for (name, t) in e.spec.names().iter().zip(&e.fit.theta) {
            s.push_str(&format!("| {name} | {t:.4} |\n"));
        }
        s.push_str(&format!(
            "\nBIC {:.2} (edges only {:.2}), max |z| {:.2}, {}\n\n",
            e.fit.bic,
            self.null_bic,
            e.gof.max_abs_z,
            if e.gof.adequate {
                "adequate fit"
            } else {
                "fit not adequate"
            }
        ));
        s.push_str("## Mechanisms\n\n");
        s.push_str(&self.interpretation.summary.text);
        s.push('\n');
        s
    }
}

struct Tracker<'a> {
    clock: Instant,
    started: Instant,
    timings: Vec<StageTiming>,
    on_event: &'a mut dyn FnMut(&Event),
}

impl Tracker<'_> {
    fn emit(&mut self, stage: Stage, kind: EventKind, detail: String) {
        let elapsed_ms = self.clock.elapsed().as_millis() as u64;
        (self.on_event)(&Event {
            stage,
            kind,
            detail,
            elapsed_ms,
        });
    }

    fn start(&mut self, stage: Stage) {
        self.started = Instant::now();
        self.emit(stage, EventKind::Started, String::new());
    }

    fn finish(&mut self, stage: Stage, result: Result<String, &PipelineError>) {
        self.timings.push(StageTiming {
            stage,
            millis: self.started.elapsed().as_millis() as u64,
        });
        match result {
            Ok(d) => self.emit(stage, EventKind::Finished, d),
            Err(e) => self.emit(stage, EventKind::Failed, e.reason.clone()),
        }
    }
}

/// Runs all stages. `on_event` sees every stage transition.
pub fn run_pipeline(
    net: &Network,
    engine: &dyn ProposalEngine,
    config: &PipelineConfig,
    on_event: &mut dyn FnMut(&Event),
) -> Result<PipelineRun, PipelineError> {
    config
        .validate()
        .map_err(|e| PipelineError::new(Stage::Generate, format!("bad config: {e}")))?;
    let mut tracker = Tracker {
        clock: Instant::now(),
        started: Instant::now(),
        timings: Vec::new(),
        on_event,
    };

    macro_rules! step {
        ($stage:expr, $body:expr, $detail:expr) => {{
            tracker.start($stage);
            match $body {
                Ok(v) => {
                    tracker.finish($stage, Ok($detail(&v)));
                    v
                }
                Err(e) => {
                    tracker.finish($stage, Err(&e));
                    return Err(e);
                }
            }
        }};
    }

    let pool = step!(
        Stage::Generate,
        stage1_generate(net, &config.query, engine),
        |p: &CandidatePool| format!(
            "{} admissible terms, {} candidates",
            p.admissible.len(),
            p.candidates.len()
        )
    );
    let screening = step!(
        Stage::Screen,
        stage2_screen(&pool, net, config.seed),
        |s: &Screening| format!("{} survivors, selected {}", s.ranking.len(), s.selected)
    );
    let refinement = step!(
        Stage::Refine,
        stage3_refine(&screening, net, engine, config),
        |r: &Refinement| format!("{} edit rounds, final {}", r.edits.len(), r.result.spec)
    );
    let interpretation = step!(
        Stage::Interpret,
        stage4_interpret(&refinement.result, &net.metadata(), engine),
        |i: &Interpretation| format!("{} mechanisms", i.summary.claims.len())
    );

    Ok(PipelineRun {
        config: config.clone(),
        proposer: engine.id(),
        diagnostics: net.diagnostics(),
        metadata: net.metadata(),
        universe: enumerate_universe(net),
        pool,
        screening,
        refinement,
        null_bic: null_bic(net),
        interpretation,
        transcript: engine.transcript(),
        timings: tracker.timings,
    })
}
