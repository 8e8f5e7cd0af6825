use std::collections::VecDeque;
use std::sync::Mutex;

use ergm_search::estim::FitResult;
use ergm_search::fixtures::{florentine, planted_homophily, planted_triangles, reciprocal};
use ergm_search::gof::GofReport;
use ergm_search::network::{Diagnostics, Metadata, Network};
use ergm_search::pipeline::{
    rank_survivors, refine_loop, run_pipeline, stage1_generate, stage2_screen, stage3_refine,
    Decision, EditLogEntry, Evaluation, PipelineConfig, PipelineRun, RefineBackend, ScreenResult,
    ScreenStatus, Stage,
};
use ergm_search::proposer::{
    EditProposal, HeuristicEngine, MechanismSummary, Nomination, ProposalEngine, ProposerError,
    SpecProposal,
};
use ergm_search::terms::{enumerate_universe, validate_spec, ModelSpec, Term};

/// Engine with canned answers.
struct Scripted {
    nominations: Vec<&'static str>,
    specs: Vec<Vec<&'static str>>,
    edits: Mutex<VecDeque<Result<EditProposal, ProposerError>>>,
}

impl Scripted {
    fn new(nominations: Vec<&'static str>, specs: Vec<Vec<&'static str>>) -> Self {
        Scripted {
            nominations,
            specs,
            edits: Mutex::new(VecDeque::new()),
        }
    }
}

impl ProposalEngine for Scripted {
    fn id(&self) -> String {
        "scripted".into()
    }

    fn propose_terms(
        &self,
        _: &Diagnostics,
        _: &Metadata,
        _: &str,
    ) -> Result<Vec<Nomination>, ProposerError> {
        Ok(self
            .nominations
            .iter()
            .map(|t| Nomination {
                term: t.to_string(),
                mechanism: "baseline".into(),
                justification: String::new(),
            })
            .collect())
    }

    fn propose_specs(
        &self,
        _: &[Term],
        _: &Diagnostics,
        _: &str,
    ) -> Result<Vec<SpecProposal>, ProposerError> {
        Ok(self
            .specs
            .iter()
            .enumerate()
            .map(|(k, s)| SpecProposal {
                id: format!("s{k}"),
                terms: s.iter().map(|t| t.to_string()).collect(),
                rationale: String::new(),
            })
            .collect())
    }

    fn propose_edit(
        &self,
        _: &ModelSpec,
        _: &FitResult,
        _: &GofReport,
        _: &[Term],
    ) -> Result<EditProposal, ProposerError> {
        self.edits
            .lock()
            .unwrap()
            .pop_front()
            .unwrap_or_else(|| Err(ProposerError::NoEdit("script exhausted".into())))
    }

    fn synthesize(
        &self,
        spec: &ModelSpec,
        theta: &[f64],
        m: &Metadata,
    ) -> Result<MechanismSummary, ProposerError> {
        HeuristicEngine.synthesize(spec, theta, m)
    }
}

#[test]
fn heuristic_candidates_are_valid() {
    for net in [florentine(), planted_homophily(40, 2, 0.3, 0.02, 3)] {
        let pool = stage1_generate(&net, "", &HeuristicEngine).unwrap();
        assert!(pool.candidates.len() >= 3);
        let u = enumerate_universe(&net);
        for c in &pool.candidates {
            let spec = c.spec.as_ref().unwrap();
            assert!(spec.contains(&Term::Edges));
            assert_eq!(validate_spec(spec, &u), Ok(()), "{spec}");
            assert_eq!(spec, &spec.canonicalized());
        }
        assert!(pool.offmenu.is_empty());
    }
}

#[test]
fn intersection_and_empty_nominations() {
    let net = florentine();
    let pool = stage1_generate(
        &net,
        "",
        &Scripted::new(vec!["edges", "mutual", "gwesp(0.5)"], vec![]),
    )
    .unwrap();
    let adm: Vec<String> = pool.admissible.iter().map(|t| t.to_string()).collect();
    assert_eq!(adm, ["edges", "gwesp(decay=0.5)"]);
    assert_eq!(pool.offmenu, ["mutual"]);

    let err = stage1_generate(&net, "", &Scripted::new(vec![], vec![])).unwrap_err();
    assert_eq!(err.stage, Stage::Generate);
    assert!(err.reason.contains("no admissible terms"));
    let err =
        stage1_generate(&net, "", &Scripted::new(vec!["mutual", "banana"], vec![])).unwrap_err();
    assert!(err.reason.contains("no admissible terms"));
}

#[test]
fn screening_keeps_an_audit_trail() {
    let net = florentine();
    let engine = Scripted::new(
        vec!["edges"],
        vec![
            vec!["edges"],
            vec!["edges", "nodecov(wealth)"],
            vec!["edges", "mutual"],
            vec!["gwesp(0.5)"],
            vec!["edges", "kstar(7)"],
            vec!["edges", "nodecov(wealth)"],
        ],
    );
    let pool = stage1_generate(&net, "", &engine).unwrap();
    assert_eq!(pool.duplicates, ["s5"]);
    let s = stage2_screen(&pool, &net, 1).unwrap();
    assert_eq!(s.results.len(), pool.candidates.len());
    assert_eq!(
        s.results[0].status,
        ScreenStatus::NoImprovement,
        "edges-only ties the baseline"
    );
    assert_eq!(s.results[1].status, ScreenStatus::Survived);
    for k in 2..5 {
        assert!(
            matches!(s.results[k].status, ScreenStatus::Rejected { .. }),
            "{:?}",
            s.results[k]
        );
    }
    assert_eq!(s.selected.to_string(), "edges + nodecov(attr=wealth)");
}

fn survivor(spec: &str, bic: f64) -> ScreenResult {
    let spec = ModelSpec::parse(spec).unwrap();
    ScreenResult {
        candidate: spec.to_string(),
        theta: Some(vec![0.0; spec.len()]),
        spec: Some(spec),
        bic_s: Some(bic),
        stability: None,
        probe_seed: 0,
        status: ScreenStatus::Survived,
    }
}

#[test]
fn ties_prefer_fewer_terms_then_name() {
    let mut results = vec![
        survivor("edges + triangle + twopath + nodematch(attr=a)", 500.0),
        survivor("edges + twopath + nodematch(attr=a)", 500.0),
        survivor("edges + triangle + nodematch(attr=a)", 500.0),
        survivor("edges + absdiff(attr=b)", 501.0),
    ];
    results.push(ScreenResult {
        status: ScreenStatus::Unstable {
            reason: "runaway".into(),
        },
        ..survivor("edges + triangle", 10.0)
    });
    let order = rank_survivors(&results);
    assert_eq!(order, vec![2, 1, 0, 3]);
}

#[test]
fn unstable_candidates_are_dropped() {
    let net = planted_triangles(30, 0.03, 4);
    let engine = Scripted::new(
        vec!["edges"],
        vec![vec!["edges", "triangle"], vec!["edges", "gwesp(0.5)"]],
    );
    let pool = stage1_generate(&net, "", &engine).unwrap();
    let s = stage2_screen(&pool, &net, 2).unwrap();
    for r in &s.results {
        let stable = r.stability.as_ref().is_none_or(|x| x.is_stable());
        assert_eq!(stable, !matches!(r.status, ScreenStatus::Unstable { .. }));
    }
    assert!(s
        .survivors()
        .all(|r| r.stability.as_ref().unwrap().is_stable()));
}

/// Replays the edit log and checks the acceptance ordering on every accepted step.
fn check_ledger(run: &PipelineRun) {
    let start = run.refinement.fallback.iter().find(|a| a.accepted).unwrap();
    let g = start.gof.as_ref().unwrap();
    let (mut adequate, mut z, mut bic) = (g.adequate, g.max_abs_z, start.bic);
    let mut rej = 0;
    for e in &run.refinement.edits {
        match &e.decision {
            Decision::Accepted => {
                let (f, g) = (e.fit.as_ref().unwrap(), e.gof.as_ref().unwrap());
                assert!(!g.degenerate);
                if adequate {
                    assert!(g.adequate && f.bic < bic);
                } else {
                    assert!(g.max_abs_z < z && f.bic <= bic + 1e-6);
                }
                (adequate, z, bic) = (g.adequate, g.max_abs_z, f.bic);
                rej = 0;
            }
            Decision::Rejected { .. } => rej += 1,
        }
        assert_eq!(e.rejections, rej);
    }
    let fin = run.final_eval();
    assert_eq!(fin.fit.bic, bic);
    assert!(fin.fit.converged && !fin.gof.degenerate);
    assert!(run.refinement.edits.len() <= run.config.rounds);
}

#[test]
fn full_runs_respect_the_ledger() {
    let nets: Vec<Network> = vec![
        florentine(),
        planted_homophily(40, 2, 0.3, 0.02, 5),
        reciprocal(20, 0.1, 0.5, 5),
    ];
    for net in nets {
        let mut events = Vec::new();
        let run = run_pipeline(
            &net,
            &HeuristicEngine,
            &PipelineConfig::default(),
            &mut |e| events.push(e.clone()),
        )
        .unwrap();
        check_ledger(&run);
        assert_eq!(events.len(), 8);
        assert_eq!(run.timings.len(), 4);
        let text = serde_json::to_string(&run).unwrap();
        let back: PipelineRun = serde_json::from_str(&text).unwrap();
        assert_eq!(serde_json::to_string(&back).unwrap(), text);
    }
}

#[test]
fn failures_name_their_stage() {
    let empty = Network::empty(5, false);
    let err = run_pipeline(
        &empty,
        &HeuristicEngine,
        &PipelineConfig::default(),
        &mut |_| {},
    )
    .unwrap_err();
    assert_eq!(err.stage, Stage::Generate);

    let net = florentine();
    let only_edges = Scripted::new(vec!["edges"], vec![vec!["edges"]]);
    let err = run_pipeline(&net, &only_edges, &PipelineConfig::default(), &mut |_| {}).unwrap_err();
    assert_eq!(err.stage, Stage::Screen);
    assert!(err.reason.contains("screening emptied pool"));

    let bad = PipelineConfig {
        rounds: 0,
        ..PipelineConfig::default()
    };
    assert!(run_pipeline(&net, &HeuristicEngine, &bad, &mut |_| {}).is_err());
}

#[test]
fn refinement_init_failure() {
    let net = planted_triangles(30, 0.03, 4);
    let engine = Scripted::new(
        vec!["edges"],
        vec![vec!["edges", "triangle"], vec!["edges", "gwesp(0.5)"]],
    );
    let pool = stage1_generate(&net, "", &engine).unwrap();
    let mut s = stage2_screen(&pool, &net, 2).unwrap();
    // force a runaway start as the only fallback candidate
    let k = s
        .results
        .iter()
        .position(|r| r.spec.as_ref().unwrap().contains(&Term::Triangle))
        .unwrap();
    s.results[k].status = ScreenStatus::Survived;
    s.results[k].theta = Some(vec![-2.0, 3.0]);
    s.ranking = vec![k];
    let config = PipelineConfig {
        fallback: 1,
        ..PipelineConfig::default()
    };
    let err = stage3_refine(&s, &net, &engine, &config).unwrap_err();
    assert_eq!(err.stage, Stage::Refine);
    assert!(
        err.reason.contains("initialization failed"),
        "{}",
        err.reason
    );
}

struct Broken;

impl RefineBackend for Broken {
    fn propose(&mut self, _: &Evaluation) -> Result<EditProposal, ProposerError> {
        Err(ProposerError::Exhausted {
            attempts: 3,
            last: "down".into(),
        })
    }
    fn validate(&self, _: &ModelSpec) -> Result<(), String> {
        Ok(())
    }
    fn evaluate(&mut self, _: &ModelSpec, _: usize, _: &Evaluation) -> Result<Evaluation, String> {
        unreachable!()
    }
}

#[test]
fn invalid_edits_are_rejections_and_transport_failures_abort() {
    let net = florentine();
    let engine = Scripted::new(vec!["edges"], vec![vec!["edges", "nodecov(wealth)"]]);
    let edges = Term::Edges;
    engine.edits.lock().unwrap().extend([
        Ok(EditProposal::remove(&edges, "drop the intercept")),
        Ok(EditProposal::add(
            &"mutual".parse::<Term>().unwrap(),
            "not admissible here",
        )),
    ]);
    let pool = stage1_generate(&net, "", &engine).unwrap();
    let s = stage2_screen(&pool, &net, 1).unwrap();
    let r = stage3_refine(&s, &net, &engine, &PipelineConfig::default()).unwrap();
    let log: &Vec<EditLogEntry> = &r.edits;
    assert_eq!(log.len(), 2);
    assert!(log.iter().all(|e| !e.decision.is_accepted()));
    assert_eq!(r.result.spec, r.initial);

    let err = refine_loop(r.result.clone(), &mut Broken, 4).unwrap_err();
    assert_eq!(err.stage, Stage::Refine);
}
