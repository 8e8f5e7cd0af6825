//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.

mod common;

use std::time::Instant;

use common::{logit, naive, null_bic_closed_form, rng, Raw};
use ergm_search::estim::{exact_fit, fit_mcmle, fit_mple};
use ergm_search::fixtures::{florentine, planted_homophily, planted_triangles, reciprocal};
use ergm_search::gof::{gof, gof_controls};
use ergm_search::network::Network;
use ergm_search::pipeline::{
    evaluate_spec, null_bic, refine_loop, run_pipeline, Decision, EditLogEntry, Evaluation,
    PipelineConfig, PipelineRun, RefineBackend,
};
use ergm_search::proposer::{
    score_interpretation, score_nominations, Direction, EditProposal, HeuristicEngine, Mechanism,
    MechanismClaim, ProposalEngine, ProposerError,
};
use ergm_search::sampler::{simulate, SimControls};
use ergm_search::terms::{change_score, enumerate_universe, statistic, ModelSpec, Term};
use statrs::distribution::{Binomial, ChiSquared, ContinuousCDF, Discrete};

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn change_scores_are_differences() -> Outcome {
    let mut r = rng(101);
    let (mut checked, mut worst) = (0usize, 0.0f64);
    for case in 0..200 {
        let directed = case % 2 == 1;
        let g = Raw::random(
            &mut r,
            3 + case % 10,
            directed,
            0.1 + 0.04 * (case % 11) as f64,
        );
        let net = g.network();
        let universe = enumerate_universe(&net);
        for (i, j) in g.dyads() {
            let on = if g.y[i][j] {
                g.clone()
            } else {
                g.toggled(i, j)
            };
            let off = if g.y[i][j] {
                g.toggled(i, j)
            } else {
                g.clone()
            };
            let (on_net, off_net) = (on.network(), off.network());
            for t in universe.terms() {
                let delta = change_score(t, &net, i, j).map_err(|e| e.to_string())?;
                let lib = statistic(t, &on_net).unwrap() - statistic(t, &off_net).unwrap();
                let oracle = naive(t, &on) - naive(t, &off);
                let err = (delta - lib).abs().max((delta - oracle).abs());
                worst = worst.max(err);
                ensure(
                    err <= 1e-9,
                    format!("{t} case {case} dyad ({i},{j}): {delta} vs {oracle}"),
                )?;
                checked += 1;
            }
        }
    }
    Ok(format!(
        "{checked} term-dyad checks, worst error {worst:.1e}"
    ))
}

fn estimates_match_exact_mle() -> Outcome {
    let mut r = rng(202);
    let spec = ModelSpec::parse("edges + mutual").unwrap();
    let mut worst = 0.0f64;
    let mut done = 0;
    while done < 10 {
        let net = Raw::random(&mut r, 4, true, 0.4).network();
        let (m, e) = (net.mutual_pairs(), net.edge_count());
        if !(m > 0 && e > 2 * m && e < 6 + m) {
            continue;
        }
        let exact = exact_fit(&spec, &net).map_err(|e| e.to_string())?;
        let controls = SimControls::default_for(&net, 900 + done).with_draws(20_000);
        let mc = fit_mcmle(&spec, &net, &[0.0, 0.0], &controls).map_err(|e| e.to_string())?;
        ensure(
            mc.converged,
            format!("network {done}: MCMLE did not converge"),
        )?;
        for k in 0..2 {
            let d = (mc.theta[k] - exact.theta[k]).abs();
            worst = worst.max(d);
            ensure(
                d <= 0.05,
                format!("network {done}: {:?} vs exact {:?}", mc.theta, exact.theta),
            )?;
        }
        done += 1;
    }

    let spec = ModelSpec::parse("edges + nodematch(attr=colour)").unwrap();
    let mut worst_mple = 0.0f64;
    done = 0;
    while done < 10 {
        let g = Raw::random(&mut r, 5, false, 0.5);
        let (mut within, mut within_on, mut between, mut between_on) = (0, 0, 0, 0);
        for (i, j) in g.dyads() {
            if g.labels[i] == g.labels[j] {
                within += 1;
                within_on += g.y[i][j] as usize;
            } else {
                between += 1;
                between_on += g.y[i][j] as usize;
            }
        }
        if !(within_on > 0 && within_on < within && between_on > 0 && between_on < between) {
            continue;
        }
        let net = g.network();
        let exact = exact_fit(&spec, &net).map_err(|e| e.to_string())?;
        let mple = fit_mple(&spec, &net).map_err(|e| e.to_string())?;
        for k in 0..2 {
            let d = (mple.theta[k] - exact.theta[k]).abs();
            worst_mple = worst_mple.max(d);
            ensure(
                d <= 1e-4,
                format!(
                    "dyad-independent network {done}: {:?} vs {:?}",
                    mple.theta, exact.theta
                ),
            )?;
        }
        done += 1;
    }
    Ok(format!(
        "MCMLE worst |dtheta| {worst:.3} (tol 0.05); MPLE worst {worst_mple:.1e} (tol 1e-4)"
    ))
}

fn edges_only_closed_form() -> Outcome {
    let mut worst = 0.0f64;
    let mut nets = vec![
        florentine(),
        planted_homophily(40, 2, 0.3, 0.02, 7),
        reciprocal(20, 0.1, 0.5, 7),
    ];
    let mut r = rng(303);
    nets.extend((0..5).map(|k| Raw::random(&mut r, 6 + k, k % 2 == 0, 0.3).network()));
    for net in &nets {
        let fit = fit_mple(&ModelSpec::new(vec![Term::Edges]), net).map_err(|e| e.to_string())?;
        let closed = null_bic_closed_form(net.edge_count(), net.dyad_count());
        let d = (fit.theta[0] - logit(net.density()))
            .abs()
            .max((null_bic(net) - closed).abs());
        worst = worst.max(d);
        ensure(
            d <= 1e-6,
            format!(
                "n={} edges={}: off by {d:.2e}",
                net.node_count(),
                net.edge_count()
            ),
        )?;
    }
    Ok(format!("{} networks, worst error {worst:.1e}", nets.len()))
}

fn sampler_matches_bernoulli() -> Outcome {
    let net = Network::empty(4, false);
    let spec = ModelSpec::new(vec![Term::Edges]);
    let binom = Binomial::new(0.5, 6).unwrap();
    let chi = ChiSquared::new(6.0).unwrap();
    let draws = 2000;
    let mut passed = 0;
    let mut ps = Vec::new();
    for seed in 0..10 {
        let c = SimControls {
            burn_in: 240,
            thin: 24,
            draws,
            seed,
        };
        let batch = simulate(&spec, &[0.0], &net, &c).map_err(|e| e.to_string())?;
        let mut counts = [0usize; 7];
        for &e in &batch.edge_counts {
            counts[e] += 1;
        }
        let stat: f64 = (0..7)
            .map(|k| {
                let want = draws as f64 * binom.pmf(k as u64);
                (counts[k] as f64 - want).powi(2) / want
            })
            .sum();
        let p = 1.0 - chi.cdf(stat);
        ps.push(p);
        passed += (p > 0.01) as usize;
    }
    ensure(
        passed >= 9,
        format!("only {passed}/10 seeds pass, p = {ps:.3?}"),
    )?;

    let c = SimControls {
        burn_in: 240,
        thin: 24,
        draws: 4000,
        seed: 77,
    };
    let batch = simulate(&spec, &[-2.0], &net, &c).map_err(|e| e.to_string())?;
    let want = 1.0 / (1.0 + 2f64.exp());
    let mean = batch.edge_counts.iter().sum::<usize>() as f64 / (6.0 * c.draws as f64);
    let se = (want * (1.0 - want) / (6.0 * c.draws as f64)).sqrt();
    ensure(
        close(mean, want, 3.0 * se),
        format!("density {mean:.4} vs {want:.4} (3 SE = {:.4})", 3.0 * se),
    )?;
    Ok(format!(
        "{passed}/10 seeds at alpha 0.01; theta=-2 density {mean:.4} vs {want:.4}"
    ))
}

fn runaway_is_flagged() -> Outcome {
    let net = planted_triangles(30, 0.03, 7);
    let spec = ModelSpec::parse("edges + triangle").unwrap();
    let theta = [logit(net.density()), 2.0];
    let mut flagged = 0;
    for seed in 0..10 {
        let report =
            gof(&spec, &theta, &net, &gof_controls(&net, seed)).map_err(|e| e.to_string())?;
        flagged += report.degenerate as usize;
    }
    ensure(flagged == 10, format!("degenerate in {flagged}/10 seeds"))?;
    Ok("degenerate in 10/10 seeds".into())
}

/// Proposes toggling `nodecov(wealth)` and reports canned evaluations.
struct Script {
    term: Term,
    reply: Box<dyn FnMut(&ModelSpec, &Evaluation) -> Evaluation>,
}

impl RefineBackend for Script {
    fn propose(&mut self, current: &Evaluation) -> Result<EditProposal, ProposerError> {
        Ok(if current.spec.contains(&self.term) {
            EditProposal::remove(&self.term, "drop")
        } else {
            EditProposal::add(&self.term, "add")
        })
    }
    fn validate(&self, _: &ModelSpec) -> Result<(), String> {
        Ok(())
    }
    fn evaluate(
        &mut self,
        spec: &ModelSpec,
        _: usize,
        current: &Evaluation,
    ) -> Result<Evaluation, String> {
        Ok((self.reply)(spec, current))
    }
}

fn with_state(
    base: &Evaluation,
    spec: &ModelSpec,
    adequate: bool,
    z: f64,
    bic: f64,
    degenerate: bool,
) -> Evaluation {
    let mut e = base.clone();
    e.spec = spec.clone();
    e.fit.spec = spec.clone();
    e.gof.adequate = adequate;
    e.gof.max_abs_z = z;
    e.fit.bic = bic;
    e.gof.degenerate = degenerate;
    e
}

fn acceptance_rule_truth_table() -> Outcome {
    let net = florentine();
    let s0 = ModelSpec::new(vec![Term::Edges]);
    let base = evaluate_spec(
        &s0,
        &net,
        &[logit(net.density())],
        &PipelineConfig::default(),
        1,
        2,
    )?;
    let wealth: Term = "nodecov(attr=wealth)"
        .parse()
        .map_err(|e| format!("{e:?}"))?;

    // (current adequate, z, bic) -> (candidate adequate, z, bic, degenerate), expected
    let cases = [
        (
            "adequate, lower BIC",
            (true, 1.0, 100.0),
            (true, 1.2, 99.0, false),
            true,
        ),
        (
            "adequate, equal BIC",
            (true, 1.0, 100.0),
            (true, 0.5, 100.0, false),
            false,
        ),
        (
            "adequate, higher BIC",
            (true, 1.0, 100.0),
            (true, 0.5, 101.0, false),
            false,
        ),
        (
            "adequate to inadequate",
            (true, 1.0, 100.0),
            (false, 3.0, 90.0, false),
            false,
        ),
        (
            "inadequate, lower z, equal BIC",
            (false, 3.0, 100.0),
            (false, 2.5, 100.0, false),
            true,
        ),
        (
            "inadequate, lower z, higher BIC",
            (false, 3.0, 100.0),
            (false, 2.5, 101.0, false),
            false,
        ),
        (
            "inadequate, higher z",
            (false, 3.0, 100.0),
            (false, 3.5, 90.0, false),
            false,
        ),
        (
            "degenerate",
            (false, 3.0, 100.0),
            (true, 0.5, 90.0, true),
            false,
        ),
    ];
    for (name, (ca, cz, cb), (a, z, b, d), want) in cases {
        let start = with_state(&base, &s0, ca, cz, cb, false);
        let b0 = base.clone();
        let mut script = Script {
            term: wealth.clone(),
            reply: Box::new(move |spec, _| with_state(&b0, spec, a, z, b, d)),
        };
        let (fin, log) = refine_loop(start, &mut script, 1).map_err(|e| e.to_string())?;
        ensure(log.len() == 1, format!("{name}: {} rounds", log.len()))?;
        ensure(
            log[0].decision.is_accepted() == want,
            format!("{name}: got {:?}", log[0].decision),
        )?;
        ensure(
            (fin.spec != s0) == want,
            format!("{name}: final spec {}", fin.spec),
        )?;
    }

    // two rejections in a row end the search at the starting model
    let b0 = base.clone();
    let mut stubborn = Script {
        term: wealth.clone(),
        reply: Box::new(move |spec, _| with_state(&b0, spec, true, 0.5, 1e9, false)),
    };
    let start = with_state(&base, &s0, true, 1.0, 100.0, false);
    let (fin, log) = refine_loop(start.clone(), &mut stubborn, 4).map_err(|e| e.to_string())?;
    ensure(
        log.len() == 2 && fin.spec == s0,
        format!("stop rule: {} rounds, final {}", log.len(), fin.spec),
    )?;
    ensure(
        log.iter().map(|e| e.rejections).collect::<Vec<_>>() == [1, 2],
        "rejection counter",
    )?;

    // every edit accepted: the round cap ends it
    let b0 = base.clone();
    let mut eager = Script {
        term: wealth,
        reply: Box::new(move |spec, cur| {
            with_state(&b0, spec, true, 0.5, cur.fit.bic - 1.0, false)
        }),
    };
    let (fin, log) = refine_loop(start, &mut eager, 4).map_err(|e| e.to_string())?;
    let accepted = log.iter().filter(|e| e.decision.is_accepted()).count();
    ensure(
        log.len() == 4 && accepted == 4,
        format!("cap: {} rounds, {accepted} accepted", log.len()),
    )?;
    ensure(
        close(fin.fit.bic, 96.0, 1e-12),
        format!("cap: final BIC {}", fin.fit.bic),
    )?;
    Ok("8 scenarios, stop rule and round cap as expected".into())
}

fn run(net: &Network) -> Result<PipelineRun, String> {
    run_pipeline(
        net,
        &HeuristicEngine,
        &PipelineConfig::default(),
        &mut |_| {},
    )
    .map_err(|e| e.to_string())
}

fn check_ledger(log: &[EditLogEntry]) -> Result<(), String> {
    for e in log {
        if let (Decision::Accepted, Some(g)) = (&e.decision, &e.gof) {
            ensure(
                !g.degenerate,
                format!("round {} accepted a degenerate model", e.round),
            )?;
        }
    }
    Ok(())
}

fn end_to_end() -> Outcome {
    let mut lines = Vec::new();
    for (name, net) in [
        ("florentine", florentine()),
        ("homophily", planted_homophily(40, 2, 0.3, 0.02, 7)),
    ] {
        let t = Instant::now();
        let r = run(&net)?;
        let fin = r.final_eval();
        check_ledger(&r.refinement.edits)?;
        let null = null_bic(&net);
        ensure(fin.fit.converged, format!("{name}: not converged"))?;
        ensure(!fin.gof.degenerate, format!("{name}: degenerate"))?;
        ensure(
            fin.gof.max_abs_z <= 2.5,
            format!("{name}: max|z| {:.2}", fin.gof.max_abs_z),
        )?;
        ensure(
            fin.fit.bic < null,
            format!("{name}: BIC {:.2} vs null {null:.2}", fin.fit.bic),
        )?;
        lines.push(format!(
            "{name}: {} BIC {:.2} < {null:.2}, max|z| {:.2}, {:.1}s",
            fin.spec,
            fin.fit.bic,
            fin.gof.max_abs_z,
            t.elapsed().as_secs_f64()
        ));
    }
    Ok(lines.join("; "))
}

fn all_fixtures() -> Vec<(&'static str, Network)> {
    vec![
        ("florentine", florentine()),
        ("homophily", planted_homophily(40, 2, 0.3, 0.02, 7)),
        ("triangles", planted_triangles(30, 0.03, 7)),
        ("reciprocal", reciprocal(20, 0.1, 0.5, 7)),
    ]
}

fn nomination_validity() -> Outcome {
    for (name, net) in all_fixtures() {
        let noms = HeuristicEngine
            .propose_terms(&net.diagnostics(), &net.metadata(), "")
            .map_err(|e| e.to_string())?;
        let terms: Vec<&str> = noms.iter().map(|n| n.term.as_str()).collect();
        let s = score_nominations(&terms, &enumerate_universe(&net));
        ensure(
            s.precision == 1.0 && s.offmenu == 0.0 && !s.empty,
            format!("{name}: {s:?}"),
        )?;
    }

    let u = enumerate_universe(&florentine());
    let m = u.len() as f64;
    let sets: [(&[&str], f64, f64, f64); 5] = [
        (
            &["edges", "gwesp(0.5)", "nodecov(wealth)"],
            1.0,
            3.0 / m,
            0.0,
        ),
        (&["edges", "mutual"], 0.5, 1.0 / m, 0.5),
        (
            &["edges", "edges", "twopath", "kstar(2)"],
            1.0,
            2.0 / m,
            0.0,
        ),
        (
            &["nodecov(priorates)", "banana", "triangle"],
            1.0 / 3.0,
            1.0 / m,
            2.0 / 3.0,
        ),
        (
            &[
                "gwidegree(0.5)",
                "absdiff(wealth)",
                "gwdegree(decay=0.5)",
                "nodematch(wealth)",
            ],
            0.5,
            2.0 / m,
            0.5,
        ),
    ];
    for (k, (set, p, r, o)) in sets.iter().enumerate() {
        let s = score_nominations(set, &u);
        ensure(
            close(s.precision, *p, 1e-12)
                && close(s.recall, *r, 1e-12)
                && close(s.offmenu, *o, 1e-12),
            format!("set {k}: {s:?}, want ({p}, {r}, {o})"),
        )?;
    }
    Ok(format!(
        "precision 1, off-menu 0 on 4 fixtures; 5 hand-scored sets match (universe size {m})"
    ))
}

fn interpretation_accuracy() -> Outcome {
    let specs = [
        "edges + gwesp(decay=0.5) + nodecov(attr=wealth)",
        "edges + gwdegree(decay=0.5) + nodematch(attr=group)",
        "edges + gwesp(decay=0.5) + gwdsp(decay=0.5)",
        "edges + mutual + nodematch(attr=dept) + gwidegree(decay=0.5)",
    ];
    for ((name, net), spec) in all_fixtures().into_iter().zip(specs) {
        let spec = ModelSpec::parse(spec).unwrap();
        let theta = fit_mple(&spec, &net).map_err(|e| e.to_string())?.theta;
        let summary = HeuristicEngine
            .synthesize(&spec, &theta, &net.metadata())
            .map_err(|e| e.to_string())?;
        let s = score_interpretation(&summary, &spec, &theta);
        let perfect =
            (s.precision, s.recall, s.f1, s.overreach, s.omission) == (1.0, 1.0, 1.0, 0.0, 0.0);
        ensure(
            perfect && s.directional_accuracy == 1.0,
            format!("{name}: self score {s:?}"),
        )?;

        let mm = summary.claims.len() as f64;
        let mut extra = summary.clone();
        extra.claims.push(MechanismClaim {
            mechanism: Mechanism::Exposure,
            direction: Some(Direction::Increases),
            strength: None,
            terms: Vec::new(),
        });
        let e = score_interpretation(&extra, &spec, &theta);
        ensure(
            close(e.precision, mm / (mm + 1.0), 1e-12) && e.recall == 1.0,
            format!("{name}: false mechanism {e:?}"),
        )?;

        let mut short = summary.clone();
        short.claims.pop();
        let e = score_interpretation(&short, &spec, &theta);
        ensure(
            close(e.recall, 1.0 - 1.0 / mm, 1e-12) && e.precision == 1.0,
            format!("{name}: omission {e:?}"),
        )?;

        let directed = summary
            .claims
            .iter()
            .filter(|c| c.direction.is_some())
            .count() as f64;
        let mut flipped = summary.clone();
        let c = flipped
            .claims
            .iter_mut()
            .find(|c| {
                matches!(
                    c.direction,
                    Some(Direction::Increases | Direction::Decreases)
                )
            })
            .ok_or(format!("{name}: no signed claim"))?;
        c.direction = Some(match c.direction {
            Some(Direction::Increases) => Direction::Decreases,
            _ => Direction::Increases,
        });
        let e = score_interpretation(&flipped, &spec, &theta);
        ensure(
            close(e.directional_accuracy, 1.0 - 1.0 / directed, 1e-12) && e.f1 == 1.0,
            format!("{name}: flipped sign {e:?}"),
        )?;
    }
    for (name, net) in all_fixtures().into_iter().take(2) {
        let s = run(&net)?.interpretation.score;
        ensure(
            s.f1 == 1.0 && s.overreach == 0.0 && s.omission == 0.0,
            format!("{name} run: {s:?}"),
        )?;
    }
    Ok("self scores perfect; injected errors move precision, recall and sign accuracy by the expected step".into())
}

fn without_timings(r: &PipelineRun) -> serde_json::Value {
    let mut v = serde_json::to_value(r).unwrap();
    v.as_object_mut().unwrap().remove("timings");
    v
}

fn reproducible() -> Outcome {
    let net = florentine();
    let a = without_timings(&run(&net)?);
    let b = without_timings(&run(&net)?);
    ensure(a == b, "two runs differ")?;
    Ok(format!(
        "{} bytes of run record identical",
        a.to_string().len()
    ))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("change scores", change_scores_are_differences),
        ("estimator accuracy", estimates_match_exact_mle),
        ("edges-only closed form", edges_only_closed_form),
        ("sampler correctness", sampler_matches_bernoulli),
        ("degeneracy detection", runaway_is_flagged),
        ("acceptance rule", acceptance_rule_truth_table),
        ("end to end", end_to_end),
        ("nomination validity", nomination_validity),
        ("interpretation scoring", interpretation_accuracy),
        ("reproducibility", reproducible),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {} [{name}]: PASS ({detail}) [{secs:.1}s]", k + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {} [{name}]: FAIL ({why}) [{secs:.1}s]", k + 1);
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
