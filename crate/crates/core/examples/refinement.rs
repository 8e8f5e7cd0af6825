//! The single-edit loop, started from an over-specified Florentine model.

use ergm_search::estim::fit_mple;
use ergm_search::fixtures::florentine;
use ergm_search::pipeline::{evaluate_spec, refine_loop, NetworkBackend, PipelineConfig};
use ergm_search::proposer::HeuristicEngine;
use ergm_search::terms::{enumerate_universe, ModelSpec};

fn main() {
    let net = florentine();
    let config = PipelineConfig::default();
    let spec = ModelSpec::parse("edges + gwesp(decay=0.5) + gwdsp(decay=0.5)").unwrap();
    let init = fit_mple(&spec, &net).unwrap().theta;
    let start = evaluate_spec(&spec, &net, &init, &config, 1, 2).unwrap();
    println!(
        "start: {} (BIC {:.2}, max |z| {:.2})",
        start.spec, start.fit.bic, start.gof.max_abs_z
    );

    let mut backend = NetworkBackend {
        net: &net,
        engine: &HeuristicEngine,
        universe: enumerate_universe(&net),
        config: &config,
    };
    let (last, log) = refine_loop(start, &mut backend, config.rounds).unwrap();
    for e in &log {
        let edit = e
            .edit
            .as_ref()
            .map(|x| x.to_string())
            .unwrap_or_else(|| "-".into());
        let bic = e.fit.as_ref().map_or(f64::NAN, |f| f.bic);
        println!(
            "round {}: {edit} (BIC {bic:.2}) -> {:?}",
            e.round, e.decision
        );
    }
    println!(
        "final: {} (BIC {:.2}, max |z| {:.2})",
        last.spec, last.fit.bic, last.gof.max_abs_z
    );
}
