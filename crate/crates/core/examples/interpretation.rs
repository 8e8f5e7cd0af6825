//! Mechanism summary of a fitted model and how it is scored.

use ergm_search::estim::fit_mple;
use ergm_search::fixtures::planted_homophily;
use ergm_search::proposer::{
    score_interpretation, HeuristicEngine, Mechanism, MechanismClaim, ProposalEngine,
};
use ergm_search::terms::ModelSpec;

fn main() {
    let net = planted_homophily(40, 2, 0.3, 0.02, 7);
    let spec = ModelSpec::parse("edges + gwesp(decay=0.5) + nodematch(attr=group)").unwrap();
    let fit = fit_mple(&spec, &net).unwrap();
    let summary = HeuristicEngine
        .synthesize(&spec, &fit.theta, &net.metadata())
        .unwrap();
    println!("{}", summary.text);
    println!("{:?}", score_interpretation(&summary, &spec, &fit.theta));

    // an unsupported claim only counts against the score before filtering
    let mut loose = summary.clone();
    loose.claims.push(MechanismClaim {
        mechanism: Mechanism::Reciprocity,
        direction: None,
        strength: None,
        terms: vec![],
    });
    println!(
        "with a stray claim: {:?}",
        score_interpretation(&loose, &spec, &fit.theta)
    );
    println!(
        "after filtering:    {:?}",
        score_interpretation(&loose.filtered(&spec), &spec, &fit.theta)
    );
}
