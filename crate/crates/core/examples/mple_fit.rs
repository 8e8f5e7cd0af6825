//! Pseudolikelihood fits, including the closed form for edges alone.

use ergm_search::estim::{bernoulli_log_lik, bic, fit_mple};
use ergm_search::fixtures::florentine;
use ergm_search::terms::ModelSpec;

fn main() {
    let net = florentine();
    let p = net.density();
    let null = fit_mple(&ModelSpec::parse("edges").unwrap(), &net).unwrap();
    println!(
        "edges: {:.6}, logit(density) {:.6}",
        null.theta[0],
        (p / (1.0 - p)).ln()
    );
    println!(
        "BIC {:.6}, closed form {:.6}",
        null.bic,
        bic(
            bernoulli_log_lik(net.edge_count(), net.dyad_count()),
            1,
            net.dyad_count()
        )
    );

    let fit = fit_mple(
        &ModelSpec::parse("edges + gwesp(decay=0.5) + nodecov(attr=wealth)").unwrap(),
        &net,
    )
    .unwrap();
    for (name, t) in fit.coefficients() {
        println!("{name:<24} {t:>8.4}");
    }
    println!("pseudo-BIC {:.3}", fit.bic);
}
