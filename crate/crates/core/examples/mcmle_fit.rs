//! MCMLE against exact enumeration on a four-node directed network.

use ergm_search::estim::{exact_fit, fit_mcmle, fit_mple};
use ergm_search::network::Network;
use ergm_search::sampler::SimControls;
use ergm_search::terms::ModelSpec;

fn main() {
    let net =
        Network::from_edges(4, true, [(0, 1), (1, 0), (1, 2), (2, 3), (3, 1), (0, 2)]).unwrap();
    let spec = ModelSpec::parse("edges + mutual").unwrap();

    let exact = exact_fit(&spec, &net).unwrap();
    let controls = SimControls::default_for(&net, 5).with_draws(20_000);
    let mc = fit_mcmle(&spec, &net, &[0.0, 0.0], &controls).unwrap();
    let pl = fit_mple(&spec, &net).unwrap();

    println!("{:<8} {:>9} {:>9} {:>9}", "", "exact", "mcmle", "mple");
    for (k, name) in spec.names().iter().enumerate() {
        println!(
            "{name:<8} {:>9.4} {:>9.4} {:>9.4}",
            exact.theta[k], mc.theta[k], pl.theta[k]
        );
    }
    println!("log-lik  {:>9.4} {:>9.4}", exact.log_lik, mc.log_lik);
    println!(
        "mcmle: {} iterations, converged {}",
        mc.iterations, mc.converged
    );
}
