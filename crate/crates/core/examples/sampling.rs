//! Tie-toggle sampling from an edges-only model.

use ergm_search::network::Network;
use ergm_search::sampler::{simulate, SimControls};
use ergm_search::terms::{ModelSpec, Term};

fn main() {
    let net = Network::empty(10, false);
    let spec = ModelSpec::new(vec![Term::Edges]);
    for theta in [-2.0, 0.0, 1.0] {
        let batch = simulate(&spec, &[theta], &net, &SimControls::default_for(&net, 11)).unwrap();
        let expected = net.dyad_count() as f64 / (1.0 + f64::exp(-theta));
        println!(
            "theta {theta:>5}: mean edges {:.2} (expected {expected:.2}), acceptance {:.2}",
            batch.mean_edges(),
            batch.accepted as f64 / batch.proposals as f64
        );
    }
}
