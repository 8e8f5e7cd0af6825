//! Simulation GOF for a fitted model, and the degeneracy guard.

use ergm_search::estim::fit_mple;
use ergm_search::fixtures::{florentine, planted_triangles};
use ergm_search::gof::{gof, gof_controls};
use ergm_search::terms::ModelSpec;

fn main() {
    let net = florentine();
    let spec = ModelSpec::parse("edges + nodecov(attr=wealth)").unwrap();
    let fit = fit_mple(&spec, &net).unwrap();
    let report = gof(&spec, &fit.theta, &net, &gof_controls(&net, 1)).unwrap();
    print!("{}", report.to_tsv());
    println!(
        "max |z| {:.2}, adequate {}",
        report.max_abs_z, report.adequate
    );

    // a large triangle coefficient fills in the graph
    let tri = planted_triangles(30, 0.03, 2);
    let spec = ModelSpec::parse("edges + triangle").unwrap();
    let report = gof(&spec, &[-2.0, 2.0], &tri, &gof_controls(&tri, 1)).unwrap();
    println!(
        "triangle model: simulated edges {:.1} against {}, degenerate {}",
        report.sim_edge_mean, report.observed_edges, report.degenerate
    );
}
