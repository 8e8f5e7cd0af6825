//! Candidate generation and pseudolikelihood screening.

use ergm_search::fixtures::planted_homophily;
use ergm_search::pipeline::{stage1_generate, stage2_screen, ScreenStatus};
use ergm_search::proposer::HeuristicEngine;

fn main() {
    let net = planted_homophily(40, 2, 0.3, 0.02, 7);
    let pool = stage1_generate(&net, "friendships in a club", &HeuristicEngine).unwrap();
    println!(
        "nominated: {}",
        pool.admissible
            .iter()
            .map(|t| t.to_string())
            .collect::<Vec<_>>()
            .join(", ")
    );

    let screening = stage2_screen(&pool, &net, 1).unwrap();
    println!("edges-only pseudo-BIC {:.2}", screening.baseline_bic);
    for r in &screening.results {
        let spec = r.spec.as_ref().map(|s| s.to_string()).unwrap_or_default();
        let status = match &r.status {
            ScreenStatus::Survived => "kept".to_owned(),
            other => format!("{other:?}"),
        };
        println!("{:>9.2}  {spec}  [{status}]", r.bic_s.unwrap_or(f64::NAN));
    }
    println!("selected: {}", screening.selected);
}
