//! Full search with the rule-based engine on two bundled networks.

use std::time::Instant;

use ergm_search::fixtures::{florentine, planted_homophily};
use ergm_search::pipeline::{run_pipeline, PipelineConfig};
use ergm_search::proposer::HeuristicEngine;

fn main() {
    for (name, net, query) in [
        (
            "florentine",
            florentine(),
            "marriage alliances among Renaissance Florentine families",
        ),
        (
            "homophily",
            planted_homophily(40, 2, 0.3, 0.02, 7),
            "friendships in a club split into two groups",
        ),
    ] {
        let t = Instant::now();
        let config = PipelineConfig {
            query: query.into(),
            ..PipelineConfig::default()
        };
        let run = run_pipeline(&net, &HeuristicEngine, &config, &mut |e| {
            println!("  [{}] {:?} {}", e.stage, e.kind, e.detail)
        });
        match run {
            Err(e) => println!("{name}: {e}"),
            Ok(run) => {
                let fin = run.final_eval();
                println!("{name}: selected {}", run.selected());
                for a in &run.refinement.fallback {
                    println!(
                        "  fallback {} converged={} accepted={} {:?}",
                        a.spec, a.converged, a.accepted, a.reason
                    );
                }
                for e in &run.refinement.edits {
                    println!(
                        "  round {}: {:?} -> {:?} bic={:?} z={:?}",
                        e.round,
                        e.edit.as_ref().map(|x| x.to_string()),
                        e.decision,
                        e.fit.as_ref().map(|f| f.bic),
                        e.gof.as_ref().map(|g| g.max_abs_z)
                    );
                }
                println!(
                    "  final {} bic {:.2} null {:.2} max|z| {:.2} degenerate {} improvement {:.1}% ({:.1?})",
                    fin.spec,
                    fin.fit.bic,
                    run.null_bic,
                    fin.gof.max_abs_z,
                    fin.gof.degenerate,
                    100.0 * run.improvement(),
                    t.elapsed()
                );
                println!("{}", run.interpretation.summary.text);
            }
        }
    }
}
