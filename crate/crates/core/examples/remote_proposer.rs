//! Remote engine over a canned transport, showing retries on malformed
//! replies. Point `HttpTransport` at a real endpoint to use a live model.

use std::sync::atomic::{AtomicUsize, Ordering};

use ergm_search::fixtures::florentine;
use ergm_search::proposer::{ProposalEngine, RemoteConfig, RemoteEngine};

fn reply(content: &str) -> String {
    serde_json::json!({"choices": [{"message": {"role": "assistant", "content": content}}]})
        .to_string()
}

fn main() {
    let calls = AtomicUsize::new(0);
    let transport = |_: &str| {
        Ok(match calls.fetch_add(1, Ordering::SeqCst) {
            0 => reply("Sure! Here are some terms."),
            _ => reply(
                r#"{"nominations": [
                    {"term": "edges", "mechanism": "baseline", "justification": "density"},
                    {"term": "gwesp(0.5)", "mechanism": "closure", "justification": "shared partners"},
                    {"term": "mutual", "mechanism": "reciprocity", "justification": "return ties"}
                ]}"#,
            ),
        })
    };
    let config = RemoteConfig {
        backoff_ms: 10,
        ..RemoteConfig::new("http://localhost/v1/chat/completions", "demo")
    };
    let engine = RemoteEngine::new(config, transport);
    let net = florentine();
    let noms = engine
        .propose_terms(&net.diagnostics(), &net.metadata(), "marriage alliances")
        .unwrap();
    for n in &noms {
        println!("{:<12} {:<12} {}", n.term, n.mechanism, n.justification);
    }
    for x in engine.transcript() {
        println!("attempt {} error {:?}", x.attempt, x.error);
    }
}
