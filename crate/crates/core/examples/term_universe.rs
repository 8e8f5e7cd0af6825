//! Which terms a network admits, and what the specification filter rejects.

use ergm_search::fixtures::{florentine, reciprocal};
use ergm_search::terms::{enumerate_universe, validate_spec, ModelSpec};

fn main() {
    let directed = reciprocal(20, 0.1, 0.5, 7);
    println!(
        "directed universe:\n  {}",
        enumerate_universe(&directed).names().join("\n  ")
    );

    let net = florentine();
    let universe = enumerate_universe(&net);
    for spec in [
        "edges + gwesp(decay=0.5) + nodecov(attr=wealth)",
        "edges + mutual",
        "gwesp(decay=0.5)",
        "edges + triangle + gwesp(decay=0.5)",
        "edges + gwesp(decay=0.25) + gwesp(decay=0.75)",
    ] {
        let parsed = ModelSpec::parse(spec).unwrap();
        match validate_spec(&parsed, &universe) {
            Ok(()) => println!("ok        {spec}"),
            Err(why) => println!("rejected  {spec}: {why}"),
        }
    }
}
