//! Change statistics against full recomputation on a small directed network.

use ergm_search::fixtures::reciprocal;
use ergm_search::terms::{change_score, enumerate_universe, statistic};

fn main() {
    let net = reciprocal(8, 0.25, 0.5, 3);
    let (i, j) = (0, 5);
    println!(
        "toggling {i}->{j}, currently {}",
        if net.has_edge(i, j) { "on" } else { "off" }
    );
    let flipped = net.toggle(i, j).unwrap();
    for term in enumerate_universe(&net).terms() {
        let delta = change_score(term, &net, i, j).unwrap();
        let (on, off) = if net.has_edge(i, j) {
            (&net, &flipped)
        } else {
            (&flipped, &net)
        };
        let direct = statistic(term, on).unwrap() - statistic(term, off).unwrap();
        println!("{term:<28} {delta:>10.5} {direct:>10.5}");
    }
}
