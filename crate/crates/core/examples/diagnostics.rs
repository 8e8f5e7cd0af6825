//! Structural summary and attribute metadata for the bundled Florentine network.

use ergm_search::fixtures::florentine;
use ergm_search::network::geodesic_distribution;

fn main() {
    let net = florentine();
    let d = net.diagnostics();
    println!(
        "{} nodes, {} ties, density {:.3}",
        d.node_count, d.edge_count, d.density
    );
    println!("clustering {:.3}", d.clustering);
    println!("{}", serde_json::to_string_pretty(&d.degrees).unwrap());

    for a in net.metadata().attributes {
        println!("{}: {:?}, usable {}", a.name, a.kind, a.usable);
    }

    let geo = geodesic_distribution(&net);
    for k in 1..=4 {
        println!("pairs at distance {k}: {}", geo.at(k));
    }
    println!("unreachable pairs: {}", geo.unreachable);
}
