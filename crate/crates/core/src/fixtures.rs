//! Bundled networks and synthetic generators.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ingest::parse_network;
use crate::network::{AttributeColumn, Network};

pub const FLORENTINE_EDGES: &str = include_str!("../data/florentine_edges.csv");
pub const FLORENTINE_ATTRIBUTES: &str = include_str!("../data/florentine_attrs.csv");

/// Marriage ties among 16 Florentine families, with wealth and priorates.
pub fn florentine() -> Network {
    parse_network(FLORENTINE_EDGES, Some(FLORENTINE_ATTRIBUTES), false)
        .expect("bundled data parses")
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn erdos_renyi(n: usize, p: f64, directed: bool, seed: u64) -> Network {
    let mut r = rng(seed);
    let dyads: Vec<(usize, usize)> = Network::empty(n, directed).dyads().collect();
    let edges: Vec<_> = dyads.into_iter().filter(|_| r.random_bool(p)).collect();
    Network::from_edges(n, directed, edges).unwrap()
}

/// Undirected network whose ties fall mostly within `groups` blocks.
///
/// Carries a categorical `group` and a numeric `score` unrelated to ties.
pub fn planted_homophily(n: usize, groups: usize, p_in: f64, p_out: f64, seed: u64) -> Network {
    let mut r = rng(seed);
    let group: Vec<usize> = (0..n).map(|i| i % groups).collect();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let p = if group[i] == group[j] { p_in } else { p_out };
            if r.random_bool(p) {
                edges.push((i, j));
            }
        }
    }
    let labels: Vec<Option<String>> = group.iter().map(|g| Some(format!("g{g}"))).collect();
    let score: Vec<Option<f64>> = (0..n)
        .map(|_| Some(r.random_range(0.0..10.0_f64).round()))
        .collect();
    Network::from_edges(n, false, edges)
        .unwrap()
        .with_attribute("group", AttributeColumn::categorical(&labels))
        .unwrap()
        .with_attribute("score", AttributeColumn::numeric(score))
        .unwrap()
}

/// Undirected network of `n / 3` disjoint triangles plus sparse noise.
pub fn planted_triangles(n: usize, p_noise: f64, seed: u64) -> Network {
    let mut r = rng(seed);
    let mut edges = Vec::new();
    for k in 0..n / 3 {
        let (a, b, c) = (3 * k, 3 * k + 1, 3 * k + 2);
        edges.extend([(a, b), (b, c), (a, c)]);
    }
    for i in 0..n {
        for j in i + 1..n {
            if i / 3 != j / 3 && r.random_bool(p_noise) {
                edges.push((i, j));
            }
        }
    }
    Network::from_edges(n, false, edges).unwrap()
}

/// Directed network where each arc is returned with probability `p_back`.
///
/// Carries a categorical `dept` with three levels and a numeric `tenure`.
pub fn reciprocal(n: usize, p: f64, p_back: f64, seed: u64) -> Network {
    let mut r = rng(seed);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i != j && r.random_bool(p) {
                edges.push((i, j));
                if r.random_bool(p_back) {
                    edges.push((j, i));
                }
            }
        }
    }
    let dept: Vec<Option<String>> = (0..n)
        .map(|i| Some(["ops", "sales", "rnd"][i % 3].to_string()))
        .collect();
    let tenure: Vec<Option<f64>> = (0..n).map(|_| Some(r.random_range(1..30) as f64)).collect();
    Network::from_edges(n, true, edges)
        .unwrap()
        .with_attribute("dept", AttributeColumn::categorical(&dept))
        .unwrap()
        .with_attribute("tenure", AttributeColumn::numeric(tenure))
        .unwrap()
}
