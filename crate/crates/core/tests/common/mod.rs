//! Shared test helpers: a brute-force statistic oracle and random networks
//! that keep their raw attribute values.
#![allow(dead_code)]

use ergm_search::network::{AttributeColumn, Network};
use ergm_search::terms::{Family, Term};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A network as a dense adjacency matrix plus attribute copies.
#[derive(Clone, Debug)]
pub struct Raw {
    pub directed: bool,
    pub y: Vec<Vec<bool>>,
    pub labels: Vec<String>,
    pub values: Vec<f64>,
}

impl Raw {
    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn random(rng: &mut ChaCha8Rng, n: usize, directed: bool, p: f64) -> Raw {
        let mut y = vec![vec![false; n]; n];
        for i in 0..n {
            for j in 0..n {
                if i == j || (!directed && j < i) {
                    continue;
                }
                if rng.random_bool(p) {
                    y[i][j] = true;
                    if !directed {
                        y[j][i] = true;
                    }
                }
            }
        }
        let levels = ["blue", "green", "red"];
        let mut labels: Vec<String> = (0..n)
            .map(|_| levels[rng.random_range(0..3)].to_string())
            .collect();
        labels[0] = "blue".into();
        labels[n - 1] = "red".into();
        let mut values: Vec<f64> = (0..n)
            .map(|_| rng.random_range(-5..=5) as f64 * 0.5)
            .collect();
        values[0] = -3.0;
        values[n - 1] = 2.5;
        Raw {
            directed,
            y,
            labels,
            values,
        }
    }

    pub fn network(&self) -> Network {
        let n = self.n();
        let mut edges = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if self.y[i][j] && (self.directed || i < j) {
                    edges.push((i, j));
                }
            }
        }
        let labels: Vec<Option<&str>> = self.labels.iter().map(|s| Some(s.as_str())).collect();
        Network::from_edges(n, self.directed, edges)
            .unwrap()
            .with_attribute("colour", AttributeColumn::categorical(&labels))
            .unwrap()
            .with_attribute(
                "size",
                AttributeColumn::numeric(self.values.iter().map(|&v| Some(v)).collect()),
            )
            .unwrap()
    }

    pub fn toggled(&self, i: usize, j: usize) -> Raw {
        let mut r = self.clone();
        r.y[i][j] = !r.y[i][j];
        if !r.directed {
            r.y[j][i] = r.y[i][j];
        }
        r
    }

    /// Dyads as ordered pairs (directed) or `i < j` pairs (undirected).
    pub fn dyads(&self) -> Vec<(usize, usize)> {
        let n = self.n();
        let mut v = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if i != j && (self.directed || i < j) {
                    v.push((i, j));
                }
            }
        }
        v
    }

    fn shared(&self, i: usize, j: usize) -> usize {
        (0..self.n())
            .filter(|&k| k != i && k != j && self.y[i][k] && self.y[k][j])
            .count()
    }

    fn degree(&self, i: usize, incoming: bool) -> usize {
        (0..self.n())
            .filter(|&k| if incoming { self.y[k][i] } else { self.y[i][k] })
            .count()
    }
}

/// Geometric weight `e^a (1 - (1 - e^-a)^k)`.
pub fn gw(alpha: f64, k: usize) -> f64 {
    alpha.exp() * (1.0 - (1.0 - (-alpha).exp()).powi(k as i32))
}

/// Statistic computed straight from its definition.
pub fn naive(term: &Term, g: &Raw) -> f64 {
    let n = g.n();
    let d = g.directed;
    let edges: Vec<(usize, usize)> = g.dyads().into_iter().filter(|&(i, j)| g.y[i][j]).collect();
    let alpha = term.decay().map(|x| x.get()).unwrap_or(0.0);
    let baseline = g.labels.iter().min().unwrap().clone();
    match term.family() {
        Family::Edges => edges.len() as f64,
        Family::Mutual => (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .filter(|&(i, j)| g.y[i][j] && g.y[j][i])
            .count() as f64,
        Family::Triangle => {
            let mut c = 0;
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        if i == j || j == k || i == k {
                            continue;
                        }
                        if d {
                            c += (g.y[i][j] && g.y[i][k] && g.y[k][j]) as usize;
                        } else if i < j && j < k {
                            c += (g.y[i][j] && g.y[j][k] && g.y[i][k]) as usize;
                        }
                    }
                }
            }
            c as f64
        }
        Family::Twopath => {
            let mut c = 0;
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        if i == j || j == k || i == k {
                            continue;
                        }
                        if d || i < k {
                            c += (g.y[i][j] && g.y[j][k]) as usize;
                        }
                    }
                }
            }
            c as f64
        }
        Family::Gwesp => edges.iter().map(|&(i, j)| gw(alpha, g.shared(i, j))).sum(),
        Family::Gwdsp => g
            .dyads()
            .iter()
            .map(|&(i, j)| gw(alpha, g.shared(i, j)))
            .sum(),
        Family::Gwdegree | Family::Gwodegree => (0..n).map(|i| gw(alpha, g.degree(i, false))).sum(),
        Family::Gwidegree => (0..n).map(|i| gw(alpha, g.degree(i, true))).sum(),
        Family::Nodematch => edges
            .iter()
            .filter(|&&(i, j)| g.labels[i] == g.labels[j])
            .count() as f64,
        Family::Nodefactor => edges
            .iter()
            .map(|&(i, j)| (g.labels[i] != baseline) as usize + (g.labels[j] != baseline) as usize)
            .sum::<usize>() as f64,
        Family::Nodecov => edges.iter().map(|&(i, j)| g.values[i] + g.values[j]).sum(),
        Family::Absdiff => edges
            .iter()
            .map(|&(i, j)| (g.values[i] - g.values[j]).abs())
            .sum(),
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Edges-only BIC in closed form.
pub fn null_bic_closed_form(edges: usize, dyads: usize) -> f64 {
    let nd = dyads as f64;
    let p = edges as f64 / nd;
    let h = |x: f64| if x > 0.0 { x * x.ln() } else { 0.0 };
    -2.0 * nd * (h(p) + h(1.0 - p)) + nd.ln()
}
