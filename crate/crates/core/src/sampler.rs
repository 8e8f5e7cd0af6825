//! Tie-toggle Metropolis-Hastings sampler.
//!
//! Each proposal picks an ordered node pair uniformly at random and flips
//! that dyad with probability `min(1, exp(±θ·Δs))`. A pair with `i == j` is a
//! null move; without it the chain is periodic wherever every toggle is
//! accepted (θ = 0 is the obvious case) and even thinning sees one parity. Statistics are carried along
//! incrementally and checked against a full recomputation at the end.
//!
//! The generator is ChaCha8 seeded from a `u64`, and every random draw is
//! taken over `u64` ranges, so runs agree across platforms.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::Network;
use crate::terms::{CompiledModel, ModelSpec, TermError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimControls {
    /// Proposals discarded before the first draw.
    pub burn_in: u64,
    /// Proposals between retained draws.
    pub thin: u64,
    pub draws: usize,
    pub seed: u64,
}

impl SimControls {
    /// `20·n_d` burn-in, `n_d` thinning, 500 draws.
    pub fn default_for(net: &Network, seed: u64) -> Self {
        let nd = net.dyad_count().max(1) as u64;
        SimControls {
            burn_in: 20 * nd,
            thin: nd,
            draws: 500,
            seed,
        }
    }

    /// Short run used by the stability probe.
    pub fn probe_for(net: &Network, seed: u64) -> Self {
        let nd = net.dyad_count().max(1) as u64;
        SimControls {
            burn_in: 5 * nd,
            thin: (nd / 2).max(1),
            draws: 50,
            seed,
        }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        SimControls { seed, ..self }
    }

    pub fn with_draws(self, draws: usize) -> Self {
        SimControls { draws, ..self }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.draws == 0 {
            return Err(SimError::Controls("draws must be at least 1".into()));
        }
        if self.thin == 0 {
            return Err(SimError::Controls("thin must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error(transparent)]
    Term(#[from] TermError),
    #[error("invalid controls: {0}")]
    Controls(String),
    #[error("theta has {got} entries but the model has {want} terms")]
    Length { got: usize, want: usize },
    #[error("theta contains a non-finite entry")]
    NonFiniteTheta,
    #[error("network has no dyads to toggle")]
    NoDyads,
    #[error("incremental statistics drifted from recomputation by {0:e}")]
    Drift(f64),
}

/// Retained draws of one chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleBatch {
    /// One row of `s(Y)` per draw, in spec order.
    pub statistics: Vec<Vec<f64>>,
    pub edge_counts: Vec<usize>,
    #[serde(skip)]
    pub final_network: Option<Network>,
    /// Toggles accepted after burn-in.
    pub accepted: u64,
    pub proposals: u64,
}

impl SampleBatch {
    pub fn draws(&self) -> usize {
        self.statistics.len()
    }

    pub fn mean(&self) -> Vec<f64> {
        let k = self.statistics.first().map_or(0, Vec::len);
        let mut m = vec![0.0; k];
        for row in &self.statistics {
            for (a, x) in m.iter_mut().zip(row) {
                *a += x;
            }
        }
        let b = self.draws().max(1) as f64;
        m.iter_mut().for_each(|a| *a /= b);
        m
    }

    /// Sample covariance (divisor `B`) as a row-major `k × k` matrix.
    pub fn covariance(&self) -> Vec<Vec<f64>> {
        let mean = self.mean();
        let k = mean.len();
        let mut c = vec![vec![0.0; k]; k];
        for row in &self.statistics {
            for a in 0..k {
                let da = row[a] - mean[a];
                for b in a..k {
                    c[a][b] += da * (row[b] - mean[b]);
                }
            }
        }
        let n = self.draws().max(1) as f64;
        for a in 0..k {
            for b in a..k {
                c[a][b] /= n;
                c[b][a] = c[a][b];
            }
        }
        c
    }

    pub fn mean_edges(&self) -> f64 {
        self.edge_counts.iter().sum::<usize>() as f64 / self.edge_counts.len().max(1) as f64
    }

    /// Concatenates the draws of another chain.
    pub fn merge(mut self, other: SampleBatch) -> SampleBatch {
        self.statistics.extend(other.statistics);
        self.edge_counts.extend(other.edge_counts);
        self.accepted += other.accepted;
        self.proposals += other.proposals;
        self.final_network = other.final_network.or(self.final_network);
        self
    }
}

fn check_inputs(spec: &ModelSpec, theta: &[f64], controls: &SimControls) -> Result<(), SimError> {
    controls.validate()?;
    if theta.len() != spec.len() {
        return Err(SimError::Length {
            got: theta.len(),
            want: spec.len(),
        });
    }
    if theta.iter().any(|t| !t.is_finite()) {
        return Err(SimError::NonFiniteTheta);
    }
    Ok(())
}

pub fn simulate(
    spec: &ModelSpec,
    theta: &[f64],
    start: &Network,
    controls: &SimControls,
) -> Result<SampleBatch, SimError> {
    simulate_observed(spec, theta, start, controls, |_, _| {})
}

/// Like [`simulate`], calling `observe(network, stats)` at every retained draw.
pub fn simulate_observed(
    spec: &ModelSpec,
    theta: &[f64],
    start: &Network,
    controls: &SimControls,
    mut observe: impl FnMut(&Network, &[f64]),
) -> Result<SampleBatch, SimError> {
    check_inputs(spec, theta, controls)?;
    let model = CompiledModel::new(spec, start)?;
    let n = start.node_count() as u64;
    if n < 2 {
        return Err(SimError::NoDyads);
    }
    let mut net = start.clone();
    let mut stats = model.values(&net);
    let mut delta = vec![0.0; stats.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(controls.seed);

    let mut step = |net: &mut Network, stats: &mut [f64], rng: &mut ChaCha8Rng| -> bool {
        let (i, j) = (
            rng.random_range(0..n) as usize,
            rng.random_range(0..n) as usize,
        );
        if i == j {
            return false;
        }
        model.changes_into(net, i, j, &mut delta);
        let sign = if net.has_edge(i, j) { -1.0 } else { 1.0 };
        let log_ratio: f64 = sign * theta.iter().zip(&delta).map(|(t, d)| t * d).sum::<f64>();
        let accept = log_ratio >= 0.0 || rng.random::<f64>() < log_ratio.exp();
        if accept {
            net.flip(i, j);
            for (s, d) in stats.iter_mut().zip(&delta) {
                *s += sign * d;
            }
        }
        accept
    };

    for _ in 0..controls.burn_in {
        step(&mut net, &mut stats, &mut rng);
    }
    let mut accepted = 0u64;
    let mut statistics = Vec::with_capacity(controls.draws);
    let mut edge_counts = Vec::with_capacity(controls.draws);
    for _ in 0..controls.draws {
        for _ in 0..controls.thin {
            accepted += step(&mut net, &mut stats, &mut rng) as u64;
        }
        observe(&net, &stats);
        statistics.push(stats.clone());
        edge_counts.push(net.edge_count());
    }

    let exact = model.values(&net);
    let drift = exact
        .iter()
        .zip(&stats)
        .map(|(e, s)| (e - s).abs() / e.abs().max(1.0))
        .fold(0.0, f64::max);
    if drift > 1e-6 {
        return Err(SimError::Drift(drift));
    }

    Ok(SampleBatch {
        statistics,
        edge_counts,
        final_network: Some(net),
        accepted,
        proposals: controls.thin * controls.draws as u64,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Stability {
    Stable { mean_edges: f64 },
    Unstable { reason: String, mean_edges: f64 },
}

impl Stability {
    pub fn is_stable(&self) -> bool {
        matches!(self, Stability::Stable { .. })
    }
}

/// Short simulation at `theta` started from the observed network.
///
/// Unstable when the mean simulated edge count is off by more than half of
/// `|E|`, or when no toggle is accepted after burn-in.
pub fn stability_probe(
    spec: &ModelSpec,
    theta: &[f64],
    observed: &Network,
    seed: u64,
) -> Result<Stability, SimError> {
    let batch = simulate(
        spec,
        theta,
        observed,
        &SimControls::probe_for(observed, seed),
    )?;
    let mean_edges = batch.mean_edges();
    let target = observed.edge_count() as f64;
    if (mean_edges - target).abs() > 0.5 * target {
        return Ok(Stability::Unstable {
            reason: format!("mean simulated edge count {mean_edges:.1} against {target} observed"),
            mean_edges,
        });
    }
    if batch.accepted == 0 {
        return Ok(Stability::Unstable {
            reason: "chain frozen after burn-in".into(),
            mean_edges,
        });
    }
    Ok(Stability::Stable { mean_edges })
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Child seed for a labelled sub-task; stable across platforms and releases.
pub fn derive_seed(base: u64, label: &str, index: u64) -> u64 {
    let mut h = splitmix(base);
    for b in label.bytes() {
        h = splitmix(h ^ b as u64);
    }
    splitmix(h ^ index)
}
