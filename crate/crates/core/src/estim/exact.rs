//! Exact likelihood by enumerating every graph on a small node set.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};

use super::{bic, EstimError, FitResult, Method};
use crate::network::Network;
use crate::terms::{CompiledModel, ModelSpec};

/// Largest dyad count accepted (2^21 graphs).
pub const MAX_EXACT_DYADS: usize = 21;

/// Distribution of `s(Y)` over all graphs, as distinct vectors with counts.
#[derive(Debug, Clone)]
pub struct ExactModel {
    support: Vec<Vec<f64>>,
    log_counts: Vec<f64>,
    observed: Vec<f64>,
    dyads: usize,
}

impl ExactModel {
    pub fn new(spec: &ModelSpec, net: &Network) -> Result<Self, EstimError> {
        let dyads = net.dyad_count();
        if dyads > MAX_EXACT_DYADS {
            return Err(EstimError::TooLarge {
                dyads,
                limit: MAX_EXACT_DYADS,
            });
        }
        let model = CompiledModel::new(spec, net)?;
        let observed = model.values(net);
        let pairs: Vec<(usize, usize)> = net.dyads().collect();

        let mut g = Network::empty(net.node_count(), net.is_directed());
        for (name, col) in net.attributes() {
            g = g
                .with_attribute(name, col.clone())
                .expect("same node count");
        }
        let mut stats = model.values(&g);
        let mut delta = vec![0.0; stats.len()];
        let key = |s: &[f64]| -> Vec<i64> { s.iter().map(|x| (x * 1e9).round() as i64).collect() };
        let mut hist: HashMap<Vec<i64>, (Vec<f64>, u64)> = HashMap::new();
        hist.insert(key(&stats), (stats.clone(), 1));
        // reflected Gray code: step g flips the dyad at its lowest set bit
        for step in 1u64..(1u64 << dyads) {
            let (i, j) = pairs[step.trailing_zeros() as usize];
            model.changes_into(&g, i, j, &mut delta);
            let sign = if g.has_edge(i, j) { -1.0 } else { 1.0 };
            g.flip(i, j);
            for (s, d) in stats.iter_mut().zip(&delta) {
                *s += sign * d;
            }
            hist.entry(key(&stats))
                .or_insert_with(|| (stats.clone(), 0))
                .1 += 1;
        }
        let mut entries: Vec<(Vec<i64>, (Vec<f64>, u64))> = hist.into_iter().collect();
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        let (support, log_counts) = entries
            .into_iter()
            .map(|(_, (s, c))| (s, (c as f64).ln()))
            .unzip();
        Ok(ExactModel {
            support,
            log_counts,
            observed,
            dyads,
        })
    }

    pub fn observed(&self) -> &[f64] {
        &self.observed
    }

    pub fn support_size(&self) -> usize {
        self.support.len()
    }

    fn log_weights(&self, theta: &[f64]) -> Vec<f64> {
        self.support
            .iter()
            .zip(&self.log_counts)
            .map(|(s, c)| c + s.iter().zip(theta).map(|(a, b)| a * b).sum::<f64>())
            .collect()
    }

    /// `ψ(θ) = ln Σ_y exp(θ·s(y))`.
    pub fn log_partition(&self, theta: &[f64]) -> f64 {
        let w = self.log_weights(theta);
        let max = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        max + w.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
    }

    pub fn log_lik(&self, theta: &[f64]) -> f64 {
        self.observed
            .iter()
            .zip(theta)
            .map(|(s, t)| s * t)
            .sum::<f64>()
            - self.log_partition(theta)
    }

    /// Mean and covariance of `s(Y)` under `θ`.
    pub fn moments(&self, theta: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
        let w = self.log_weights(theta);
        let max = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let p: Vec<f64> = w.iter().map(|x| (x - max).exp()).collect();
        let z: f64 = p.iter().sum();
        let k = self.observed.len();
        let mut mean = vec![0.0; k];
        for (s, q) in self.support.iter().zip(&p) {
            for (m, x) in mean.iter_mut().zip(s) {
                *m += q / z * x;
            }
        }
        let mut cov = vec![vec![0.0; k]; k];
        for (s, q) in self.support.iter().zip(&p) {
            for a in 0..k {
                for b in 0..k {
                    cov[a][b] += q / z * (s[a] - mean[a]) * (s[b] - mean[b]);
                }
            }
        }
        (mean, cov)
    }

    /// Newton ascent on the exact log-likelihood from `init`.
    pub fn fit(&self, spec: &ModelSpec, init: &[f64]) -> Result<FitResult, EstimError> {
        let k = self.observed.len();
        let mut theta = DVector::from_column_slice(init);
        let mut ll = self.log_lik(theta.as_slice());
        let mut converged = false;
        let mut iterations = 0;
        let mut grad_norm = f64::INFINITY;
        for it in 1..=200 {
            iterations = it;
            let (mean, cov) = self.moments(theta.as_slice());
            let grad =
                DVector::from_iterator(k, self.observed.iter().zip(&mean).map(|(o, m)| o - m));
            grad_norm = grad.amax();
            if grad_norm <= 1e-10 {
                converged = true;
                break;
            }
            let info = DMatrix::from_fn(k, k, |a, b| cov[a][b]);
            let Some(chol) = info.cholesky() else { break };
            let mut step = chol.solve(&grad);
            let mut halvings = 0;
            loop {
                let next = &theta + &step;
                let next_ll = self.log_lik(next.as_slice());
                if next_ll >= ll - 1e-14 || halvings == 50 {
                    theta = next;
                    ll = next_ll;
                    break;
                }
                step *= 0.5;
                halvings += 1;
            }
            if theta.iter().any(|t| !t.is_finite()) {
                return Err(EstimError::NonFinite);
            }
        }
        Ok(FitResult {
            spec: spec.clone(),
            theta: theta.iter().copied().collect(),
            method: Method::Exact,
            converged,
            log_lik: ll,
            bic: bic(ll, k, self.dyads),
            dyads: self.dyads,
            iterations,
            controls: None,
            seeds: Vec::new(),
            scaled_gradient: None,
            note: (!converged).then(|| format!("gradient max-norm {grad_norm:e}")),
        })
    }
}

/// Exact MLE by enumeration; only for networks with at most
/// [`MAX_EXACT_DYADS`] dyads.
pub fn exact_fit(spec: &ModelSpec, net: &Network) -> Result<FitResult, EstimError> {
    let model = ExactModel::new(spec, net)?;
    model.fit(spec, &vec![0.0; spec.len()])
}
