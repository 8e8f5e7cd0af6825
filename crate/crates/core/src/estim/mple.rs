//! Maximum pseudolikelihood by iteratively reweighted least squares.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};

use super::{bic, EstimError, FitResult, Method};
use crate::network::Network;
use crate::terms::{CompiledModel, ModelSpec};

/// A coefficient beyond this magnitude is read as separation.
pub const SEPARATION_BOUND: f64 = 15.0;

const MAX_ITER: usize = 100;

/// Distinct change-score rows with their tie / no-tie counts.
struct Design {
    rows: Vec<Vec<f64>>,
    ties: Vec<f64>,
    total: Vec<f64>,
}

fn design(spec: &ModelSpec, net: &Network) -> Result<Design, EstimError> {
    let model = CompiledModel::new(spec, net)?;
    let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut d = Design {
        rows: Vec::new(),
        ties: Vec::new(),
        total: Vec::new(),
    };
    let mut buf = vec![0.0; model.len()];
    for (i, j) in net.dyads() {
        model.changes_into(net, i, j, &mut buf);
        let key: Vec<u64> = buf.iter().map(|x| x.to_bits()).collect();
        let k = *index.entry(key).or_insert_with(|| {
            d.rows.push(buf.clone());
            d.ties.push(0.0);
            d.total.push(0.0);
            d.rows.len() - 1
        });
        d.total[k] += 1.0;
        d.ties[k] += net.has_edge(i, j) as u8 as f64;
    }
    Ok(d)
}

fn log1pexp(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Design {
    fn eta(&self, theta: &DVector<f64>) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| r.iter().zip(theta.iter()).map(|(a, b)| a * b).sum())
            .collect()
    }

    fn log_lik(&self, theta: &DVector<f64>) -> f64 {
        self.eta(theta)
            .iter()
            .zip(self.ties.iter().zip(&self.total))
            .map(|(&e, (&y, &n))| y * e - n * log1pexp(e))
            .sum()
    }

    fn matrix(&self) -> DMatrix<f64> {
        let k = self.rows.first().map_or(0, Vec::len);
        DMatrix::from_fn(self.rows.len(), k, |r, c| self.rows[r][c])
    }

    /// Collinearity check on column-scaled `X'WX` with dyad-count weights.
    fn full_rank(&self) -> bool {
        let x = self.matrix();
        let k = x.ncols();
        let mut g = DMatrix::zeros(k, k);
        for (r, n) in self.total.iter().enumerate() {
            let row = x.row(r);
            g += row.transpose() * row * *n;
        }
        let scale: Vec<f64> = (0..k).map(|c| g[(c, c)].sqrt()).collect();
        if scale.contains(&0.0) {
            return false;
        }
        let scaled = DMatrix::from_fn(k, k, |a, b| g[(a, b)] / (scale[a] * scale[b]));
        let sv = scaled.singular_values();
        let max = sv.max();
        sv.min() / max >= 1e-10
    }
}

pub fn fit_mple(spec: &ModelSpec, net: &Network) -> Result<FitResult, EstimError> {
    let d = design(spec, net)?;
    if !d.full_rank() {
        return Err(EstimError::RankDeficient);
    }
    let k = spec.len();
    let x = d.matrix();
    let mut theta = DVector::zeros(k);
    let mut ll = d.log_lik(&theta);
    let mut converged = false;
    let mut separated = false;
    let mut iterations = 0;
    for it in 1..=MAX_ITER {
        iterations = it;
        let eta = d.eta(&theta);
        let mut grad = DVector::zeros(k);
        let mut info = DMatrix::zeros(k, k);
        for (r, &e) in eta.iter().enumerate() {
            let p = sigmoid(e);
            let row = x.row(r).transpose();
            grad += &row * (d.ties[r] - d.total[r] * p);
            info += &row * row.transpose() * (d.total[r] * p * (1.0 - p));
        }
        let Some(chol) = info.cholesky() else {
            separated = true;
            break;
        };
        let mut step = chol.solve(&grad);
        let mut next = &theta + &step;
        let mut next_ll = d.log_lik(&next);
        let mut halvings = 0;
        while !(next_ll >= ll - 1e-12) && halvings < 30 {
            step *= 0.5;
            next = &theta + &step;
            next_ll = d.log_lik(&next);
            halvings += 1;
        }
        let moved = step.amax();
        theta = next;
        let gain = next_ll - ll;
        ll = next_ll;
        if theta.amax() > SEPARATION_BOUND || !ll.is_finite() {
            separated = true;
            break;
        }
        if moved < 1e-10 || gain.abs() < 1e-13 * ll.abs().max(1.0) {
            converged = true;
            break;
        }
    }
    if theta.iter().any(|t| !t.is_finite()) {
        return Err(EstimError::NonFinite);
    }
    let dyads = net.dyad_count();
    Ok(FitResult {
        spec: spec.clone(),
        theta: theta.iter().copied().collect(),
        method: Method::Mple,
        converged: converged && !separated,
        log_lik: ll,
        bic: bic(ll, k, dyads),
        dyads,
        iterations,
        controls: None,
        seeds: Vec::new(),
        scaled_gradient: None,
        note: separated.then(|| "separation".to_owned()),
    })
}
