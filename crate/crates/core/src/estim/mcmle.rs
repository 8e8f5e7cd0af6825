//! Monte Carlo maximum likelihood and the path-sampling log-likelihood.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::{bic, EstimError, FitResult, Method};
use crate::network::Network;
use crate::sampler::{derive_seed, simulate, SampleBatch, SimControls};
use crate::terms::{model_statistics, ModelSpec, Term};

/// Number of midpoint-rule nodes on the likelihood bridge.
pub const BRIDGE_POINTS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McmleOptions {
    pub max_iter: usize,
    /// Converged once every `|s(y) - mean s(Y)| / sd` is at most this.
    pub tolerance: f64,
    pub max_halvings: usize,
    /// Largest allowed max-norm of a single Newton step.
    pub max_step: f64,
    pub bridge_points: usize,
    /// Whether to run the bridge after convergence.
    pub log_lik: bool,
}

impl Default for McmleOptions {
    fn default() -> Self {
        McmleOptions {
            max_iter: 20,
            tolerance: 0.05,
            max_halvings: 10,
            max_step: 1.0,
            bridge_points: BRIDGE_POINTS,
            log_lik: true,
        }
    }
}

fn scaled_gradient(grad: &DVector<f64>, cov: &DMatrix<f64>) -> f64 {
    grad.iter()
        .enumerate()
        .map(|(k, g)| {
            let sd = cov[(k, k)].sqrt();
            if sd > 0.0 {
                g.abs() / sd
            } else if g.abs() < 1e-12 {
                0.0
            } else {
                f64::INFINITY
            }
        })
        .fold(0.0, f64::max)
}

fn moments(batch: &SampleBatch) -> (DVector<f64>, DMatrix<f64>) {
    let mean = DVector::from_vec(batch.mean());
    let cov = batch.covariance();
    let k = mean.len();
    (mean, DMatrix::from_fn(k, k, |a, b| cov[a][b]))
}

/// Importance-sampling estimate of `ℓ(θ + δ) - ℓ(θ)` from draws at `θ`.
fn log_ratio(batch: &SampleBatch, observed: &DVector<f64>, delta: &DVector<f64>) -> f64 {
    let exps: Vec<f64> = batch
        .statistics
        .iter()
        .map(|row| {
            row.iter()
                .zip(observed.iter())
                .zip(delta.iter())
                .map(|((s, o), d)| d * (s - o))
                .sum()
        })
        .collect();
    let max = exps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + (exps.iter().map(|e| (e - max).exp()).sum::<f64>() / exps.len() as f64).ln();
    -lse
}

pub fn fit_mcmle(
    spec: &ModelSpec,
    net: &Network,
    init: &[f64],
    controls: &SimControls,
) -> Result<FitResult, EstimError> {
    fit_mcmle_with(spec, net, init, controls, &McmleOptions::default())
}

pub fn fit_mcmle_with(
    spec: &ModelSpec,
    net: &Network,
    init: &[f64],
    controls: &SimControls,
    opts: &McmleOptions,
) -> Result<FitResult, EstimError> {
    if init.len() != spec.len() {
        return Err(EstimError::Length {
            got: init.len(),
            want: spec.len(),
        });
    }
    if init.iter().any(|t| !t.is_finite()) {
        return Err(EstimError::NonFinite);
    }
    let observed = DVector::from_vec(model_statistics(spec, net)?);
    let mut theta = DVector::from_column_slice(init);
    let mut seeds = Vec::new();
    let mut converged = false;
    let mut last_scaled = f64::INFINITY;
    let mut iterations = 0;

    for m in 0..opts.max_iter {
        iterations = m + 1;
        let seed = derive_seed(controls.seed, "mcmle", m as u64);
        seeds.push(seed);
        let theta_vec: Vec<f64> = theta.iter().copied().collect();
        let batch = simulate(spec, &theta_vec, net, &controls.with_seed(seed))?;
        let (mean, cov) = moments(&batch);
        let grad = &observed - &mean;
        last_scaled = scaled_gradient(&grad, &cov);
        converged = last_scaled <= opts.tolerance;
        let chol = cov.clone().cholesky().ok_or(EstimError::SingularFisher)?;
        let mut step = chol.solve(&grad);
        let norm = step.amax();
        if !norm.is_finite() {
            return Err(EstimError::NonFinite);
        }
        if norm > opts.max_step {
            step *= opts.max_step / norm;
        }
        for _ in 0..opts.max_halvings {
            if log_ratio(&batch, &observed, &step) >= 0.0 {
                break;
            }
            step *= 0.5;
        }
        // a converged batch still supplies one last Newton update
        theta += step;
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(EstimError::NonFinite);
        }
        if converged {
            break;
        }
    }

    let dyads = net.dyad_count();
    let theta: Vec<f64> = theta.iter().copied().collect();
    let mut fit = FitResult {
        spec: spec.clone(),
        theta,
        method: Method::Mcmle,
        converged,
        log_lik: f64::NAN,
        bic: f64::NAN,
        dyads,
        iterations,
        controls: Some(*controls),
        seeds,
        scaled_gradient: Some(last_scaled),
        note: (!converged).then(|| format!("no convergence in {} iterations", opts.max_iter)),
    };
    if converged && opts.log_lik {
        let (ll, bridge_seeds) = bridge(spec, &fit.theta, net, controls, opts.bridge_points)?;
        fit.seeds.extend(bridge_seeds);
        fit = fit.with_log_lik(ll);
    }
    debug_assert!(
        !fit.converged || !opts.log_lik || fit.bic == bic(fit.log_lik, spec.len(), dyads)
    );
    Ok(fit)
}

/// Log-likelihood at `theta` by path sampling from a Bernoulli reference.
///
/// The reference keeps the edges coefficient of `theta` and zeroes every
/// other term, so its normalizing constant is `n_d·ln(1 + e^θ_edges)`.
/// The remaining log-ratio is a midpoint-rule integral of `(θ - θ_ref)·E[s]`
/// along the straight line, one fresh batch per node.
pub fn log_lik_mc(
    spec: &ModelSpec,
    theta: &[f64],
    net: &Network,
    controls: &SimControls,
) -> Result<f64, EstimError> {
    bridge(spec, theta, net, controls, BRIDGE_POINTS).map(|(ll, _)| ll)
}

pub(crate) fn bridge(
    spec: &ModelSpec,
    theta: &[f64],
    net: &Network,
    controls: &SimControls,
    points: usize,
) -> Result<(f64, Vec<u64>), EstimError> {
    if theta.len() != spec.len() {
        return Err(EstimError::Length {
            got: theta.len(),
            want: spec.len(),
        });
    }
    let observed = model_statistics(spec, net)?;
    let edge_theta = spec.position(&Term::Edges).map_or(0.0, |e| theta[e]);
    let reference: Vec<f64> = spec
        .terms()
        .iter()
        .zip(theta)
        .map(|(t, &x)| if *t == Term::Edges { x } else { 0.0 })
        .collect();
    let diff: Vec<f64> = theta.iter().zip(&reference).map(|(a, b)| a - b).collect();
    let dyads = net.dyad_count() as f64;
    let log1pexp = |x: f64| {
        if x > 0.0 {
            x + (-x).exp().ln_1p()
        } else {
            x.exp().ln_1p()
        }
    };
    let psi_ref = dyads * log1pexp(edge_theta);
    let linear: f64 = theta.iter().zip(&observed).map(|(a, s)| a * s).sum();

    if diff.iter().all(|&d| d == 0.0) {
        return Ok((linear - psi_ref, Vec::new()));
    }
    let seeds: Vec<u64> = (0..points as u64)
        .map(|k| derive_seed(controls.seed, "bridge", k))
        .collect();
    let integrand = seeds
        .par_iter()
        .enumerate()
        .map(|(k, &seed)| {
            let t = (k as f64 + 0.5) / points as f64;
            let at: Vec<f64> = reference
                .iter()
                .zip(&diff)
                .map(|(r, d)| r + t * d)
                .collect();
            let batch = simulate(spec, &at, net, &controls.with_seed(seed))?;
            Ok(batch
                .mean()
                .iter()
                .zip(&diff)
                .map(|(m, d)| m * d)
                .sum::<f64>())
        })
        .collect::<Result<Vec<f64>, EstimError>>()?;
    let psi = psi_ref + integrand.iter().sum::<f64>() / points as f64;
    let ll = linear - psi;
    if !ll.is_finite() {
        return Err(EstimError::NonFinite);
    }
    Ok((ll, seeds))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estim::{bernoulli_log_lik, fit_mple};

    #[test]
    fn edges_only_matches_mple_from_far_start() {
        let net = Network::from_edges(
            12,
            false,
            (0..11).map(|i| (i, i + 1)).chain([(0, 5), (3, 9)]),
        )
        .unwrap();
        let spec = ModelSpec::new(vec![Term::Edges]);
        let mple = fit_mple(&spec, &net).unwrap();
        let controls = SimControls::default_for(&net, 11);
        let fit = fit_mcmle(&spec, &net, &[mple.theta[0] + 5.0], &controls).unwrap();
        assert!(fit.converged, "{fit:?}");
        assert!((fit.theta[0] - mple.theta[0]).abs() < 0.1);
        // zero-length bridge gives the closed form at the fitted value
        let ll = log_lik_mc(&spec, &mple.theta, &net, &controls).unwrap();
        assert!((ll - bernoulli_log_lik(13, 66)).abs() < 1e-9);
    }
}
