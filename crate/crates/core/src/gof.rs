//! Simulation-based goodness of fit.
//!
//! Observed degree, edgewise shared-partner and geodesic distributions are
//! compared bin by bin with draws from the fitted model. Bins with a small
//! simulated mean are pooled with their neighbours before standardizing.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::network::{geodesic_distribution, Network};
use crate::sampler::{simulate_observed, SimControls, SimError};
use crate::terms::ModelSpec;

/// Default adequacy threshold on `max |z|`.
pub const TAU: f64 = 2.5;
/// Last shared-partner bin before the overflow bin.
pub const ESP_MAX: usize = 10;
/// Geodesic bin that also collects every longer distance.
pub const GEODESIC_MAX: usize = 8;
/// Bins are pooled until their simulated mean reaches this.
pub const MIN_EXPECTED: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GofGroup {
    Degree,
    InDegree,
    OutDegree,
    Esp,
    Geodesic,
}

impl GofGroup {
    pub fn name(self) -> &'static str {
        match self {
            GofGroup::Degree => "degree",
            GofGroup::InDegree => "indegree",
            GofGroup::OutDegree => "outdegree",
            GofGroup::Esp => "esp",
            GofGroup::Geodesic => "geodesic",
        }
    }

    pub fn is_degree(self) -> bool {
        matches!(
            self,
            GofGroup::Degree | GofGroup::InDegree | GofGroup::OutDegree
        )
    }
}

impl fmt::Display for GofGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GofBin {
    pub label: String,
    #[serde(with = "crate::float")]
    pub observed: f64,
    #[serde(with = "crate::float")]
    pub sim_mean: f64,
    #[serde(with = "crate::float")]
    pub sim_sd: f64,
    #[serde(with = "crate::float")]
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupReport {
    pub group: GofGroup,
    pub bins: Vec<GofBin>,
}

impl GroupReport {
    pub fn max_abs_z(&self) -> f64 {
        self.bins.iter().map(|b| b.z.abs()).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GofReport {
    pub groups: Vec<GroupReport>,
    #[serde(with = "crate::float")]
    pub max_abs_z: f64,
    #[serde(with = "crate::float")]
    pub tau: f64,
    pub adequate: bool,
    #[serde(with = "crate::float")]
    pub sim_edge_mean: f64,
    pub observed_edges: usize,
    pub degenerate: bool,
    pub draws_used: usize,
}

/// `ε_E = max(5, |E|/4)`.
pub fn degeneracy_band(edges: usize) -> f64 {
    (0.25 * edges as f64).max(5.0)
}

/// Edge-count guard: simulations stay within `ε_E` of `|E|`.
pub fn non_degenerate(report: &GofReport) -> bool {
    (report.sim_edge_mean - report.observed_edges as f64).abs()
        <= degeneracy_band(report.observed_edges)
}

impl GofReport {
    /// Group holding the largest `|z|`, first in order on ties.
    pub fn worst_group(&self) -> Option<GofGroup> {
        let mut best: Option<(GofGroup, f64)> = None;
        for g in &self.groups {
            let z = g.max_abs_z();
            if z > 0.0 && best.is_none_or(|(_, b)| z > b) {
                best = Some((g.group, z));
            }
        }
        best.map(|(g, _)| g)
    }

    pub fn group(&self, group: GofGroup) -> Option<&GroupReport> {
        self.groups.iter().find(|g| g.group == group)
    }

    /// Tab-separated per-bin table with a header row.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("group\tbin\tobserved\tsim_mean\tsim_sd\tz\n");
        for g in &self.groups {
            for b in &g.bins {
                out.push_str(&format!(
                    "{}\t{}\t{}\t{:.6}\t{:.6}\t{:.6}\n",
                    g.group, b.label, b.observed, b.sim_mean, b.sim_sd, b.z
                ));
            }
        }
        out
    }
}

/// Controls for GOF simulation: 200 draws at thinning `n_d`.
pub fn gof_controls(net: &Network, seed: u64) -> SimControls {
    SimControls::default_for(net, seed).with_draws(200)
}

/// Raw bin counts of one network, per group, before pooling.
fn profile(net: &Network) -> Vec<(GofGroup, Vec<f64>)> {
    let n = net.node_count();
    let hist = |values: &mut dyn Iterator<Item = usize>| {
        let mut h = vec![0.0; n];
        for v in values {
            h[v] += 1.0;
        }
        h
    };
    let mut out = Vec::with_capacity(4);
    if net.is_directed() {
        out.push((
            GofGroup::InDegree,
            hist(&mut (0..n).map(|i| net.in_degree(i))),
        ));
        out.push((
            GofGroup::OutDegree,
            hist(&mut (0..n).map(|i| net.out_degree(i))),
        ));
    } else {
        out.push((GofGroup::Degree, hist(&mut (0..n).map(|i| net.degree(i)))));
    }
    let mut esp = vec![0.0; ESP_MAX + 2];
    for (i, j) in net.edges() {
        let sp = net.out_row(i).and_count(net.in_row(j)) as usize;
        esp[sp.min(ESP_MAX + 1)] += 1.0;
    }
    out.push((GofGroup::Esp, esp));
    let g = geodesic_distribution(net);
    let mut geo = vec![0.0; GEODESIC_MAX + 1];
    for d in 1..n {
        geo[d.min(GEODESIC_MAX) - 1] += g.at(d) as f64;
    }
    geo[GEODESIC_MAX] = g.unreachable as f64;
    out.push((GofGroup::Geodesic, geo));
    out
}

fn raw_label(group: GofGroup, k: usize) -> String {
    match group {
        GofGroup::Esp if k == ESP_MAX + 1 => format!("{}+", ESP_MAX + 1),
        GofGroup::Geodesic if k == GEODESIC_MAX => "inf".to_owned(),
        GofGroup::Geodesic if k + 1 == GEODESIC_MAX => format!("{GEODESIC_MAX}+"),
        GofGroup::Geodesic => (k + 1).to_string(),
        _ => k.to_string(),
    }
}

/// Consecutive runs of raw bins whose pooled simulated mean reaches
/// [`MIN_EXPECTED`]; a short tail joins the previous run.
fn pool(means: &[f64]) -> Vec<std::ops::Range<usize>> {
    let mut runs: Vec<std::ops::Range<usize>> = Vec::new();
    let mut start = 0;
    let mut acc = 0.0;
    for (k, m) in means.iter().enumerate() {
        acc += m;
        if acc >= MIN_EXPECTED {
            runs.push(start..k + 1);
            start = k + 1;
            acc = 0.0;
        }
    }
    if start < means.len() {
        match runs.last_mut() {
            Some(last) => last.end = means.len(),
            None => runs.push(start..means.len()),
        }
    }
    runs
}

fn standardize(observed: f64, mean: f64, sd: f64) -> f64 {
    if sd > 0.0 {
        (observed - mean) / sd
    } else if (observed - mean).abs() <= 1e-9 * mean.abs().max(1.0) {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Simulates from the fitted model and scores each pooled bin.
pub fn gof(
    spec: &ModelSpec,
    theta: &[f64],
    net: &Network,
    controls: &SimControls,
) -> Result<GofReport, SimError> {
    gof_with_tau(spec, theta, net, controls, TAU)
}

pub fn gof_with_tau(
    spec: &ModelSpec,
    theta: &[f64],
    net: &Network,
    controls: &SimControls,
    tau: f64,
) -> Result<GofReport, SimError> {
    let mut draws: Vec<Vec<(GofGroup, Vec<f64>)>> = Vec::with_capacity(controls.draws);
    let batch = simulate_observed(spec, theta, net, controls, |g, _| draws.push(profile(g)))?;
    let observed = profile(net);
    let b = draws.len() as f64;

    let mut groups = Vec::with_capacity(observed.len());
    for (gi, (group, obs)) in observed.iter().enumerate() {
        // degree bins run to the largest degree seen anywhere
        let width = if group.is_degree() {
            let top = |h: &[f64]| h.iter().rposition(|&c| c > 0.0).map_or(0, |k| k + 1);
            draws
                .iter()
                .map(|d| top(&d[gi].1))
                .chain([top(obs)])
                .max()
                .unwrap_or(1)
                .max(1)
        } else {
            obs.len()
        };
        let means: Vec<f64> = (0..width)
            .map(|k| draws.iter().map(|d| d[gi].1[k]).sum::<f64>() / b)
            .collect();
        let bins = pool(&means)
            .into_iter()
            .map(|run| {
                let o: f64 = obs[run.clone()].iter().sum();
                let sims: Vec<f64> = draws
                    .iter()
                    .map(|d| d[gi].1[run.clone()].iter().sum())
                    .collect();
                let mean = sims.iter().sum::<f64>() / b;
                let var = sims.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (b - 1.0).max(1.0);
                let sd = var.sqrt();
                let label = if run.len() == 1 {
                    raw_label(*group, run.start)
                } else {
                    format!(
                        "{}..{}",
                        raw_label(*group, run.start),
                        raw_label(*group, run.end - 1)
                    )
                };
                GofBin {
                    label,
                    observed: o,
                    sim_mean: mean,
                    sim_sd: sd,
                    z: standardize(o, mean, sd),
                }
            })
            .collect();
        groups.push(GroupReport {
            group: *group,
            bins,
        });
    }

    let max_abs_z = groups
        .iter()
        .map(GroupReport::max_abs_z)
        .fold(0.0, f64::max);
    let sim_edge_mean = batch.mean_edges();
    let observed_edges = net.edge_count();
    let mut report = GofReport {
        groups,
        max_abs_z,
        tau,
        adequate: max_abs_z <= tau,
        sim_edge_mean,
        observed_edges,
        degenerate: false,
        draws_used: batch.draws(),
    };
    report.degenerate = !non_degenerate(&report);
    Ok(report)
}
