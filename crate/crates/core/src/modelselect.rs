//! Scores for choosing the number of clusters.

use crate::dataset::{Cell, Dataset};
use crate::error::{Error, Result};
use crate::mixture::{self, AttributeParams, FitConfig, FitResult, MixtureModel};
use crate::numeric::{gaussian_log_density, ln0};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;
use std::f64::consts::PI;
use std::ops::RangeInclusive;

/// Conjugate prior hyperparameters for the complete-data marginal.
///
/// Class weights and discrete conditionals get a symmetric Dirichlet with
/// concentration `alpha`. Each Gaussian gets a normal-inverse-gamma prior
/// centered on the attribute's global mean, with `kappa0` pseudo-observations
/// for the mean, shape `a0` and scale `a0` times the global variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorConfig {
    pub alpha: f64,
    pub kappa0: f64,
    pub a0: f64,
}

impl Default for PriorConfig {
    fn default() -> Self {
        PriorConfig {
            alpha: 1.0,
            kappa0: 1.0,
            a0: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub k: usize,
    pub log_likelihood: f64,
    pub bic: f64,
    pub cheeseman_stutz: f64,
    pub parameter_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    /// Sorted by K.
    pub entries: Vec<SweepEntry>,
    pub best_by_cs: usize,
    pub best_by_bic: usize,
}

/// Free parameters of a K-cluster model on this schema.
pub fn parameter_count(model: &MixtureModel) -> usize {
    let k = model.k();
    let per_cluster: usize = model
        .params
        .iter()
        .map(|p| match p {
            AttributeParams::Discrete { probs } => probs[0].len() - 1,
            AttributeParams::Gaussian { .. } => 2,
        })
        .sum();
    (k - 1) + k * per_cluster
}

pub fn bic(fit: &FitResult, ds: &Dataset) -> f64 {
    let p = parameter_count(&fit.model) as f64;
    fit.log_likelihood - 0.5 * p * (ds.n() as f64).ln()
}

/// Responsibility-weighted sufficient statistics.
struct Completed {
    /// Per-cluster total weight.
    nk: Vec<f64>,
    /// Per attribute: discrete counts `[k][v]`, or Gaussian `(w, sum, sumsq-about-mean)` per k.
    stats: Vec<AttrStats>,
}

enum AttrStats {
    Discrete(Vec<Vec<f64>>),
    Gaussian {
        weight: Vec<f64>,
        mean: Vec<f64>,
        scatter: Vec<f64>,
        global_mean: f64,
        global_var: f64,
    },
}

fn complete(model: &MixtureModel, ds: &Dataset) -> Result<(Completed, Vec<Vec<f64>>)> {
    let k = model.k();
    let resp: Vec<Vec<f64>> = ds
        .instances
        .iter()
        .map(|i| model.membership(i))
        .collect::<Result<_>>()?;
    let mut nk = vec![0.0; k];
    for r in &resp {
        for (a, b) in nk.iter_mut().zip(r) {
            *a += b;
        }
    }
    let mut stats = Vec::with_capacity(model.params.len());
    for (j, p) in model.params.iter().enumerate() {
        match p {
            AttributeParams::Discrete { probs } => {
                let mut counts = vec![vec![0.0; probs[0].len()]; k];
                for (inst, r) in ds.instances.iter().zip(&resp) {
                    if let Cell::Discrete(v) = inst.cells[j] {
                        for (c, w) in r.iter().enumerate() {
                            counts[c][v as usize] += w;
                        }
                    }
                }
                stats.push(AttrStats::Discrete(counts));
            }
            AttributeParams::Gaussian { .. } => {
                let obs: Vec<(f64, &Vec<f64>)> = ds
                    .instances
                    .iter()
                    .zip(&resp)
                    .filter_map(|(inst, r)| match inst.cells[j] {
                        Cell::Continuous(x) => Some((x, r)),
                        _ => None,
                    })
                    .collect();
                let n = obs.len().max(1) as f64;
                let global_mean = obs.iter().map(|o| o.0).sum::<f64>() / n;
                let global_var = obs.iter().map(|o| (o.0 - global_mean).powi(2)).sum::<f64>() / n;
                let mut weight = vec![0.0; k];
                let mut sum = vec![0.0; k];
                for (x, r) in &obs {
                    for c in 0..k {
                        weight[c] += r[c];
                        sum[c] += r[c] * x;
                    }
                }
                let mean: Vec<f64> = (0..k)
                    .map(|c| if weight[c] > 0.0 { sum[c] / weight[c] } else { global_mean })
                    .collect();
                let mut scatter = vec![0.0; k];
                for (x, r) in &obs {
                    for c in 0..k {
                        scatter[c] += r[c] * (x - mean[c]).powi(2);
                    }
                }
                stats.push(AttrStats::Gaussian {
                    weight,
                    mean,
                    scatter,
                    global_mean,
                    global_var: if global_var > 0.0 { global_var } else { 1.0 },
                });
            }
        }
    }
    Ok((Completed { nk, stats }, resp))
}

fn dirichlet_marginal(counts: &[f64], alpha: f64) -> f64 {
    let total: f64 = counts.iter().sum();
    let a_sum = alpha * counts.len() as f64;
    ln_gamma(a_sum) - ln_gamma(total + a_sum)
        + counts.iter().map(|c| ln_gamma(c + alpha) - ln_gamma(alpha)).sum::<f64>()
}

#[allow(clippy::too_many_arguments)]
fn nig_marginal(n: f64, mean: f64, scatter: f64, m0: f64, kappa0: f64, a0: f64, b0: f64) -> f64 {
    let kn = kappa0 + n;
    let an = a0 + 0.5 * n;
    let bn = b0 + 0.5 * scatter + kappa0 * n * (mean - m0).powi(2) / (2.0 * kn);
    ln_gamma(an) - ln_gamma(a0) + a0 * b0.ln() - an * bn.ln() + 0.5 * (kappa0 / kn).ln()
        - 0.5 * n * (2.0 * PI).ln()
}

/// Cheeseman-Stutz approximation to the log marginal likelihood:
/// `ln p(D'|M) + ln p(D|θ) - ln p(D'|θ)`, with `D'` the data completed by
/// the model's own responsibilities.
pub fn cheeseman_stutz(model: &MixtureModel, ds: &Dataset, prior: &PriorConfig) -> Result<f64> {
    let (done, resp) = complete(model, ds)?;
    if let Some(c) = done.nk.iter().position(|w| !(*w > 0.0)) {
        return Err(Error::EmptyCluster { cluster: c + 1 });
    }
    let k = model.k();

    let mut marginal = dirichlet_marginal(&done.nk, prior.alpha);
    let mut complete_ll: f64 = done
        .nk
        .iter()
        .zip(&model.priors)
        .map(|(n, p)| xlny(*n, *p))
        .sum();
    for (j, (st, params)) in done.stats.iter().zip(&model.params).enumerate() {
        match (st, params) {
            (AttrStats::Discrete(counts), AttributeParams::Discrete { probs }) => {
                for c in 0..k {
                    marginal += dirichlet_marginal(&counts[c], prior.alpha);
                    complete_ll += counts[c].iter().zip(&probs[c]).map(|(n, p)| xlny(*n, *p)).sum::<f64>();
                }
            }
            (
                AttrStats::Gaussian {
                    weight,
                    mean,
                    scatter,
                    global_mean,
                    global_var,
                },
                AttributeParams::Gaussian {
                    mean: mu,
                    variance,
                },
            ) => {
                for c in 0..k {
                    marginal += nig_marginal(
                        weight[c],
                        mean[c],
                        scatter[c],
                        *global_mean,
                        prior.kappa0,
                        prior.a0,
                        prior.a0 * global_var,
                    );
                }
                for (inst, r) in ds.instances.iter().zip(&resp) {
                    if let Cell::Continuous(x) = inst.cells[j] {
                        for c in 0..k {
                            complete_ll += r[c] * gaussian_log_density(x, mu[c], variance[c]);
                        }
                    }
                }
            }
            _ => unreachable!("statistics follow the model's parameter kinds"),
        }
    }
    let observed = mixture::log_likelihood(model, ds)?;
    Ok(marginal + observed - complete_ll)
}

/// `n ln p`, with `0 ln 0 = 0`.
fn xlny(n: f64, p: f64) -> f64 {
    if n == 0.0 {
        0.0
    } else {
        n * ln0(p)
    }
}

/// Fits every K in the range and scores each fit.
pub fn sweep_models(
    ds: &Dataset,
    ks: RangeInclusive<usize>,
    fit_cfg: &FitConfig,
    prior: &PriorConfig,
) -> Result<(SweepResult, Vec<FitResult>)> {
    if ks.is_empty() || *ks.start() == 0 {
        return Err(Error::Config("K range must be non-empty and start at 1 or more".into()));
    }
    let fitted: Vec<(SweepEntry, FitResult)> = ks
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|k| {
            let cfg = FitConfig { k, ..fit_cfg.clone() };
            let fit = mixture::fit(ds, &cfg)?;
            let entry = SweepEntry {
                k,
                log_likelihood: fit.log_likelihood,
                bic: bic(&fit, ds),
                cheeseman_stutz: cheeseman_stutz(&fit.model, ds, prior)?,
                parameter_count: parameter_count(&fit.model),
            };
            Ok((entry, fit))
        })
        .collect::<Result<_>>()?;
    let (entries, fits): (Vec<_>, Vec<_>) = fitted.into_iter().unzip();
    let best = |score: fn(&SweepEntry) -> f64| {
        let mut b = 0;
        for (i, e) in entries.iter().enumerate() {
            if score(e) > score(&entries[b]) {
                b = i;
            }
        }
        entries[b].k
    };
    let result = SweepResult {
        best_by_cs: best(|e| e.cheeseman_stutz),
        best_by_bic: best(|e| e.bic),
        entries,
    };
    Ok((result, fits))
}

pub fn sweep(
    ds: &Dataset,
    ks: RangeInclusive<usize>,
    fit_cfg: &FitConfig,
    prior: &PriorConfig,
) -> Result<SweepResult> {
    sweep_models(ds, ks, fit_cfg, prior).map(|r| r.0)
}

impl SweepResult {
    /// Two-column `K score` series for one criterion.
    pub fn series(&self, score: impl Fn(&SweepEntry) -> f64) -> String {
        self.entries
            .iter()
            .map(|e| format!("{} {}\n", e.k, score(e)))
            .collect()
    }
}
