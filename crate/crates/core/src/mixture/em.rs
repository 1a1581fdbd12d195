//! Multi-restart EM for the naive-Bayes mixture.

use super::{AttributeParams, MixtureModel};
use crate::dataset::{AttributeKind, Cell, Dataset};
use crate::error::{Error, Result};
use crate::numeric::{ln0, log_sum_exp};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Clusters whose total responsibility falls below this fraction of N are re-seeded.
const EMPTY_CLUSTER_FRACTION: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub k: usize,
    pub restarts: usize,
    pub max_iterations: usize,
    /// Stop when the relative objective improvement drops below this.
    pub convergence_tol: f64,
    /// Dirichlet pseudo-count added to every discrete value in the M-step.
    pub smoothing: f64,
    /// Variance floor as a fraction of the attribute's global variance.
    pub variance_floor_fraction: f64,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            k: 2,
            restarts: 1000,
            max_iterations: 500,
            convergence_tol: 1e-6,
            smoothing: 0.01,
            variance_floor_fraction: 1e-4,
            seed: 0,
        }
    }
}

impl FitConfig {
    pub fn with_k(k: usize) -> Self {
        FitConfig {
            k,
            ..Default::default()
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("K must be at least 1".into()));
        }
        if self.k > n {
            return Err(Error::Config(format!("K = {} exceeds N = {}", self.k, n)));
        }
        if self.restarts == 0 {
            return Err(Error::Config("restarts must be at least 1".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::Config("max_iterations must be at least 1".into()));
        }
        if !(self.convergence_tol > 0.0) {
            return Err(Error::Config("convergence_tol must be positive".into()));
        }
        if !(self.smoothing >= 0.0) || !self.smoothing.is_finite() {
            return Err(Error::Config("smoothing must be a non-negative real".into()));
        }
        if !(self.variance_floor_fraction > 0.0) {
            return Err(Error::Config("variance_floor_fraction must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub model: MixtureModel,
    pub log_likelihood: f64,
    pub iterations_used: usize,
    pub best_restart: usize,
    pub per_restart_log_likelihoods: Vec<f64>,
}

/// Outcome of a single EM run.
#[derive(Debug, Clone)]
pub struct RestartOutcome {
    pub model: MixtureModel,
    /// Observed-data log-likelihood of the final parameters.
    pub log_likelihood: f64,
    pub iterations: usize,
    /// Objective after every E-step: the observed-data log-likelihood plus
    /// the Dirichlet log-prior term `δ Σ ln θ` (the two coincide for δ = 0).
    pub objective_trace: Vec<f64>,
    /// Iterations after which a cluster was re-seeded; the objective may
    /// drop across these.
    pub reseeds: Vec<usize>,
}

enum Column {
    Discrete {
        card: usize,
        values: Vec<Option<u32>>,
    },
    Continuous {
        values: Vec<Option<f64>>,
        global_mean: f64,
        global_var: f64,
        floor: f64,
    },
}

/// Column-major copy of the dataset for the inner loops.
struct Columns {
    n: usize,
    cols: Vec<Column>,
}

impl Columns {
    fn build(ds: &Dataset, floor_fraction: f64) -> Result<Self> {
        let n = ds.n();
        let mut cols = Vec::with_capacity(ds.m());
        for (j, attr) in ds.schema.attributes.iter().enumerate() {
            match &attr.kind {
                AttributeKind::Discrete { values } => {
                    let vals: Vec<Option<u32>> = ds
                        .instances
                        .iter()
                        .map(|i| match i.cells[j] {
                            Cell::Discrete(v) => Some(v),
                            _ => None,
                        })
                        .collect();
                    if vals.iter().all(Option::is_none) {
                        return Err(Error::DegenerateAttribute(attr.name.clone()));
                    }
                    cols.push(Column::Discrete {
                        card: values.len(),
                        values: vals,
                    });
                }
                AttributeKind::Continuous { .. } => {
                    let vals: Vec<Option<f64>> = ds
                        .instances
                        .iter()
                        .map(|i| match i.cells[j] {
                            Cell::Continuous(x) => Some(x),
                            _ => None,
                        })
                        .collect();
                    let obs: Vec<f64> = vals.iter().flatten().copied().collect();
                    if obs.is_empty() {
                        return Err(Error::DegenerateAttribute(attr.name.clone()));
                    }
                    let mean = obs.iter().sum::<f64>() / obs.len() as f64;
                    let var = obs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / obs.len() as f64;
                    let scale = if var > 0.0 { var } else { 1.0 };
                    cols.push(Column::Continuous {
                        values: vals,
                        global_mean: mean,
                        global_var: var.max(floor_fraction * scale),
                        floor: floor_fraction * scale,
                    });
                }
            }
        }
        if cols.is_empty() {
            return Err(Error::Config("dataset has no modeled attributes".into()));
        }
        Ok(Columns { n, cols })
    }
}

/// Working parameters in the layout the inner loops want.
#[derive(Clone)]
struct Params {
    k: usize,
    priors: Vec<f64>,
    /// Per attribute: discrete `probs[k * card + v]`, or Gaussian `(mean, var)` per k.
    attrs: Vec<ParamBlock>,
}

#[derive(Clone)]
enum ParamBlock {
    Discrete { card: usize, probs: Vec<f64> },
    Gaussian { mean: Vec<f64>, var: Vec<f64> },
}

impl Params {
    /// Dirichlet log-prior contribution `δ Σ ln θ`.
    fn log_prior(&self, smoothing: f64) -> f64 {
        if smoothing == 0.0 {
            return 0.0;
        }
        self.attrs
            .iter()
            .map(|b| match b {
                ParamBlock::Discrete { probs, .. } => {
                    smoothing * probs.iter().map(|p| ln0(*p)).sum::<f64>()
                }
                ParamBlock::Gaussian { .. } => 0.0,
            })
            .sum()
    }

    fn into_model(self, ds: &Dataset) -> MixtureModel {
        let k = self.k;
        let params = self
            .attrs
            .into_iter()
            .map(|b| match b {
                ParamBlock::Discrete { card, probs } => AttributeParams::Discrete {
                    probs: (0..k).map(|c| probs[c * card..(c + 1) * card].to_vec()).collect(),
                },
                ParamBlock::Gaussian { mean, var } => AttributeParams::Gaussian {
                    mean,
                    variance: var,
                },
            })
            .collect();
        MixtureModel {
            schema: ds.schema.clone(),
            n_instances: ds.n(),
            priors: self.priors,
            params,
        }
    }
}

/// E-step: fills `resp` (row-major N x K) and returns the log-likelihood.
fn e_step(cols: &Columns, p: &Params, resp: &mut [f64]) -> f64 {
    let k = p.k;
    let n = cols.n;
    // log tables
    let log_prior: Vec<f64> = p.priors.iter().map(|x| ln0(*x)).collect();
    let tables: Vec<Vec<f64>> = p
        .attrs
        .iter()
        .map(|b| match b {
            ParamBlock::Discrete { probs, .. } => probs.iter().map(|x| ln0(*x)).collect(),
            ParamBlock::Gaussian { var, .. } => {
                var.iter().map(|v| -0.5 * (2.0 * PI * v).ln()).collect()
            }
        })
        .collect();

    resp.chunks_mut(k).for_each(|row| row.copy_from_slice(&log_prior));
    for ((col, block), table) in cols.cols.iter().zip(&p.attrs).zip(&tables) {
        match (col, block) {
            (Column::Discrete { card, values }, _) => {
                for (row, v) in resp.chunks_mut(k).zip(values) {
                    if let Some(v) = v {
                        for (c, r) in row.iter_mut().enumerate() {
                            *r += table[c * card + *v as usize];
                        }
                    }
                }
            }
            (Column::Continuous { values, .. }, ParamBlock::Gaussian { mean, var }) => {
                for (row, x) in resp.chunks_mut(k).zip(values) {
                    if let Some(x) = x {
                        for (c, r) in row.iter_mut().enumerate() {
                            let d = x - mean[c];
                            *r += table[c] - 0.5 * d * d / var[c];
                        }
                    }
                }
            }
            _ => unreachable!("column/parameter kinds are built together"),
        }
    }
    let mut ll = 0.0;
    for row in resp.chunks_mut(k) {
        let lse = log_sum_exp(row);
        ll += lse;
        for r in row.iter_mut() {
            *r = (*r - lse).exp();
        }
    }
    debug_assert_eq!(resp.len(), n * k);
    ll
}

/// M-step from responsibilities.
fn m_step(cols: &Columns, resp: &[f64], k: usize, smoothing: f64) -> Params {
    let n = cols.n;
    let mut nk = vec![0.0; k];
    for row in resp.chunks(k) {
        for (a, r) in nk.iter_mut().zip(row) {
            *a += r;
        }
    }
    let priors: Vec<f64> = nk.iter().map(|x| x / n as f64).collect();
    let attrs = cols
        .cols
        .iter()
        .map(|col| match col {
            Column::Discrete { card, values } => {
                let card = *card;
                let mut counts = vec![0.0; k * card];
                let mut totals = vec![0.0; k];
                for (row, v) in resp.chunks(k).zip(values) {
                    if let Some(v) = v {
                        for (c, r) in row.iter().enumerate() {
                            counts[c * card + *v as usize] += r;
                            totals[c] += r;
                        }
                    }
                }
                let mut probs = vec![0.0; k * card];
                for c in 0..k {
                    let denom = totals[c] + smoothing * card as f64;
                    for v in 0..card {
                        probs[c * card + v] = if denom > 0.0 {
                            (counts[c * card + v] + smoothing) / denom
                        } else {
                            1.0 / card as f64
                        };
                    }
                }
                ParamBlock::Discrete { card, probs }
            }
            Column::Continuous {
                values,
                global_mean,
                global_var,
                floor,
            } => {
                let mut sw = vec![0.0; k];
                let mut sx = vec![0.0; k];
                for (row, x) in resp.chunks(k).zip(values) {
                    if let Some(x) = x {
                        for (c, r) in row.iter().enumerate() {
                            sw[c] += r;
                            sx[c] += r * x;
                        }
                    }
                }
                let mean: Vec<f64> = (0..k)
                    .map(|c| if sw[c] > 0.0 { sx[c] / sw[c] } else { *global_mean })
                    .collect();
                let mut ss = vec![0.0; k];
                for (row, x) in resp.chunks(k).zip(values) {
                    if let Some(x) = x {
                        for (c, r) in row.iter().enumerate() {
                            let d = x - mean[c];
                            ss[c] += r * d * d;
                        }
                    }
                }
                let var = (0..k)
                    .map(|c| {
                        let v = if sw[c] > 0.0 { ss[c] / sw[c] } else { *global_var };
                        v.max(*floor)
                    })
                    .collect();
                ParamBlock::Gaussian { mean, var }
            }
        })
        .collect();
    Params { k, priors, attrs }
}

/// Re-seeds clusters with (almost) no responsibility from the instances the
/// current model explains least confidently. Returns whether anything changed.
fn reseed_empty(resp: &mut [f64], k: usize, n: usize) -> bool {
    let mut weights = vec![0.0; k];
    for row in resp.chunks(k) {
        for (w, r) in weights.iter_mut().zip(row) {
            *w += r;
        }
    }
    let empty: Vec<usize> = (0..k)
        .filter(|c| weights[*c] < EMPTY_CLUSTER_FRACTION * n as f64)
        .collect();
    if empty.is_empty() {
        return false;
    }
    let mut order: Vec<(f64, usize)> = resp
        .chunks(k)
        .enumerate()
        .map(|(i, row)| (row.iter().copied().fold(f64::NEG_INFINITY, f64::max), i))
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    for (c, (_, i)) in empty.into_iter().zip(order) {
        let row = &mut resp[i * k..(i + 1) * k];
        row.iter_mut().for_each(|r| *r = 0.0);
        row[c] = 1.0;
    }
    true
}

fn random_responsibilities(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<f64> {
    let mut resp = vec![0.0; n * k];
    for row in resp.chunks_mut(k) {
        // uniform on the simplex
        let mut total = 0.0;
        for r in row.iter_mut() {
            let u: f64 = rng.random::<f64>();
            *r = -(1.0 - u).ln();
            total += *r;
        }
        if total > 0.0 {
            row.iter_mut().for_each(|r| *r /= total);
        } else {
            row.iter_mut().for_each(|r| *r = 1.0 / k as f64);
        }
    }
    resp
}

fn em_run(ds: &Dataset, cols: &Columns, cfg: &FitConfig, restart: usize) -> RestartOutcome {
    let k = cfg.k;
    let n = cols.n;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(restart as u64));
    let mut resp = random_responsibilities(&mut rng, n, k);
    let mut params = m_step(cols, &resp, k, cfg.smoothing);

    let mut trace = Vec::new();
    let mut reseeds = Vec::new();
    let mut ll = f64::NEG_INFINITY;
    let mut just_reseeded = false;
    for it in 1..=cfg.max_iterations {
        ll = e_step(cols, &params, &mut resp);
        let obj = ll + params.log_prior(cfg.smoothing);
        let converged = match trace.last() {
            Some(prev) if !just_reseeded => {
                let prev: f64 = *prev;
                (obj - prev) <= cfg.convergence_tol * prev.abs().max(f64::MIN_POSITIVE)
            }
            _ => false,
        };
        trace.push(obj);
        if converged || it == cfg.max_iterations {
            break;
        }
        just_reseeded = reseed_empty(&mut resp, k, n);
        if just_reseeded {
            reseeds.push(it);
        }
        params = m_step(cols, &resp, k, cfg.smoothing);
    }
    RestartOutcome {
        model: params.into_model(ds),
        log_likelihood: ll,
        iterations: trace.len(),
        objective_trace: trace,
        reseeds,
    }
}

/// Runs one EM restart (seeded with `cfg.seed + restart`).
pub fn run_restart(ds: &Dataset, cfg: &FitConfig, restart: usize) -> Result<RestartOutcome> {
    cfg.validate(ds.n())?;
    let cols = Columns::build(ds, cfg.variance_floor_fraction)?;
    Ok(em_run(ds, &cols, cfg, restart))
}

/// Fits the mixture by EM, keeping the restart with the highest
/// log-likelihood (ties go to the earliest restart).
pub fn fit(ds: &Dataset, cfg: &FitConfig) -> Result<FitResult> {
    cfg.validate(ds.n())?;
    let cols = Columns::build(ds, cfg.variance_floor_fraction)?;
    let outcomes: Vec<(f64, usize, Option<MixtureModel>)> = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| {
            let o = em_run(ds, &cols, cfg, r);
            (o.log_likelihood, o.iterations, Some(o.model))
        })
        .collect();
    let per_restart: Vec<f64> = outcomes.iter().map(|o| o.0).collect();
    let mut best = 0;
    for (i, ll) in per_restart.iter().enumerate() {
        if *ll > per_restart[best] || per_restart[best].is_nan() {
            best = i;
        }
    }
    let mut outcomes = outcomes;
    let (ll, iterations, model) = std::mem::replace(&mut outcomes[best], (0.0, 0, None));
    Ok(FitResult {
        model: model.expect("best restart present"),
        log_likelihood: ll,
        iterations_used: iterations,
        best_restart: best,
        per_restart_log_likelihoods: per_restart,
    })
}

/// Observed-data log-likelihood of `ds` under `model`.
pub fn log_likelihood(model: &MixtureModel, ds: &Dataset) -> Result<f64> {
    ds.instances
        .iter()
        .map(|inst| model.log_joint(inst).map(|lj| log_sum_exp(&lj)))
        .sum()
}
