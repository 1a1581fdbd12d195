//! Independent reference implementations for the label search.
//!
//! Probabilities here are plain products in linear space and Gaussian
//! masses come from statrs' CDF, so they share no code with the library's
//! log-space search.

#![allow(dead_code)]

use clabel_core::dataset::{Attribute, AttributeKind, Schema};
use clabel_core::labelsearch::{Conjunct, Interval, Label, SearchConfig};
use clabel_core::mixture::{AttributeParams, MixtureModel};
use rand::Rng;
use statrs::distribution::{ContinuousCDF, Normal};
use std::collections::BTreeSet;

pub mod checks;

/// Random naive-Bayes model over `m` binary attributes (values F, T).
pub fn random_boolean_model(rng: &mut impl Rng, m: usize, k: usize) -> MixtureModel {
    let attributes = (0..m)
        .map(|j| Attribute::discrete(format!("b{j}"), &["F", "T"]))
        .collect();
    let mut priors: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = priors.iter().sum();
    priors.iter_mut().for_each(|p| *p /= total);
    let params = (0..m)
        .map(|_| AttributeParams::Discrete {
            probs: (0..k)
                .map(|_| {
                    // occasional hard zeros and ones exercise the degenerate paths
                    let t: f64 = match rng.random_range(0..10) {
                        0 => 0.0,
                        1 => 1.0,
                        _ => rng.random_range(0.0..1.0),
                    };
                    vec![1.0 - t, t]
                })
                .collect(),
        })
        .collect();
    MixtureModel {
        schema: Schema::new(attributes).unwrap(),
        n_instances: 100,
        priors,
        params,
    }
}

/// Random model with `m_bool` binary then `m_cont` continuous attributes.
pub fn random_mixed_model(rng: &mut impl Rng, m_bool: usize, m_cont: usize, k: usize) -> MixtureModel {
    let mut model = random_boolean_model(rng, m_bool, k);
    let mut attributes = model.schema.attributes.clone();
    for j in 0..m_cont {
        attributes.push(Attribute::continuous(format!("c{j}")));
        model.params.push(AttributeParams::Gaussian {
            mean: (0..k).map(|_| rng.random_range(-2.0..2.0)).collect(),
            variance: (0..k).map(|_| rng.random_range(0.2..2.0)).collect(),
        });
    }
    model.schema = Schema::new(attributes).unwrap();
    model
}

fn normal_cdf(x: f64, mean: f64, var: f64) -> f64 {
    Normal::new(mean, var.sqrt()).unwrap().cdf(x)
}

/// `p(c | k)` by direct lookup or CDF difference.
pub fn conjunct_prob(model: &MixtureModel, c: &Conjunct, k: usize) -> f64 {
    match (c, &model.params[c.attribute()]) {
        (Conjunct::Eq { value, .. }, AttributeParams::Discrete { probs }) => probs[k][*value as usize],
        (Conjunct::Interval(iv), AttributeParams::Gaussian { mean, variance }) => {
            normal_cdf(iv.upper, mean[k], variance[k]) - normal_cdf(iv.lower, mean[k], variance[k])
        }
        _ => panic!("conjunct does not fit the attribute"),
    }
}

pub struct Probs {
    pub p_x: f64,
    pub p_x_given_k: Vec<f64>,
}

pub fn label_probs(model: &MixtureModel, label: &Label) -> Probs {
    let p_x_given_k: Vec<f64> = (0..model.k())
        .map(|k| label.conjuncts().iter().map(|c| conjunct_prob(model, c, k)).product())
        .collect();
    let p_x = model.priors.iter().zip(&p_x_given_k).map(|(a, b)| a * b).sum();
    Probs { p_x, p_x_given_k }
}

/// Intervals of every continuous attribute for every cluster, built from the
/// Gaussian quantile directly.
pub fn intervals(model: &MixtureModel, quantiles: &[f64]) -> Vec<Interval> {
    let std = Normal::new(0.0, 1.0).unwrap();
    let mut out = Vec::new();
    for (j, p) in model.params.iter().enumerate() {
        if let AttributeParams::Gaussian { mean, variance } = p {
            for k in 0..model.k() {
                for (level, q) in quantiles.iter().enumerate() {
                    let z = std.inverse_cdf(0.5 + q / 2.0);
                    let sd = variance[k].sqrt();
                    out.push(Interval {
                        attribute: j,
                        cluster: k,
                        level,
                        q: *q,
                        lower: mean[k] - z * sd,
                        upper: mean[k] + z * sd,
                    });
                }
            }
        }
    }
    out
}

/// Propositions available to cluster `k`, grouped by attribute.
fn options(model: &MixtureModel, cfg: &SearchConfig, k: usize) -> Vec<Vec<Conjunct>> {
    let ivs = intervals(model, &cfg.quantiles);
    model
        .schema
        .attributes
        .iter()
        .enumerate()
        .map(|(j, attr)| match &attr.kind {
            AttributeKind::Discrete { values } => {
                let skip = if cfg.positive_only {
                    attr.positive_only_exclusions()
                } else {
                    BTreeSet::new()
                };
                (0..values.len() as u32)
                    .filter(|v| !skip.contains(v))
                    .map(|v| Conjunct::Eq {
                        attribute: j,
                        value: v,
                    })
                    .collect()
            }
            AttributeKind::Continuous { .. } => ivs
                .iter()
                .filter(|iv| iv.attribute == j && iv.cluster == k)
                .map(|iv| Conjunct::Interval(*iv))
                .collect(),
        })
        .collect()
}

/// Every non-empty label over cluster `k`'s propositions.
pub fn all_labels(model: &MixtureModel, cfg: &SearchConfig, k: usize) -> Vec<Label> {
    let opts = options(model, cfg, k);
    let mut out = vec![Vec::<Conjunct>::new()];
    for per_attr in &opts {
        let mut next = Vec::new();
        for partial in &out {
            next.push(partial.clone());
            for c in per_attr {
                let mut p = partial.clone();
                p.push(*c);
                next.push(p);
            }
        }
        out = next;
    }
    out.into_iter()
        .filter(|c| !c.is_empty())
        .map(|c| Label::new(c).unwrap())
        .collect()
}

/// `general` is implied by `specific`: each of its conjuncts appears in
/// `specific`, or is a same-origin interval of equal or larger mass.
pub fn implied_by(general: &Label, specific: &Label) -> bool {
    general.conjuncts().iter().all(|g| {
        specific.conjuncts().iter().any(|s| match (g, s) {
            (Conjunct::Eq { .. }, Conjunct::Eq { .. }) => g == s,
            (Conjunct::Interval(a), Conjunct::Interval(b)) => {
                a.attribute == b.attribute && a.cluster == b.cluster && a.q >= b.q
            }
            _ => false,
        })
    })
}

pub fn conditions_hold(model: &MixtureModel, cfg: &SearchConfig, label: &Label, k: usize) -> bool {
    let p = label_probs(model, label);
    if p.p_x <= 0.0 {
        return false;
    }
    let membership = model.priors[k] * p.p_x_given_k[k] / p.p_x;
    membership >= cfg.r && p.p_x >= cfg.s_global && p.p_x_given_k[k] >= cfg.s_local
}

/// The four conditions by exhaustive enumeration.
pub fn brute_force(model: &MixtureModel, cfg: &SearchConfig) -> Vec<BTreeSet<Label>> {
    if model.k() == 1 {
        return vec![BTreeSet::from([Label::empty()])];
    }
    (0..model.k())
        .map(|k| {
            let passing: Vec<Label> = all_labels(model, cfg, k)
                .into_iter()
                .filter(|x| conditions_hold(model, cfg, x, k))
                .collect();
            passing
                .iter()
                .filter(|x| !passing.iter().any(|y| y != *x && implied_by(y, x)))
                .cloned()
                .collect()
        })
        .collect()
}

pub fn label_sets(found: &[Vec<clabel_core::labelsearch::ScoredLabel>]) -> Vec<BTreeSet<Label>> {
    found
        .iter()
        .map(|v| v.iter().map(|s| s.label.clone()).collect())
        .collect()
}

/// Search thresholds loose enough that random models produce labels.
pub fn random_config(rng: &mut impl Rng) -> SearchConfig {
    SearchConfig {
        r: rng.random_range(0.5..0.95),
        s_global: rng.random_range(0.0..0.05),
        s_local: rng.random_range(0.0..0.1),
        quantiles: vec![0.3, 0.6, 0.9],
        greedy: false,
        max_length: None,
        positive_only: false,
        rank: Default::default(),
    }
}

/// Random dataset with `m_disc` discrete attributes (2 to 4 values),
/// `m_cont` continuous ones drawn from a few clumps, and cells missing at
/// rate `missing`. Every attribute keeps at least one observed cell.
pub fn random_dataset(
    rng: &mut impl Rng,
    n: usize,
    m_disc: usize,
    m_cont: usize,
    missing: f64,
) -> clabel_core::dataset::Dataset {
    use clabel_core::dataset::{Cell, Dataset, Instance};
    let mut attributes = Vec::new();
    let mut cards = Vec::new();
    for j in 0..m_disc {
        let card = rng.random_range(2..=4usize);
        let names: Vec<String> = (0..card).map(|v| format!("v{v}")).collect();
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        attributes.push(Attribute::discrete(format!("d{j}"), &refs));
        cards.push(card);
    }
    for j in 0..m_cont {
        attributes.push(Attribute::continuous(format!("c{j}")));
    }
    let centres: Vec<f64> = (0..3).map(|_| rng.random_range(-5.0..5.0)).collect();
    let instances = (0..n)
        .map(|i| {
            let clump = rng.random_range(0..3);
            let mut cells = Vec::with_capacity(m_disc + m_cont);
            for card in &cards {
                if i > 0 && rng.random_bool(missing) {
                    cells.push(Cell::Missing);
                } else {
                    let bias = (clump % card) as u32;
                    let v = if rng.random_bool(0.6) { bias } else { rng.random_range(0..*card as u32) };
                    cells.push(Cell::Discrete(v));
                }
            }
            for _ in 0..m_cont {
                if i > 0 && rng.random_bool(missing) {
                    cells.push(Cell::Missing);
                } else {
                    cells.push(Cell::Continuous(centres[clump] + rng.random_range(-1.0..1.0)));
                }
            }
            Instance::new(cells)
        })
        .collect();
    Dataset::new(Schema::new(attributes).unwrap(), instances, None).unwrap()
}
