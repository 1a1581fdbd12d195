//! Characteristic label search: minimal conjunctions of propositions that
//! single out one cluster of a fitted mixture.

mod label;
mod score;
mod search;

pub use label::{is_subconjunction, subconj, Conjunct, Interval, Label};
pub use score::{rank_labels, score_from_log, score_label, RankMode, ScoredLabel, SecondaryScores};
pub use search::{
    find_characteristic_labels, gen_candidate, greedy_prune_level, ItemSet, SearchOutput,
    SearchStats,
};

use crate::error::{Error, Result};
use crate::mixture::{AttributeParams, MixtureModel};
use crate::numeric::central_half_width;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    /// Relevance threshold on `p(k|x)`.
    pub r: f64,
    /// Global support threshold on `p(x)`.
    pub s_global: f64,
    /// Local support threshold on `p(x|k)`.
    pub s_local: f64,
    /// Interval masses for continuous attributes, strictly ascending.
    pub quantiles: Vec<f64>,
    pub greedy: bool,
    pub max_length: Option<usize>,
    /// Drop `Eq` propositions on each attribute's excluded values.
    pub positive_only: bool,
    pub rank: RankMode,
}

impl SearchConfig {
    /// Defaults scaled to the model: `r = 0.9`, `s_global = 1/N`, `s_local = K/N`.
    pub fn defaults_for(model: &MixtureModel) -> Self {
        let n = model.n_instances.max(1) as f64;
        SearchConfig {
            r: 0.9,
            s_global: 1.0 / n,
            s_local: (model.k() as f64 / n).min(1.0),
            quantiles: vec![0.2, 0.4, 0.6, 0.8],
            greedy: false,
            max_length: None,
            positive_only: false,
            rank: RankMode::Length,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r > 0.0 && self.r <= 1.0) {
            return Err(Error::Config(format!("r must lie in (0, 1], got {}", self.r)));
        }
        for (name, v) in [("s_global", self.s_global), ("s_local", self.s_local)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        if self.quantiles.iter().any(|q| !(*q > 0.0 && *q < 1.0)) {
            return Err(Error::Config("quantiles must lie strictly between 0 and 1".into()));
        }
        if self.quantiles.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("quantiles must be strictly ascending".into()));
        }
        if self.max_length == Some(0) {
            return Err(Error::Config("max_length must be positive".into()));
        }
        Ok(())
    }
}

/// Interval propositions for every continuous attribute and cluster:
/// `result[j][k]` holds one interval per quantile, narrowest first. Discrete
/// attributes get empty vectors.
pub fn propositionalize_continuous(model: &MixtureModel, quantiles: &[f64]) -> Vec<Vec<Vec<Interval>>> {
    let z: Vec<f64> = quantiles.iter().map(|q| central_half_width(*q)).collect();
    model
        .params
        .iter()
        .enumerate()
        .map(|(j, p)| match p {
            AttributeParams::Discrete { .. } => Vec::new(),
            AttributeParams::Gaussian { mean, variance } => mean
                .iter()
                .zip(variance)
                .enumerate()
                .map(|(k, (mu, s2))| {
                    let sd = s2.sqrt();
                    quantiles
                        .iter()
                        .zip(&z)
                        .enumerate()
                        .map(|(level, (q, z))| Interval {
                            attribute: j,
                            cluster: k,
                            level,
                            q: *q,
                            lower: mu - z * sd,
                            upper: mu + z * sd,
                        })
                        .collect()
                })
                .collect(),
        })
        .collect()
}

/// The propositions the search may use, indexed by dense item ids that
/// follow conjunct order (attribute first).
#[derive(Debug, Clone)]
pub struct Vocabulary {
    k: usize,
    items: Vec<Conjunct>,
    /// `ln p(item | k)`, K entries per item.
    log_probs: Vec<f64>,
    excluded: Vec<bool>,
    levels: usize,
}

impl Vocabulary {
    pub fn build(model: &MixtureModel, cfg: &SearchConfig) -> Result<Self> {
        let intervals = propositionalize_continuous(model, &cfg.quantiles);
        let mut items = Vec::new();
        let mut excluded = Vec::new();
        for (j, attr) in model.schema.attributes.iter().enumerate() {
            if let Some(values) = attr.values() {
                let skip = if cfg.positive_only {
                    attr.positive_only_exclusions()
                } else {
                    Default::default()
                };
                for v in 0..values.len() as u32 {
                    items.push(Conjunct::Eq {
                        attribute: j,
                        value: v,
                    });
                    excluded.push(skip.contains(&v));
                }
            } else {
                for per_cluster in &intervals[j] {
                    for iv in per_cluster {
                        items.push(Conjunct::Interval(*iv));
                        excluded.push(false);
                    }
                }
            }
        }
        let k = model.k();
        let mut log_probs = Vec::with_capacity(items.len() * k);
        for c in &items {
            log_probs.extend(model.conjunct_log_probs(c)?);
        }
        Ok(Vocabulary {
            k,
            items,
            log_probs,
            excluded,
            levels: cfg.quantiles.len(),
        })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn conjunct(&self, id: u32) -> &Conjunct {
        &self.items[id as usize]
    }

    pub fn attribute(&self, id: u32) -> usize {
        self.items[id as usize].attribute()
    }

    pub fn log_probs(&self, id: u32) -> &[f64] {
        let i = id as usize * self.k;
        &self.log_probs[i..i + self.k]
    }

    /// Whether the item may seed cluster `k`'s search.
    pub fn usable_for(&self, id: u32, k: usize) -> bool {
        if self.excluded[id as usize] {
            return false;
        }
        match &self.items[id as usize] {
            Conjunct::Eq { .. } => true,
            Conjunct::Interval(iv) => iv.cluster == k,
        }
    }

    /// Item ids of the same-origin intervals wider than `id`.
    pub fn widenings(&self, id: u32) -> std::ops::Range<u32> {
        match &self.items[id as usize] {
            Conjunct::Interval(iv) => id + 1..id + (self.levels - iv.level) as u32,
            Conjunct::Eq { .. } => id + 1..id + 1,
        }
    }

    pub fn label(&self, ids: &[u32]) -> Label {
        Label::new(ids.iter().map(|i| *self.conjunct(*i)).collect())
            .expect("item sets never repeat an attribute")
    }
}
