//! Naive-Bayes mixture model: parameters, posterior membership and the
//! model-based label probabilities used by the label search.

mod em;

pub use em::{fit, log_likelihood, run_restart, FitConfig, FitResult, RestartOutcome};

use crate::dataset::{AttributeKind, Cell, Dataset, Instance, Schema};
use crate::error::{Error, Result};
use crate::labelsearch::{Conjunct, Label};
use crate::numeric::{gaussian_interval_mass, gaussian_log_density, ln0, log_sum_exp};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Tolerance for the probability-sum invariants.
pub const NORMALIZATION_TOL: f64 = 1e-9;

const MODEL_FORMAT: &str = "clabel-mixture";
const MODEL_VERSION: u32 = 1;

/// Per-attribute conditional distributions, indexed by cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AttributeParams {
    /// `probs[k][v] = p(A_j = v | k)`.
    Discrete { probs: Vec<Vec<f64>> },
    /// Per-cluster mean and variance.
    Gaussian { mean: Vec<f64>, variance: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureModel {
    pub schema: Schema,
    /// Size of the training set; used for the default support thresholds.
    pub n_instances: usize,
    pub priors: Vec<f64>,
    pub params: Vec<AttributeParams>,
}

/// `p(x)`, `p(x|k)` and `p(k|x)` of one label.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelProbs {
    pub p_x: f64,
    pub p_x_given_k: Vec<f64>,
    /// `None` when `p(x) = 0`: membership is undefined, not zero.
    pub p_k_given_x: Option<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    fingerprint: String,
    model: MixtureModel,
}

impl MixtureModel {
    pub fn k(&self) -> usize {
        self.priors.len()
    }

    /// Checks the normalization and positivity invariants.
    pub fn validate(&self) -> Result<()> {
        let k = self.k();
        if k == 0 {
            return Err(Error::Model("model has no clusters".into()));
        }
        if self.params.len() != self.schema.len() {
            return Err(Error::Model("parameter count does not match schema".into()));
        }
        let check_dist = |p: &[f64], what: &str| -> Result<()> {
            if p.iter().any(|x| !(*x >= 0.0) || !x.is_finite()) {
                return Err(Error::Model(format!("{what} has a negative or non-finite entry")));
            }
            let s: f64 = p.iter().sum();
            if (s - 1.0).abs() > NORMALIZATION_TOL {
                return Err(Error::Model(format!("{what} sums to {s}")));
            }
            Ok(())
        };
        check_dist(&self.priors, "class prior")?;
        for (j, (attr, params)) in self.schema.attributes.iter().zip(&self.params).enumerate() {
            match (&attr.kind, params) {
                (AttributeKind::Discrete { values }, AttributeParams::Discrete { probs }) => {
                    if probs.len() != k || probs.iter().any(|p| p.len() != values.len()) {
                        return Err(Error::Model(format!("table shape mismatch for attribute {j}")));
                    }
                    for (c, p) in probs.iter().enumerate() {
                        check_dist(p, &format!("p({}|{})", attr.name, c + 1))?;
                    }
                }
                (AttributeKind::Continuous { .. }, AttributeParams::Gaussian { mean, variance }) => {
                    if mean.len() != k || variance.len() != k {
                        return Err(Error::Model(format!("gaussian shape mismatch for attribute {j}")));
                    }
                    if variance.iter().any(|v| !(*v > 0.0) || !v.is_finite())
                        || mean.iter().any(|m| !m.is_finite())
                    {
                        return Err(Error::Model(format!("bad gaussian for '{}'", attr.name)));
                    }
                }
                _ => return Err(Error::Model(format!("kind mismatch for attribute {j}"))),
            }
        }
        Ok(())
    }

    /// `ln p(a_j | k)` for every cluster, accumulated into `acc`.
    fn add_cell_log_probs(&self, j: usize, cell: &Cell, acc: &mut [f64]) -> Result<()> {
        match (cell, &self.params[j]) {
            (Cell::Missing, _) => {}
            (Cell::Discrete(v), AttributeParams::Discrete { probs }) => {
                for (a, p) in acc.iter_mut().zip(probs) {
                    let pv = p.get(*v as usize).ok_or_else(|| {
                        Error::Schema(format!("value index {v} out of range for attribute {j}"))
                    })?;
                    *a += ln0(*pv);
                }
            }
            (Cell::Continuous(x), AttributeParams::Gaussian { mean, variance }) => {
                for ((a, m), s2) in acc.iter_mut().zip(mean).zip(variance) {
                    *a += gaussian_log_density(*x, *m, *s2);
                }
            }
            _ => {
                return Err(Error::Schema(format!(
                    "cell kind does not match attribute '{}'",
                    self.schema.attributes[j].name
                )))
            }
        }
        Ok(())
    }

    /// `ln p(k) + Σ_j ln p(a_j|k)` over observed cells.
    pub fn log_joint(&self, inst: &Instance) -> Result<Vec<f64>> {
        if inst.cells.len() != self.schema.len() {
            return Err(Error::Structure(format!(
                "instance has {} cells, model has {} attributes",
                inst.cells.len(),
                self.schema.len()
            )));
        }
        let mut acc: Vec<f64> = self.priors.iter().map(|p| ln0(*p)).collect();
        for (j, cell) in inst.cells.iter().enumerate() {
            self.add_cell_log_probs(j, cell, &mut acc)?;
        }
        Ok(acc)
    }

    /// Posterior membership `p(k|a)`. An instance with no observed cell
    /// gets the class prior.
    pub fn membership(&self, inst: &Instance) -> Result<Vec<f64>> {
        let lj = self.log_joint(inst)?;
        let total = log_sum_exp(&lj);
        if !total.is_finite() {
            return Err(Error::UndefinedScore(
                "instance has zero probability under every cluster".into(),
            ));
        }
        Ok(lj.iter().map(|l| (l - total).exp()).collect())
    }

    /// Most probable cluster for each instance (0-based, ties to the lowest index).
    pub fn assign(&self, ds: &Dataset) -> Result<Vec<usize>> {
        ds.instances
            .iter()
            .map(|inst| self.membership(inst).map(|m| argmax(&m)))
            .collect()
    }

    /// `ln p(c | k)` of one conjunct for every cluster.
    pub fn conjunct_log_probs(&self, c: &Conjunct) -> Result<Vec<f64>> {
        let j = c.attribute();
        let params = self
            .params
            .get(j)
            .ok_or_else(|| Error::InvalidLabel(format!("attribute index {j} out of range")))?;
        match (c, params) {
            (Conjunct::Eq { value, .. }, AttributeParams::Discrete { probs }) => probs
                .iter()
                .map(|p| {
                    p.get(*value as usize).map(|x| ln0(*x)).ok_or_else(|| {
                        Error::InvalidLabel(format!("value index {value} out of range"))
                    })
                })
                .collect(),
            (Conjunct::Interval(iv), AttributeParams::Gaussian { mean, variance }) => {
                if !(iv.lower < iv.upper) {
                    return Err(Error::InvalidLabel("empty interval".into()));
                }
                Ok(mean
                    .iter()
                    .zip(variance)
                    .map(|(m, s2)| ln0(gaussian_interval_mass(*m, *s2, iv.lower, iv.upper)))
                    .collect())
            }
            _ => Err(Error::InvalidLabel(format!(
                "conjunct kind does not match attribute '{}'",
                self.schema.attributes[j].name
            ))),
        }
    }

    /// `ln p(x | k)` for every cluster, by the naive-Bayes product.
    pub fn label_log_probs(&self, label: &Label) -> Result<Vec<f64>> {
        let conj = label.conjuncts();
        if conj.windows(2).any(|w| w[0].attribute() >= w[1].attribute()) {
            return Err(Error::InvalidLabel(
                "conjuncts must be on distinct attributes in schema order".into(),
            ));
        }
        let mut acc = vec![0.0; self.k()];
        for c in conj {
            for (a, l) in acc.iter_mut().zip(self.conjunct_log_probs(c)?) {
                *a += l;
            }
        }
        Ok(acc)
    }

    /// `p(x | k)` for a single cluster.
    pub fn label_prob_given_k(&self, label: &Label, k: usize) -> Result<f64> {
        if k >= self.k() {
            return Err(Error::InvalidLabel(format!("cluster index {k} out of range")));
        }
        Ok(self.label_log_probs(label)?[k].exp())
    }

    pub fn label_probs(&self, label: &Label) -> Result<LabelProbs> {
        let lpk = self.label_log_probs(label)?;
        Ok(self.probs_from_log(&lpk))
    }

    /// Assembles [`LabelProbs`] from `ln p(x|k)`.
    pub fn probs_from_log(&self, log_p_x_given_k: &[f64]) -> LabelProbs {
        let joint: Vec<f64> = self
            .priors
            .iter()
            .zip(log_p_x_given_k)
            .map(|(p, l)| ln0(*p) + l)
            .collect();
        let log_px = log_sum_exp(&joint);
        let p_k_given_x = if log_px.is_finite() {
            Some(joint.iter().map(|j| (j - log_px).exp()).collect())
        } else {
            None
        };
        LabelProbs {
            p_x: log_px.exp(),
            p_x_given_k: log_p_x_given_k.iter().map(|l| l.exp()).collect(),
            p_k_given_x,
        }
    }

    pub fn to_json(&self) -> String {
        let file = ModelFile {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            fingerprint: self.schema.fingerprint(),
            model: self.clone(),
        };
        serde_json::to_string_pretty(&file).expect("model serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile =
            serde_json::from_str(text).map_err(|e| Error::Model(e.to_string()))?;
        if file.format != MODEL_FORMAT {
            return Err(Error::Model(format!("unknown format '{}'", file.format)));
        }
        if file.version != MODEL_VERSION {
            return Err(Error::Model(format!("unsupported version {}", file.version)));
        }
        if file.fingerprint != file.model.schema.fingerprint() {
            return Err(Error::Model("schema fingerprint does not match contents".into()));
        }
        file.model.validate()?;
        Ok(file.model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}
