use super::Label;
use crate::error::{Error, Result};
use crate::mixture::MixtureModel;
use crate::numeric::{ln0, log_sum_exp};
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;

/// Reporting scores that accompany the membership probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecondaryScores {
    /// `p(x|k) / p(x|¬k)`; `+inf` when the label never occurs outside `k`.
    #[serde(with = "inf_as_string")]
    pub growth_rate: f64,
    pub pmi: f64,
    pub leverage: f64,
    pub tf_idf: f64,
    pub f_score: f64,
    pub precision: f64,
    pub recall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredLabel {
    pub label: Label,
    /// 0-based cluster index.
    pub cluster: usize,
    pub p_x: f64,
    pub p_x_given_k: f64,
    pub p_k_given_x: f64,
    pub scores: SecondaryScores,
}

/// Ordering applied by [`rank_labels`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankMode {
    /// Length, then `p(x|k)`, then `p(k|x)`.
    #[default]
    Length,
    /// Harmonic mean of `p(k|x)` and `p(x|k)` first.
    FScore,
}

/// Scores `label` for cluster `k` from the model.
pub fn score_label(model: &MixtureModel, label: &Label, k: usize) -> Result<ScoredLabel> {
    if k >= model.k() {
        return Err(Error::InvalidLabel(format!("cluster index {k} out of range")));
    }
    let logp = model.label_log_probs(label)?;
    score_from_log(model, label.clone(), k, &logp)
}

/// Scores a label whose `ln p(x|k')` vector is already known.
pub fn score_from_log(
    model: &MixtureModel,
    label: Label,
    k: usize,
    log_p_x_given: &[f64],
) -> Result<ScoredLabel> {
    let log_prior: Vec<f64> = model.priors.iter().map(|p| ln0(*p)).collect();
    let joint: Vec<f64> = log_prior.iter().zip(log_p_x_given).map(|(a, b)| a + b).collect();
    let log_px = log_sum_exp(&joint);
    if !log_px.is_finite() {
        return Err(Error::UndefinedScore(format!(
            "label has zero probability under the model (cluster {})",
            k + 1
        )));
    }
    let lk = log_p_x_given[k];
    let p_k = model.priors[k];
    let p_x = log_px.exp();
    let p_x_given_k = lk.exp();
    let p_k_given_x = (joint[k] - log_px).exp().min(1.0);

    let others: Vec<f64> = joint
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != k)
        .map(|(_, v)| *v)
        .collect();
    let p_not_k: f64 = model
        .priors
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != k)
        .map(|(_, p)| p)
        .sum();
    let log_not = log_sum_exp(&others);
    let growth_rate = if p_x_given_k == 0.0 && lk == f64::NEG_INFINITY {
        0.0
    } else if log_not == f64::NEG_INFINITY || p_not_k <= 0.0 {
        f64::INFINITY
    } else {
        (lk - (log_not - p_not_k.ln())).exp()
    };
    let pmi = lk - log_px;
    let leverage = p_k * (p_x_given_k - p_x);
    let tf_idf = p_x_given_k * -log_px;
    let f_score = if p_k_given_x + p_x_given_k > 0.0 {
        2.0 * p_k_given_x * p_x_given_k / (p_k_given_x + p_x_given_k)
    } else {
        0.0
    };
    Ok(ScoredLabel {
        label,
        cluster: k,
        p_x,
        p_x_given_k,
        p_k_given_x,
        scores: SecondaryScores {
            growth_rate,
            pmi,
            leverage,
            tf_idf,
            f_score,
            precision: p_k_given_x,
            recall: p_x_given_k,
        },
    })
}

fn length_order(a: &ScoredLabel, b: &ScoredLabel) -> Ordering {
    a.label
        .len()
        .cmp(&b.label.len())
        .then(b.p_x_given_k.total_cmp(&a.p_x_given_k))
        .then(b.p_k_given_x.total_cmp(&a.p_k_given_x))
        .then_with(|| a.label.cmp(&b.label))
}

/// Sorts one cluster's labels for display.
pub fn rank_labels(labels: &mut [ScoredLabel], mode: RankMode) {
    match mode {
        RankMode::Length => labels.sort_by(length_order),
        RankMode::FScore => labels.sort_by(|a, b| {
            b.scores
                .f_score
                .total_cmp(&a.scores.f_score)
                .then_with(|| length_order(a, b))
        }),
    }
}

/// JSON has no infinity; growth rates serialize as the string `"inf"`.
mod inf_as_string {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() && *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Str(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(x) => Ok(x),
            Repr::Str(s) if s == "inf" => Ok(f64::INFINITY),
            Repr::Str(s) => Err(serde::de::Error::custom(format!("bad growth rate '{s}'"))),
        }
    }
}
