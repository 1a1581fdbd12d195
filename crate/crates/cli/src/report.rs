//! Human tables, machine records, confusion matrices and integer
//! back-translation of interval labels.

use clabel_core::dataset::{AttributeKind, Schema};
use clabel_core::labelsearch::{Conjunct, ScoredLabel};
use clabel_core::mixture::MixtureModel;
use serde::Serialize;
use std::collections::HashMap;
use std::fmt::Write as _;

/// Class-by-cluster counts. Rows are ordered by class frequency (descending,
/// ties by first appearance); columns are clusters 1..K.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfusionMatrix {
    pub rows: Vec<String>,
    pub k: usize,
    pub counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    /// `assignments` are 0-based cluster indices aligned with `classes`.
    pub fn new(classes: &[String], assignments: &[usize], k: usize) -> Self {
        let mut order: Vec<String> = Vec::new();
        let mut freq: HashMap<&str, usize> = HashMap::new();
        for c in classes {
            if !freq.contains_key(c.as_str()) {
                order.push(c.clone());
            }
            *freq.entry(c).or_default() += 1;
        }
        // stable sort keeps first-appearance order among equal frequencies
        order.sort_by_key(|c| std::cmp::Reverse(freq[c.as_str()]));
        let row_of: HashMap<&str, usize> =
            order.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();
        let mut counts = vec![vec![0; k]; order.len()];
        for (c, a) in classes.iter().zip(assignments) {
            counts[row_of[c.as_str()]][*a] += 1;
        }
        ConfusionMatrix {
            rows: order,
            k,
            counts,
        }
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    /// Greedy one-to-one pairing of classes and clusters by largest overlap.
    /// Returns `(class row, cluster, count)` triples.
    pub fn best_match(&self) -> Vec<(usize, usize, usize)> {
        let mut cells: Vec<(usize, usize, usize)> = self
            .counts
            .iter()
            .enumerate()
            .flat_map(|(r, row)| row.iter().enumerate().map(move |(c, n)| (r, c, *n)))
            .filter(|t| t.2 > 0)
            .collect();
        cells.sort_by(|a, b| b.2.cmp(&a.2).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));
        let mut used_r = vec![false; self.rows.len()];
        let mut used_c = vec![false; self.k];
        let mut out = Vec::new();
        for (r, c, n) in cells {
            if !used_r[r] && !used_c[c] {
                used_r[r] = true;
                used_c[c] = true;
                out.push((r, c, n));
            }
        }
        out
    }

    /// Fraction of instances on the greedy best-match diagonal.
    pub fn agreement(&self) -> f64 {
        let matched: usize = self.best_match().iter().map(|t| t.2).sum();
        matched as f64 / self.total().max(1) as f64
    }

    pub fn to_text(&self) -> String {
        let width = self.rows.iter().map(String::len).max().unwrap_or(0).max(5);
        let mut s = format!("{:width$}", "class");
        for c in 1..=self.k {
            let _ = write!(s, " {:>5}", format!("C{c}"));
        }
        s.push('\n');
        for (name, row) in self.rows.iter().zip(&self.counts) {
            let _ = write!(s, "{name:width$}");
            for n in row {
                let _ = write!(s, " {n:>5}");
            }
            s.push('\n');
        }
        s
    }
}

/// Number of instances that differ between two equally-shaped class x
/// cluster matrices, minimized over relabelings of the clusters.
pub fn permutation_distance(a: &[Vec<usize>], b: &[Vec<usize>]) -> usize {
    let k = a.first().map_or(0, Vec::len);
    let total: usize = a.iter().flatten().sum();
    let mut perm: Vec<usize> = (0..k).collect();
    let mut best = 0;
    permute(&mut perm, 0, &mut |p| {
        let overlap: usize = a
            .iter()
            .zip(b)
            .map(|(ra, rb)| (0..k).map(|c| ra[p[c]].min(rb[c])).sum::<usize>())
            .sum();
        best = best.max(overlap);
    });
    total - best
}

fn permute(p: &mut Vec<usize>, i: usize, f: &mut impl FnMut(&[usize])) {
    if i == p.len() {
        f(p);
        return;
    }
    for j in i..p.len() {
        p.swap(i, j);
        permute(p, i + 1, f);
        p.swap(i, j);
    }
}

/// One conjunct as shown to the user, after integer back-translation.
#[derive(Debug, Clone, PartialEq)]
pub enum Shown {
    /// A discrete value or an untranslated interval: identity and text.
    Plain { attribute: usize, key: Conjunct, text: String },
    /// The integers an interval on an integer attribute admits.
    Integers { attribute: usize, values: Vec<i64> },
}

impl Shown {
    fn attribute(&self) -> usize {
        match self {
            Shown::Plain { attribute, .. } | Shown::Integers { attribute, .. } => *attribute,
        }
    }

    /// Whether `self` is satisfied by everything satisfying `other`.
    fn generalizes(&self, other: &Shown) -> bool {
        match (self, other) {
            (Shown::Plain { key: a, .. }, Shown::Plain { key: b, .. }) => a.generalizes(b),
            (Shown::Integers { attribute: a, values: va }, Shown::Integers { attribute: b, values: vb }) => {
                a == b && vb.iter().all(|v| va.contains(v))
            }
            _ => false,
        }
    }

    fn text(&self, schema: &Schema) -> String {
        match self {
            Shown::Plain { text, .. } => text.clone(),
            Shown::Integers { attribute, values } => {
                let name = &schema.attributes[*attribute].name;
                let list: Vec<String> = values.iter().map(i64::to_string).collect();
                format!("{name}={}", list.join(","))
            }
        }
    }
}

/// A ranked label ready for display.
#[derive(Debug, Clone)]
pub struct DisplayLabel {
    pub text: String,
    pub shown: Vec<Shown>,
    pub scored: ScoredLabel,
}

fn integers_in(lower: f64, upper: f64) -> Vec<i64> {
    // (lower, upper] holds floor(lower)+1 ..= floor(upper)
    let lo = lower.floor() as i64 + 1;
    let hi = upper.floor() as i64;
    (lo..=hi).collect()
}

/// Renders one cluster's ranked labels, translating intervals on integer
/// attributes into the integers they contain. A translated label that no
/// integer satisfies is dropped, as is any label made non-minimal (or
/// duplicated) by the translation.
pub fn display_labels(schema: &Schema, ranked: &[ScoredLabel]) -> Vec<DisplayLabel> {
    let mut out: Vec<DisplayLabel> = Vec::new();
    let mut translated_any = false;
    'labels: for s in ranked {
        let mut shown = Vec::new();
        for c in s.label.conjuncts() {
            let attr = &schema.attributes[c.attribute()];
            match (c, &attr.kind) {
                (Conjunct::Interval(iv), AttributeKind::Continuous { integer: true }) => {
                    let values = integers_in(iv.lower, iv.upper);
                    if values.is_empty() {
                        continue 'labels;
                    }
                    translated_any = true;
                    shown.push(Shown::Integers {
                        attribute: iv.attribute,
                        values,
                    });
                }
                _ => shown.push(Shown::Plain {
                    attribute: c.attribute(),
                    key: *c,
                    text: c.describe(schema),
                }),
            }
        }
        let text = if shown.is_empty() {
            "(empty)".to_string()
        } else {
            shown.iter().map(|x| x.text(schema)).collect::<Vec<_>>().join(" & ")
        };
        out.push(DisplayLabel {
            text,
            shown,
            scored: s.clone(),
        });
    }
    if !translated_any {
        return out;
    }
    // x is dropped when another kept label is at least as general; among
    // identical translations the first in rank order stays
    let general = |a: &DisplayLabel, b: &DisplayLabel| {
        a.shown.iter().all(|g| {
            b.shown
                .iter()
                .find(|s| s.attribute() == g.attribute())
                .is_some_and(|s| g.generalizes(s))
        })
    };
    let mut keep = vec![true; out.len()];
    for i in 0..out.len() {
        for j in 0..out.len() {
            if i == j || !keep[j] {
                continue;
            }
            if general(&out[j], &out[i]) {
                let same = general(&out[i], &out[j]);
                if !same || j < i {
                    keep[i] = false;
                    break;
                }
            }
        }
    }
    out.into_iter().zip(keep).filter(|(_, k)| *k).map(|(d, _)| d).collect()
}

/// Text tables: one per cluster, probabilities at 3 decimals.
pub fn label_tables(model: &MixtureModel, per_cluster: &[Vec<DisplayLabel>]) -> String {
    let mut s = String::new();
    for (k, labels) in per_cluster.iter().enumerate() {
        let _ = writeln!(s, "cluster C{} (p(k)={:.3})", k + 1, model.priors[k]);
        if labels.is_empty() {
            s.push_str("  no label satisfies the thresholds\n\n");
            continue;
        }
        let width = labels.iter().map(|l| l.text.chars().count()).max().unwrap_or(0).max(5);
        let _ = writeln!(s, "  {:width$}  p(k|x)  p(x|k)", "label");
        for l in labels {
            let pad = width - l.text.chars().count();
            let _ = writeln!(
                s,
                "  {}{}  {:.3}   {:.3}",
                l.text,
                " ".repeat(pad),
                l.scored.p_k_given_x,
                l.scored.p_x_given_k
            );
        }
        s.push('\n');
    }
    s
}

/// One machine record per label. Fields appear in declaration order.
#[derive(Debug, Serialize)]
pub struct LabelRecord<'a> {
    pub record: &'static str,
    /// 1-based cluster.
    pub cluster: usize,
    /// 1-based position in the cluster's ranking.
    pub rank: usize,
    pub label: &'a str,
    pub length: usize,
    pub conjuncts: &'a [Conjunct],
    pub p_x: f64,
    pub p_x_given_k: f64,
    pub p_k_given_x: f64,
    /// `"inf"` when the label never occurs outside the cluster.
    pub growth_rate: serde_json::Value,
    pub pmi: f64,
    pub leverage: f64,
    pub tf_idf: f64,
    pub f_score: f64,
    pub precision: f64,
    pub recall: f64,
}

pub fn label_records(per_cluster: &[Vec<DisplayLabel>]) -> String {
    let mut s = String::new();
    for (k, labels) in per_cluster.iter().enumerate() {
        for (i, l) in labels.iter().enumerate() {
            let sc = &l.scored;
            let gr = if sc.scores.growth_rate.is_infinite() {
                serde_json::Value::from("inf")
            } else {
                serde_json::Value::from(sc.scores.growth_rate)
            };
            let rec = LabelRecord {
                record: "label",
                cluster: k + 1,
                rank: i + 1,
                label: &l.text,
                length: sc.label.len(),
                conjuncts: sc.label.conjuncts(),
                p_x: sc.p_x,
                p_x_given_k: sc.p_x_given_k,
                p_k_given_x: sc.p_k_given_x,
                growth_rate: gr,
                pmi: sc.scores.pmi,
                leverage: sc.scores.leverage,
                tf_idf: sc.scores.tf_idf,
                f_score: sc.scores.f_score,
                precision: sc.scores.precision,
                recall: sc.scores.recall,
            };
            s.push_str(&serde_json::to_string(&rec).expect("record serializes"));
            s.push('\n');
        }
    }
    s
}
