use super::score::{rank_labels, score_from_log, ScoredLabel};
use super::{Label, SearchConfig, Vocabulary};
use crate::error::Result;
use crate::mixture::MixtureModel;
use crate::numeric::{ln0, log_sum_exp};
use rayon::prelude::*;
use std::collections::{HashMap, HashSet};

/// A label as a strictly increasing list of vocabulary item ids.
pub type ItemSet = Vec<u32>;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SearchStats {
    /// Candidates examined per level, summed over clusters.
    pub candidates_per_level: Vec<usize>,
    /// Distinct labels whose `p(x|k)` vector was computed per level.
    pub evaluations_per_level: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct SearchOutput {
    /// Ranked characteristic labels, indexed by 0-based cluster.
    pub per_cluster: Vec<Vec<ScoredLabel>>,
    pub stats: SearchStats,
}

/// Joins the length-`n` item sets of `w` (sorted, deduplicated) into
/// length-`n+1` candidates.
///
/// Two sets join when they share their first `n-1` items and their last
/// items sit on different attributes. A candidate survives only if every
/// immediate subconjunction is in `w`. Each result carries the index in
/// `w` of its prefix (the candidate minus its last item).
pub fn gen_candidate(w: &[ItemSet], attr_of: impl Fn(u32) -> usize) -> Vec<(ItemSet, usize)> {
    let Some(n) = w.first().map(Vec::len) else {
        return Vec::new();
    };
    let members: HashSet<&[u32]> = w.iter().map(Vec::as_slice).collect();
    let mut out = Vec::new();
    let mut probe: Vec<u32> = Vec::with_capacity(n);
    let mut start = 0;
    while start < w.len() {
        let prefix = &w[start][..n - 1];
        let mut end = start + 1;
        while end < w.len() && w[end][..n - 1] == *prefix {
            end += 1;
        }
        for i in start..end {
            let a = w[i][n - 1];
            for x in &w[i + 1..end] {
                let b = x[n - 1];
                if attr_of(a) == attr_of(b) {
                    continue;
                }
                let mut cand = Vec::with_capacity(n + 1);
                cand.extend_from_slice(&w[i]);
                cand.push(b);
                // deleting either of the last two items gives w[i] or x
                let keep = (0..n - 1).all(|skip| {
                    probe.clear();
                    probe.extend(cand.iter().enumerate().filter(|(p, _)| *p != skip).map(|(_, v)| *v));
                    members.contains(probe.as_slice())
                });
                if keep {
                    out.push((cand, i));
                }
            }
        }
        start = end;
    }
    out
}

/// Keeps entries whose membership score does not fall below their
/// reference (`p(k)` at level 1, the prefix's `p(k|x')` later). Both are
/// given as logarithms. Disabled, it returns its input unchanged.
pub fn greedy_prune_level<T>(entries: Vec<T>, enabled: bool, scores: impl Fn(&T) -> (f64, f64)) -> Vec<T> {
    if !enabled {
        return entries;
    }
    entries
        .into_iter()
        .filter(|e| {
            let (score, reference) = scores(e);
            score >= reference
        })
        .collect()
}

/// Per-cluster state carried from one level to the next.
#[derive(Default)]
struct Frontier {
    /// `W_n[k]`, sorted.
    labels: Vec<ItemSet>,
    /// `ln p(x|k')` for every cluster, K per label.
    log_probs: Vec<f64>,
    /// `ln p(k|x)` for this frontier's cluster.
    log_membership: Vec<f64>,
}

struct Thresholds {
    ln_r: f64,
    ln_s_global: f64,
    ln_s_local: f64,
}

/// One candidate of one cluster at the current level.
struct Cand {
    /// Index into the level's distinct label table.
    d: usize,
    /// `ln p(k|x')` of its prefix, for greedy pruning.
    reference: f64,
}

struct Evaluated {
    d: usize,
    log_membership: f64,
    relevant: bool,
}

struct Level<'a> {
    labels: &'a [ItemSet],
    log_probs: &'a [f64],
    log_px: &'a [f64],
}

/// All minimal characteristic labels of every cluster.
pub fn find_characteristic_labels(model: &MixtureModel, cfg: &SearchConfig) -> Result<SearchOutput> {
    cfg.validate()?;
    model.validate()?;
    let k_count = model.k();
    let mut stats = SearchStats::default();
    if k_count == 1 {
        let only = score_from_log(model, Label::empty(), 0, &[0.0])?;
        return Ok(SearchOutput {
            per_cluster: vec![vec![only]],
            stats,
        });
    }
    let vocab = Vocabulary::build(model, cfg)?;
    let log_prior: Vec<f64> = model.priors.iter().map(|p| ln0(*p)).collect();
    let th = Thresholds {
        ln_r: cfg.r.ln(),
        ln_s_global: ln0(cfg.s_global),
        ln_s_local: ln0(cfg.s_local),
    };
    let log_px_of = |lp: &[f64]| {
        let joint: Vec<f64> = log_prior.iter().zip(lp).map(|(a, b)| a + b).collect();
        log_sum_exp(&joint)
    };

    let mut results: Vec<Vec<Found>> = vec![Vec::new(); k_count];
    let mut settle_all = |per_cluster: Vec<Vec<Cand>>, level: &Level| -> Vec<Frontier> {
        let settled: Vec<(Frontier, Vec<Found>)> = per_cluster
            .into_par_iter()
            .enumerate()
            .map(|(k, cands)| settle_level(k, cands, level, &vocab, cfg, &th, &log_prior))
            .collect();
        settled
            .into_iter()
            .zip(results.iter_mut())
            .map(|((frontier, found), out)| {
                out.extend(found);
                frontier
            })
            .collect()
    };

    // level 1: single items
    let singles: Vec<ItemSet> = (0..vocab.len() as u32).map(|i| vec![i]).collect();
    let single_lp: Vec<f64> = (0..vocab.len() as u32)
        .flat_map(|i| vocab.log_probs(i).to_vec())
        .collect();
    let single_px: Vec<f64> = single_lp.chunks(k_count).map(&log_px_of).collect();
    stats.evaluations_per_level.push(singles.len());
    let level = Level {
        labels: &singles,
        log_probs: &single_lp,
        log_px: &single_px,
    };
    let seeds: Vec<Vec<Cand>> = (0..k_count)
        .map(|k| {
            (0..vocab.len())
                .filter(|i| vocab.usable_for(*i as u32, k))
                .map(|d| Cand {
                    d,
                    reference: log_prior[k],
                })
                .collect()
        })
        .collect();
    stats.candidates_per_level.push(seeds.iter().map(Vec::len).sum());
    let mut frontiers = settle_all(seeds, &level);

    let mut n = 1;
    while frontiers.iter().any(|f| !f.labels.is_empty()) && cfg.max_length.is_none_or(|m| n < m) {
        // join and prune each cluster's frontier
        let joined: Vec<Vec<(ItemSet, usize)>> = frontiers
            .par_iter()
            .map(|f| gen_candidate(&f.labels, |i| vocab.attribute(i)))
            .collect();

        // distinct union across clusters; probabilities computed once each
        let mut index: HashMap<ItemSet, usize> = HashMap::new();
        let mut labels: Vec<ItemSet> = Vec::new();
        let mut log_probs: Vec<f64> = Vec::new();
        let mut per_cluster: Vec<Vec<Cand>> = Vec::with_capacity(k_count);
        for (cands, f) in joined.into_iter().zip(&frontiers) {
            let mut mine = Vec::with_capacity(cands.len());
            for (items, parent) in cands {
                let d = match index.get(&items) {
                    Some(d) => *d,
                    None => {
                        let last = *items.last().expect("non-empty candidate");
                        let prefix = &f.log_probs[parent * k_count..(parent + 1) * k_count];
                        log_probs.extend(prefix.iter().zip(vocab.log_probs(last)).map(|(a, b)| a + b));
                        let d = labels.len();
                        index.insert(items.clone(), d);
                        labels.push(items);
                        d
                    }
                };
                mine.push(Cand {
                    d,
                    reference: f.log_membership[parent],
                });
            }
            per_cluster.push(mine);
        }
        drop(index);
        stats.candidates_per_level.push(per_cluster.iter().map(Vec::len).sum());
        stats.evaluations_per_level.push(labels.len());
        let log_px: Vec<f64> = log_probs.chunks(k_count).map(&log_px_of).collect();
        let level = Level {
            labels: &labels,
            log_probs: &log_probs,
            log_px: &log_px,
        };
        frontiers = settle_all(per_cluster, &level);
        n += 1;
    }

    let per_cluster = results
        .into_iter()
        .map(|found| {
            let mut v = found
                .into_iter()
                .map(|(label, (k, lp))| score_from_log(model, label, k, &lp))
                .collect::<Result<Vec<_>>>()?;
            rank_labels(&mut v, cfg.rank);
            Ok(v)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SearchOutput { per_cluster, stats })
}

/// Labels found at a level: the label and `(cluster, ln p(x|k') for all k')`.
type Found = (Label, (usize, Vec<f64>));

/// Applies support, greedy pruning, relevance and the interval minimality
/// sweep to cluster `k`'s candidates. Returns the next frontier `W` and the
/// labels of `R`.
fn settle_level(
    k: usize,
    cands: Vec<Cand>,
    level: &Level,
    vocab: &Vocabulary,
    cfg: &SearchConfig,
    th: &Thresholds,
    log_prior: &[f64],
) -> (Frontier, Vec<Found>) {
    let kc = log_prior.len();
    let lp = |d: usize| &level.log_probs[d * kc..(d + 1) * kc];

    // S: support
    let supported: Vec<(Cand, f64)> = cands
        .into_iter()
        .filter_map(|c| {
            let px = level.log_px[c.d];
            let lk = lp(c.d)[k];
            if px.is_finite() && px >= th.ln_s_global && lk >= th.ln_s_local {
                Some((log_prior[k] + lk - px, c))
            } else {
                None
            }
        })
        .map(|(m, c)| (c, m))
        .collect();
    let supported = greedy_prune_level(supported, cfg.greedy, |(c, m)| (*m, c.reference));
    let mut evaluated: Vec<Evaluated> = supported
        .into_iter()
        .map(|(c, m)| Evaluated {
            d: c.d,
            log_membership: m,
            relevant: m >= th.ln_r,
        })
        .collect();

    // a label is not minimal when a same-length widening of it is relevant
    let relevant: HashSet<&[u32]> = evaluated
        .iter()
        .filter(|e| e.relevant)
        .map(|e| level.labels[e.d].as_slice())
        .collect();
    if !relevant.is_empty() {
        evaluated.retain(|e| !has_relevant_widening(&level.labels[e.d], vocab, &relevant));
    }

    let mut frontier = Frontier::default();
    let mut found = Vec::new();
    let mut rest: Vec<&Evaluated> = Vec::new();
    for e in &evaluated {
        if e.relevant {
            found.push((vocab.label(&level.labels[e.d]), (k, lp(e.d).to_vec())));
        } else {
            rest.push(e);
        }
    }
    rest.sort_by(|a, b| level.labels[a.d].cmp(&level.labels[b.d]));
    for e in rest {
        frontier.labels.push(level.labels[e.d].clone());
        frontier.log_probs.extend_from_slice(lp(e.d));
        frontier.log_membership.push(e.log_membership);
    }
    (frontier, found)
}

/// Whether some label obtained from `items` by widening one or more of its
/// intervals (same attribute and source cluster, larger mass) is in `relevant`.
fn has_relevant_widening(items: &[u32], vocab: &Vocabulary, relevant: &HashSet<&[u32]>) -> bool {
    let slots: Vec<(usize, std::ops::Range<u32>)> = items
        .iter()
        .enumerate()
        .map(|(p, id)| (p, vocab.widenings(*id)))
        .filter(|(_, r)| !r.is_empty())
        .collect();
    if slots.is_empty() {
        return false;
    }
    // odometer over {original, widenings...} per slot, skipping the all-original state
    let mut probe = items.to_vec();
    let mut digit = vec![0u32; slots.len()];
    loop {
        let mut carry = 0;
        while carry < slots.len() {
            let (pos, range) = &slots[carry];
            let span = range.end - range.start;
            if digit[carry] < span {
                digit[carry] += 1;
                probe[*pos] = range.start + digit[carry] - 1;
                break;
            }
            digit[carry] = 0;
            probe[*pos] = items[*pos];
            carry += 1;
        }
        if carry == slots.len() {
            return false;
        }
        if relevant.contains(probe.as_slice()) {
            return true;
        }
    }
}
