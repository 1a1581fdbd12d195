mod common;

use clabel_core::dataset::{Cell, Dataset};
use clabel_core::mixture::{fit, FitConfig};
use clabel_core::modelselect::{bic, cheeseman_stutz, parameter_count, sweep, PriorConfig};
use common::random_dataset;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Marginal likelihood of one discrete column under a symmetric Dirichlet,
/// as the product of sequential predictive probabilities (Polya urn).
fn polya_urn(values: &[u32], card: usize, alpha: f64) -> f64 {
    let mut counts = vec![0.0; card];
    let mut seen = 0.0;
    let mut log_p = 0.0;
    for v in values {
        log_p += ((counts[*v as usize] + alpha) / (seen + alpha * card as f64)).ln();
        counts[*v as usize] += 1.0;
        seen += 1.0;
    }
    log_p
}

fn discrete_columns(ds: &Dataset) -> Vec<(Vec<u32>, usize)> {
    (0..ds.m())
        .map(|j| {
            let vals = ds
                .instances
                .iter()
                .filter_map(|i| match i.cells[j] {
                    Cell::Discrete(v) => Some(v),
                    _ => None,
                })
                .collect();
            (vals, ds.schema.attributes[j].values().unwrap().len())
        })
        .collect()
}

#[test]
fn single_cluster_score_is_the_exact_marginal() {
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ds = random_dataset(&mut rng, 40, 4, 0, 0.1);
        let cfg = FitConfig {
            k: 1,
            restarts: 1,
            smoothing: 0.0,
            ..Default::default()
        };
        let f = fit(&ds, &cfg).unwrap();
        let prior = PriorConfig::default();
        let cs = cheeseman_stutz(&f.model, &ds, &prior).unwrap();
        // the class term is a single-category urn and contributes ln 1
        let exact: f64 = discrete_columns(&ds)
            .iter()
            .map(|(vals, card)| polya_urn(vals, *card, prior.alpha))
            .sum();
        assert!((cs - exact).abs() < 1e-9, "seed {seed}: {cs} vs {exact}");
    }
}

#[test]
fn bic_penalizes_and_counts_parameters() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let ds = random_dataset(&mut rng, 50, 3, 2, 0.0);
    for k in 1..=3 {
        let f = fit(
            &ds,
            &FitConfig {
                k,
                restarts: 3,
                ..Default::default()
            },
        )
        .unwrap();
        let cards: usize = ds.schema.attributes.iter().filter_map(|a| a.values()).map(|v| v.len() - 1).sum();
        assert_eq!(parameter_count(&f.model), (k - 1) + k * cards + 2 * k * 2);
        let b = bic(&f, &ds);
        assert!(b < f.log_likelihood);
        let expected = f.log_likelihood - parameter_count(&f.model) as f64 / 2.0 * 50f64.ln();
        assert!((b - expected).abs() < 1e-9);
    }
}

#[test]
fn one_instance_has_no_penalty() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let ds = random_dataset(&mut rng, 1, 2, 0, 0.0);
    let f = fit(&ds, &FitConfig::with_k(1)).unwrap();
    assert_eq!(bic(&f, &ds), f.log_likelihood);
}

#[test]
fn sweep_is_sorted_and_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let ds = random_dataset(&mut rng, 60, 3, 1, 0.05);
    let cfg = FitConfig {
        restarts: 5,
        seed: 42,
        ..Default::default()
    };
    let a = sweep(&ds, 1..=4, &cfg, &PriorConfig::default()).unwrap();
    let b = sweep(&ds, 1..=4, &cfg, &PriorConfig::default()).unwrap();
    assert_eq!(a, b);
    let ks: Vec<usize> = a.entries.iter().map(|e| e.k).collect();
    assert_eq!(ks, vec![1, 2, 3, 4]);
    let best = a
        .entries
        .iter()
        .max_by(|x, y| x.cheeseman_stutz.total_cmp(&y.cheeseman_stutz))
        .unwrap();
    assert_eq!(a.best_by_cs, best.k);

    let single = sweep(&ds, 1..=1, &cfg, &PriorConfig::default()).unwrap();
    assert_eq!(single.entries.len(), 1);
    assert_eq!(single.best_by_cs, 1);
    assert!(sweep(&ds, 0..=2, &cfg, &PriorConfig::default()).is_err());
}
