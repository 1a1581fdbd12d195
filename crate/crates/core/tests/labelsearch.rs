mod common;

use clabel_core::dataset::{Attribute, Schema};
use clabel_core::labelsearch::{
    find_characteristic_labels, is_subconjunction, propositionalize_continuous, subconj, Conjunct,
    Label, SearchConfig,
};
use clabel_core::mixture::{AttributeParams, MixtureModel};
use common::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;

fn eq(attribute: usize, value: u32) -> Conjunct {
    Conjunct::Eq { attribute, value }
}

fn open_config(r: f64) -> SearchConfig {
    SearchConfig {
        r,
        s_global: 0.0,
        s_local: 0.0,
        quantiles: vec![0.2, 0.4, 0.6, 0.8],
        greedy: false,
        max_length: None,
        positive_only: false,
        rank: Default::default(),
    }
}

#[test]
fn hand_model_yields_single_label() {
    // p(A=T|1)=1, p(A=T|2)=0, B independent of the cluster
    let model = MixtureModel {
        schema: Schema::new(vec![
            Attribute::discrete("A", &["F", "T"]),
            Attribute::discrete("B", &["F", "T"]),
        ])
        .unwrap(),
        n_instances: 10,
        priors: vec![0.5, 0.5],
        params: vec![
            AttributeParams::Discrete {
                probs: vec![vec![0.0, 1.0], vec![1.0, 0.0]],
            },
            AttributeParams::Discrete {
                probs: vec![vec![0.5, 0.5], vec![0.5, 0.5]],
            },
        ],
    };
    let out = find_characteristic_labels(&model, &open_config(0.9)).unwrap();
    let c1: Vec<&Label> = out.per_cluster[0].iter().map(|s| &s.label).collect();
    assert_eq!(c1, vec![&Label::new(vec![eq(0, 1)]).unwrap()]);
    assert_eq!(label_sets(&out.per_cluster), brute_force(&model, &open_config(0.9)));
}

#[test]
fn single_cluster_reports_the_empty_label() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut model = random_boolean_model(&mut rng, 3, 1);
    model.priors = vec![1.0];
    let out = find_characteristic_labels(&model, &open_config(0.9)).unwrap();
    assert_eq!(out.per_cluster.len(), 1);
    assert_eq!(out.per_cluster[0].len(), 1);
    assert!(out.per_cluster[0][0].label.is_empty());
    assert_eq!(out.per_cluster[0][0].p_k_given_x, 1.0);
}

#[test]
fn matches_brute_force_on_boolean_models() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let m = rand::Rng::random_range(&mut rng, 1..=6);
        let k = rand::Rng::random_range(&mut rng, 2..=3);
        let model = random_boolean_model(&mut rng, m, k);
        let cfg = random_config(&mut rng);
        let got = find_characteristic_labels(&model, &cfg).unwrap();
        assert_eq!(label_sets(&got.per_cluster), brute_force(&model, &cfg));
    }
}

#[test]
fn matches_brute_force_with_intervals() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut nonempty = 0;
    for _ in 0..40 {
        let k = rand::Rng::random_range(&mut rng, 2..=3);
        let model = random_mixed_model(&mut rng, 2, 2, k);
        let cfg = random_config(&mut rng);
        let got = find_characteristic_labels(&model, &cfg).unwrap();
        let want = brute_force(&model, &cfg);
        nonempty += want.iter().filter(|s| s.iter().any(|l| l.len() > 1)).count();
        assert_eq!(label_sets(&got.per_cluster), want);
    }
    assert!(nonempty > 0, "suite never produced a multi-conjunct label");
}

#[test]
fn positive_only_drops_false_values() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..30 {
        let model = random_boolean_model(&mut rng, 5, 2);
        let mut cfg = random_config(&mut rng);
        cfg.positive_only = true;
        let got = find_characteristic_labels(&model, &cfg).unwrap();
        for s in got.per_cluster.iter().flatten() {
            assert!(s.label.conjuncts().iter().all(|c| *c != eq(c.attribute(), 0)));
        }
        assert_eq!(label_sets(&got.per_cluster), brute_force(&model, &cfg));
    }
}

#[test]
fn outputs_are_sound_and_minimal() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..30 {
        let model = random_mixed_model(&mut rng, 3, 1, 3);
        let cfg = random_config(&mut rng);
        let got = find_characteristic_labels(&model, &cfg).unwrap();
        for (k, labels) in got.per_cluster.iter().enumerate() {
            for s in labels {
                assert!(s.p_k_given_x >= cfg.r);
                assert!(s.p_x >= cfg.s_global);
                assert!(s.p_x_given_k >= cfg.s_local);
                for other in all_labels(&model, &cfg, k) {
                    if other != s.label && is_subconjunction(&other, &s.label) {
                        assert!(!conditions_hold(&model, &cfg, &other, k));
                    }
                }
            }
        }
    }
}

#[test]
fn never_extends_a_relevant_label() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..30 {
        let model = random_boolean_model(&mut rng, 6, 2);
        let cfg = random_config(&mut rng);
        let got = find_characteristic_labels(&model, &cfg).unwrap();
        for labels in &got.per_cluster {
            let all: BTreeSet<&Label> = labels.iter().map(|s| &s.label).collect();
            for s in labels {
                for sub in subconj(&s.label) {
                    assert!(!all.contains(&sub));
                }
            }
        }
    }
}

#[test]
fn greedy_output_is_a_subset() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..100 {
        let model = random_boolean_model(&mut rng, 6, 3);
        let mut cfg = random_config(&mut rng);
        let full = label_sets(&find_characteristic_labels(&model, &cfg).unwrap().per_cluster);
        cfg.greedy = true;
        let greedy = label_sets(&find_characteristic_labels(&model, &cfg).unwrap().per_cluster);
        for (g, f) in greedy.iter().zip(&full) {
            assert!(g.is_subset(f));
        }
    }
}

#[test]
fn max_length_caps_depth() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..20 {
        let model = random_boolean_model(&mut rng, 6, 2);
        let mut cfg = random_config(&mut rng);
        let full = find_characteristic_labels(&model, &cfg).unwrap();
        cfg.max_length = Some(2);
        let capped = find_characteristic_labels(&model, &cfg).unwrap();
        for (c, f) in capped.per_cluster.iter().zip(&full.per_cluster) {
            let want: Vec<&Label> = f.iter().map(|s| &s.label).filter(|l| l.len() <= 2).collect();
            let got: Vec<&Label> = c.iter().map(|s| &s.label).collect();
            assert_eq!(got, want);
        }
    }
}

#[test]
fn shared_candidates_are_evaluated_once() {
    // two clusters whose frontiers coincide: both have A and B irrelevant
    // alone but (A=T, B=T) relevant to neither at level 1
    let model = MixtureModel {
        schema: Schema::new(vec![
            Attribute::discrete("A", &["F", "T"]),
            Attribute::discrete("B", &["F", "T"]),
        ])
        .unwrap(),
        n_instances: 10,
        priors: vec![0.5, 0.5],
        params: vec![
            AttributeParams::Discrete {
                probs: vec![vec![0.4, 0.6], vec![0.6, 0.4]],
            },
            AttributeParams::Discrete {
                probs: vec![vec![0.4, 0.6], vec![0.6, 0.4]],
            },
        ],
    };
    let out = find_characteristic_labels(&model, &open_config(0.99)).unwrap();
    // every one of the 4 pairs is a candidate for both clusters
    assert_eq!(out.stats.candidates_per_level[1], 8);
    assert_eq!(out.stats.evaluations_per_level[1], 4);
}

#[test]
fn intervals_are_nested_and_hold_their_mass() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let model = random_mixed_model(&mut rng, 0, 3, 3);
    let qs: Vec<f64> = (1..=9).map(|i| i as f64 / 10.0).collect();
    let ivs = propositionalize_continuous(&model, &qs);
    for per_attr in &ivs {
        for per_cluster in per_attr {
            assert_eq!(per_cluster.len(), 9);
            for w in per_cluster.windows(2) {
                assert!(w[1].lower < w[0].lower && w[0].upper < w[1].upper);
            }
            for iv in per_cluster {
                let c = Conjunct::Interval(*iv);
                let own = conjunct_prob(&model, &c, iv.cluster);
                assert!((own - iv.q).abs() < 1e-6);
                for k in 0..3 {
                    let lib = model.conjunct_log_probs(&c).unwrap()[k].exp();
                    assert!((lib - conjunct_prob(&model, &c, k)).abs() < 1e-9);
                }
            }
        }
    }
}

#[test]
fn standard_normal_interval_at_ninety_percent() {
    let model = MixtureModel {
        schema: Schema::new(vec![Attribute::continuous("x")]).unwrap(),
        n_instances: 10,
        priors: vec![1.0],
        params: vec![AttributeParams::Gaussian {
            mean: vec![0.0],
            variance: vec![1.0],
        }],
    };
    let iv = propositionalize_continuous(&model, &[0.9])[0][0][0];
    assert!((iv.lower + 1.6449).abs() < 1e-4);
    assert!((iv.upper - 1.6449).abs() < 1e-4);
}

#[test]
fn invalid_configs_are_rejected() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let model = random_boolean_model(&mut rng, 2, 2);
    for bad in [
        SearchConfig { r: 0.0, ..open_config(0.9) },
        SearchConfig { s_local: 1.5, ..open_config(0.9) },
        SearchConfig { quantiles: vec![0.4, 0.2], ..open_config(0.9) },
        SearchConfig { quantiles: vec![0.0, 0.2], ..open_config(0.9) },
        SearchConfig { max_length: Some(0), ..open_config(0.9) },
    ] {
        assert!(find_characteristic_labels(&model, &bad).is_err());
    }
}
