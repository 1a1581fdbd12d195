//! Property checks shared by the standalone property suite and the
//! acceptance run. Each panics with a description on the first violation.

use super::*;
use clabel_core::labelsearch::{propositionalize_continuous, score_label, ScoredLabel};
use clabel_core::mixture::{fit, run_restart, FitConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const MONOTONE_TOL: f64 = 1e-9;
pub const NORM_TOL: f64 = 1e-9;
pub const MASS_TOL: f64 = 1e-6;

/// One EM run on a random dataset never lowers its objective, except on the
/// iteration right after an empty cluster is re-seeded.
pub fn em_monotone(seed: u64, smoothing: f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(8..60);
    let m_disc = rng.random_range(1..4);
    let m_cont = rng.random_range(0..3);
    let ds = random_dataset(&mut rng, n, m_disc, m_cont, 0.1);
    let k = rng.random_range(1..=4.min(n));
    let cfg = FitConfig {
        k,
        restarts: 1,
        max_iterations: 200,
        smoothing,
        seed,
        ..Default::default()
    };
    let out = run_restart(&ds, &cfg, 0).unwrap();
    for (i, w) in out.objective_trace.windows(2).enumerate() {
        if out.reseeds.contains(&(i + 1)) {
            continue;
        }
        assert!(
            w[1] >= w[0] - MONOTONE_TOL,
            "iteration {}: {} -> {} (seed {seed})",
            i + 2,
            w[0],
            w[1]
        );
    }
}

pub fn model_normalized(model: &MixtureModel) {
    let s: f64 = model.priors.iter().sum();
    assert!((s - 1.0).abs() <= NORM_TOL, "priors sum to {s}");
    for p in &model.params {
        if let AttributeParams::Discrete { probs } = p {
            for row in probs {
                let t: f64 = row.iter().sum();
                assert!((t - 1.0).abs() <= NORM_TOL, "conditional sums to {t}");
            }
        }
    }
}

/// Fitted parameters, memberships and p(empty label) all sum to one.
pub fn fit_normalized(seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ds = random_dataset(&mut rng, 30, 3, 2, 0.15);
    let cfg = FitConfig {
        k: 3,
        restarts: 2,
        seed,
        ..Default::default()
    };
    let f = fit(&ds, &cfg).unwrap();
    model_normalized(&f.model);
    f.model.validate().unwrap();
    for inst in &ds.instances {
        let m = f.model.membership(inst).unwrap();
        assert!((m.iter().sum::<f64>() - 1.0).abs() <= NORM_TOL);
    }
    let lp = f.model.label_probs(&Label::empty()).unwrap();
    assert!((lp.p_x - 1.0).abs() <= NORM_TOL);
}

fn random_label(rng: &mut impl Rng, model: &MixtureModel, exclude: Option<usize>) -> Vec<Conjunct> {
    let ivs = propositionalize_continuous(model, &[0.3, 0.6, 0.9]);
    let mut out = Vec::new();
    for (j, p) in model.params.iter().enumerate() {
        if Some(j) == exclude || !rng.random_bool(0.5) {
            continue;
        }
        match p {
            AttributeParams::Discrete { probs } => out.push(Conjunct::Eq {
                attribute: j,
                value: rng.random_range(0..probs[0].len() as u32),
            }),
            AttributeParams::Gaussian { .. } => {
                let per_k = &ivs[j][rng.random_range(0..model.k())];
                out.push(Conjunct::Interval(per_k[rng.random_range(0..per_k.len())]));
            }
        }
    }
    out
}

/// p(x) and every p(x|k) are non-increasing when a conjunct is added.
pub fn anti_monotone(pairs: usize, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..pairs {
        let k = rng.random_range(1..=3);
        let model = random_mixed_model(&mut rng, 4, 2, k);
        let extra_attr = rng.random_range(0..6);
        let base = random_label(&mut rng, &model, Some(extra_attr));
        let mut longer = base.clone();
        longer.extend(random_label(&mut rng, &model, None).into_iter().filter(|c| c.attribute() == extra_attr));
        if longer.len() == base.len() {
            longer.push(match &model.params[extra_attr] {
                AttributeParams::Discrete { .. } => Conjunct::Eq {
                    attribute: extra_attr,
                    value: 1,
                },
                AttributeParams::Gaussian { .. } => {
                    Conjunct::Interval(propositionalize_continuous(&model, &[0.5])[extra_attr][0][0])
                }
            });
        }
        let x = model.label_probs(&Label::new(base).unwrap()).unwrap();
        let y = model.label_probs(&Label::new(longer).unwrap()).unwrap();
        assert!(y.p_x <= x.p_x * (1.0 + 1e-12), "p(x) rose: {} -> {}", x.p_x, y.p_x);
        for (a, b) in y.p_x_given_k.iter().zip(&x.p_x_given_k) {
            assert!(*a <= b * (1.0 + 1e-12), "p(x|k) rose: {b} -> {a}");
        }
    }
}

fn sign(x: f64) -> i32 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

/// For a fixed cluster, p(k|x), growth rate and PMI order label pairs alike.
pub fn rank_agreement(pairs: usize, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checked = 0;
    while checked < pairs {
        let k = rng.random_range(2..=3);
        let model = random_boolean_model(&mut rng, 5, k);
        let c = rng.random_range(0..k);
        let a = Label::new(random_label(&mut rng, &model, None)).unwrap();
        let b = Label::new(random_label(&mut rng, &model, None)).unwrap();
        let (Ok(sa), Ok(sb)) = (score_label(&model, &a, c), score_label(&model, &b, c)) else {
            continue;
        };
        let finite =
            |s: &ScoredLabel| s.scores.growth_rate.is_finite() && s.scores.growth_rate > 0.0 && s.scores.pmi.is_finite();
        if !finite(&sa) || !finite(&sb) {
            continue;
        }
        let dm = sa.p_k_given_x - sb.p_k_given_x;
        let dg = sa.scores.growth_rate - sb.scores.growth_rate;
        let dp = sa.scores.pmi - sb.scores.pmi;
        // differences at rounding level carry no sign
        let tiny = |d: f64, scale: f64| d.abs() <= 1e-12 * scale.abs().max(1.0);
        if tiny(dm, 1.0) || tiny(dg, sa.scores.growth_rate) || tiny(dp, sa.scores.pmi) {
            continue;
        }
        assert_eq!(sign(dm), sign(dg), "{a:?} vs {b:?}");
        assert_eq!(sign(dm), sign(dp), "{a:?} vs {b:?}");
        checked += 1;
    }
}

/// Every interval holds mass q under its own cluster's Gaussian, checked by
/// the library and by statrs.
pub fn interval_mass(models: usize, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let qs: Vec<f64> = (1..=9).map(|i| i as f64 / 10.0).collect();
    for _ in 0..models {
        let model = random_mixed_model(&mut rng, 0, 2, 3);
        for per_attr in &propositionalize_continuous(&model, &qs) {
            for per_cluster in per_attr {
                for iv in per_cluster {
                    let c = Conjunct::Interval(*iv);
                    let mass = model.label_prob_given_k(&Label::new(vec![c]).unwrap(), iv.cluster).unwrap();
                    assert!((mass - iv.q).abs() <= MASS_TOL, "q={} mass={mass}", iv.q);
                    let oracle = conjunct_prob(&model, &c, iv.cluster);
                    assert!((oracle - iv.q).abs() <= MASS_TOL, "q={} oracle={oracle}", iv.q);
                }
            }
        }
    }
}
