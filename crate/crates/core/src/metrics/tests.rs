use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

fn rows(data: &[&[f64]]) -> Mat {
    Mat::from_fn(data.len(), data[0].len(), |i, j| data[i][j])
}

fn random_probs(rng: &mut ChaCha8Rng, n: usize, c: usize) -> Mat {
    let logits = Mat::from_fn(n, c, |_, _| rng.random_range(-3.0..3.0));
    softmax_rows(&logits)
}

#[test]
fn single_sample_mean_is_identity() {
    let p = rows(&[&[0.2, 0.8], &[0.6, 0.4]]);
    assert_eq!(mean_predictive(std::slice::from_ref(&p)).unwrap(), p);
}

#[test]
fn opposite_one_hots_average_to_half() {
    let a = rows(&[&[1.0, 0.0]]);
    let b = rows(&[&[0.0, 1.0]]);
    assert_eq!(mean_predictive(&[a, b]).unwrap(), rows(&[&[0.5, 0.5]]));
}

#[test]
fn mean_rows_stay_on_simplex() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let samples: Vec<Mat> = (0..7).map(|_| random_probs(&mut rng, 20, 5)).collect();
    let m = mean_predictive(&samples).unwrap();
    for row in m.row_iter() {
        assert!((row.sum() - 1.0).abs() < 1e-9);
    }
}

#[test]
fn perfect_one_hot_predictions() {
    let p = rows(&[&[1.0, 0.0, 0.0], &[0.0, 0.0, 1.0]]);
    let m = classification_metrics(&p, &[0, 2]).unwrap();
    assert_eq!((m.accuracy, m.confidence, m.nll), (1.0, 1.0, 0.0));
}

#[test]
fn uniform_ten_classes() {
    let p = Mat::from_element(4, 10, 0.1);
    let m = classification_metrics(&p, &[0, 3, 9, 5]).unwrap();
    assert!((m.confidence - 0.1).abs() < 1e-15);
    assert!((m.nll - 10f64.ln()).abs() < 1e-12);
}

#[test]
fn four_point_hand_case() {
    let p = rows(&[&[0.7, 0.3], &[0.4, 0.6], &[0.9, 0.1], &[0.2, 0.8]]);
    let m = classification_metrics(&p, &[0, 0, 1, 1]).unwrap();
    // argmax: 0, 1, 0, 1 → hits at data 0 and 3
    assert_eq!(m.accuracy, 0.5);
    assert!((m.confidence - (0.7 + 0.6 + 0.9 + 0.8) / 4.0).abs() < 1e-15);
    let nll = -(0.7f64.ln() + 0.4f64.ln() + 0.1f64.ln() + 0.8f64.ln()) / 4.0;
    assert!((m.nll - nll).abs() < 1e-15);
}

#[test]
fn zero_probability_is_floored() {
    let p = rows(&[&[1.0, 0.0]]);
    let m = classification_metrics(&p, &[1]).unwrap();
    assert!((m.nll + PROB_FLOOR.ln()).abs() < 1e-9);
}

#[test]
fn calibrated_by_construction() {
    // ten predictions at confidence 0.8 with eight correct
    let p = Mat::from_fn(10, 2, |_, j| if j == 0 { 0.8 } else { 0.2 });
    let labels = [0, 0, 0, 0, 0, 0, 0, 0, 1, 1];
    let c = calibration(&p, &labels, 15).unwrap();
    assert!(c.ece.abs() < 1e-12 && c.mce.abs() < 1e-12);
}

#[test]
fn single_bin_gap() {
    let p = Mat::from_fn(4, 2, |_, j| if j == 0 { 0.9 } else { 0.1 });
    let c = calibration(&p, &[0, 1, 0, 1], 1).unwrap();
    assert!((c.ece - 0.4).abs() < 1e-12);
    assert!((c.mce - 0.4).abs() < 1e-12);
}

#[test]
fn three_bin_hand_case() {
    // bins [0,⅓), [⅓,⅔), [⅔,1]
    let p = rows(&[
        &[0.5, 0.5],
        &[0.6, 0.4],
        &[0.9, 0.1],
        &[0.2, 0.8],
        &[0.95, 0.05],
    ]);
    let labels = [1, 0, 1, 1, 0];
    let c = calibration(&p, &labels, 3).unwrap();
    // middle bin: confidences 0.5, 0.6, hits 0 (argmax 0 vs label 1), 1
    let mid = (0.5f64 - (0.5 + 0.6) / 2.0).abs();
    // top bin: 0.9 miss, 0.8 hit, 0.95 hit
    let top = (2.0f64 / 3.0 - (0.9 + 0.8 + 0.95) / 3.0).abs();
    assert!((c.ece - (2.0 / 5.0 * mid + 3.0 / 5.0 * top)).abs() < 1e-12);
    assert!((c.mce - mid.max(top)).abs() < 1e-12);
}

#[test]
fn calibration_errors() {
    let p = Mat::zeros(0, 2);
    assert!(calibration(&p, &[], 15).is_err());
    assert!(calibration(&rows(&[&[1.0, 0.0]]), &[0], 0).is_err());
}

#[test]
fn identical_samples_score_zero() {
    let m = rows(&[&[0.3, 0.7], &[0.3, 0.7], &[0.3, 0.7]]);
    assert_eq!(ood_score(&m).unwrap(), 0.0);
}

#[test]
fn opposite_samples_score_quarter() {
    let m = rows(&[&[1.0, 0.0], &[0.0, 1.0]]);
    assert_eq!(ood_score(&m).unwrap(), 0.25);
}

#[test]
fn ood_score_needs_two_samples() {
    assert!(ood_score(&rows(&[&[0.5, 0.5]])).is_err());
}

#[test]
fn ood_scores_match_direct_variance() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let samples: Vec<Mat> = (0..6).map(|_| random_probs(&mut rng, 4, 3)).collect();
    let scores = ood_scores(&samples).unwrap();
    for (i, score) in scores.iter().enumerate() {
        let mut best: f64 = 0.0;
        for k in 0..3 {
            let vals: Vec<f64> = samples.iter().map(|s| s[(i, k)]).collect();
            let mean = vals.iter().sum::<f64>() / 6.0;
            let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 6.0;
            best = best.max(var);
        }
        assert!((score - best).abs() < 1e-15);
    }
}

fn pairwise_auroc(a: &[f64], b: &[f64]) -> f64 {
    let mut wins = 0.0;
    for &o in b {
        for &i in a {
            wins += if o > i {
                1.0
            } else if o == i {
                0.5
            } else {
                0.0
            };
        }
    }
    wins / (a.len() * b.len()) as f64
}

#[test]
fn auroc_extremes() {
    assert_eq!(auroc(&[0.1, 0.2], &[0.3, 0.9]).unwrap(), 1.0);
    assert_eq!(auroc(&[0.3, 0.9], &[0.1, 0.2]).unwrap(), 0.0);
    assert_eq!(auroc(&[0.4, 0.1, 0.7], &[0.7, 0.4, 0.1]).unwrap(), 0.5);
    assert!(auroc(&[], &[1.0]).is_err());
}

#[test]
fn auroc_three_by_three_with_tie() {
    let a = [0.1, 0.5, 0.3];
    let b = [0.5, 0.6, 0.2];
    // pairs won by b: 0.5>{0.1,0.3} + tie 0.5, 0.6>all, 0.2>0.1 → 2.5 + 3 + 1
    assert_eq!(auroc(&a, &b).unwrap(), 6.5 / 9.0);
    assert_eq!(auroc(&a, &b).unwrap(), pairwise_auroc(&a, &b));
}

#[test]
fn bands_of_identical_samples() {
    let m = rows(&[&[1.0], &[2.0]]);
    let b = regression_bands(&[m.clone(), m.clone(), m.clone()]).unwrap();
    assert_eq!(b.mean, m);
    assert!(b.std.iter().all(|&s| s == 0.0));
}

#[test]
fn bands_of_mirrored_pair() {
    let y = rows(&[&[1.5], &[-0.25]]);
    let b = regression_bands(&[y.clone(), -y.clone()]).unwrap();
    for (s, v) in b.std.iter().zip(y.iter()) {
        assert!((s - 2f64.sqrt() * v.abs()).abs() < 1e-12);
    }
}

#[test]
fn bands_match_direct_formula() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let samples: Vec<Mat> = (0..5)
        .map(|_| Mat::from_fn(3, 2, |_, _| rng.random_range(-1.0..1.0)))
        .collect();
    let b = regression_bands(&samples).unwrap();
    for i in 0..3 {
        for k in 0..2 {
            let vals: Vec<f64> = samples.iter().map(|s| s[(i, k)]).collect();
            let mean = vals.iter().sum::<f64>() / 5.0;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 4.0;
            assert!((b.mean[(i, k)] - mean).abs() < 1e-14);
            assert!((b.std[(i, k)] - var.sqrt()).abs() < 1e-14);
        }
    }
    assert!(regression_bands(&samples[..1]).is_err());
}

#[test]
fn point_regression_nll_is_gaussian() {
    let f = rows(&[&[0.0], &[1.0]]);
    let y = rows(&[&[0.5], &[1.0]]);
    let m = regression_metrics(&[f.clone(), f], &y, 0.5).unwrap();
    let ll0 = -0.5 * 1.0 - 0.5f64.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln();
    let ll1 = -0.5f64.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln();
    assert!((m.nll + (ll0 + ll1) / 2.0).abs() < 1e-12);
    assert!((m.rmse - (0.125f64).sqrt()).abs() < 1e-12);
}

#[test]
fn record_is_flat_json() {
    let mut r = MetricsRecord::default();
    r.insert("nll", 0.5);
    r.insert("accuracy", 1.0);
    let text = String::from_utf8(r.to_json().unwrap()).unwrap();
    let back: MetricsRecord = serde_json::from_str(&text).unwrap();
    assert_eq!(back, r);
    assert!(text.find("accuracy").unwrap() < text.find("nll").unwrap());
}

proptest! {
    #[test]
    fn ece_bounded_by_mce(seed in any::<u64>(), n in 1usize..40, c in 2usize..5, bins in 1usize..20) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_probs(&mut rng, n, c);
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..c)).collect();
        let cal = calibration(&p, &labels, bins).unwrap();
        prop_assert!(cal.ece <= cal.mce + 1e-12);
        prop_assert!((0.0..=1.0).contains(&cal.ece));
        prop_assert!((0.0..=1.0).contains(&cal.mce));
    }

    #[test]
    fn nll_at_least_minus_log_top(seed in any::<u64>(), n in 1usize..30, c in 2usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_probs(&mut rng, n, c);
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..c)).collect();
        let mut bound = 0.0;
        for row in p.row_iter() {
            bound -= row.max().ln();
        }
        let m = classification_metrics(&p, &labels).unwrap();
        prop_assert!(m.nll >= bound / n as f64 - 1e-12);
    }

    #[test]
    fn auroc_invariant_under_increasing_maps(
        a in prop::collection::vec(-5.0f64..5.0, 1..20),
        b in prop::collection::vec(-5.0f64..5.0, 1..20),
    ) {
        let f = |v: &[f64]| v.iter().map(|x| x.exp() * 3.0 + 1.0).collect::<Vec<_>>();
        let base = auroc(&a, &b).unwrap();
        prop_assert!((auroc(&f(&a), &f(&b)).unwrap() - base).abs() < 1e-12);
        prop_assert_eq!(base, pairwise_auroc(&a, &b));
    }

    #[test]
    // half-integer shifts keep the two sets tie-free
    fn auroc_swaps_to_complement(
        a in prop::collection::hash_set(-1000i32..1000, 1..20),
        b in prop::collection::hash_set(-1000i32..1000, 1..20),
    ) {
        let a: Vec<f64> = a.into_iter().map(f64::from).collect();
        let b: Vec<f64> = b.into_iter().map(|v| f64::from(v) + 0.5).collect();
        let s = auroc(&a, &b).unwrap() + auroc(&b, &a).unwrap();
        prop_assert!((s - 1.0).abs() < 1e-12);
    }
}
