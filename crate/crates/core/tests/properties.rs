use proptest::prelude::*;

use skipstack_core::classify::{self, average_precision, BinaryModel, LinearModel};
use skipstack_core::conditioning::{self, condition_number, delta_tau, theorem1_bounds, theorem2_bounds};
use skipstack_core::encoder::{fisher_vector, l2_normalize, power_normalize, GmmConfig, GmmModel, PcaTransform};
use skipstack_core::latent::LatentModel;
use skipstack_core::rng;
use skipstack_core::skipstack::{extract_series_descriptors, level_pass, mifs_stack, SkipSchedule};
use skipstack_core::{Error, Matrix};

fn gaussian(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut r = rng::stream(seed);
    let mut m = Matrix::zeros(rows, cols);
    for i in 0..rows {
        for v in m.row_mut(i) {
            *v = rng::normal(&mut r);
        }
    }
    m
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn flip_band_matches_closed_form(gamma in 0.01f64..20.0, tau in 0.01f64..1.0, c in 0.0f64..0.99) {
        let model = LatentModel::new(1, 2, vec![gamma], c, 0.0, 1).unwrap();
        let decay = (-gamma / tau).exp();
        match model.flip_band(0, tau) {
            Ok((lo, hi)) => {
                prop_assert!(rel(lo, decay / 2.0) < 1e-12);
                prop_assert!(rel(hi, (1.0 + c) * decay / 2.0) < 1e-12);
                prop_assert!(lo <= hi && hi <= 0.5);
            }
            Err(Error::GammaTooSmallForTau { .. }) => prop_assert!((1.0 + c) * decay / 2.0 > 0.5),
            Err(e) => prop_assert!(false, "unexpected error {e}"),
        }
    }

    #[test]
    fn stack_is_the_union_of_its_levels(seed in any::<u64>(), levels in 0usize..4, mask_bits in 0u8..16) {
        let model = LatentModel::new(3, 5, vec![0.05, 0.1, 0.4], 0.1, 0.02, seed).unwrap();
        let mask: Vec<usize> = (0..=levels).filter(|l| mask_bits & (1 << l) != 0).collect();
        let Ok(schedule) = SkipSchedule::new(0.02, levels).unwrap().excluding(&mask) else {
            return Ok(());
        };
        let stacked = mifs_stack(&model, &schedule, true, seed).unwrap();
        prop_assert_eq!(stacked.columns(), schedule.total_budget());
        prop_assert!(stacked.p.as_slice().iter().all(|v| [-2.0, 0.0, 2.0].contains(v)));
        for l in 0..=levels {
            let part = stacked.level(l);
            if schedule.is_active(l) {
                let alone = level_pass(&model, &schedule, l, true, seed).unwrap();
                prop_assert_eq!(&part.p, &alone.p);
                prop_assert_eq!(&part.f, &alone.f);
                prop_assert_eq!(part.columns(), schedule.budget(l));
            } else {
                prop_assert_eq!(part.columns(), 0);
            }
        }
    }

    #[test]
    fn condition_number_is_scale_invariant(seed in any::<u64>(), k in 1usize..6, extra in 0usize..20, scale in 1e-3f64..1e3) {
        let p = gaussian(k, k + extra + 1, seed);
        let mut q = p.clone();
        q.scale(scale);
        let (a, b) = (condition_number(&p).unwrap().beta, condition_number(&q).unwrap().beta);
        prop_assert!(a >= 1.0);
        prop_assert!(rel(a, b) < 1e-10, "{a} vs {b}");
    }

    #[test]
    fn delta_shrinks_with_features_and_grows_with_k(k in 1usize..20, t in 1usize..100_000, c in 0.0f64..0.99, delta in 0.001f64..0.99) {
        let d = delta_tau(k, t, c, delta);
        prop_assert!(d > 0.0);
        prop_assert!(delta_tau(k, t + 1, c, delta) < d);
        prop_assert!(delta_tau(k + 1, t, c, delta) > d);
        prop_assert!(delta_tau(k, t, c, delta * 0.5) > d);
    }

    #[test]
    fn one_level_stack_reduces_to_single_skip(g1 in 0.001f64..0.01, spread in 1.0f64..8.0, c in 0.0f64..0.9, tau_inv in 20usize..2000, delta in 0.01f64..0.5) {
        let tau = 1.0 / tau_inv as f64;
        let gammas = [g1, g1 * spread];
        let schedule = SkipSchedule::new(tau, 0).unwrap();
        let t = schedule.budget(0);
        let a = theorem1_bounds(gammas[0], gammas[1], c, tau, 2, t, delta).unwrap();
        let b = theorem2_bounds(&gammas, c, &schedule, delta).unwrap();
        prop_assert!(rel(a.lower, b.lower) <= 1e-12);
        prop_assert!(a.upper == b.upper || rel(a.upper, b.upper) <= 1e-12);
        prop_assert!(rel(a.delta_tau, b.delta_tau) <= 1e-12);
        prop_assert!(a.lower <= a.upper);
    }

    #[test]
    fn stacking_shrinks_the_radius(levels in 1usize..6, base_inv in 50usize..500) {
        let s = SkipSchedule::new(1.0 / base_inv as f64, levels).unwrap();
        let stacked = delta_tau(4, s.total_budget(), 0.1, 0.1);
        for l in 0..=levels {
            prop_assert!(stacked < delta_tau(4, s.budget(l), 0.1, 0.1));
        }
    }

    #[test]
    fn skipping_matches_a_faster_series(seed in any::<u64>(), speed in 1usize..4, window in 1usize..5, channels in 1usize..4) {
        let frames = 120;
        let series = gaussian(frames, channels, seed);
        let kept: Vec<usize> = (0..frames).step_by(speed).collect();
        let mut fast = Matrix::zeros(kept.len(), channels);
        for (dst, &src) in kept.iter().enumerate() {
            fast.row_mut(dst).copy_from_slice(series.row(src));
        }
        let slow = extract_series_descriptors(&series, &SkipSchedule::single_level(1.0 / frames as f64, speed - 1).unwrap(), window).unwrap();
        let quick = extract_series_descriptors(&fast, &SkipSchedule::new(1.0 / kept.len() as f64, 0).unwrap(), window).unwrap();
        prop_assert_eq!(slow.descriptors, quick.descriptors);
    }

    #[test]
    fn descriptors_ignore_constant_offsets(seed in any::<u64>(), offset in -100.0f64..100.0) {
        let series = gaussian(40, 2, seed);
        let mut shifted = series.clone();
        for i in 0..shifted.rows() {
            shifted.row_mut(i).iter_mut().for_each(|v| *v += offset);
        }
        let s = SkipSchedule::new(1.0 / 40.0, 2).unwrap();
        let a = extract_series_descriptors(&series, &s, 3).unwrap();
        let b = extract_series_descriptors(&shifted, &s, 3).unwrap();
        prop_assert_eq!(&a.locations, &b.locations);
        for (x, y) in a.descriptors.as_slice().iter().zip(b.descriptors.as_slice()) {
            prop_assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn power_then_l2_gives_signed_unit_vectors(v in prop::collection::vec(-1e3f64..1e3, 1..40)) {
        let p = power_normalize(&v);
        let (u, ok) = l2_normalize(&p);
        for (a, b) in v.iter().zip(&u) {
            prop_assert!(a.signum() == b.signum() || *a == 0.0 || *b == 0.0);
        }
        if v.iter().any(|x| *x != 0.0) {
            prop_assert!(ok);
            prop_assert!((u.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn average_precision_depends_only_on_ranking(scores in prop::collection::vec(-5.0f64..5.0, 2..60), seed in any::<u64>(), a in 0.1f64..10.0, b in -10.0f64..10.0) {
        let mut r = rng::stream(seed);
        let mut relevant: Vec<bool> = scores.iter().map(|_| rng::uniform(&mut r) < 0.4).collect();
        relevant[0] = true;
        let base = average_precision(&scores, &relevant);
        let affine: Vec<f64> = scores.iter().map(|s| a * s + b).collect();
        let cubed: Vec<f64> = scores.iter().map(|s| s * s * s).collect();
        prop_assert!((base - average_precision(&affine, &relevant)).abs() < 1e-12);
        prop_assert!((base - average_precision(&cubed, &relevant)).abs() < 1e-12);
        prop_assert!(base > 0.0 && base <= 1.0);
    }

    #[test]
    fn predictions_are_invariant_to_positive_rescaling(seed in any::<u64>(), classes in 2usize..6, scale in 0.01f64..100.0) {
        let dim = 5;
        let w = gaussian(classes, dim + 1, seed);
        let model = |s: f64| LinearModel {
            models: (0..classes)
                .map(|c| BinaryModel {
                    weights: w.row(c)[..dim].iter().map(|v| v * s).collect(),
                    bias: w.row(c)[dim] * s,
                    iterations: 0,
                    objective: 0.0,
                    dual_trace: Vec::new(),
                })
                .collect(),
            c: 1.0,
        };
        let x = gaussian(30, dim, seed ^ 1);
        let (scores, labels) = classify::predict(&model(1.0), &x).unwrap();
        let (_, scaled) = classify::predict(&model(scale), &x).unwrap();
        prop_assert_eq!(&labels, &scaled);
        for (i, label) in labels.iter().enumerate() {
            let single = Matrix::from_rows(&[x.row(i).to_vec()]).unwrap();
            let (s, l) = classify::predict(&model(1.0), &single).unwrap();
            prop_assert_eq!(s.row(0), scores.row(i));
            prop_assert_eq!(l[0], *label);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn em_never_decreases_the_likelihood(seed in any::<u64>(), k in 1usize..5, dim in 1usize..4) {
        let mut data = gaussian(400, dim, seed);
        for i in 0..data.rows() {
            let shift = (i % 3) as f64 * 3.0;
            data.row_mut(i).iter_mut().for_each(|v| *v += shift);
        }
        let cfg = GmmConfig { components: k, max_iters: 60, tol: 0.0, variance_floor: 1e-6 };
        let gmm = GmmModel::fit(&data, &cfg, &mut rng::stream(seed)).unwrap();
        for w in gmm.log_likelihood.windows(2) {
            prop_assert!(w[1] - w[0] >= -1e-9 * w[0].abs(), "{} -> {}", w[0], w[1]);
        }
        prop_assert!((gmm.weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn fisher_blocks_are_scaled_likelihood_gradients(seed in any::<u64>(), k in 1usize..4, dim in 1usize..4) {
        let mut r = rng::stream(seed);
        let raw: Vec<f64> = (0..k).map(|_| 0.5 + rng::uniform(&mut r)).collect();
        let total: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let means = gaussian(k, dim, seed ^ 2);
        let mut variances = Matrix::zeros(k, dim);
        for c in 0..k {
            variances.row_mut(c).iter_mut().for_each(|v| *v = 0.5 + rng::uniform(&mut r));
        }
        let x = gaussian(25, dim, seed ^ 3);
        let gmm = GmmModel::from_parameters(weights.clone(), means.clone(), variances.clone()).unwrap();
        let fv = fisher_vector(&gmm, &x).unwrap();
        let h = 1e-5;
        let ll = |m: &Matrix, v: &Matrix| GmmModel::from_parameters(weights.clone(), m.clone(), v.clone()).unwrap().mean_log_likelihood(&x).unwrap();
        for c in 0..k {
            for d in 0..dim {
                let sd = variances[(c, d)].sqrt();
                let (mut mp, mut mm) = (means.clone(), means.clone());
                mp[(c, d)] += h;
                mm[(c, d)] -= h;
                let g_mu = (ll(&mp, &variances) - ll(&mm, &variances)) / (2.0 * h) * sd / weights[c].sqrt();
                let (mut vp, mut vm) = (variances.clone(), variances.clone());
                vp[(c, d)] = (sd + h).powi(2);
                vm[(c, d)] = (sd - h).powi(2);
                let g_sd = (ll(&means, &vp) - ll(&means, &vm)) / (2.0 * h) * sd / (2.0 * weights[c]).sqrt();
                let (a_mu, a_sd) = (fv.mean_block()[c * dim + d], fv.variance_block()[c * dim + d]);
                prop_assert!((a_mu - g_mu).abs() <= 1e-5 * a_mu.abs().max(1e-3), "mu {a_mu} vs {g_mu}");
                prop_assert!((a_sd - g_sd).abs() <= 1e-5 * a_sd.abs().max(1e-3), "sigma {a_sd} vs {g_sd}");
            }
        }
    }

    #[test]
    fn pca_projection_decorrelates(seed in any::<u64>(), dim in 2usize..7) {
        let mut data = gaussian(300, dim, seed);
        for i in 0..data.rows() {
            let row = data.row_mut(i);
            for (j, v) in row.iter_mut().enumerate() {
                *v *= 1.0 + j as f64;
            }
        }
        let pca = PcaTransform::fit(&data, dim).unwrap();
        let y = pca.apply(&data).unwrap();
        let cov = y.gram_cols();
        for a in 0..dim {
            for b in 0..dim {
                if a != b {
                    prop_assert!(cov[(a, b)].abs() < 1e-8 * cov[(0, 0)]);
                }
            }
            if a > 0 {
                prop_assert!(cov[(a, a)] <= cov[(a - 1, a - 1)] * (1.0 + 1e-12));
            }
        }
        prop_assert!((pca.explained_ratio.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
}

#[test]
fn stacked_spectrum_is_monotone_and_normalized() {
    let gammas: Vec<f64> = (0..10).map(|i| (0.5 + 0.4 * i as f64) * 1e-3).collect();
    let model = LatentModel::new(10, 20, gammas, 0.0, 0.05, 11).unwrap();
    let s = SkipSchedule::new(1e-3, 3).unwrap();
    let fm = mifs_stack(&model, &s, true, 11).unwrap();
    let curve = conditioning::spectrum_curve(fm.f.as_ref().unwrap(), "L=3").unwrap();
    assert_eq!(curve.sigmas.len(), conditioning::SPECTRUM_LENGTH);
    assert_eq!(curve.sigmas[0], 1.0);
    assert!(curve.sigmas.windows(2).all(|w| w[1] <= w[0]));
}
