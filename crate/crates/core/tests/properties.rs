use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use prpca::appearance::{build_observation, likelihood, log_likelihood, TemplateMatrix};
use prpca::eval::{aos, center_error, precision_curve, success_curve, BoundingBox};
use prpca::particle::{map_index, resample, reweight, AffineState, ParticleSet};
use prpca::proximal::{g_value, h_value, p_shrink, PNormParams};
use prpca::template::{cap_weights, maybe_replace, UpdateThresholds};
use prpca::appearance::ReconstructionError;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn bbox() -> impl Strategy<Value = BoundingBox> {
    (-100.0..100.0f64, -100.0..100.0f64, 0.1..80.0f64, 0.1..80.0f64).prop_map(|(x, y, w, h)| BoundingBox { x, y, w, h })
}

proptest! {
    #[test]
    fn shrink_is_odd_and_never_grows(x in -50.0..50.0f64, t in 0.0..10.0f64, p in 0.0..=1.0f64) {
        prop_assert_eq!(p_shrink(-x, t, p), -p_shrink(x, t, p));
        prop_assert!(p_shrink(x, t, p).abs() <= x.abs());
        prop_assert_eq!(p_shrink(x, 0.0, p), x);
    }

    #[test]
    fn shrink_at_one_is_soft_threshold(x in -50.0..50.0f64, t in 0.0..10.0f64) {
        prop_assert_eq!(p_shrink(x, t, 1.0), x.signum() * (x.abs() - t).max(0.0));
    }

    #[test]
    fn penalty_is_nonnegative(v in proptest::collection::vec(-5.0..5.0f64, 6), p in 0.05..=1.0f64, mu in 0.05..2.0f64) {
        let x = DMatrix::from_vec(2, 3, v);
        let params = PNormParams::new(p, mu).unwrap();
        prop_assert!(g_value(&x, params).unwrap() >= 0.0);
    }

    #[test]
    fn h_is_finite_off_origin(t in 0.01..10.0f64, p in 0.0..=1.0f64, mu in 0.01..5.0f64) {
        prop_assert!(h_value(t, PNormParams::new(p, mu).unwrap()).unwrap().is_finite());
    }

    #[test]
    fn aos_is_symmetric_and_bounded(a in bbox(), b in bbox()) {
        let v = aos(&a, &b);
        prop_assert!((0.0..=1.0).contains(&v));
        prop_assert_eq!(v, aos(&b, &a));
        prop_assert!((aos(&a, &a) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn center_error_is_scale_free(a in bbox(), b in bbox(), k in 0.1..10.0f64) {
        let s = |r: &BoundingBox| BoundingBox { x: r.x * k, y: r.y * k, w: r.w * k, h: r.h * k };
        let e = center_error(&a, &b);
        prop_assert!(e >= 0.0);
        prop_assert!((center_error(&s(&a), &s(&b)) - e).abs() <= 1e-9 * (1.0 + e));
        prop_assert_eq!(center_error(&a, &a), 0.0);
    }

    #[test]
    fn observation_keeps_templates(v in proptest::collection::vec(-1.0..1.0f64, 12), c in proptest::collection::vec(-1.0..1.0f64, 4)) {
        let f = TemplateMatrix::new(DMatrix::from_vec(4, 3, v.clone()), 2, 2).unwrap();
        let m = build_observation(&f, &DVector::from_vec(c)).unwrap();
        prop_assert_eq!(m.templates(), DMatrix::from_vec(4, 3, v));
    }

    #[test]
    fn log_likelihood_closed_form(e in proptest::collection::vec(-0.2..0.2f64, 1..20), sigma in 0.01..1.0f64) {
        let e = DVector::from_vec(e);
        let direct = -(2.0 * std::f64::consts::PI).sqrt().ln() - e.norm_squared() / (2.0 * sigma * sigma);
        prop_assert!((log_likelihood(&e, sigma).unwrap() - direct).abs() < 1e-12 * (1.0 + direct.abs()));
        let bigger = &e * 1.5;
        if e.norm() > 0.0 {
            prop_assert!(likelihood(&bigger, sigma).unwrap() <= likelihood(&e, sigma).unwrap());
        }
    }

    #[test]
    fn reweight_normalizes_and_map_ignores_scale(l in proptest::collection::vec(0.001..10.0f64, 1..30), k in 0.01..100.0f64) {
        let n = l.len();
        let w = vec![1.0 / n as f64; n];
        let post = reweight(&w, &l).unwrap();
        prop_assert!((post.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let scaled: Vec<f64> = l.iter().map(|v| v * k).collect();
        prop_assert_eq!(map_index(&reweight(&w, &scaled).unwrap()), map_index(&post));
    }

    #[test]
    fn resample_keeps_support(weights in proptest::collection::vec(0.0..1.0f64, 1..40), seed in any::<u64>()) {
        prop_assume!(weights.iter().sum::<f64>() > 0.0);
        let states: Vec<AffineState> = (0..weights.len())
            .map(|k| AffineState { pos_h: k as f64, pos_w: 0.0, scale: 1.0, aspect: 1.0, angle: 0.0, skew: 0.0 })
            .collect();
        let set = ParticleSet { states: states.clone(), weights: weights.clone(), rng_seed: 0 };
        let out = resample(&set, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        prop_assert_eq!(out.len(), states.len());
        for s in &out.states {
            let k = s.pos_h as usize;
            prop_assert!(weights[k] > 0.0);
        }
    }

    #[test]
    fn capped_weights_stay_on_simplex(raw in proptest::collection::vec(0.0..1.0f64, 5..12), cap in 0.25..1.0f64) {
        prop_assume!(raw.iter().sum::<f64>() > 0.0);
        let total: f64 = raw.iter().sum();
        let w: Vec<f64> = raw.iter().map(|v| v / total).collect();
        let c = cap.max(1.0 / w.len() as f64 + 1e-9);
        let out = cap_weights(&w, c);
        prop_assert!((out.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(out.iter().all(|v| *v >= 0.0 && *v <= c + 1e-12));
    }

    #[test]
    fn template_update_invariants(
        cols in proptest::collection::vec(0.01..1.0f64, 5 * 16),
        cand in proptest::collection::vec(0.0..1.0f64, 16),
        eps_norms in proptest::collection::vec(0.0..3.0f64, 6),
        occl in proptest::collection::vec(-0.5..0.5f64, 16),
    ) {
        let mut m = DMatrix::from_vec(16, 5, cols);
        for mut c in m.column_iter_mut() {
            let n = c.norm();
            c /= n;
        }
        let mut f = TemplateMatrix::new(m, 4, 4).unwrap();
        let cand = DVector::from_vec(cand);
        prop_assume!(cand.norm() > 0.0);
        let cand = &cand / cand.norm();
        let mut e = DMatrix::zeros(16, 6);
        for (k, n) in eps_norms.iter().enumerate() {
            e[(k % 16, k)] = *n;
        }
        let mut s = DMatrix::zeros(16, 6);
        s.set_column(5, &DVector::from_vec(occl));
        let th = UpdateThresholds::default();
        let before = f.clone();
        let out = maybe_replace(&mut f, &cand, &ReconstructionError { eps: e }, &s, &th).unwrap();
        let w = f.weights();
        prop_assert_eq!(w.len(), 5);
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(w.iter().all(|v| *v >= 0.0 && *v <= 0.3 + 1e-12));
        let changed = (0..5).filter(|&k| f.columns().column(k) != before.columns().column(k)).count();
        match out.replaced {
            Some(_) => {
                prop_assert!(out.occlusion_level < out.occlusion_gate);
                prop_assert!(out.min_angle > th.psi_star);
                prop_assert_eq!(changed, 1);
            }
            None => prop_assert_eq!(changed, 0),
        }
    }
}

#[test]
fn curves_are_monotone_on_random_inputs() {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..1000 {
        let n = rng.random_range(1..40);
        let errs: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..80.0)).collect();
        let ovl: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..=1.0)).collect();
        let p = precision_curve(&errs, &prpca::eval::default_precision_thresholds()).unwrap();
        let s = success_curve(&ovl, &prpca::eval::default_success_thresholds()).unwrap();
        assert!(p.windows(2).all(|w| w[0].1 <= w[1].1));
        assert!(s.windows(2).all(|w| w[0].1 >= w[1].1));
        assert!(p.iter().chain(&s).all(|&(_, v)| (0.0..=1.0).contains(&v)));
        assert_eq!(s.last().unwrap().1, 0.0);
    }
}
