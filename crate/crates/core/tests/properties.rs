mod common;

use common::{duplicated, gaussian, low_rank};
use framekit::algebra::{
    haar_rotation, stabilizer, GroupElement, GroupTag, Permutation, RotationMatrix,
};
use framekit::canon::CanonMethod;
use framekit::diagnostics::{
    measure_distance, measure_distance_with, random_permutation, DistanceMethod,
};
use framekit::frames::{
    frame_argsort_exact_d2, frame_so2, frame_sod, FrameKind, FrameMap, WeightedFrame,
};
use framekit::harness::{dataset_for, train, Enforcer, ExperimentConfig, Method, MlpModel};
use framekit::project::{
    average_over_stabilizer, fixed_polynomial, integrate_invariant, DEFAULT_QUADRATURE,
};
use framekit::PointCloud;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn cloud_strategy(d: usize, n: usize) -> impl Strategy<Value = PointCloud> {
    prop::collection::vec(-3.0f64..3.0, d * n)
        .prop_map(move |v| PointCloud::from_matrix(DMatrix::from_column_slice(d, n, &v)).unwrap())
}

fn perm_strategy(n: usize) -> impl Strategy<Value = Permutation> {
    Just((0..n).collect::<Vec<usize>>())
        .prop_shuffle()
        .prop_map(|v| Permutation::new(v).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn canonicalizations_are_invariant(x in cloud_strategy(2, 5), p in perm_strategy(5), shift in prop::array::uniform2(-2.0f64..2.0)) {
        let px = p.act(&x);
        prop_assert_eq!(CanonMethod::Lex.apply(&px).unwrap(), CanonMethod::Lex.apply(&x).unwrap());
        let moved = PointCloud::from_matrix(DMatrix::from_fn(2, 5, |i, j| x.get(i, j) + shift[i])).unwrap();
        let a = CanonMethod::Translation.apply(&moved).unwrap();
        let b = CanonMethod::Translation.apply(&x).unwrap();
        prop_assert!(a.distance(&b) < 1e-12);
    }

    #[test]
    fn od_gram_is_rotation_invariant(x in cloud_strategy(3, 3), seed in any::<u64>()) {
        let g = GroupElement::Rotation(haar_rotation(3, &mut ChaCha8Rng::seed_from_u64(seed)));
        let a = CanonMethod::OdGram.apply(&g.act(&x).unwrap()).unwrap();
        let b = CanonMethod::OdGram.apply(&x).unwrap();
        prop_assert!(a.distance(&b) < 1e-8 * (1.0 + x.frobenius_norm()));
    }

    #[test]
    fn frames_are_probability_measures(x in cloud_strategy(3, 4)) {
        for kind in [FrameKind::Reynolds, FrameKind::Sod, FrameKind::Od, FrameKind::So3Stable] {
            let mu = kind.frame(&x).unwrap();
            prop_assert!(mu.atoms().iter().all(|a| a.weight >= 0.0));
            prop_assert!((mu.total_weight() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn invariant_projection_is_bounded(x in cloud_strategy(2, 4)) {
        let mu = frame_argsort_exact_d2(&x).unwrap();
        let value = integrate_invariant(&mu, fixed_polynomial, &x).unwrap();
        let bound = mu
            .atoms()
            .iter()
            .map(|a| fixed_polynomial(&a.element.act_inverse(&x).unwrap()).abs())
            .fold(0.0, f64::max);
        prop_assert!(value.abs() <= bound);
    }

    #[test]
    fn total_variation_is_a_pseudometric(a in cloud_strategy(2, 4), b in cloud_strategy(2, 4), c in cloud_strategy(2, 4)) {
        let (ma, mb, mc) = (frame_argsort_exact_d2(&a).unwrap(), frame_argsort_exact_d2(&b).unwrap(), frame_argsort_exact_d2(&c).unwrap());
        let d = |p: &WeightedFrame, q: &WeightedFrame| measure_distance(p, q).unwrap().value;
        prop_assert_eq!(d(&ma, &ma), 0.0);
        prop_assert_eq!(d(&ma, &mb), d(&mb, &ma));
        prop_assert!(d(&ma, &mc) <= d(&ma, &mb) + d(&mb, &mc) + 1e-12);
        prop_assert!(d(&ma, &mb) <= 1.0);
    }

    #[test]
    fn probe_family_is_a_pseudometric(a in cloud_strategy(3, 3), b in cloud_strategy(3, 3), c in cloud_strategy(3, 3)) {
        let (ma, mb, mc) = (frame_sod(&a).unwrap(), frame_sod(&b).unwrap(), frame_sod(&c).unwrap());
        let d = |p: &WeightedFrame, q: &WeightedFrame| measure_distance(p, q).unwrap().value;
        prop_assert!(d(&ma, &ma) < 1e-15);
        prop_assert!((d(&ma, &mb) - d(&mb, &ma)).abs() < 1e-15);
        prop_assert!(d(&ma, &mc) <= d(&ma, &mb) + d(&mb, &mc) + 1e-12);
    }
}

#[test]
fn stabilizer_averaging_leaves_invariant_projection_unchanged() {
    let mut r = ChaCha8Rng::seed_from_u64(11);
    let cases: Vec<(PointCloud, FrameKind, GroupTag)> = vec![
        (
            duplicated(2, 4, &mut r),
            FrameKind::ArgsortExact,
            GroupTag::Sn(4),
        ),
        (low_rank(3, 4, 1, &mut r), FrameKind::Sod, GroupTag::SO(3)),
        (low_rank(3, 4, 2, &mut r), FrameKind::Od, GroupTag::O(3)),
        (
            PointCloud::zeros(2, 3),
            FrameKind::So2 { eta: 0.5 },
            GroupTag::SO(2),
        ),
    ];
    for (x, kind, group) in cases {
        let mu = kind.frame(&x).unwrap();
        let (avg, _) = average_over_stabilizer(
            &mu,
            &stabilizer(&x, group, 0.0).unwrap(),
            DEFAULT_QUADRATURE,
        )
        .unwrap();
        let a = integrate_invariant(&mu, fixed_polynomial, &x).unwrap();
        let b = integrate_invariant(&avg, fixed_polynomial, &x).unwrap();
        assert!((a - b).abs() < 1e-10, "{kind}: {a} vs {b}");
    }
}

#[test]
fn probe_distance_shrinks_with_rotation_angle() {
    let id = WeightedFrame::delta(GroupTag::SO(2).identity());
    let dist: Vec<f64> = [0.1, 0.01, 0.001]
        .iter()
        .map(|&eps| {
            let rot = WeightedFrame::delta(GroupElement::Rotation(RotationMatrix::planar(eps)));
            measure_distance_with(&id, &rot, DistanceMethod::ProbeFamily)
                .unwrap()
                .value
        })
        .collect();
    assert!(dist[0] > dist[1] && dist[1] > dist[2] && dist[2] > 0.0);
    assert!(dist[0] < 1.0 && dist[2] < 0.01);
}

#[test]
fn so2_frame_has_trivial_stabilizer_away_from_zero() {
    let z = PointCloud::from_columns(&[[1.0, 0.0], [0.0, 0.0]]).unwrap();
    assert!(stabilizer(&z, GroupTag::SO(2), 0.0).unwrap().is_trivial());
    assert_eq!(frame_so2(&z, 0.5).unwrap().len(), 1);
}

fn trained(
    method: Method,
) -> (
    ExperimentConfig,
    framekit::harness::Dataset,
    MlpModel,
    Enforcer,
) {
    let config = ExperimentConfig {
        epochs: 3,
        ..ExperimentConfig::smoke()
    };
    let data = dataset_for(&config, 0).unwrap();
    let enforcer =
        Enforcer::new(method, config.n_points, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    let mut model =
        MlpModel::new(&config.layer_sizes(), &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
    train(
        &mut model,
        &data,
        &enforcer,
        &config,
        &mut ChaCha8Rng::seed_from_u64(3),
    )
    .unwrap();
    (config, data, model, enforcer)
}

fn argmax(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .unwrap()
        .0
}

#[test]
fn canonicalized_predictions_ignore_column_order() {
    let (_, data, model, enforcer) = trained(Method::DiscontCanon);
    let mut r = ChaCha8Rng::seed_from_u64(4);
    for &i in data.test.iter().take(10) {
        let x = &data.clouds[i];
        let base = argmax(&enforcer.logits(&model, x, 1, &mut r).unwrap());
        for _ in 0..50 {
            let px = random_permutation(x.n(), &mut r).act(x);
            assert_eq!(
                argmax(&enforcer.logits(&model, &px, 1, &mut r).unwrap()),
                base
            );
        }
    }
}

#[test]
fn averaging_more_draws_reduces_logit_variance() {
    for method in [Method::RobustSeparated, Method::RobustArgsort] {
        let (_, data, model, enforcer) = trained(method);
        let mut r = ChaCha8Rng::seed_from_u64(5);
        let (mut var1, mut var25) = (0.0, 0.0);
        for &i in &data.test {
            let x = &data.clouds[i];
            let spread = |k: usize, r: &mut ChaCha8Rng| {
                let outs: Vec<f64> = (0..20)
                    .map(|_| enforcer.logits(&model, x, k, r).unwrap()[0])
                    .collect();
                let mean = outs.iter().sum::<f64>() / outs.len() as f64;
                outs.iter().map(|o| (o - mean).powi(2)).sum::<f64>() / (outs.len() - 1) as f64
            };
            var1 += spread(1, &mut r);
            var25 += spread(25, &mut r);
        }
        assert!(var25 < var1, "{method}: {var25} vs {var1}");
    }
}

#[test]
fn sampled_reynolds_input_is_a_permutation_of_the_cloud() {
    let mut r = ChaCha8Rng::seed_from_u64(6);
    let x = gaussian(2, 6, &mut r);
    let enforcer = Enforcer::new(Method::ReynoldsSampled, 6, &mut r).unwrap();
    let flat = enforcer.input(&x, &mut r).unwrap();
    let y = PointCloud::from_matrix(DMatrix::from_column_slice(2, 6, &flat)).unwrap();
    assert_eq!(
        CanonMethod::Lex.apply(&y).unwrap(),
        CanonMethod::Lex.apply(&x).unwrap()
    );
}
