//! Randomized invariants: algebraic identities of the tensor layer, metric
//! axioms of the distances, and distribution-level consistency of the
//! statistics.

use cpdlab::condition::{condition_number, ExtendedReal};
use cpdlab::experiments::{estimate_ccdf, fit_tail_points, quantile};
use cpdlab::geometry::{fubini_study_distance, tangent_basis};
use cpdlab::sampling::derive_stream;
use cpdlab::tensor::{
    extract_factors, inner_product, outer_product, vectorize, Rank1Tensor, Rank1Tuple,
    TensorFormat,
};
use nalgebra::DVector;
use proptest::prelude::*;
use rand_chacha::rand_core::RngCore;

fn small_dims() -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(2usize..=4, 2..=3)
}

fn factor(m: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0f64..3.0, m)
        .prop_filter("factor must be clearly nonzero", |v| {
            v.iter().any(|x| x.abs() > 1e-2)
        })
}

fn factors_for(dims: Vec<usize>) -> impl Strategy<Value = Vec<Vec<f64>>> {
    dims.into_iter().map(factor).collect::<Vec<_>>()
}

fn rank1_pair() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    small_dims().prop_flat_map(|d| (factors_for(d.clone()), factors_for(d)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn inner_product_matches_vectorized_dot((fa, fb) in rank1_pair()) {
        let a = Rank1Tensor::new(fa).unwrap();
        let b = Rank1Tensor::new(fb).unwrap();
        let fast = inner_product(&a, &b).unwrap();
        let va = vectorize(&a.to_dense());
        let vb = vectorize(&b.to_dense());
        let slow: f64 = va.iter().zip(&vb).map(|(x, y)| x * y).sum();
        let scale = va.iter().map(|x| x.abs()).fold(0.0, f64::max)
            * vb.iter().map(|x| x.abs()).fold(0.0, f64::max)
            * va.len() as f64;
        prop_assert!((fast - slow).abs() <= 1e-12 * scale.max(1.0));
    }

    #[test]
    fn rank1_norm_is_product_of_factor_norms((fa, _) in rank1_pair()) {
        let a = Rank1Tensor::new(fa.clone()).unwrap();
        let norm = DVector::from_vec(vectorize(&a.to_dense())).norm();
        let product: f64 = fa
            .iter()
            .map(|f| f.iter().map(|x| x * x).sum::<f64>().sqrt())
            .product();
        prop_assert!((norm - product).abs() <= 1e-12 * product.max(1.0));
    }

    #[test]
    fn extraction_inverts_the_outer_product((fa, _) in rank1_pair()) {
        let dense = outer_product(&fa).unwrap();
        let recovered = extract_factors(&dense, 1e-9).unwrap();
        let original = vectorize(&dense);
        let rebuilt = vectorize(&recovered.to_dense());
        let scale = original.iter().map(|x| x.abs()).fold(0.0, f64::max);
        for (x, y) in original.iter().zip(&rebuilt) {
            prop_assert!((x - y).abs() <= 1e-10 * scale.max(1.0));
        }
    }

    #[test]
    fn tangent_bases_are_orthonormal_and_contain_the_point((fa, _) in rank1_pair()) {
        let t = Rank1Tensor::new(fa).unwrap();
        let basis = tangent_basis(&t).unwrap();
        prop_assert!(basis.max_gram_deviation() < 1e-11);
        let v = DVector::from_vec(vectorize(&t.to_dense()));
        let v = &v / v.norm();
        let coeffs = basis.as_matrix().transpose() * &v;
        let residual = (&v - basis.as_matrix() * coeffs).norm();
        prop_assert!(residual < 1e-10);
    }

    #[test]
    fn fubini_study_is_a_symmetric_projective_metric(
        (fa, fb) in rank1_pair(),
        c in prop_oneof![-4.0f64..-0.1, 0.1f64..4.0],
    ) {
        let x = &fa[0];
        let y = &fb[0];
        let d_xy = fubini_study_distance(x, y).unwrap();
        let d_yx = fubini_study_distance(y, x).unwrap();
        prop_assert!((d_xy - d_yx).abs() < 1e-14);
        prop_assert!((0.0..=std::f64::consts::FRAC_PI_2 + 1e-12).contains(&d_xy));
        let scaled: Vec<f64> = x.iter().map(|v| c * v).collect();
        let d_scaled = fubini_study_distance(&scaled, y).unwrap();
        prop_assert!((d_xy - d_scaled).abs() < 1e-12);
        prop_assert!(fubini_study_distance(x, x).unwrap() < 1e-12);
    }

    #[test]
    fn fubini_study_satisfies_the_triangle_inequality(
        (fa, fb) in rank1_pair(),
        (fc, _) in rank1_pair(),
    ) {
        // Only factors in matching modes are comparable; reuse mode-0
        // factors of equal length.
        let (x, y, z) = (&fa[0], &fb[0], &fc[0]);
        if x.len() == z.len() {
            let d_xz = fubini_study_distance(x, z).unwrap();
            let d_xy = fubini_study_distance(x, y).unwrap();
            let d_yz = fubini_study_distance(y, z).unwrap();
            prop_assert!(d_xz <= d_xy + d_yz + 1e-12);
        }
    }

    #[test]
    fn kappa_has_the_unit_floor_and_scale_invariance(
        fa in factors_for(vec![3, 3, 2]),
        fb in factors_for(vec![3, 3, 2]),
        s in prop_oneof![-8.0f64..-0.2, 0.2f64..8.0],
    ) {
        let format = TensorFormat::new(vec![3, 3, 2]).unwrap();
        let tuple = Rank1Tuple::new(
            format.clone(),
            vec![Rank1Tensor::new(fa.clone()).unwrap(), Rank1Tensor::new(fb).unwrap()],
        )
        .unwrap();
        let res = condition_number(&tuple).unwrap();
        if let ExtendedReal::Finite(kappa) = res.kappa {
            prop_assert!(kappa >= 1.0 - 1e-12);
            let mut scaled_first = fa;
            for x in scaled_first[1].iter_mut() {
                *x *= s;
            }
            let scaled = Rank1Tuple::new(
                format,
                vec![
                    Rank1Tensor::new(scaled_first).unwrap(),
                    tuple.terms()[1].clone(),
                ],
            )
            .unwrap();
            if let ExtendedReal::Finite(kappa2) = condition_number(&scaled).unwrap().kappa {
                prop_assert!((kappa - kappa2).abs() / kappa < 1e-10);
            }
        }
    }

    #[test]
    fn ccdf_is_monotone_and_quantile_consistent(
        values in prop::collection::vec(0.5f64..1e6, 1..200),
        infinities in 0usize..5,
        p in 0.01f64..0.99,
    ) {
        let mut samples: Vec<ExtendedReal> =
            values.iter().map(|v| ExtendedReal::Finite(*v)).collect();
        samples.extend(std::iter::repeat(ExtendedReal::Infinite).take(infinities));
        let table = estimate_ccdf(&samples, 1).unwrap();
        prop_assert_eq!(table.len() + table.infinite_count(), table.total());
        for w in table.ccdf().windows(2) {
            prop_assert!(w[0] >= w[1]);
        }
        for c in table.ccdf() {
            prop_assert!((0.0..1.0).contains(c));
        }
        match quantile(&table, p).unwrap() {
            ExtendedReal::Finite(x) => {
                let idx = table.xs().iter().position(|v| *v == x).unwrap();
                prop_assert!(table.ccdf()[idx] <= p);
                if idx > 0 {
                    prop_assert!(table.ccdf()[idx - 1] > p);
                }
            }
            ExtendedReal::Infinite => {
                let mass = table.infinite_count() as f64 / table.total() as f64;
                prop_assert!(mass > p);
            }
        }
    }

    #[test]
    fn tail_fit_recovers_exact_power_laws(
        a in 0.5f64..5e3,
        b in 0.5f64..3.0,
    ) {
        let ccdf: Vec<f64> = (0..40)
            .map(|i| 1e-5 * 10f64.powf(3.0 * i as f64 / 39.0))
            .collect();
        let xs: Vec<f64> = ccdf.iter().map(|c| (a / c).powf(1.0 / b)).collect();
        let fit = fit_tail_points(&xs, &ccdf, (1e-5, 1e-2)).unwrap();
        prop_assert!((fit.a - a).abs() / a < 1e-8);
        prop_assert!((fit.b - b).abs() / b < 1e-8);
        prop_assert!((fit.r_squared - 1.0).abs() < 1e-10);
    }
}

#[test]
fn derived_streams_are_keyed_by_every_coordinate() {
    let base: Vec<u64> = {
        let mut rng = derive_stream(1, 2, 3, 4, 5);
        (0..4).map(|_| rng.next_u64()).collect()
    };
    let again: Vec<u64> = {
        let mut rng = derive_stream(1, 2, 3, 4, 5);
        (0..4).map(|_| rng.next_u64()).collect()
    };
    assert_eq!(base, again);
    for (seed, domain, index, term, mode) in [
        (0, 2, 3, 4, 5),
        (1, 0, 3, 4, 5),
        (1, 2, 0, 4, 5),
        (1, 2, 3, 0, 5),
        (1, 2, 3, 4, 0),
    ] {
        let mut rng = derive_stream(seed, domain, index, term, mode);
        let words: Vec<u64> = (0..4).map(|_| rng.next_u64()).collect();
        assert_ne!(base, words, "stream collision for {seed},{domain},{index},{term},{mode}");
    }
}
