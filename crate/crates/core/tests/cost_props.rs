use indra_core::build::random_anchor_indices;
use indra_core::{
    angular_distance, build_indra, build_paired_indra, generate_synthetic, self_costs, AnchorSpec, Angular,
    EmbeddingSet, Generator, Matrix, SyntheticSpec,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use std::f64::consts::PI;

fn gaussian(n: usize, d: usize, seed: u64) -> EmbeddingSet<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data: Vec<f64> = (0..n * d).map(|_| StandardNormal.sample(&mut rng)).collect();
    EmbeddingSet::with_generated_ids("g", Matrix::new(n, d, data).unwrap(), "test").unwrap()
}

fn vec_pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1usize..12).prop_flat_map(|d| {
        let v = prop::collection::vec(-10.0f64..10.0, d).prop_filter("non-zero", |v| v.iter().any(|x| x.abs() > 1e-3));
        (v.clone(), v)
    })
}

proptest! {
    #[test]
    fn symmetric_and_bounded((u, v) in vec_pair()) {
        let a = angular_distance(&u, &v).unwrap();
        let b = angular_distance(&v, &u).unwrap();
        prop_assert_eq!(a.to_bits(), b.to_bits());
        prop_assert!((0.0..=PI).contains(&a));
    }

    // Power-of-two scaling is exact in binary floating point, so the cost is
    // bit-identical.
    #[test]
    fn power_of_two_scale_invariant((u, v) in vec_pair(), e1 in -8i32..8, e2 in -8i32..8) {
        let su: Vec<f64> = u.iter().map(|x| x * 2f64.powi(e1)).collect();
        let sv: Vec<f64> = v.iter().map(|x| x * 2f64.powi(e2)).collect();
        let a = angular_distance(&u, &v).unwrap();
        let b = angular_distance(&su, &sv).unwrap();
        prop_assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn general_scale_invariant((u, v) in vec_pair(), s in 0.01f64..100.0) {
        let su: Vec<f64> = u.iter().map(|x| x * s).collect();
        let a = angular_distance(&u, &v).unwrap();
        let b = angular_distance(&su, &v).unwrap();
        prop_assert!((a - b).abs() <= 1e-7);
    }

    #[test]
    fn triangle_on_triples(d in 2usize..10, seed in any::<u64>()) {
        let e = gaussian(3, d, seed);
        let (x, y, z) = (e.row(0), e.row(1), e.row(2));
        let xy = angular_distance(x, y).unwrap();
        let yz = angular_distance(y, z).unwrap();
        let xz = angular_distance(x, z).unwrap();
        prop_assert!(xz <= xy + yz + 1e-7);
    }

    #[test]
    fn anchored_is_column_slice(n in 4usize..40, d in 2usize..8, k in 1usize..4, seed in any::<u64>()) {
        let e = gaussian(n, d, seed);
        let full = self_costs(&e, &Angular).unwrap();
        let anchored = build_indra(&e, &Angular, &AnchorSpec::random(k, seed)).unwrap();
        let cols = random_anchor_indices(n, k, seed).unwrap();
        prop_assert_eq!(anchored.col_index(), &cols[..]);
        prop_assert!(anchored.values().bit_eq(&full.values().select_cols(&cols)));
        prop_assert!(anchored.anchored());

        let excl = build_indra(&e, &Angular, &AnchorSpec::random(k, seed).excluding_queries(true)).unwrap();
        prop_assert_eq!(excl.rows(), n - k);
        for (r, &src) in excl.row_index().iter().enumerate() {
            prop_assert!(!cols.contains(&src));
            prop_assert_eq!(excl.row(r), anchored.row(src));
        }
    }
}

#[test]
fn full_matrix_structure() {
    let e = gaussian(40, 7, 3);
    let m = self_costs(&e, &Angular).unwrap();
    for i in 0..40 {
        assert_eq!(m.get(i, i), 0.0);
        for j in 0..40 {
            assert_eq!(m.get(i, j).to_bits(), m.get(j, i).to_bits());
            // oracle: direct arccos of the normalized dot product
            let (a, b) = (e.row(i), e.row(j));
            let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
            let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
            let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
            let want = if i == j { 0.0 } else { (dot / (na * nb)).clamp(-1.0, 1.0).acos() };
            assert!((m.get(i, j) - want).abs() < 1e-12);
        }
    }
}

#[test]
fn paired_orthogonal_invariance() {
    for seed in 0..4 {
        let spec = SyntheticSpec { generator: Generator::PairedOrthogonal { n: 120, dim: 16, noise: 0.0 }, seed };
        let p = generate_synthetic::<f64>(&spec).unwrap().into_paired().unwrap();
        let (iu, iq) = build_paired_indra(&p, &Angular, &AnchorSpec::random(20, seed).excluding_queries(true)).unwrap();
        assert_eq!(iu.col_ids(), iq.col_ids());
        assert!(iu.values().max_abs_diff(iq.values()).unwrap() <= 1e-10);
    }
}

#[test]
fn f32_matches_f64_loosely() {
    let e = gaussian(20, 5, 11);
    let e32: EmbeddingSet<f32> = e.cast().unwrap();
    let a = self_costs(&e, &Angular).unwrap();
    let b = self_costs(&e32, &Angular).unwrap();
    for i in 0..20 {
        for j in 0..20 {
            assert!((a.get(i, j) - b.get(i, j) as f64).abs() < 1e-3);
        }
    }
}

#[test]
fn anchored_build_is_reproducible() {
    let e = gaussian(500, 16, 70);
    let spec = AnchorSpec::random(64, 7);
    let a = build_indra(&e, &Angular, &spec).unwrap();
    let b = build_indra(&e, &Angular, &spec).unwrap();
    assert_eq!((a.rows(), a.cols()), (500, 64));
    assert!(a.values().bit_eq(b.values()));
    assert_eq!(a, b);
}
