use indra_core::verify::{T0_TOL, TRIANGLE_TOL};
use indra_core::{
    check_faithfulness, check_structure_preservation, find_t0_duplicates, self_costs, verify_lawvere, yoneda_hom,
    Angular, CostMatrix, EmbeddingSet, Matrix,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn gaussian(n: usize, d: usize, seed: u64) -> EmbeddingSet<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data: Vec<f64> = (0..n * d).map(|_| StandardNormal.sample(&mut rng)).collect();
    EmbeddingSet::with_generated_ids("g", Matrix::new(n, d, data).unwrap(), "test").unwrap()
}

/// Independent count of triangle violations over all ordered triples.
fn naive_triangle(m: &CostMatrix<f64>, tol: f64) -> (u64, f64) {
    let n = m.rows();
    let (mut count, mut worst) = (0u64, 0.0f64);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let slack = m.get(i, k) - (m.get(i, j) + m.get(j, k));
                worst = worst.max(slack);
                if slack > tol {
                    count += 1;
                }
            }
        }
    }
    (count, worst)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn hom_equals_reverse_cost(n in 2usize..24, d in 2usize..8, seed in any::<u64>()) {
        let m = self_costs(&gaussian(n, d, seed), &Angular).unwrap();
        for a in 0..n {
            for b in 0..n {
                let h = yoneda_hom(&m, a, b).unwrap();
                prop_assert!((h - m.get(b, a)).abs() <= 1e-6);
            }
        }
        let r = verify_lawvere(&m, TRIANGLE_TOL).unwrap();
        prop_assert!(r.passed);
        prop_assert_eq!(r.triangle_violation_count, 0);
    }

    // Arbitrary non-negative matrices: the report agrees with a brute-force count.
    #[test]
    fn triangle_count_matches_bruteforce(n in 2usize..10, vals in prop::collection::vec(0u8..6, 100)) {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    data[i * n + j] = vals[(i * n + j) % vals.len()] as f64;
                }
            }
        }
        let m = CostMatrix::square(Matrix::new(n, n, data).unwrap()).unwrap();
        let r = verify_lawvere(&m, TRIANGLE_TOL).unwrap();
        let (count, worst) = naive_triangle(&m, TRIANGLE_TOL);
        prop_assert_eq!(r.triangle_violation_count, count);
        prop_assert_eq!(r.max_triangle_slack, worst.max(0.0));
    }

    #[test]
    fn structure_within_tolerance(n in 2usize..20, seed in any::<u64>()) {
        let m = self_costs(&gaussian(n, 5, seed), &Angular).unwrap();
        let (err, ok) = check_structure_preservation(&m, 1e-6).unwrap();
        prop_assert!(ok, "{}", err);
    }
}

#[test]
fn integer_metric_is_exactly_faithful() {
    let m = CostMatrix::from_rows(&[[0.0, 1.0, 2.0], [1.0, 0.0, 1.0], [2.0, 1.0, 0.0]]).unwrap();
    assert_eq!(check_faithfulness(&m, 0.0).unwrap(), (0.0, true));
}

#[test]
fn collinear_pair_is_not_t0() {
    let data = Matrix::from_rows(&[[1.0, 0.0], [2.0, 0.0], [0.0, 1.0]]).unwrap();
    let e = EmbeddingSet::with_generated_ids("c", data, "t").unwrap();
    let m = self_costs(&e, &Angular).unwrap();
    assert_eq!(m.get(0, 1), 0.0);
    assert_eq!(find_t0_duplicates(&m, T0_TOL).unwrap(), vec![(0, 1)]);
    // A Lawvere space need not be T0.
    assert!(verify_lawvere(&m, TRIANGLE_TOL).unwrap().passed);
}
