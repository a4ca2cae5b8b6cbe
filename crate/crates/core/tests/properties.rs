use approx::assert_relative_eq;
use ktuplet::linalg::{norm, Matrix};
use ktuplet::{
    k_tuplet_loss, l2_normalize, nn_classify, pairwise_sq_dist, semi_hard_loss, squared_euclidean,
    EmbeddedTuplet, FilterMode, Label,
};
use proptest::prelude::*;

fn vec_pair(max_dim: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1..=max_dim).prop_flat_map(|d| {
        (
            prop::collection::vec(-10.0..10.0f64, d),
            prop::collection::vec(-10.0..10.0f64, d),
        )
    })
}

/// Random rotation of the plane spanned by two coordinates.
fn givens(v: &[f64], i: usize, j: usize, theta: f64) -> Vec<f64> {
    let mut out = v.to_vec();
    let (c, s) = (theta.cos(), theta.sin());
    out[i] = c * v[i] - s * v[j];
    out[j] = s * v[i] + c * v[j];
    out
}

proptest! {
    #[test]
    fn distance_is_symmetric_and_nonnegative((u, v) in vec_pair(12)) {
        let a = squared_euclidean(&u, &v).unwrap();
        let b = squared_euclidean(&v, &u).unwrap();
        prop_assert_eq!(a.to_bits(), b.to_bits());
        prop_assert!(a >= 0.0);
        prop_assert_eq!(squared_euclidean(&u, &u).unwrap(), 0.0);
    }

    #[test]
    fn normalize_is_idempotent(v in prop::collection::vec(-5.0..5.0f64, 1..16)) {
        prop_assume!(norm(&v) > 1e-6);
        let once = l2_normalize(&v).unwrap();
        let twice = l2_normalize(&once).unwrap();
        prop_assert!((norm(&once) - 1.0).abs() <= 1e-12);
        for (a, b) in once.iter().zip(&twice) {
            prop_assert!((a - b).abs() <= 1e-15);
        }
    }

    #[test]
    fn pairwise_matches_single_distances(
        rows_a in 1usize..6,
        rows_b in 1usize..6,
        d in 1usize..6,
        seed in any::<u64>(),
    ) {
        use rand::Rng;
        let mut rng = ktuplet::rng(seed);
        let mut m = |r: usize| {
            Matrix::from_vec(r, d, (0..r * d).map(|_| rng.random_range(-3.0..3.0)).collect()).unwrap()
        };
        let (a, b) = (m(rows_a), m(rows_b));
        let p = pairwise_sq_dist(&a, &b).unwrap();
        prop_assert_eq!(p.shape(), (rows_a, rows_b));
        for i in 0..rows_a {
            for j in 0..rows_b {
                prop_assert_eq!(p[(i, j)], squared_euclidean(a.row(i), b.row(j)).unwrap());
            }
        }
    }

    #[test]
    fn distance_is_rotation_invariant(
        (u, v) in vec_pair(8),
        theta in -3.2..3.2f64,
        i in 0usize..8,
        j in 0usize..8,
    ) {
        let d = u.len();
        let (i, j) = (i % d, j % d);
        prop_assume!(i != j);
        let before = squared_euclidean(&u, &v).unwrap();
        let after = squared_euclidean(&givens(&u, i, j, theta), &givens(&v, i, j, theta)).unwrap();
        assert_relative_eq!(before, after, epsilon = 1e-9, max_relative = 1e-9);
    }

    #[test]
    fn tuplet_loss_ignores_negative_order(
        seed in any::<u64>(),
        k in 1usize..8,
        margin in 0.0..2.0f64,
    ) {
        use rand::seq::SliceRandom;
        use rand::Rng;
        let mut rng = ktuplet::rng(seed);
        let d = 4;
        let mut unit = || l2_normalize(&(0..d).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<_>>()).unwrap();
        let (a, p) = (unit(), unit());
        let negs: Vec<Vec<f64>> = (0..k).map(|_| unit()).collect();
        let mut order: Vec<usize> = (0..k).collect();
        order.shuffle(&mut rng);
        let t = EmbeddedTuplet::new(&a, &p, negs.iter().map(Vec::as_slice).collect());
        let shuffled = EmbeddedTuplet::new(&a, &p, order.iter().map(|&i| negs[i].as_slice()).collect());
        let (l1, l2) = (k_tuplet_loss(&t, margin).unwrap(), k_tuplet_loss(&shuffled, margin).unwrap());
        prop_assert!((l1 - l2).abs() <= 1e-12);
        prop_assert!(l1 >= 0.0);
        let s1 = semi_hard_loss(&t, margin, FilterMode::Violating).unwrap();
        let s2 = semi_hard_loss(&shuffled, margin, FilterMode::Violating).unwrap();
        prop_assert!((s1 - s2).abs() <= 1e-12);
        // Averaging over the violating subset never lowers the mean.
        prop_assert!(s1 >= l1 - 1e-12);
        prop_assert_eq!(semi_hard_loss(&t, margin, FilterMode::Verbatim).unwrap(), 0.0);
    }

    #[test]
    fn nearest_neighbor_is_rotation_invariant(
        seed in any::<u64>(),
        n in 1usize..10,
        theta in -3.2..3.2f64,
    ) {
        use rand::Rng;
        let mut rng = ktuplet::rng(seed);
        let d = 3;
        let mut draw = || (0..d).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<f64>>();
        let support: Vec<(Vec<f64>, Label)> = (0..n).map(|l| (draw(), l as Label)).collect();
        let q = draw();
        let dists: Vec<f64> = support.iter().map(|(v, _)| squared_euclidean(&q, v).unwrap()).collect();
        let mut sorted = dists.clone();
        sorted.sort_by(f64::total_cmp);
        // Skip near ties, where rotation rounding may flip the winner.
        prop_assume!(n == 1 || sorted[1] - sorted[0] > 1e-9);
        let rotated: Vec<(Vec<f64>, Label)> =
            support.iter().map(|(v, l)| (givens(v, 0, 2, theta), *l)).collect();
        prop_assert_eq!(
            nn_classify(&q, &support).unwrap(),
            nn_classify(&givens(&q, 0, 2, theta), &rotated).unwrap()
        );
    }
}
