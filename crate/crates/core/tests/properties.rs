//! Property tests for the geometric and metric invariants.

use proptest::prelude::*;

use consens::bounds::{centroid_distance_bound, centroid_triple_bound, EnsemblePairSample};
use consens::metrics::{
    accuracy, coarse_accuracy, coarse_consistency, consistency, correct_consistency,
    transition_stats, LabelVector, PredictionMatrix,
};
use consens::simplex::{
    centroid, euclidean_distance, minkowski_distance, MinkowskiOrder, SimplexVector,
};

const SLACK: f64 = 1e-9;

fn simplex_vector(p: usize) -> impl Strategy<Value = SimplexVector> {
    prop::collection::vec(1e-3..1.0f64, p).prop_map(|raw| {
        let total: f64 = raw.iter().sum();
        SimplexVector::new(raw.into_iter().map(|x| x / total).collect()).expect("normalized")
    })
}

fn matrix(n: usize, p: usize) -> impl Strategy<Value = PredictionMatrix> {
    prop::collection::vec(simplex_vector(p), n).prop_map(|rows| PredictionMatrix::new(rows).unwrap())
}

fn labels(n: usize, p: usize) -> impl Strategy<Value = LabelVector> {
    prop::collection::vec(0..p, n).prop_map(|l| LabelVector::new(l).unwrap())
}

/// Square each row and renormalize: a strictly monotone per-row rescaling
/// that preserves argmax and top-k order (including ties).
fn sharpen(m: &PredictionMatrix) -> PredictionMatrix {
    let rows = m
        .rows()
        .iter()
        .map(|row| {
            let squared: Vec<f64> = row.values().iter().map(|&v| v * v).collect();
            let total: f64 = squared.iter().sum();
            SimplexVector::new(squared.into_iter().map(|v| v / total).collect()).unwrap()
        })
        .collect();
    PredictionMatrix::new(rows).unwrap()
}

proptest! {
    #[test]
    fn triangle_inequality_all_orders(
        p in 2usize..6,
        seed in any::<u64>(),
    ) {
        let mut rng = consens::rng::stream(seed);
        let draw = |rng: &mut rand_chacha::ChaCha8Rng| {
            consens::bounds::sample_dirichlet(p, 1.0, rng).unwrap()
        };
        let a = draw(&mut rng);
        let b = draw(&mut rng);
        let c = draw(&mut rng);
        for q in [1.0, 1.5, 2.0, 3.0, 4.0] {
            let order = MinkowskiOrder::new(q).unwrap();
            let ab = minkowski_distance(&a, &b, order).unwrap();
            let ac = minkowski_distance(&a, &c, order).unwrap();
            let cb = minkowski_distance(&c, &b, order).unwrap();
            prop_assert!(ab <= ac + cb + SLACK, "q={q}: {ab} > {ac} + {cb}");
        }
        let e = euclidean_distance(&a, &b).unwrap();
        prop_assert!((0.0..=2f64.sqrt() + SLACK).contains(&e));
    }

    #[test]
    fn centroid_stays_within_componentwise_bounds(
        vectors in prop::collection::vec(simplex_vector(4), 1..8),
    ) {
        let c = centroid(&vectors).unwrap();
        for k in 0..4 {
            let lo = vectors.iter().map(|v| v.values()[k]).fold(f64::MAX, f64::min);
            let hi = vectors.iter().map(|v| v.values()[k]).fold(f64::MIN, f64::max);
            prop_assert!(c.values()[k] >= lo - SLACK && c.values()[k] <= hi + SLACK);
        }
    }

    #[test]
    fn centroid_bounds_hold_on_random_pairs(
        m in 2usize..7,
        p in 2usize..7,
        seed in any::<u64>(),
    ) {
        let mut rng = consens::rng::stream(seed);
        let draw = |rng: &mut rand_chacha::ChaCha8Rng, count: usize| -> Vec<SimplexVector> {
            (0..count).map(|_| consens::bounds::sample_dirichlet(p, 1.0, rng).unwrap()).collect()
        };
        let members = draw(&mut rng, m);
        let copies = draw(&mut rng, m);
        let truth = SimplexVector::one_hot(p, 0).unwrap();
        let sample = EnsemblePairSample::new(members, copies, truth).unwrap();
        for q in [1.5, 2.0, 3.0, 4.0] {
            let order = MinkowskiOrder::new(q).unwrap();
            let distance = centroid_distance_bound(&sample, order).unwrap();
            prop_assert!(distance.holds, "distance bound violated at q={q}: slack {}", distance.slack);
            let triple = centroid_triple_bound(&sample, order).unwrap();
            prop_assert!(triple.holds, "triple bound violated at q={q}: slack {}", triple.slack);
        }
    }

    #[test]
    fn coarse_metrics_grow_with_k(
        (a, b, r) in (2usize..10, 2usize..5).prop_flat_map(|(n, p)| {
            (matrix(n, p), matrix(n, p), labels(n, p))
        }),
    ) {
        let p = a.p();
        let mut last_con = 0.0;
        let mut last_acc = 0.0;
        for k in 1..=p {
            let con_k = coarse_consistency(&a, &b, k).unwrap();
            let acc_k = coarse_accuracy(&a, &r, k).unwrap();
            prop_assert!(con_k >= last_con - 1e-12);
            prop_assert!(acc_k >= last_acc - 1e-12);
            last_con = con_k;
            last_acc = acc_k;
        }
        prop_assert_eq!(coarse_accuracy(&a, &r, p).unwrap(), 1.0);
    }

    #[test]
    fn correct_consistency_respects_envelope(
        (a, b, r) in (2usize..12, 2usize..5).prop_flat_map(|(n, p)| {
            (matrix(n, p), matrix(n, p), labels(n, p))
        }),
    ) {
        let acc_a = accuracy(&a, &r).unwrap();
        let acc_b = accuracy(&b, &r).unwrap();
        let con = consistency(&a, &b).unwrap();
        let ccon = correct_consistency(&a, &b, &r).unwrap();
        prop_assert!(ccon <= con + 1e-12);
        prop_assert!(ccon <= acc_a.min(acc_b) + 1e-12);
        prop_assert!(ccon >= (acc_a + acc_b - 1.0).max(0.0) - 1e-12);
    }

    #[test]
    fn argmax_metrics_survive_monotone_rescaling(
        (a, b, r) in (2usize..10, 2usize..5).prop_flat_map(|(n, p)| {
            (matrix(n, p), matrix(n, p), labels(n, p))
        }),
    ) {
        let sa = sharpen(&a);
        let sb = sharpen(&b);
        prop_assert_eq!(consistency(&a, &b).unwrap(), consistency(&sa, &sb).unwrap());
        prop_assert_eq!(accuracy(&a, &r).unwrap(), accuracy(&sa, &r).unwrap());
        prop_assert_eq!(
            correct_consistency(&a, &b, &r).unwrap(),
            correct_consistency(&sa, &sb, &r).unwrap()
        );
        for k in 1..=a.p() {
            prop_assert_eq!(
                coarse_consistency(&a, &b, k).unwrap(),
                coarse_consistency(&sa, &sb, k).unwrap()
            );
            prop_assert_eq!(
                coarse_accuracy(&a, &r, k).unwrap(),
                coarse_accuracy(&sa, &r, k).unwrap()
            );
        }
    }

    #[test]
    fn transition_buckets_partition_and_tie_out(
        (a, b, r) in (2usize..10, 2usize..5).prop_flat_map(|(n, p)| {
            (matrix(n, p), matrix(n, p), labels(n, p))
        }),
    ) {
        let t = transition_stats(&a, &b, &r).unwrap();
        prop_assert!((t.cto_c + t.cto_i + t.ito_c + t.ito_i - 1.0).abs() < 1e-12);
        prop_assert!((t.cto_c + t.cto_i - accuracy(&a, &r).unwrap()).abs() < 1e-12);
        prop_assert!((t.cto_c + t.ito_c - accuracy(&b, &r).unwrap()).abs() < 1e-12);
        prop_assert!((t.com - (t.cto_c + t.ito_c - t.cto_i)).abs() < 1e-12);
    }
}
