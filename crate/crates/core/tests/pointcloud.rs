mod common;

use common::{brute_radius_outliers, criteria, random_points};
use gsfill_core::pointcloud::{dist2, KdTree};
use gsfill_core::pointcloud::{merge_into_scene, radius_outliers, ColoredPointCloud, MergeInit};
use gsfill_core::synthetic::textured_plane;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn outlier_filters_match_brute_force() {
    let out = criteria::outlier_procedure();
    assert!(out.passed, "{}", out.line());
}

#[test]
fn unprojection_round_trip() {
    let out = criteria::unprojection_round_trip();
    assert!(out.passed, "{}", out.line());
}

#[test]
fn merge_keeps_existing_gaussians_and_appends_in_order() {
    let scene = textured_plane(0.2, 0.05, 2.0, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let pc = ColoredPointCloud::from_positions(&random_points(&mut rng, 30, 0.5));
    let a = merge_into_scene(&scene, &pc, &MergeInit::default()).unwrap();
    let b = merge_into_scene(&scene, &pc, &MergeInit::default()).unwrap();
    assert_eq!(a, b);
    assert_eq!(&a.gaussians()[..scene.len()], scene.gaussians());
    for (g, p) in a.gaussians()[scene.len()..].iter().zip(&pc.points) {
        assert_eq!(g.position, p.xyz);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn kdtree_queries_equal_linear_scan(seed in any::<u64>(), radius in 0.01f64..0.4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let points = random_points(&mut rng, 1000, 1.0);
        let queries = random_points(&mut rng, 40, 1.2);
        let tree = KdTree::new(&points);
        for q in &queries {
            let d: Vec<f64> = points.iter().map(|p| dist2(p, q)).collect();
            let best = d.iter().copied().fold(f64::INFINITY, f64::min);
            let (_, nd) = tree.nearest(q).unwrap();
            prop_assert_eq!(nd, best);

            let mut order: Vec<usize> = (0..points.len()).collect();
            order.sort_by(|&a, &b| d[a].total_cmp(&d[b]).then(a.cmp(&b)));
            let knn: Vec<usize> = tree.knn(q, 7, None).into_iter().map(|(i, _)| i).collect();
            prop_assert_eq!(knn, order[..7].to_vec());

            let mut want: Vec<usize> = (0..points.len()).filter(|&i| d[i] <= radius * radius).collect();
            want.sort_unstable();
            prop_assert_eq!(tree.within_radius(q, radius), want.clone());
            prop_assert_eq!(tree.count_within(q, radius), want.len());
        }
    }

    #[test]
    fn radius_filter_is_monotone_in_min_neighbors(seed in any::<u64>(), k in 1usize..10, radius in 0.05f64..0.3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let points = random_points(&mut rng, 300, 1.0);
        let small = radius_outliers(&points, radius, k);
        let large = radius_outliers(&points, radius, k + 1);
        prop_assert!(small.iter().zip(&large).all(|(&s, &l)| !s || l));
        let flagged: Vec<usize> = (0..points.len()).filter(|&i| small[i]).collect();
        prop_assert_eq!(flagged, brute_radius_outliers(&points, radius, k));
    }
}
