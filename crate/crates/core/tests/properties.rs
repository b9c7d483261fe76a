use lbvh::morton::{assign_keys, sort_by_key};
use lbvh::oracle::{brute_knn, brute_radius, compare_knn, compare_spatial};
use lbvh::{
    query_knn, query_spatial_1p, query_spatial_2p, scene_bounds, traverse_knn_one, traverse_spatial_one, Aabb, Bvh,
    KnnQuery, Point, SpatialQuery,
};
use proptest::prelude::*;

fn arb_points(max: usize) -> impl Strategy<Value = Vec<Point>> {
    prop::collection::vec(prop::array::uniform3(-20i32..20), 1..max).prop_map(|v| {
        // Integer-ish coordinates give plenty of duplicates and exact ties.
        v.into_iter()
            .map(|c| Point::new(c[0] as f32 * 0.5, c[1] as f32 * 0.5, c[2] as f32 * 0.25).unwrap())
            .collect()
    })
}

fn arb_boxes(max: usize) -> impl Strategy<Value = Vec<Aabb>> {
    prop::collection::vec(
        (
            prop::array::uniform3(-50.0f32..50.0),
            prop::array::uniform3(0.0f32..5.0),
        ),
        1..max,
    )
    .prop_map(|v| {
        v.into_iter()
            .map(|(lo, ext)| {
                let min = Point::try_from(lo).unwrap();
                let max = Point::new(lo[0] + ext[0], lo[1] + ext[1], lo[2] + ext[2]).unwrap();
                Aabb::new(min, max).unwrap()
            })
            .collect()
    })
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap()
        .install(f)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn built_tree_satisfies_invariants(boxes in arb_boxes(300)) {
        let tree = Bvh::build(&boxes).unwrap();
        prop_assert_eq!(tree.validate(), Ok(()));
        prop_assert_eq!(tree.nodes().len(), 2 * boxes.len() - 1);
        prop_assert_eq!(*tree.scene(), scene_bounds(&boxes).unwrap());

        let keys = assign_keys(&boxes, tree.scene());
        let expected: Vec<u32> = sort_by_key(&keys).into_iter().map(|i| i as u32).collect();
        prop_assert_eq!(tree.leaf_order(), expected);
        prop_assert!(tree.depth() <= 64);
    }

    #[test]
    fn build_is_independent_of_thread_count(boxes in arb_boxes(300)) {
        let one = in_pool(1, || Bvh::build(&boxes).unwrap());
        let three = in_pool(3, || Bvh::build(&boxes).unwrap());
        prop_assert_eq!(one, three);
    }

    #[test]
    fn spatial_matches_brute_force(
        points in arb_points(200),
        centers in prop::collection::vec(prop::array::uniform3(-12.0f32..12.0), 1..40),
        radius in 0.0f32..6.0,
        buffer_size in 1usize..6,
    ) {
        let tree = Bvh::from_points(&points).unwrap();
        let queries: Vec<SpatialQuery> = centers
            .iter()
            .map(|&c| SpatialQuery::new(Point::try_from(c).unwrap(), radius).unwrap())
            .collect();
        let two = query_spatial_2p(&tree, &queries, true).unwrap();
        prop_assert!(two.is_well_formed());
        prop_assert!(compare_spatial(&points, &queries, &two).is_empty());

        let one = query_spatial_1p(&tree, &queries, buffer_size, true).unwrap();
        prop_assert_eq!(one.results.canonical(), two.canonical());
        let overflow = (0..queries.len()).any(|q| two.count(q) > buffer_size);
        prop_assert_eq!(one.fell_back, overflow);

        let unsorted = query_spatial_2p(&tree, &queries, false).unwrap();
        prop_assert_eq!(unsorted.canonical(), two.canonical());

        for (q, query) in queries.iter().enumerate() {
            let mut single = Vec::new();
            traverse_spatial_one(&tree, query, |o| single.push(o)).unwrap();
            single.sort_unstable();
            prop_assert_eq!(&single, &two.canonical()[q]);
            prop_assert_eq!(&single, &brute_radius(&points, query));
            for &hit in &single {
                prop_assert!(points[hit as usize].distance_sq(&query.center()) <= radius * radius);
            }
        }
    }

    #[test]
    fn knn_matches_brute_force(
        points in arb_points(200),
        centers in prop::collection::vec(prop::array::uniform3(-12.0f32..12.0), 1..40),
        k in 1usize..15,
    ) {
        let tree = Bvh::from_points(&points).unwrap();
        let queries: Vec<KnnQuery> = centers
            .iter()
            .map(|&c| KnnQuery::new(Point::try_from(c).unwrap(), k).unwrap())
            .collect();
        let rs = query_knn(&tree, &queries, true).unwrap();
        prop_assert!(rs.is_well_formed());
        prop_assert!(compare_knn(&points, &queries, &rs).is_empty());
        prop_assert_eq!(&rs, &query_knn(&tree, &queries, false).unwrap());
        for (q, query) in queries.iter().enumerate() {
            let single = traverse_knn_one(&tree, query).unwrap();
            // Identical tie rule, so even ordinals agree exactly.
            prop_assert_eq!(&single, &brute_knn(&points, query));
            let ids: Vec<u32> = single.iter().map(|p| p.0).collect();
            prop_assert_eq!(rs.get(q), &ids[..]);
        }
    }
}

#[test]
fn box_leaves_use_box_distance() {
    let boxes = [
        Aabb::new(Point::new(0.0, 0.0, 0.0).unwrap(), Point::new(1.0, 1.0, 1.0).unwrap()).unwrap(),
        Aabb::new(Point::new(3.0, 0.0, 0.0).unwrap(), Point::new(4.0, 1.0, 1.0).unwrap()).unwrap(),
    ];
    let tree = Bvh::build(&boxes).unwrap();
    let q = SpatialQuery::new(Point::new(2.0, 0.5, 0.5).unwrap(), 1.0).unwrap();
    let mut hits = Vec::new();
    traverse_spatial_one(&tree, &q, |o| hits.push(o)).unwrap();
    hits.sort_unstable();
    assert_eq!(hits, vec![0, 1]);
    let nearest = traverse_knn_one(&tree, &KnnQuery::new(Point::new(3.5, 0.5, 2.0).unwrap(), 1).unwrap()).unwrap();
    assert_eq!(nearest, vec![(1, 1.0)]);
}

#[test]
fn extreme_coordinates_still_answer_exactly() {
    let big = f32::MAX / 2.0;
    let points = vec![
        Point::new(big, big, big).unwrap(),
        Point::new(-big, -big, -big).unwrap(),
        Point::new(0.0, 0.0, 0.0).unwrap(),
        Point::new(1.0, 0.0, 0.0).unwrap(),
        Point::new(big, -big, 0.0).unwrap(),
    ];
    let tree = Bvh::from_points(&points).unwrap();
    tree.validate().unwrap();
    let kq: Vec<KnnQuery> = points.iter().map(|&c| KnnQuery::new(c, 5).unwrap()).collect();
    let rs = query_knn(&tree, &kq, true).unwrap();
    assert!(compare_knn(&points, &kq, &rs).is_empty());
    let sq: Vec<SpatialQuery> = points.iter().map(|&c| SpatialQuery::new(c, 2.0).unwrap()).collect();
    let rs = query_spatial_2p(&tree, &sq, true).unwrap();
    assert!(compare_spatial(&points, &sq, &rs).is_empty());
}
