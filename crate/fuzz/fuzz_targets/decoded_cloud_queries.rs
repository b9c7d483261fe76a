#![no_main]

// Decodes a PCL3 cloud, indexes it and checks a few queries against brute
// force. The first points double as query centers.

use lbvh::cloud_io::decode_pcl3;
use lbvh::oracle::{compare_knn, compare_spatial};
use lbvh::{query_knn, query_spatial_1p, query_spatial_2p, Bvh, KnnQuery, SpatialQuery};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(points) = decode_pcl3(data) else { return };
    if points.is_empty() || points.len() > 4096 {
        return;
    }
    let Ok(tree) = Bvh::from_points(&points) else { return };
    tree.validate().unwrap();

    let radius = 1.0 + (data.len() % 7) as f32;
    let centers = &points[..points.len().min(16)];
    let sq: Vec<_> = centers.iter().map(|&c| SpatialQuery::new(c, radius).unwrap()).collect();
    let two = match query_spatial_2p(&tree, &sq, true) {
        Ok(rs) => rs,
        Err(lbvh::Error::StackExhausted) => return,
        Err(e) => panic!("{e}"),
    };
    assert!(compare_spatial(&points, &sq, &two).is_empty());
    let one = query_spatial_1p(&tree, &sq, 2, true).unwrap();
    assert_eq!(one.results.canonical(), two.canonical());

    let kq: Vec<_> = centers.iter().map(|&c| KnnQuery::new(c, 3).unwrap()).collect();
    let knn = query_knn(&tree, &kq, true).unwrap();
    assert!(compare_knn(&points, &kq, &knn).is_empty());
});
