//! Brute-force reference searches and the comparison rules used to check
//! the hierarchy against them.
//!
//! The scans use the same inclusive `<=` test and `(distance, ordinal)` tie
//! rule as the tree traversals, so radius results must match exactly.

use std::cmp::Ordering;

use crate::geometry::Point;
use crate::traversal::{KnnQuery, ResultSet, SpatialQuery};

/// Relative tolerance for nearest-neighbor distances.
pub const KNN_RELATIVE_TOLERANCE: f32 = 1e-6;

/// Every ordinal within the query radius, ascending.
pub fn brute_radius(points: &[Point], q: &SpatialQuery) -> Vec<u32> {
    let r2 = q.radius() * q.radius();
    let c = q.center();
    points
        .iter()
        .enumerate()
        .filter(|(_, p)| p.distance_sq(&c) <= r2)
        .map(|(i, _)| i as u32)
        .collect()
}

/// The `min(k, n)` nearest ordinals with distances, by `(distance, ordinal)`.
pub fn brute_knn(points: &[Point], q: &KnnQuery) -> Vec<(u32, f32)> {
    let c = q.center();
    let mut all: Vec<(f32, u32)> = points
        .iter()
        .enumerate()
        .map(|(i, p)| (p.distance_sq(&c), i as u32))
        .collect();
    let k = q.k().min(all.len());
    let by_key = |a: &(f32, u32), b: &(f32, u32)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if k < all.len() {
        all.select_nth_unstable_by(k, by_key);
        all.truncate(k);
    }
    all.sort_unstable_by(by_key);
    all.into_iter().map(|(d, i)| (i, d.sqrt())).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mismatch {
    pub query: usize,
    pub detail: String,
}

fn close(a: f32, b: f32) -> bool {
    a == b || (a - b).abs() <= KNN_RELATIVE_TOLERANCE * a.abs().max(b.abs())
}

/// Queries whose hit set differs from the brute-force scan.
pub fn compare_spatial(points: &[Point], queries: &[SpatialQuery], results: &ResultSet) -> Vec<Mismatch> {
    if results.query_count() != queries.len() || !results.is_well_formed() {
        return vec![Mismatch {
            query: 0,
            detail: "malformed result set".into(),
        }];
    }
    queries
        .iter()
        .enumerate()
        .filter_map(|(q, query)| {
            let mut got = results.get(q).to_vec();
            got.sort_unstable();
            let want = brute_radius(points, query);
            (got != want).then(|| Mismatch {
                query: q,
                detail: format!(
                    "got {} hits {:?}, expected {} hits {:?}",
                    got.len(),
                    head(&got),
                    want.len(),
                    head(&want)
                ),
            })
        })
        .collect()
}

/// Queries whose neighbors disagree with the brute-force scan.
///
/// Distance lists must agree within [`KNN_RELATIVE_TOLERANCE`]. Each reported
/// ordinal must be unique and lie at its reported distance, so any object
/// tied at a distance is accepted in place of another.
pub fn compare_knn(points: &[Point], queries: &[KnnQuery], results: &ResultSet) -> Vec<Mismatch> {
    if results.distances().is_none() {
        return vec![Mismatch {
            query: 0,
            detail: "missing distances".into(),
        }];
    }
    if results.query_count() != queries.len() || !results.is_well_formed() {
        return vec![Mismatch {
            query: 0,
            detail: "malformed result set".into(),
        }];
    }
    let mut out = Vec::new();
    for (q, query) in queries.iter().enumerate() {
        let want = brute_knn(points, query);
        let got = results.get(q);
        let got_d = results.distances_of(q).unwrap_or_default();
        let fail = |detail: String| Mismatch { query: q, detail };
        if got.len() != want.len() {
            out.push(fail(format!("got {} neighbors, expected {}", got.len(), want.len())));
            continue;
        }
        if let Some(i) = (0..got.len()).find(|&i| !close(got_d[i], want[i].1)) {
            out.push(fail(format!(
                "rank {i}: distance {} vs expected {}",
                got_d[i], want[i].1
            )));
            continue;
        }
        let mut seen: Vec<u32> = got.to_vec();
        seen.sort_unstable();
        if seen.windows(2).any(|w| w[0] == w[1]) || seen.last().is_some_and(|&o| o as usize >= points.len()) {
            out.push(fail(format!("repeated or invalid ordinal in {:?}", head(got))));
            continue;
        }
        let c = query.center();
        if let Some(i) = (0..got.len()).find(|&i| !close(points[got[i] as usize].distance_sq(&c).sqrt(), got_d[i])) {
            out.push(fail(format!(
                "rank {i}: ordinal {} is not at reported distance {}",
                got[i], got_d[i]
            )));
        }
    }
    out
}

/// Orders `(ordinal, distance)` pairs the same way the traversal does.
pub fn knn_order(a: &(u32, f32), b: &(u32, f32)) -> Ordering {
    a.1.total_cmp(&b.1).then(a.0.cmp(&b.0))
}

fn head(v: &[u32]) -> &[u32] {
    &v[..v.len().min(8)]
}
