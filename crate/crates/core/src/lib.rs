//! Linear bounding volume hierarchy over 3-D axis-aligned boxes.
//!
//! Construction sorts objects along a Morton (Z-order) curve and builds the
//! binary radix tree over the sorted codes with every internal node computed
//! independently, then fills internal boxes bottom-up. Queries run in
//! batches, one worker per query, and return compressed-sparse-row output.
//!
//! All parallel work runs on the current rayon thread pool; results do not
//! depend on the number of threads.
//!
//! ```
//! use lbvh::{Bvh, Point, QueryOptions, SpatialQuery};
//!
//! let points: Vec<Point> = (0..4).map(|i| Point::new(i as f32, 0.0, 0.0).unwrap()).collect();
//! let tree = Bvh::from_points(&points).unwrap();
//! let queries = [SpatialQuery::new(Point::ORIGIN, 1.5).unwrap()];
//! let (results, _) = tree.query_spatial(&queries, &QueryOptions::default()).unwrap();
//! let mut hits = results.get(0).to_vec();
//! hits.sort();
//! assert_eq!(hits, [0, 1]);
//! ```

pub mod bvh;
pub mod cloud_io;
pub mod datasets;
mod error;
pub mod geometry;
pub mod morton;
pub mod oracle;
pub mod traversal;

pub use bvh::{Bvh, Node, NodeKind};
pub use datasets::{default_radius, CloudKind, CloudSpec, Shape, Variant};
pub use error::{Error, Result};
pub use geometry::{scene_bounds, Aabb, Point};
pub use morton::MortonKey;
pub use traversal::{
    query_knn, query_spatial_1p, query_spatial_2p, traverse_knn_one, traverse_spatial_one, Allocation, KnnQuery,
    OnePassOutput, QueryOptions, ResultSet, SpatialQuery,
};
