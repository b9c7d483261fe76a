//! Batched spatial (within-radius) and k-nearest-neighbor queries.
//!
//! Each query is traversed by exactly one worker with an explicit, fixed-size
//! stack. Batched results come back in CSR form: `offsets` has one entry per
//! query plus one, and the hits of query `q` are
//! `indices[offsets[q]..offsets[q + 1]]`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rayon::prelude::*;

use crate::bvh::Bvh;
use crate::error::{Error, Result};
use crate::geometry::{Aabb, Point};
use crate::morton::{morton_code, sort_by_key, MortonKey};

pub const STACK_CAPACITY: usize = 64;

/// Queries handed to one worker at a time.
const MIN_CHUNK: usize = 64;

/// All objects whose box lies within `radius` of `center` (inclusive).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpatialQuery {
    center: Point,
    radius: f32,
}

impl SpatialQuery {
    pub fn new(center: Point, radius: f32) -> Result<Self> {
        if radius.is_finite() && radius >= 0.0 {
            Ok(SpatialQuery { center, radius })
        } else {
            Err(Error::InvalidRadius(radius))
        }
    }

    pub fn center(&self) -> Point {
        self.center
    }

    pub fn radius(&self) -> f32 {
        self.radius
    }
}

/// The `k` objects closest to `center`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KnnQuery {
    center: Point,
    k: usize,
}

impl KnnQuery {
    pub fn new(center: Point, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::ZeroK);
        }
        Ok(KnnQuery { center, k })
    }

    pub fn center(&self) -> Point {
        self.center
    }

    pub fn k(&self) -> usize {
        self.k
    }
}

/// Compressed-sparse-row query output.
#[derive(Clone, Debug, PartialEq)]
pub struct ResultSet {
    offsets: Vec<usize>,
    indices: Vec<u32>,
    distances: Option<Vec<f32>>,
}

impl ResultSet {
    fn empty_for(queries: usize) -> Self {
        ResultSet {
            offsets: vec![0; queries + 1],
            indices: Vec::new(),
            distances: None,
        }
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    /// Distances aligned with [`indices`](Self::indices); only present for
    /// nearest-neighbor results.
    pub fn distances(&self) -> Option<&[f32]> {
        self.distances.as_deref()
    }

    pub fn query_count(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn count(&self, q: usize) -> usize {
        self.offsets[q + 1] - self.offsets[q]
    }

    pub fn get(&self, q: usize) -> &[u32] {
        &self.indices[self.offsets[q]..self.offsets[q + 1]]
    }

    pub fn distances_of(&self, q: usize) -> Option<&[f32]> {
        self.distances
            .as_ref()
            .map(|d| &d[self.offsets[q]..self.offsets[q + 1]])
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[u32]> + '_ {
        self.offsets.windows(2).map(|w| &self.indices[w[0]..w[1]])
    }

    /// Per-query hits sorted ascending, for order-insensitive comparisons.
    pub fn canonical(&self) -> Vec<Vec<u32>> {
        self.iter()
            .map(|s| {
                let mut v = s.to_vec();
                v.sort_unstable();
                v
            })
            .collect()
    }

    /// Checks the CSR invariants.
    pub fn is_well_formed(&self) -> bool {
        self.offsets.first() == Some(&0)
            && self.offsets.windows(2).all(|w| w[0] <= w[1])
            && self.offsets.last() == Some(&self.indices.len())
            && self.distances.as_ref().is_none_or(|d| d.len() == self.indices.len())
    }
}

/// Offsets for the given per-item counts: a leading 0 followed by running sums.
pub fn exclusive_scan(counts: &[usize]) -> Vec<usize> {
    let mut offsets = Vec::with_capacity(counts.len() + 1);
    let mut total = 0;
    offsets.push(0);
    for &c in counts {
        total += c;
        offsets.push(total);
    }
    offsets
}

/// Fixed-capacity LIFO of `(node, squared distance)` entries.
pub struct TraversalStack {
    entries: [(u32, f32); STACK_CAPACITY],
    len: usize,
}

impl Default for TraversalStack {
    fn default() -> Self {
        TraversalStack {
            entries: [(0, 0.0); STACK_CAPACITY],
            len: 0,
        }
    }
}

impl TraversalStack {
    #[inline]
    pub fn push(&mut self, node: u32, dist_sq: f32) -> Result<()> {
        if self.len == STACK_CAPACITY {
            return Err(Error::StackExhausted);
        }
        self.entries[self.len] = (node, dist_sq);
        self.len += 1;
        Ok(())
    }

    #[inline]
    pub fn pop(&mut self) -> Option<(u32, f32)> {
        if self.len == 0 {
            None
        } else {
            self.len -= 1;
            Some(self.entries[self.len])
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
}

/// Feeds every object within the query radius to `sink` once and returns how
/// many were found. Delivery order is unspecified.
pub fn traverse_spatial_one(tree: &Bvh, q: &SpatialQuery, mut sink: impl FnMut(u32)) -> Result<usize> {
    let nodes = tree.nodes();
    let center = q.center;
    let r2 = q.radius * q.radius;
    let root = &nodes[0];
    if root.bounds().distance_sq(&center) > r2 {
        return Ok(0);
    }
    if root.is_leaf() {
        sink(root.first());
        return Ok(1);
    }

    let mut count = 0;
    let mut stack = TraversalStack::default();
    stack.push(0, 0.0)?;
    while let Some((node, _)) = stack.pop() {
        let node = &nodes[node as usize];
        for child in [node.first(), node.second()] {
            let c = &nodes[child as usize];
            if c.bounds().distance_sq(&center) <= r2 {
                if c.is_leaf() {
                    sink(c.first());
                    count += 1;
                } else {
                    stack.push(child, 0.0)?;
                }
            }
        }
    }
    Ok(count)
}

#[derive(Clone, Copy, Debug)]
struct Candidate {
    dist_sq: f32,
    object: u32,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist_sq
            .total_cmp(&other.dist_sq)
            .then(self.object.cmp(&other.object))
    }
}

/// Bounded max-heap of the best candidates seen so far.
struct Nearest {
    heap: BinaryHeap<Candidate>,
    k: usize,
}

impl Nearest {
    fn new(k: usize) -> Self {
        Nearest {
            heap: BinaryHeap::with_capacity(k + 1),
            k,
        }
    }

    fn reset(&mut self, k: usize) {
        self.heap.clear();
        self.k = k;
    }

    /// Squared distance a subtree must not exceed to still matter.
    #[inline]
    fn bound(&self) -> f32 {
        if self.heap.len() < self.k {
            f32::INFINITY
        } else {
            self.heap.peek().map_or(f32::INFINITY, |c| c.dist_sq)
        }
    }

    #[inline]
    fn offer(&mut self, c: Candidate) {
        if self.heap.len() < self.k {
            self.heap.push(c);
        } else if let Some(mut worst) = self.heap.peek_mut() {
            if c < *worst {
                *worst = c;
            }
        }
    }

    fn drain_sorted(&mut self, out: &mut Vec<Candidate>) {
        out.clear();
        out.extend(self.heap.drain());
        out.sort_unstable();
    }
}

fn knn_search(tree: &Bvh, center: &Point, best: &mut Nearest) -> Result<()> {
    let nodes = tree.nodes();
    let root = &nodes[0];
    let root_dist = root.bounds().distance_sq(center);
    if root.is_leaf() {
        best.offer(Candidate {
            dist_sq: root_dist,
            object: root.first(),
        });
        return Ok(());
    }

    let mut stack = TraversalStack::default();
    stack.push(0, root_dist)?;
    while let Some((node, dist_sq)) = stack.pop() {
        // Ties are kept: an equally distant object with a smaller ordinal can
        // still displace the current worst.
        if dist_sq > best.bound() {
            continue;
        }
        let node = &nodes[node as usize];
        let (a, b) = (node.first(), node.second());
        let (na, nb) = (&nodes[a as usize], &nodes[b as usize]);
        let (da, db) = (na.bounds().distance_sq(center), nb.bounds().distance_sq(center));
        // The closer child goes on the stack last so it is visited first.
        let (near, d_near, far, d_far) = if da <= db { (a, da, b, db) } else { (b, db, a, da) };
        for (child, d) in [(far, d_far), (near, d_near)] {
            let c = &nodes[child as usize];
            if c.is_leaf() {
                best.offer(Candidate {
                    dist_sq: d,
                    object: c.first(),
                });
            } else if d <= best.bound() {
                stack.push(child, d)?;
            }
        }
    }
    Ok(())
}

/// The `min(k, n)` closest objects as `(ordinal, distance)`, sorted by
/// distance and then ordinal.
pub fn traverse_knn_one(tree: &Bvh, q: &KnnQuery) -> Result<Vec<(u32, f32)>> {
    let mut best = Nearest::new(q.k.min(tree.leaf_count()));
    knn_search(tree, &q.center, &mut best)?;
    let mut sorted = Vec::new();
    best.drain_sorted(&mut sorted);
    Ok(sorted.into_iter().map(|c| (c.object, c.dist_sq.sqrt())).collect())
}

/// Order in which to process query points: Morton order of the centers
/// within `scene`, ties broken by position in the batch.
pub fn sort_queries(centers: &[Point], scene: &Aabb) -> Vec<usize> {
    let keys: Vec<MortonKey> = centers
        .par_iter()
        .enumerate()
        .map(|(i, c)| MortonKey {
            code: morton_code(c, scene),
            index: i as u32,
        })
        .collect();
    sort_by_key(&keys)
}

fn processing_order(tree: &Bvh, centers: impl Fn(usize) -> Point + Sync, count: usize, sort: bool) -> Vec<usize> {
    if sort {
        let centers: Vec<Point> = (0..count).into_par_iter().map(&centers).collect();
        sort_queries(&centers, tree.scene())
    } else {
        (0..count).collect()
    }
}

/// Splits `data` into the per-query spans described by `offsets` and lists
/// them in processing order.
fn spans_in_order<'a, T>(data: &'a mut [T], offsets: &[usize], order: &[usize]) -> Vec<(usize, &'a mut [T])> {
    let mut spans: Vec<Option<&'a mut [T]>> = split_spans(data, offsets).into_iter().map(Some).collect();
    order
        .iter()
        .map(|&q| (q, spans[q].take().expect("order is a permutation")))
        .collect()
}

fn count_pass(tree: &Bvh, queries: &[SpatialQuery], order: &[usize]) -> Result<Vec<usize>> {
    let in_order: Vec<usize> = order
        .par_iter()
        .with_min_len(MIN_CHUNK)
        .map(|&q| traverse_spatial_one(tree, &queries[q], |_| {}))
        .collect::<Result<_>>()?;
    let mut counts = vec![0; queries.len()];
    for (&q, c) in order.iter().zip(in_order) {
        counts[q] = c;
    }
    Ok(counts)
}

fn fill_pass(tree: &Bvh, queries: &[SpatialQuery], order: &[usize], counts: &[usize]) -> Result<ResultSet> {
    let offsets = exclusive_scan(counts);
    let mut indices = vec![0u32; offsets[queries.len()]];
    spans_in_order(&mut indices, &offsets, order)
        .into_par_iter()
        .with_min_len(MIN_CHUNK)
        .try_for_each(|(q, span)| {
            let mut written = 0;
            traverse_spatial_one(tree, &queries[q], |obj| {
                span[written] = obj;
                written += 1;
            })
            .map(|found| debug_assert_eq!(found, span.len()))
        })?;
    Ok(ResultSet {
        offsets,
        indices,
        distances: None,
    })
}

/// Two-pass spatial search: count every query's hits, allocate exactly, then
/// traverse again to fill.
pub fn query_spatial_2p(tree: &Bvh, queries: &[SpatialQuery], sort_queries: bool) -> Result<ResultSet> {
    if queries.is_empty() {
        return Ok(ResultSet::empty_for(0));
    }
    let order = processing_order(tree, |q| queries[q].center, queries.len(), sort_queries);
    let counts = count_pass(tree, queries, &order)?;
    fill_pass(tree, queries, &order, &counts)
}

#[derive(Clone, Debug, PartialEq)]
pub struct OnePassOutput {
    pub results: ResultSet,
    /// Some query overflowed its buffer and the two-pass path produced the
    /// results.
    pub fell_back: bool,
}

/// Single-pass spatial search into `buffer_size` preallocated slots per query,
/// compacted afterwards. Falls back to the two-pass fill when any query finds
/// more than `buffer_size` objects.
pub fn query_spatial_1p(
    tree: &Bvh,
    queries: &[SpatialQuery],
    buffer_size: usize,
    sort_queries: bool,
) -> Result<OnePassOutput> {
    if buffer_size == 0 {
        return Err(Error::ZeroBufferSize);
    }
    if queries.is_empty() {
        return Ok(OnePassOutput {
            results: ResultSet::empty_for(0),
            fell_back: false,
        });
    }
    let m = queries.len();
    let order = processing_order(tree, |q| queries[q].center, m, sort_queries);

    let mut buffer = vec![0u32; m * buffer_size];
    let slot_offsets: Vec<usize> = (0..=m).map(|q| q * buffer_size).collect();
    let found: Vec<(usize, usize)> = spans_in_order(&mut buffer, &slot_offsets, &order)
        .into_par_iter()
        .with_min_len(MIN_CHUNK)
        .map(|(q, slots)| {
            let mut stored = 0;
            let count = traverse_spatial_one(tree, &queries[q], |obj| {
                if stored < slots.len() {
                    slots[stored] = obj;
                    stored += 1;
                }
            })?;
            Ok((q, count))
        })
        .collect::<Result<_>>()?;
    let mut counts = vec![0; m];
    for (q, c) in found {
        counts[q] = c;
    }

    if counts.iter().any(|&c| c > buffer_size) {
        drop(buffer);
        // Counts from the buffered pass are exact, so only the fill remains.
        let results = fill_pass(tree, queries, &order, &counts)?;
        return Ok(OnePassOutput {
            results,
            fell_back: true,
        });
    }

    let offsets = exclusive_scan(&counts);
    let mut indices = vec![0u32; offsets[m]];
    split_spans(&mut indices, &offsets)
        .into_par_iter()
        .zip(buffer.par_chunks(buffer_size))
        .with_min_len(MIN_CHUNK)
        .for_each(|(dst, src)| dst.copy_from_slice(&src[..dst.len()]));
    Ok(OnePassOutput {
        results: ResultSet {
            offsets,
            indices,
            distances: None,
        },
        fell_back: false,
    })
}

/// Batched nearest-neighbor search. Every query yields exactly `min(k, n)`
/// results, so storage is allocated once up front.
pub fn query_knn(tree: &Bvh, queries: &[KnnQuery], sort_queries: bool) -> Result<ResultSet> {
    if queries.is_empty() {
        return Ok(ResultSet::empty_for(0));
    }
    let n = tree.leaf_count();
    let counts: Vec<usize> = queries.iter().map(|q| q.k.min(n)).collect();
    let offsets = exclusive_scan(&counts);
    let total = offsets[queries.len()];
    let order = processing_order(tree, |q| queries[q].center, queries.len(), sort_queries);

    let mut indices = vec![0u32; total];
    let mut distances = vec![0f32; total];
    let index_spans = spans_in_order(&mut indices, &offsets, &order);
    let distance_spans = spans_in_order(&mut distances, &offsets, &order);
    index_spans
        .into_par_iter()
        .zip(distance_spans)
        .with_min_len(MIN_CHUNK)
        .try_for_each_init(
            || (Nearest::new(1), Vec::new()),
            |(best, sorted), ((q, idx), (_, dist))| {
                best.reset(idx.len());
                knn_search(tree, &queries[q].center, best)?;
                best.drain_sorted(sorted);
                debug_assert_eq!(sorted.len(), idx.len());
                for ((c, i), d) in sorted.iter().zip(idx.iter_mut()).zip(dist.iter_mut()) {
                    *i = c.object;
                    *d = c.dist_sq.sqrt();
                }
                Ok(())
            },
        )?;
    Ok(ResultSet {
        offsets,
        indices,
        distances: Some(distances),
    })
}

/// How spatial results are allocated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Allocation {
    #[default]
    TwoPass,
    /// Preallocate this many slots per query.
    OnePass { buffer_size: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct QueryOptions {
    pub allocation: Allocation,
    pub sort_queries: bool,
}

impl Default for QueryOptions {
    fn default() -> Self {
        QueryOptions {
            allocation: Allocation::TwoPass,
            sort_queries: true,
        }
    }
}

impl Bvh {
    /// Batched within-radius search. The returned flag is set when a one-pass
    /// buffer overflowed.
    pub fn query_spatial(&self, queries: &[SpatialQuery], options: &QueryOptions) -> Result<(ResultSet, bool)> {
        match options.allocation {
            Allocation::TwoPass => Ok((query_spatial_2p(self, queries, options.sort_queries)?, false)),
            Allocation::OnePass { buffer_size } => {
                let out = query_spatial_1p(self, queries, buffer_size, options.sort_queries)?;
                Ok((out.results, out.fell_back))
            }
        }
    }

    pub fn query_knn(&self, queries: &[KnnQuery], sort_queries: bool) -> Result<ResultSet> {
        query_knn(self, queries, sort_queries)
    }
}

fn split_spans<'a, T>(mut data: &'a mut [T], offsets: &[usize]) -> Vec<&'a mut [T]> {
    let mut spans = Vec::with_capacity(offsets.len().saturating_sub(1));
    for w in offsets.windows(2) {
        let (head, tail) = std::mem::take(&mut data).split_at_mut(w[1] - w[0]);
        spans.push(head);
        data = tail;
    }
    spans
}
