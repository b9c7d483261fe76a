//! Linear BVH construction.
//!
//! Objects are keyed by the Morton code of their centroid, sorted, and the
//! binary radix tree over the sorted keys is generated with every internal
//! node computed independently. Internal boxes are then filled bottom-up.
//!
//! Node layout is one flat array: internal nodes at `0..n-1`, leaves at
//! `n-1..2n-1` in sorted order. The root is always ordinal 0, which is the
//! single leaf when `n == 1`.

use std::sync::atomic::{AtomicU32, Ordering};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{scene_bounds, Aabb, Point};
use crate::morton::{assign_keys, sort_by_key, MortonKey};

const LEAF: u32 = u32::MAX;
const MAX_OBJECTS: usize = (u32::MAX / 2) as usize;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Node {
    bounds: Aabb,
    left: u32,
    right: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeKind {
    /// Leaf holding the original ordinal of its object.
    Leaf {
        object: u32,
    },
    Internal {
        left: u32,
        right: u32,
    },
}

impl Node {
    fn leaf(bounds: Aabb, object: u32) -> Self {
        Node {
            bounds,
            left: object,
            right: LEAF,
        }
    }

    #[inline]
    pub fn bounds(&self) -> &Aabb {
        &self.bounds
    }

    #[inline]
    pub fn is_leaf(&self) -> bool {
        self.right == LEAF
    }

    #[inline]
    pub fn kind(&self) -> NodeKind {
        if self.is_leaf() {
            NodeKind::Leaf { object: self.left }
        } else {
            NodeKind::Internal {
                left: self.left,
                right: self.right,
            }
        }
    }

    /// Object ordinal for leaves, left child ordinal for internal nodes.
    #[inline]
    pub(crate) fn first(&self) -> u32 {
        self.left
    }

    #[inline]
    pub(crate) fn second(&self) -> u32 {
        self.right
    }
}

/// Immutable bounding volume hierarchy over a set of boxes.
#[derive(Clone, Debug, PartialEq)]
pub struct Bvh {
    nodes: Vec<Node>,
    scene: Aabb,
    leaf_count: usize,
}

impl Bvh {
    /// Builds the hierarchy. Runs on the current rayon pool.
    pub fn build(boxes: &[Aabb]) -> Result<Self> {
        if boxes.len() > MAX_OBJECTS {
            return Err(Error::TooManyObjects(boxes.len()));
        }
        let scene = scene_bounds(boxes)?;
        let n = boxes.len();

        let keys = assign_keys(boxes, &scene);
        let order = sort_by_key(&keys);
        let sorted: Vec<MortonKey> = order.par_iter().map(|&p| keys[p]).collect();
        drop(keys);

        let leaves: Vec<Node> = sorted
            .par_iter()
            .map(|k| Node::leaf(boxes[k.index as usize], k.index))
            .collect();
        if n == 1 {
            return Ok(Bvh {
                nodes: leaves,
                scene,
                leaf_count: 1,
            });
        }

        let children = generate_hierarchy(&sorted);
        let bounds = refit(&children, &leaves);

        let mut nodes = Vec::with_capacity(2 * n - 1);
        nodes.par_extend(
            children
                .par_iter()
                .zip(bounds.par_iter())
                .map(|(&(left, right), &b)| Node { bounds: b, left, right }),
        );
        nodes.extend_from_slice(&leaves);
        Ok(Bvh {
            nodes,
            scene,
            leaf_count: n,
        })
    }

    /// Builds over degenerate point boxes.
    pub fn from_points(points: &[Point]) -> Result<Self> {
        let boxes: Vec<Aabb> = points.par_iter().map(|&p| Aabb::from_point(p)).collect();
        Self::build(&boxes)
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn scene(&self) -> &Aabb {
        &self.scene
    }

    pub fn leaf_count(&self) -> usize {
        self.leaf_count
    }

    pub fn internal_count(&self) -> usize {
        self.leaf_count - 1
    }

    pub const fn root(&self) -> u32 {
        0
    }

    /// Number of nodes on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        let mut best = 0;
        let mut stack = vec![(0u32, 1usize)];
        while let Some((i, d)) = stack.pop() {
            match self.nodes[i as usize].kind() {
                NodeKind::Leaf { .. } => best = best.max(d),
                NodeKind::Internal { left, right } => {
                    stack.push((left, d + 1));
                    stack.push((right, d + 1));
                }
            }
        }
        best
    }

    /// Leaf object ordinals in left-to-right (in-order) sequence.
    pub fn leaf_order(&self) -> Vec<u32> {
        let mut out = Vec::with_capacity(self.leaf_count);
        let mut stack = vec![0u32];
        while let Some(i) = stack.pop() {
            match self.nodes[i as usize].kind() {
                NodeKind::Leaf { object } => out.push(object),
                NodeKind::Internal { left, right } => {
                    stack.push(right);
                    stack.push(left);
                }
            }
        }
        out
    }

    /// Checks every structural invariant of the hierarchy and reports the
    /// first violation found.
    pub fn validate(&self) -> std::result::Result<(), String> {
        let n = self.leaf_count;
        if self.nodes.len() != 2 * n - 1 {
            return Err(format!("{} nodes for {} leaves", self.nodes.len(), n));
        }
        let mut in_degree = vec![0u32; self.nodes.len()];
        let mut seen_objects = vec![false; n];
        for (i, node) in self.nodes.iter().enumerate() {
            let is_internal_slot = i < n - 1;
            match node.kind() {
                NodeKind::Leaf { object } => {
                    if is_internal_slot {
                        return Err(format!("leaf in internal slot {i}"));
                    }
                    let o = object as usize;
                    if o >= n || std::mem::replace(&mut seen_objects[o], true) {
                        return Err(format!("leaf {i} holds bad or repeated object {o}"));
                    }
                }
                NodeKind::Internal { left, right } => {
                    if !is_internal_slot {
                        return Err(format!("internal node in leaf slot {i}"));
                    }
                    for c in [left, right] {
                        let c = c as usize;
                        if c == 0 || c >= self.nodes.len() {
                            return Err(format!("node {i} has bad child {c}"));
                        }
                        in_degree[c] += 1;
                        if !node.bounds.contains(&self.nodes[c].bounds) {
                            return Err(format!("node {i} does not contain child {c}"));
                        }
                    }
                }
            }
        }
        if in_degree[0] != 0 {
            return Err("root has a parent".into());
        }
        if let Some(i) = (1..self.nodes.len()).find(|&i| in_degree[i] != 1) {
            return Err(format!("node {i} has in-degree {}", in_degree[i]));
        }
        if self.nodes[0].bounds != self.scene {
            return Err("root box differs from scene bounds".into());
        }
        // In-degree 1 everywhere plus n leaves reached rules out cycles.
        if self.leaf_order().len() != n {
            return Err("not every leaf is reachable from the root".into());
        }
        Ok(())
    }

    #[doc(hidden)]
    /// Shifts every leaf's object to the next leaf. Harness sanity checks use
    /// this to make sure a broken tree is detected.
    pub fn corrupt_for_testing(&mut self) {
        let n = self.leaf_count;
        if n < 2 {
            return;
        }
        let leaves = &mut self.nodes[n - 1..];
        let first = leaves[0].left;
        for i in 0..n - 1 {
            leaves[i].left = leaves[i + 1].left;
        }
        leaves[n - 1].left = first;
    }
}

/// Length of the common prefix of `code ∥ index` for sorted keys `i` and `j`,
/// or -1 when `j` is outside the key range.
#[inline]
pub fn delta(keys: &[MortonKey], i: usize, j: isize) -> i32 {
    if j < 0 || j as usize >= keys.len() {
        return -1;
    }
    (keys[i].packed() ^ keys[j as usize].packed()).leading_zeros() as i32
}

/// Last position of the left half when splitting sorted range `[first, last]`
/// at the highest bit where its end keys differ.
pub fn find_split(keys: &[MortonKey], first: usize, last: usize) -> usize {
    debug_assert!(first < last);
    let node_prefix = delta(keys, first, last as isize);
    let mut split = first;
    let mut step = last - first;
    loop {
        step = step.div_ceil(2);
        let candidate = split + step;
        if candidate < last && delta(keys, first, candidate as isize) > node_prefix {
            split = candidate;
        }
        if step <= 1 {
            break;
        }
    }
    split
}

/// Sorted key range covered by internal node `i`. One end of the range is
/// always `i` itself.
pub fn determine_range(keys: &[MortonKey], i: usize) -> (usize, usize) {
    let n = keys.len();
    debug_assert!(i + 1 < n);
    let ii = i as isize;
    let dir: isize = if delta(keys, i, ii + 1) > delta(keys, i, ii - 1) {
        1
    } else {
        -1
    };
    let min_prefix = delta(keys, i, ii - dir);

    let mut max_len: isize = 2;
    while delta(keys, i, ii + max_len * dir) > min_prefix {
        max_len *= 2;
    }
    let mut len: isize = 0;
    let mut t = max_len / 2;
    while t >= 1 {
        if delta(keys, i, ii + (len + t) * dir) > min_prefix {
            len += t;
        }
        t /= 2;
    }
    let j = (ii + len * dir) as usize;
    (i.min(j), i.max(j))
}

/// Child ordinals of every internal node, using the flat layout described in
/// the module docs. The lower half of each range goes to the left child.
pub fn generate_hierarchy(keys: &[MortonKey]) -> Vec<(u32, u32)> {
    let n = keys.len();
    let leaf_base = n - 1;
    (0..n - 1)
        .into_par_iter()
        .map(|i| {
            let (first, last) = determine_range(keys, i);
            let split = find_split(keys, first, last);
            let left = if split == first { leaf_base + split } else { split };
            let right = if split + 1 == last {
                leaf_base + split + 1
            } else {
                split + 1
            };
            (left as u32, right as u32)
        })
        .collect()
}

struct SharedBounds(*mut Aabb);

// SAFETY: each slot is written by exactly one walker (the second to arrive),
// and readers only touch a slot after observing its writer's release.
unsafe impl Sync for SharedBounds {}
unsafe impl Send for SharedBounds {}

impl SharedBounds {
    fn get(&self) -> *mut Aabb {
        self.0
    }
}

/// Internal-node boxes computed bottom-up.
///
/// Every leaf starts a walk towards the root. At each internal node the first
/// walker to arrive stops; the second knows both children are final, merges
/// them and moves on. Parent links exist only for the duration of this call.
pub fn refit(children: &[(u32, u32)], leaves: &[Node]) -> Vec<Aabb> {
    let internal = children.len();
    debug_assert_eq!(internal + 1, leaves.len());
    let parents: Vec<AtomicU32> = (0..internal + leaves.len()).map(|_| AtomicU32::new(LEAF)).collect();
    children.par_iter().enumerate().for_each(|(i, &(l, r))| {
        parents[l as usize].store(i as u32, Ordering::Relaxed);
        parents[r as usize].store(i as u32, Ordering::Relaxed);
    });
    let parents: Vec<u32> = parents.into_iter().map(AtomicU32::into_inner).collect();

    let mut bounds = vec![leaves[0].bounds; internal];
    let visits: Vec<AtomicU32> = (0..internal).map(|_| AtomicU32::new(0)).collect();
    let shared = SharedBounds(bounds.as_mut_ptr());
    let box_of = |ordinal: u32, out: *const Aabb| -> Aabb {
        let o = ordinal as usize;
        if o >= internal {
            leaves[o - internal].bounds
        } else {
            // SAFETY: o < internal, and the caller has acquired the visit
            // counter that orders this read after the write to slot o.
            unsafe { *out.add(o) }
        }
    };

    (0..leaves.len()).into_par_iter().for_each(|leaf| {
        let mut node = parents[internal + leaf];
        loop {
            let slot = node as usize;
            if visits[slot].fetch_add(1, Ordering::AcqRel) == 0 {
                return;
            }
            let (l, r) = children[slot];
            let ptr = shared.get();
            let merged = box_of(l, ptr).expand(&box_of(r, ptr));
            // SAFETY: only the second visitor of `slot` reaches this point.
            unsafe { *ptr.add(slot) = merged };
            if slot == 0 {
                return;
            }
            node = parents[slot];
        }
    });
    bounds
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(x: f32, y: f32, z: f32) -> Point {
        Point::new(x, y, z).unwrap()
    }

    fn keys(codes: &[u32]) -> Vec<MortonKey> {
        codes
            .iter()
            .enumerate()
            .map(|(i, &code)| MortonKey { code, index: i as u32 })
            .collect()
    }

    // Highest differing bit rule, by exhaustive search over split positions.
    fn split_oracle(k: &[MortonKey], first: usize, last: usize) -> usize {
        let top = 63 - (k[first].packed() ^ k[last].packed()).leading_zeros();
        (first..last)
            .find(|&s| (k[s].packed() >> top) & 1 == 0 && (k[s + 1].packed() >> top) & 1 == 1)
            .unwrap()
    }

    #[test]
    fn delta_examples() {
        let k = keys(&[0b00100, 0b00101]);
        // 32 high bits hold the code; the 5-bit view drops 27 leading zeros
        assert_eq!(delta(&k, 0, 1) - 27, 4);
        let same = vec![MortonKey { code: 9, index: 2 }, MortonKey { code: 9, index: 3 }];
        assert_eq!(delta(&same, 0, 1), 32 + (2u32 ^ 3).leading_zeros() as i32);
        assert_eq!(delta(&k, 0, -1), -1);
        assert_eq!(delta(&k, 0, 2), -1);
    }

    #[test]
    fn find_split_examples() {
        let k = keys(&[0b00100, 0b00101, 0b10000, 0b10001]);
        assert_eq!(find_split(&k, 0, 3), 1);
        assert_eq!(find_split(&keys(&[0, 1]), 0, 1), 0);
        let classic = keys(&[1, 2, 4, 5, 19, 24, 25, 30]);
        assert_eq!(split_oracle(&classic, 0, 7), 3);
        assert_eq!(find_split(&classic, 0, 7), 3);
    }

    #[test]
    fn find_split_matches_oracle_on_all_ranges() {
        let k = keys(&[1, 2, 4, 5, 19, 24, 25, 30, 30, 30, 31, 64, 65, 900]);
        for first in 0..k.len() {
            for last in first + 1..k.len() {
                assert_eq!(
                    find_split(&k, first, last),
                    split_oracle(&k, first, last),
                    "{first}..{last}"
                );
            }
        }
    }

    #[test]
    fn determine_range_examples() {
        let k = keys(&[0, 1, 6, 7]);
        assert_eq!(determine_range(&k, 0), (0, 3));
        let mut rest = vec![determine_range(&k, 1), determine_range(&k, 2)];
        rest.sort();
        assert_eq!(rest, vec![(0, 1), (2, 3)]);
        assert_eq!(determine_range(&keys(&[3, 8]), 0), (0, 1));
        let big = keys(&(0..100).map(|i| i * i).collect::<Vec<_>>());
        assert_eq!(determine_range(&big, 0), (0, 99));
    }

    #[test]
    fn hierarchy_examples() {
        assert_eq!(generate_hierarchy(&keys(&[0, 1])), vec![(1, 2)]);
        // leaves sit at 3..7; node 0 splits into internal nodes 1 and 2
        let h = generate_hierarchy(&keys(&[0, 1, 6, 7]));
        assert_eq!(h, vec![(1, 2), (3, 4), (5, 6)]);
    }

    #[test]
    fn build_sizes() {
        let one = Bvh::build(&[Aabb::from_point(pt(1.0, 2.0, 3.0))]).unwrap();
        assert_eq!((one.leaf_count(), one.internal_count(), one.nodes().len()), (1, 0, 1));
        assert!(one.nodes()[0].is_leaf());
        one.validate().unwrap();

        let eight: Vec<Point> = (0..8).map(|i| pt(i as f32, (i % 3) as f32, 0.0)).collect();
        let t = Bvh::from_points(&eight).unwrap();
        assert_eq!((t.internal_count(), t.leaf_count()), (7, 8));
        t.validate().unwrap();
        assert_eq!(Bvh::build(&[]), Err(Error::EmptyScene));
    }

    #[test]
    fn build_small_squares() {
        let pts = [
            pt(0.0, 0.0, 0.0),
            pt(1.0, 0.0, 0.0),
            pt(0.0, 1.0, 0.0),
            pt(1.0, 1.0, 0.0),
        ];
        let t = Bvh::from_points(&pts).unwrap();
        t.validate().unwrap();
        let root = t.nodes()[0].bounds();
        assert_eq!(*root, Aabb::new(pt(0.0, 0.0, 0.0), pt(1.0, 1.0, 0.0)).unwrap());
    }

    #[test]
    fn refit_examples() {
        let a = Aabb::new(pt(0.0, 0.0, 0.0), pt(1.0, 1.0, 1.0)).unwrap();
        let b = Aabb::new(pt(2.0, 2.0, 2.0), pt(3.0, 3.0, 3.0)).unwrap();
        let t = Bvh::build(&[a, b]).unwrap();
        assert_eq!(
            *t.nodes()[0].bounds(),
            Aabb::new(pt(0.0, 0.0, 0.0), pt(3.0, 3.0, 3.0)).unwrap()
        );

        let pts = [
            pt(0.0, 0.0, 0.0),
            pt(1.0, 0.0, 0.0),
            pt(4.0, 0.0, 0.0),
            pt(5.0, 0.0, 0.0),
        ];
        let t = Bvh::from_points(&pts).unwrap();
        let root = t.nodes()[0].bounds();
        assert_eq!((root.min().x(), root.max().x()), (0.0, 5.0));
        for node in &t.nodes()[..3] {
            let NodeKind::Internal { left, right } = node.kind() else {
                panic!()
            };
            assert!(node.bounds().contains(t.nodes()[left as usize].bounds()));
            assert!(node.bounds().contains(t.nodes()[right as usize].bounds()));
        }
        // left child holds the lower (0,1) pair
        let NodeKind::Internal { left, .. } = t.nodes()[0].kind() else {
            panic!()
        };
        assert_eq!(t.nodes()[left as usize].bounds().max().x(), 1.0);
    }

    #[test]
    fn duplicates_build() {
        let pts = vec![pt(0.5, 0.5, 0.5); 1000];
        let t = Bvh::from_points(&pts).unwrap();
        t.validate().unwrap();
        assert_eq!(t.leaf_order(), (0..1000).collect::<Vec<u32>>());
    }

    #[test]
    fn corrupted_tree_is_detected_by_order() {
        let pts: Vec<Point> = (0..16).map(|i| pt(i as f32, 0.0, 0.0)).collect();
        let mut t = Bvh::from_points(&pts).unwrap();
        let before = t.leaf_order();
        t.corrupt_for_testing();
        assert_ne!(before, t.leaf_order());
    }
}
