//! Static kd-tree with best-first k-nearest search.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use super::{DistanceKey, Point, Site};

const LEAF_SIZE: usize = 8;

#[derive(Debug, Clone, Copy)]
struct BBox {
    min: Point,
    max: Point,
}

impl BBox {
    fn of(sites: &[Site], slots: &[usize]) -> Self {
        let mut min = Point::new(f64::INFINITY, f64::INFINITY);
        let mut max = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for &s in slots {
            let p = sites[s].pos;
            min.x = min.x.min(p.x);
            min.y = min.y.min(p.y);
            max.x = max.x.max(p.x);
            max.y = max.y.max(p.y);
        }
        Self { min, max }
    }

    fn min_dist2(&self, q: &Point) -> f64 {
        let dx = (self.min.x - q.x).max(0.0).max(q.x - self.max.x);
        let dy = (self.min.y - q.y).max(0.0).max(q.y - self.max.y);
        dx * dx + dy * dy
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf { start: usize, end: usize },
    Inner { left: usize, right: usize },
}

#[derive(Debug, Clone)]
pub(crate) struct KdTree {
    nodes: Vec<(BBox, Node)>,
    order: Vec<usize>,
}

impl KdTree {
    pub(crate) fn build(sites: &[Site]) -> Self {
        let mut tree = KdTree {
            nodes: Vec::new(),
            order: (0..sites.len()).collect(),
        };
        if !sites.is_empty() {
            tree.build_node(sites, 0, sites.len());
        }
        tree
    }

    fn build_node(&mut self, sites: &[Site], start: usize, end: usize) -> usize {
        let bbox = BBox::of(sites, &self.order[start..end]);
        let idx = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push((bbox, Node::Leaf { start, end }));
            return idx;
        }
        self.nodes.push((bbox, Node::Leaf { start, end }));
        let split_x = bbox.max.x - bbox.min.x >= bbox.max.y - bbox.min.y;
        let mid = start + (end - start) / 2;
        let axis = |s: &Site| if split_x { s.pos.x } else { s.pos.y };
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            axis(&sites[a])
                .total_cmp(&axis(&sites[b]))
                .then(sites[a].id.cmp(&sites[b].id))
        });
        let left = self.build_node(sites, start, mid);
        let right = self.build_node(sites, mid, end);
        self.nodes[idx].1 = Node::Inner { left, right };
        idx
    }

    /// Slots of the `m` nearest sites in ascending [`DistanceKey`] order.
    pub(crate) fn nearest(&self, sites: &[Site], q: &Point, m: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(m);
        if self.nodes.is_empty() || m == 0 {
            return out;
        }
        let mut heap = BinaryHeap::new();
        heap.push(Reverse(Entry::node(self.nodes[0].0.min_dist2(q), 0)));
        while let Some(Reverse(entry)) = heap.pop() {
            match entry.item {
                Item::Site(slot) => {
                    out.push(slot);
                    if out.len() == m {
                        break;
                    }
                }
                Item::Node(n) => match self.nodes[n].1 {
                    Node::Leaf { start, end } => {
                        for &slot in &self.order[start..end] {
                            let key = DistanceKey::new(q, &sites[slot]);
                            heap.push(Reverse(Entry::site(key, slot)));
                        }
                    }
                    Node::Inner { left, right } => {
                        for child in [left, right] {
                            let d2 = self.nodes[child].0.min_dist2(q);
                            heap.push(Reverse(Entry::node(d2, child)));
                        }
                    }
                },
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy)]
enum Item {
    Node(usize),
    Site(usize),
}

// Nodes sort before sites at equal distance so every tied site is in the
// heap before the first of them is emitted.
#[derive(Debug, Clone, Copy)]
struct Entry {
    d2: f64,
    rank: u8,
    id: u32,
    item: Item,
}

impl Entry {
    fn node(d2: f64, n: usize) -> Self {
        Self {
            d2,
            rank: 0,
            id: 0,
            item: Item::Node(n),
        }
    }

    fn site(key: DistanceKey, slot: usize) -> Self {
        Self {
            d2: key.d2,
            rank: 1,
            id: key.id.0,
            item: Item::Site(slot),
        }
    }
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.d2
            .total_cmp(&other.d2)
            .then(self.rank.cmp(&other.rank))
            .then(self.id.cmp(&other.id))
    }
}
