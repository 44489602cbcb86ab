use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::Graph;

#[derive(Debug, Clone, Copy)]
struct Item {
    d: f64,
    slot: usize,
}

impl PartialEq for Item {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Item {}

impl PartialOrd for Item {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

// reversed: BinaryHeap is a max-heap
impl Ord for Item {
    fn cmp(&self, other: &Self) -> Ordering {
        other.d.total_cmp(&self.d).then(other.slot.cmp(&self.slot))
    }
}

/// When a search may stop early.
#[derive(Debug, Clone, Copy)]
pub enum SearchLimit<'a> {
    None,
    /// Stop once every listed vertex slot is settled.
    Targets(&'a [usize]),
}

/// Result of a single-source (or multi-seed) search.
#[derive(Debug, Clone)]
pub struct ShortestPaths {
    dist: Vec<f64>,
    settled: Vec<usize>,
}

impl ShortestPaths {
    /// Distance to a vertex slot; infinite when not reached.
    pub fn distance(&self, slot: usize) -> f64 {
        self.dist[slot]
    }

    /// Slots in the order they were settled.
    pub fn settled(&self) -> &[usize] {
        &self.settled
    }
}

/// Nonnegative-weight shortest paths from `seeds` (vertex slot, initial distance).
pub fn shortest_distances(
    graph: &Graph,
    seeds: &[(usize, f64)],
    limit: SearchLimit<'_>,
) -> ShortestPaths {
    let mut remaining = match limit {
        SearchLimit::None => usize::MAX,
        SearchLimit::Targets(t) => t.len(),
    };
    let mut is_target = Vec::new();
    if let SearchLimit::Targets(t) = limit {
        is_target = vec![false; graph.vertices().len()];
        for &s in t {
            is_target[s] = true;
        }
        remaining = is_target.iter().filter(|&&x| x).count();
    }
    search(graph, seeds, |slot, _| {
        if !is_target.is_empty() && is_target[slot] {
            remaining -= 1;
        }
        remaining > 0
    })
}

/// Dijkstra with a per-settle callback; the search stops when it returns false.
pub(crate) fn search(
    graph: &Graph,
    seeds: &[(usize, f64)],
    mut on_settle: impl FnMut(usize, f64) -> bool,
) -> ShortestPaths {
    let n = graph.vertices().len();
    let mut dist = vec![f64::INFINITY; n];
    let mut done = vec![false; n];
    let mut settled = Vec::new();
    let mut heap = BinaryHeap::new();
    for &(slot, d) in seeds {
        if d < dist[slot] {
            dist[slot] = d;
            heap.push(Item { d, slot });
        }
    }
    while let Some(Item { d, slot }) = heap.pop() {
        if done[slot] || d > dist[slot] {
            continue;
        }
        done[slot] = true;
        settled.push(slot);
        if !on_settle(slot, d) {
            break;
        }
        for &(next, e) in graph.adjacency(slot) {
            let nd = d + graph.edges()[e].length;
            if nd < dist[next] {
                dist[next] = nd;
                heap.push(Item { d: nd, slot: next });
            }
        }
    }
    ShortestPaths { dist, settled }
}
