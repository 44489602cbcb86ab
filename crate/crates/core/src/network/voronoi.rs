use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::sync::atomic::{AtomicU64, Ordering as AtomicOrdering};

use serde::{Deserialize, Serialize};

use super::{approx_eq, EdgeId, Graph, NetworkError, NetworkPosition, VertexId};
use crate::geometry::SiteId;

static BUILDS: AtomicU64 = AtomicU64::new(0);

/// Number of [`NetworkVoronoi`] constructions performed by this process.
pub fn network_voronoi_builds() -> u64 {
    BUILDS.load(AtomicOrdering::Relaxed)
}

/// Part of an edge owned by one site, as offsets from the edge's `u` end.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeSegment {
    pub start: f64,
    pub end: f64,
    pub owner: SiteId,
}

#[derive(Debug, Clone, Copy)]
struct Item {
    d: f64,
    owner: SiteId,
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

impl Ord for Item {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .d
            .total_cmp(&self.d)
            .then(other.owner.cmp(&self.owner))
            .then(other.slot.cmp(&self.slot))
    }
}

/// Order-1 network Voronoi diagram: every point of every edge is labeled
/// with its nearest site (ties to the lower id).
#[derive(Debug, Clone)]
pub struct NetworkVoronoi {
    sites: Vec<SiteId>,
    vertex_owner: Vec<SiteId>,
    vertex_dist: Vec<f64>,
    labels: Vec<Vec<EdgeSegment>>,
    adjacency: BTreeMap<SiteId, Vec<SiteId>>,
    boundaries: BTreeMap<(SiteId, SiteId), NetworkPosition>,
}

impl NetworkVoronoi {
    /// Labels the network by simultaneous expansion from all sites.
    pub fn build(graph: &Graph, sites: &[VertexId]) -> Result<Self, NetworkError> {
        if sites.is_empty() {
            return Err(NetworkError::NoSites);
        }
        let n = graph.vertices().len();
        let mut dist = vec![f64::INFINITY; n];
        let mut owner = vec![SiteId(u32::MAX); n];
        let mut done = vec![false; n];
        let mut heap = BinaryHeap::new();
        let mut site_ids = Vec::with_capacity(sites.len());
        for &v in sites {
            let slot = graph
                .vertex_slot(v)
                .ok_or(NetworkError::SiteNotVertex(v.site()))?;
            dist[slot] = 0.0;
            owner[slot] = v.site();
            heap.push(Item {
                d: 0.0,
                owner: v.site(),
                slot,
            });
            site_ids.push(v.site());
        }
        site_ids.sort_unstable();
        site_ids.dedup();

        while let Some(Item { d, owner: o, slot }) = heap.pop() {
            if done[slot] || d > dist[slot] || (d == dist[slot] && o != owner[slot]) {
                continue;
            }
            done[slot] = true;
            for &(next, e) in graph.adjacency(slot) {
                let nd = d + graph.edges()[e].length;
                if nd < dist[next] || (nd == dist[next] && o < owner[next]) {
                    dist[next] = nd;
                    owner[next] = o;
                    heap.push(Item {
                        d: nd,
                        owner: o,
                        slot: next,
                    });
                }
            }
        }

        // Distances equal within tolerance but reached through different
        // summation orders: hand the vertex to the lower id.
        loop {
            let mut changed = false;
            for slot in 0..n {
                for &(next, e) in graph.adjacency(slot) {
                    let via = dist[next] + graph.edges()[e].length;
                    if owner[next] < owner[slot] && approx_eq(via, dist[slot]) {
                        owner[slot] = owner[next];
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }

        let mut labels = Vec::with_capacity(graph.edges().len());
        let mut pairs: BTreeMap<(SiteId, SiteId), NetworkPosition> = BTreeMap::new();
        let mut adjacency: BTreeMap<SiteId, BTreeSet<SiteId>> =
            site_ids.iter().map(|&s| (s, BTreeSet::new())).collect();
        for edge in graph.edges() {
            let su = graph.vertex_slot(edge.u).expect("edge endpoints exist");
            let sv = graph.vertex_slot(edge.v).expect("edge endpoints exist");
            let (ou, ov) = (owner[su], owner[sv]);
            let (du, dv) = (dist[su], dist[sv]);
            let len = edge.length;
            let segments = if ou == ov || approx_eq(dv, du + len) {
                vec![EdgeSegment {
                    start: 0.0,
                    end: len,
                    owner: ou,
                }]
            } else if approx_eq(du, dv + len) {
                vec![EdgeSegment {
                    start: 0.0,
                    end: len,
                    owner: ov,
                }]
            } else {
                let split = ((dv + len - du) / 2.0).clamp(0.0, len);
                vec![
                    EdgeSegment {
                        start: 0.0,
                        end: split,
                        owner: ou,
                    },
                    EdgeSegment {
                        start: split,
                        end: len,
                        owner: ov,
                    },
                ]
            };

            let mut chain: Vec<(SiteId, f64)> = vec![(ou, 0.0)];
            for (i, s) in segments.iter().enumerate() {
                let at = if i == 0 { 0.0 } else { s.start };
                chain.push((s.owner, at));
            }
            chain.push((ov, len));
            for w in chain.windows(2) {
                let (a, _) = w[0];
                let (b, at) = w[1];
                if a == b {
                    continue;
                }
                adjacency.entry(a).or_default().insert(b);
                adjacency.entry(b).or_default().insert(a);
                let key = if a < b { (a, b) } else { (b, a) };
                pairs.entry(key).or_insert(NetworkPosition {
                    edge: edge.id,
                    offset: at,
                });
            }
            labels.push(segments);
        }

        BUILDS.fetch_add(1, AtomicOrdering::Relaxed);
        Ok(Self {
            sites: site_ids,
            vertex_owner: owner,
            vertex_dist: dist,
            labels,
            adjacency: adjacency
                .into_iter()
                .map(|(k, v)| (k, v.into_iter().collect()))
                .collect(),
            boundaries: pairs,
        })
    }

    /// Site ids (equal to their host vertex ids), ascending.
    pub fn sites(&self) -> &[SiteId] {
        &self.sites
    }

    pub fn is_site(&self, id: SiteId) -> bool {
        self.sites.binary_search(&id).is_ok()
    }

    pub fn neighbors(&self, id: SiteId) -> Result<&[SiteId], NetworkError> {
        self.adjacency
            .get(&id)
            .map(Vec::as_slice)
            .ok_or(NetworkError::SiteNotVertex(id))
    }

    /// Adjacent pairs `(a, b)`, `a < b`, with their equidistant boundary point.
    pub fn boundaries(&self) -> &BTreeMap<(SiteId, SiteId), NetworkPosition> {
        &self.boundaries
    }

    pub fn segments(&self, graph: &Graph, edge: EdgeId) -> Result<&[EdgeSegment], NetworkError> {
        let slot = graph
            .edge_slot(edge)
            .ok_or(NetworkError::UnknownEdge(edge))?;
        Ok(&self.labels[slot])
    }

    pub(crate) fn segments_by_slot(&self, slot: usize) -> &[EdgeSegment] {
        &self.labels[slot]
    }

    pub fn vertex_owner(&self, graph: &Graph, v: VertexId) -> Result<SiteId, NetworkError> {
        let slot = graph.vertex_slot(v).ok_or(NetworkError::UnknownVertex(v))?;
        Ok(self.vertex_owner[slot])
    }

    pub(crate) fn vertex_owner_by_slot(&self, slot: usize) -> SiteId {
        self.vertex_owner[slot]
    }

    /// Distance from a vertex to its owner.
    pub fn vertex_distance(&self, graph: &Graph, v: VertexId) -> Result<f64, NetworkError> {
        let slot = graph.vertex_slot(v).ok_or(NetworkError::UnknownVertex(v))?;
        Ok(self.vertex_dist[slot])
    }

    /// Owner of an arbitrary network position.
    pub fn owner_at(&self, graph: &Graph, p: &NetworkPosition) -> Result<SiteId, NetworkError> {
        let edge = graph.check_position(p)?;
        if p.offset == 0.0 {
            return self.vertex_owner(graph, edge.u);
        }
        if p.offset == edge.length {
            return self.vertex_owner(graph, edge.v);
        }
        let slot = graph.edge_slot(p.edge).expect("checked");
        self.labels[slot]
            .iter()
            .filter(|s| s.start <= p.offset && p.offset <= s.end)
            .map(|s| s.owner)
            .min()
            .ok_or(NetworkError::InvalidOffset {
                edge: p.edge,
                offset: p.offset,
                length: edge.length,
            })
    }
}
