//! Brute-force network kNN by per-site distance tables.
//!
//! Deliberately shares no search code with the engines: distances come from
//! a quadratic array-scan Dijkstra rooted at each site, evaluated at query
//! points with the edge-interpolation formula.

use serde::Serialize;

use super::{
    sort_network_keys, Graph, NetworkDistanceKey, NetworkError, NetworkPosition, VertexId,
};
use crate::geometry::SiteId;

/// Network distance from every site to every vertex.
#[derive(Debug, Clone)]
pub struct SiteDistanceTable {
    sites: Vec<SiteId>,
    /// `dist[i][slot]`: distance from `sites[i]` to the vertex at `slot`.
    dist: Vec<Vec<f64>>,
}

impl SiteDistanceTable {
    pub fn new(graph: &Graph, sites: &[SiteId]) -> Result<Self, NetworkError> {
        let mut dist = Vec::with_capacity(sites.len());
        for &s in sites {
            let slot = graph
                .vertex_slot(VertexId::from(s))
                .ok_or(NetworkError::SiteNotVertex(s))?;
            dist.push(array_dijkstra(graph, slot));
        }
        Ok(Self {
            sites: sites.to_vec(),
            dist,
        })
    }

    /// Keys of every site at `p`, ascending.
    pub fn keys_at(
        &self,
        graph: &Graph,
        p: &NetworkPosition,
    ) -> Result<Vec<NetworkDistanceKey>, NetworkError> {
        let e = graph.check_position(p)?;
        let su = graph.vertex_slot(e.u).expect("endpoint");
        let sv = graph.vertex_slot(e.v).expect("endpoint");
        let mut keys: Vec<NetworkDistanceKey> = self
            .sites
            .iter()
            .zip(&self.dist)
            .map(|(&id, d)| NetworkDistanceKey {
                d: (d[su] + p.offset).min(d[sv] + (e.length - p.offset)),
                id,
            })
            .collect();
        sort_network_keys(&mut keys);
        Ok(keys)
    }

    /// The `k` nearest sites at `p`, nearest first.
    pub fn knn_at(
        &self,
        graph: &Graph,
        p: &NetworkPosition,
        k: usize,
    ) -> Result<Vec<SiteId>, NetworkError> {
        Ok(self
            .keys_at(graph, p)?
            .into_iter()
            .take(k)
            .map(|key| key.id)
            .collect())
    }
}

fn array_dijkstra(graph: &Graph, source: usize) -> Vec<f64> {
    let n = graph.vertices().len();
    let mut dist = vec![f64::INFINITY; n];
    let mut done = vec![false; n];
    dist[source] = 0.0;
    for _ in 0..n {
        let mut best = None;
        for i in 0..n {
            if !done[i] && dist[i].is_finite() && best.is_none_or(|b: usize| dist[i] < dist[b]) {
                best = Some(i);
            }
        }
        let Some(u) = best else { break };
        done[u] = true;
        for &(v, e) in graph.adjacency(u) {
            let nd = dist[u] + graph.edges()[e].length;
            if nd < dist[v] {
                dist[v] = nd;
            }
        }
    }
    dist
}

/// One sampled network point and its brute-force kNN set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellSample {
    pub position: NetworkPosition,
    /// Sorted by id.
    pub knn: Vec<SiteId>,
    pub in_cell: bool,
}

fn sorted(mut v: Vec<SiteId>) -> Vec<SiteId> {
    v.sort_unstable();
    v
}

/// Samples every edge at `samples_per_edge` evenly spaced offsets (both ends
/// included) and marks the points whose kNN set, with `k = subset.len()`,
/// equals `subset`.
pub fn order_k_network_cell_oracle(
    graph: &Graph,
    sites: &[SiteId],
    subset: &[SiteId],
    samples_per_edge: usize,
) -> Result<Vec<CellSample>, NetworkError> {
    let table = SiteDistanceTable::new(graph, sites)?;
    cell_samples(graph, &table, subset, samples_per_edge)
}

pub(crate) fn cell_samples(
    graph: &Graph,
    table: &SiteDistanceTable,
    subset: &[SiteId],
    samples_per_edge: usize,
) -> Result<Vec<CellSample>, NetworkError> {
    let k = subset.len();
    let want = sorted(subset.to_vec());
    let steps = samples_per_edge.max(2) - 1;
    let mut out = Vec::with_capacity(graph.edges().len() * (steps + 1));
    for e in graph.edges() {
        for i in 0..=steps {
            let offset = if i == steps {
                e.length
            } else {
                e.length * i as f64 / steps as f64
            };
            let position = NetworkPosition { edge: e.id, offset };
            let knn = sorted(table.knn_at(graph, &position, k)?);
            let in_cell = knn == want;
            out.push(CellSample {
                position,
                knn,
                in_cell,
            });
        }
    }
    Ok(out)
}

/// kNN sets of the order-k cells found directly across the boundary of the
/// cell of `subset`: for each sampled in/out transition along an edge the
/// boundary is bisected and the set just outside it is recorded.
pub fn sampled_neighboring_cells(
    graph: &Graph,
    table: &SiteDistanceTable,
    subset: &[SiteId],
    samples_per_edge: usize,
) -> Result<Vec<Vec<SiteId>>, NetworkError> {
    let k = subset.len();
    let want = sorted(subset.to_vec());
    let samples = cell_samples(graph, table, subset, samples_per_edge)?;
    let mut found: Vec<Vec<SiteId>> = Vec::new();
    for pair in samples.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        if a.position.edge != b.position.edge || a.in_cell == b.in_cell {
            continue;
        }
        let (mut inside, mut outside) = if a.in_cell {
            (a.position.offset, b.position.offset)
        } else {
            (b.position.offset, a.position.offset)
        };
        for _ in 0..60 {
            let mid = 0.5 * (inside + outside);
            if mid == inside || mid == outside {
                break;
            }
            let p = NetworkPosition {
                edge: a.position.edge,
                offset: mid,
            };
            if sorted(table.knn_at(graph, &p, k)?) == want {
                inside = mid;
            } else {
                outside = mid;
            }
        }
        let p = NetworkPosition {
            edge: a.position.edge,
            offset: outside,
        };
        let set = sorted(table.knn_at(graph, &p, k)?);
        if !found.contains(&set) {
            found.push(set);
        }
    }
    Ok(found)
}
