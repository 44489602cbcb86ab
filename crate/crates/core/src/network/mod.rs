//! Road networks: an undirected planar graph whose data objects sit on
//! vertices, network distances, and the network Voronoi diagram.

mod dijkstra;
mod oracle;
mod subnetwork;
mod voronoi;

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Point, SiteId};

pub(crate) use dijkstra::search;
pub use dijkstra::{shortest_distances, SearchLimit, ShortestPaths};
pub use oracle::{
    order_k_network_cell_oracle, sampled_neighboring_cells, CellSample, SiteDistanceTable,
};
pub use subnetwork::{restricted_subnetwork, Subnetwork};
pub use voronoi::{network_voronoi_builds, EdgeSegment, NetworkVoronoi};

/// Relative tolerance for deciding that two network distances are equal.
pub const DISTANCE_TOLERANCE: f64 = 1e-9;

#[inline]
pub fn approx_eq(a: f64, b: f64) -> bool {
    if a == b {
        return true;
    }
    (a - b).abs() <= DISTANCE_TOLERANCE * a.abs().max(b.abs()).max(1.0)
}

/// Tolerant comparison of `(distance, site id)` keys.
#[inline]
pub fn cmp_keys(a: &NetworkDistanceKey, b: &NetworkDistanceKey) -> Ordering {
    if approx_eq(a.d, b.d) {
        a.id.cmp(&b.id)
    } else {
        a.d.total_cmp(&b.d)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VertexId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EdgeId(pub u32);

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for EdgeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl VertexId {
    /// Data objects on networks are identified by their host vertex.
    pub fn site(self) -> SiteId {
        SiteId(self.0)
    }
}

impl From<SiteId> for VertexId {
    fn from(s: SiteId) -> Self {
        VertexId(s.0)
    }
}

/// Shortest network distance to a site, with the site id breaking ties.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetworkDistanceKey {
    pub d: f64,
    pub id: SiteId,
}

/// Sorts keys ascending, grouping distances within tolerance and ordering
/// each group by id. Avoids handing a non-transitive comparator to `sort`.
pub fn sort_network_keys(keys: &mut [NetworkDistanceKey]) {
    keys.sort_unstable_by(|a, b| a.d.total_cmp(&b.d).then(a.id.cmp(&b.id)));
    let mut start = 0;
    while start < keys.len() {
        let mut end = start + 1;
        while end < keys.len() && approx_eq(keys[end].d, keys[start].d) {
            end += 1;
        }
        if end - start > 1 {
            keys[start..end].sort_unstable_by_key(|k| k.id);
        }
        start = end;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vertex {
    pub id: VertexId,
    pub pos: Point,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub id: EdgeId,
    pub u: VertexId,
    pub v: VertexId,
    pub length: f64,
}

/// Edge as supplied by a caller; a missing length defaults to the Euclidean
/// distance between the endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeSpec {
    pub id: EdgeId,
    pub u: VertexId,
    pub v: VertexId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length: Option<f64>,
}

/// A point on the network: `offset` along `edge`, measured from its `u` end.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkPosition {
    pub edge: EdgeId,
    pub offset: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetworkError {
    #[error("graph has no vertices")]
    Empty,
    #[error("duplicate vertex id {0}")]
    DuplicateVertex(VertexId),
    #[error("duplicate edge id {0}")]
    DuplicateEdge(EdgeId),
    #[error("vertex {0} not found")]
    UnknownVertex(VertexId),
    #[error("edge {0} not found")]
    UnknownEdge(EdgeId),
    #[error("edge {0} is a self-loop")]
    SelfLoop(EdgeId),
    #[error("edge {0} has invalid length {1}")]
    InvalidLength(EdgeId, f64),
    #[error("vertex {0} has a non-finite coordinate")]
    NonFinite(VertexId),
    #[error("graph is disconnected: vertex {0} is unreachable")]
    Disconnected(VertexId),
    #[error("offset {offset} outside edge {edge} of length {length}")]
    InvalidOffset {
        edge: EdgeId,
        offset: f64,
        length: f64,
    },
    #[error("site {0} is not a vertex")]
    SiteNotVertex(SiteId),
    #[error("no sites given")]
    NoSites,
}

/// Undirected road network with positive edge lengths.
#[derive(Debug, Clone)]
pub struct Graph {
    vertices: Vec<Vertex>,
    edges: Vec<Edge>,
    vslot: HashMap<VertexId, usize>,
    eslot: HashMap<EdgeId, usize>,
    /// Per vertex slot: (neighbor slot, edge slot).
    adj: Vec<Vec<(usize, usize)>>,
}

impl Graph {
    /// Validates and builds a connected graph.
    pub fn new(vertices: Vec<Vertex>, edges: Vec<EdgeSpec>) -> Result<Self, NetworkError> {
        let g = Self::assemble(vertices, edges)?;
        if let Some(v) = g.first_unreachable() {
            return Err(NetworkError::Disconnected(v));
        }
        Ok(g)
    }

    /// Same checks as [`Graph::new`] except connectivity.
    pub(crate) fn assemble(
        vertices: Vec<Vertex>,
        edges: Vec<EdgeSpec>,
    ) -> Result<Self, NetworkError> {
        if vertices.is_empty() {
            return Err(NetworkError::Empty);
        }
        let mut vslot = HashMap::with_capacity(vertices.len());
        for (i, v) in vertices.iter().enumerate() {
            if !v.pos.is_finite() {
                return Err(NetworkError::NonFinite(v.id));
            }
            if vslot.insert(v.id, i).is_some() {
                return Err(NetworkError::DuplicateVertex(v.id));
            }
        }
        let mut eslot = HashMap::with_capacity(edges.len());
        let mut adj = vec![Vec::new(); vertices.len()];
        let mut built = Vec::with_capacity(edges.len());
        for (i, e) in edges.iter().enumerate() {
            let su = *vslot.get(&e.u).ok_or(NetworkError::UnknownVertex(e.u))?;
            let sv = *vslot.get(&e.v).ok_or(NetworkError::UnknownVertex(e.v))?;
            if su == sv {
                return Err(NetworkError::SelfLoop(e.id));
            }
            let length = e
                .length
                .unwrap_or_else(|| vertices[su].pos.dist(&vertices[sv].pos));
            if !(length.is_finite() && length > 0.0) {
                return Err(NetworkError::InvalidLength(e.id, length));
            }
            if eslot.insert(e.id, i).is_some() {
                return Err(NetworkError::DuplicateEdge(e.id));
            }
            adj[su].push((sv, i));
            adj[sv].push((su, i));
            built.push(Edge {
                id: e.id,
                u: e.u,
                v: e.v,
                length,
            });
        }
        Ok(Self {
            vertices,
            edges: built,
            vslot,
            eslot,
            adj,
        })
    }

    fn first_unreachable(&self) -> Option<VertexId> {
        let mut seen = vec![false; self.vertices.len()];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(s) = stack.pop() {
            for &(n, _) in &self.adj[s] {
                if !seen[n] {
                    seen[n] = true;
                    stack.push(n);
                }
            }
        }
        seen.iter().position(|s| !s).map(|i| self.vertices[i].id)
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn vertex(&self, id: VertexId) -> Result<&Vertex, NetworkError> {
        self.vslot
            .get(&id)
            .map(|&s| &self.vertices[s])
            .ok_or(NetworkError::UnknownVertex(id))
    }

    pub fn edge(&self, id: EdgeId) -> Result<&Edge, NetworkError> {
        self.eslot
            .get(&id)
            .map(|&s| &self.edges[s])
            .ok_or(NetworkError::UnknownEdge(id))
    }

    pub fn has_vertex(&self, id: VertexId) -> bool {
        self.vslot.contains_key(&id)
    }

    pub(crate) fn vertex_slot(&self, id: VertexId) -> Option<usize> {
        self.vslot.get(&id).copied()
    }

    pub(crate) fn edge_slot(&self, id: EdgeId) -> Option<usize> {
        self.eslot.get(&id).copied()
    }

    pub(crate) fn adjacency(&self, slot: usize) -> &[(usize, usize)] {
        &self.adj[slot]
    }

    /// Shortest edge joining `a` and `b`, if any (lowest id among equals).
    pub fn edge_between(&self, a: VertexId, b: VertexId) -> Option<&Edge> {
        let sa = self.vertex_slot(a)?;
        let sb = self.vertex_slot(b)?;
        self.adj[sa]
            .iter()
            .filter(|(n, _)| *n == sb)
            .map(|&(_, e)| &self.edges[e])
            .min_by(|x, y| x.length.total_cmp(&y.length).then(x.id.cmp(&y.id)))
    }

    pub fn check_position(&self, p: &NetworkPosition) -> Result<&Edge, NetworkError> {
        let e = self.edge(p.edge)?;
        if !(p.offset.is_finite() && p.offset >= 0.0 && p.offset <= e.length) {
            return Err(NetworkError::InvalidOffset {
                edge: e.id,
                offset: p.offset,
                length: e.length,
            });
        }
        Ok(e)
    }

    /// Planar coordinates of a network position, interpolated along the edge.
    pub fn point_at(&self, p: &NetworkPosition) -> Result<Point, NetworkError> {
        let e = self.check_position(p)?;
        let a = self.vertex(e.u)?.pos;
        let b = self.vertex(e.v)?.pos;
        Ok(a.lerp(&b, p.offset / e.length))
    }

    /// Position of a vertex expressed on one of its incident edges.
    pub fn position_of_vertex(&self, id: VertexId) -> Result<NetworkPosition, NetworkError> {
        let slot = self
            .vertex_slot(id)
            .ok_or(NetworkError::UnknownVertex(id))?;
        let &(_, e) = self.adj[slot]
            .iter()
            .min_by_key(|(_, e)| self.edges[*e].id)
            .ok_or(NetworkError::UnknownVertex(id))?;
        let edge = &self.edges[e];
        let offset = if edge.u == id { 0.0 } else { edge.length };
        Ok(NetworkPosition {
            edge: edge.id,
            offset,
        })
    }

    /// Shortest-path length between two positions.
    pub fn network_distance(
        &self,
        a: &NetworkPosition,
        b: &NetworkPosition,
    ) -> Result<f64, NetworkError> {
        let ea = *self.check_position(a)?;
        let eb = *self.check_position(b)?;
        let paths = shortest_distances(self, &self.seeds(a)?, SearchLimit::None);
        let du = paths.distance(self.vslot[&eb.u]);
        let dv = paths.distance(self.vslot[&eb.v]);
        let mut best = (du + b.offset).min(dv + eb.length - b.offset);
        if ea.id == eb.id {
            best = best.min((a.offset - b.offset).abs());
        }
        Ok(best)
    }

    /// Search seeds for a position: both endpoints of its edge.
    pub(crate) fn seeds(&self, p: &NetworkPosition) -> Result<Vec<(usize, f64)>, NetworkError> {
        let e = self.check_position(p)?;
        Ok(vec![
            (self.vslot[&e.u], p.offset),
            (self.vslot[&e.v], e.length - p.offset),
        ])
    }

    /// Splits `edge` at `offset`, inserting a vertex with id `new_vertex`.
    /// The two halves get ids `edge` (from `u`) and `new_edge` (to `v`).
    pub fn split_edge(
        &self,
        edge: EdgeId,
        offset: f64,
        new_vertex: VertexId,
        new_edge: EdgeId,
    ) -> Result<Graph, NetworkError> {
        let e = *self.check_position(&NetworkPosition { edge, offset })?;
        if offset <= 0.0 || offset >= e.length {
            return Err(NetworkError::InvalidOffset {
                edge,
                offset,
                length: e.length,
            });
        }
        if self.has_vertex(new_vertex) {
            return Err(NetworkError::DuplicateVertex(new_vertex));
        }
        if self.eslot.contains_key(&new_edge) {
            return Err(NetworkError::DuplicateEdge(new_edge));
        }
        let pos = self.point_at(&NetworkPosition { edge, offset })?;
        let mut vertices = self.vertices.clone();
        vertices.push(Vertex {
            id: new_vertex,
            pos,
        });
        let mut edges: Vec<EdgeSpec> = self
            .edges
            .iter()
            .filter(|x| x.id != edge)
            .map(|x| EdgeSpec {
                id: x.id,
                u: x.u,
                v: x.v,
                length: Some(x.length),
            })
            .collect();
        edges.push(EdgeSpec {
            id: edge,
            u: e.u,
            v: new_vertex,
            length: Some(offset),
        });
        edges.push(EdgeSpec {
            id: new_edge,
            u: new_vertex,
            v: e.v,
            length: Some(e.length - offset),
        });
        Graph::new(vertices, edges)
    }

    /// Grid graph of `w × h` vertices at unit spacing; ids are row-major.
    pub fn grid(w: u32, h: u32) -> Result<Graph, NetworkError> {
        let mut vertices = Vec::new();
        let mut edges = Vec::new();
        for y in 0..h {
            for x in 0..w {
                vertices.push(Vertex {
                    id: VertexId(y * w + x),
                    pos: Point::new(x as f64, y as f64),
                });
            }
        }
        let mut next = 0;
        for y in 0..h {
            for x in 0..w {
                let id = y * w + x;
                if x + 1 < w {
                    edges.push(EdgeSpec {
                        id: EdgeId(next),
                        u: VertexId(id),
                        v: VertexId(id + 1),
                        length: None,
                    });
                    next += 1;
                }
                if y + 1 < h {
                    edges.push(EdgeSpec {
                        id: EdgeId(next),
                        u: VertexId(id),
                        v: VertexId(id + w),
                        length: None,
                    });
                    next += 1;
                }
            }
        }
        Graph::new(vertices, edges)
    }
}
