use std::collections::{BTreeSet, HashMap};

use super::{EdgeId, EdgeSpec, Graph, NetworkPosition, NetworkVoronoi, Vertex, VertexId};
use crate::geometry::{Point, SiteId};

/// Piece of an original edge kept in a subnetwork.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Piece {
    start: f64,
    end: f64,
    sub_edge: usize,
}

/// The part of a network covered by the Voronoi cells of a set of sites.
///
/// Edges split by an ownership boundary contribute only their owned part;
/// boundary points become vertices with fresh ids above every original id.
#[derive(Debug, Clone)]
pub struct Subnetwork {
    graph: Graph,
    /// Original edge slot -> kept pieces.
    pieces: HashMap<usize, Vec<Piece>>,
    /// Original vertex id -> subnetwork slot.
    kept_vertices: HashMap<VertexId, usize>,
}

impl Subnetwork {
    /// The subnetwork as a graph in its own right (not necessarily connected).
    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn vertex_count(&self) -> usize {
        self.graph.vertices().len()
    }

    pub fn contains_vertex(&self, v: VertexId) -> bool {
        self.kept_vertices.contains_key(&v)
    }

    pub(crate) fn vertex_slot(&self, v: VertexId) -> Option<usize> {
        self.kept_vertices.get(&v).copied()
    }

    /// Search seeds for a position of the full network, or `None` when the
    /// position is not covered by the subnetwork.
    pub(crate) fn seeds(&self, full: &Graph, p: &NetworkPosition) -> Option<Vec<(usize, f64)>> {
        let e = full.check_position(p).ok()?;
        if p.offset == 0.0 {
            return self.vertex_slot(e.u).map(|s| vec![(s, 0.0)]);
        }
        if p.offset == e.length {
            return self.vertex_slot(e.v).map(|s| vec![(s, 0.0)]);
        }
        let slot = full.edge_slot(p.edge)?;
        let piece = self
            .pieces
            .get(&slot)?
            .iter()
            .find(|pc| pc.start <= p.offset && p.offset <= pc.end)?;
        let sub = &self.graph.edges()[piece.sub_edge];
        let a = self.graph.vertex_slot(sub.u)?;
        let b = self.graph.vertex_slot(sub.v)?;
        Some(vec![(a, p.offset - piece.start), (b, piece.end - p.offset)])
    }
}

struct Builder {
    vertices: Vec<Vertex>,
    kept: HashMap<VertexId, usize>,
    next_id: u32,
}

impl Builder {
    fn keep(&mut self, v: Vertex) -> VertexId {
        let vertices = &mut self.vertices;
        self.kept.entry(v.id).or_insert_with(|| {
            vertices.push(v);
            vertices.len() - 1
        });
        v.id
    }

    fn fresh(&mut self, pos: Point) -> VertexId {
        let id = VertexId(self.next_id);
        self.next_id += 1;
        self.keep(Vertex { id, pos })
    }
}

/// Subgraph formed by the cells of `subset` in the network Voronoi diagram.
pub fn restricted_subnetwork(graph: &Graph, nv: &NetworkVoronoi, subset: &[SiteId]) -> Subnetwork {
    let members: BTreeSet<SiteId> = subset.iter().copied().collect();
    let mut b = Builder {
        vertices: Vec::new(),
        kept: HashMap::new(),
        next_id: graph.vertices().iter().map(|v| v.id.0).max().unwrap_or(0) + 1,
    };
    for (slot, v) in graph.vertices().iter().enumerate() {
        if members.contains(&nv.vertex_owner_by_slot(slot)) {
            b.keep(*v);
        }
    }

    let mut edges: Vec<EdgeSpec> = Vec::new();
    let mut pieces: HashMap<usize, Vec<Piece>> = HashMap::new();
    for (slot, e) in graph.edges().iter().enumerate() {
        let vu = *graph.vertex(e.u).expect("endpoint");
        let vv = *graph.vertex(e.v).expect("endpoint");
        // split points of this edge, shared by the segments meeting there
        let mut splits: Vec<(f64, VertexId)> = Vec::new();
        let segments = nv.segments_by_slot(slot);
        for seg in segments
            .iter()
            .filter(|s| members.contains(&s.owner) && s.end > s.start)
        {
            let mut endpoint = |offset: f64, b: &mut Builder| -> VertexId {
                if offset == 0.0 {
                    b.keep(vu)
                } else if offset == e.length {
                    b.keep(vv)
                } else if let Some(&(_, id)) = splits.iter().find(|(o, _)| *o == offset) {
                    id
                } else {
                    let id = b.fresh(vu.pos.lerp(&vv.pos, offset / e.length));
                    splits.push((offset, id));
                    id
                }
            };
            let a = endpoint(seg.start, &mut b);
            let z = endpoint(seg.end, &mut b);
            pieces.entry(slot).or_default().push(Piece {
                start: seg.start,
                end: seg.end,
                sub_edge: edges.len(),
            });
            edges.push(EdgeSpec {
                id: EdgeId(edges.len() as u32),
                u: a,
                v: z,
                length: Some(seg.end - seg.start),
            });
        }
    }

    let Builder { vertices, kept, .. } = b;
    let graph = if vertices.is_empty() {
        // only reachable with an empty subset
        Graph::assemble(
            vec![Vertex {
                id: VertexId(u32::MAX),
                pos: Point::default(),
            }],
            vec![],
        )
    } else {
        Graph::assemble(vertices, edges)
    }
    .expect("pieces of a valid graph form a valid graph");
    Subnetwork {
        graph,
        pieces,
        kept_vertices: kept,
    }
}
