//! Independent oracles shared by the integration tests and the acceptance run.
#![allow(dead_code)]

use insq_core::geometry::{Point, Site, SiteId};
use insq_core::network::{EdgeId, EdgeSpec, Graph, NetworkPosition, Vertex, VertexId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Voronoi adjacency by clipping each bisector with every other site's
/// half-plane. Pairs whose surviving bisector piece is longer than `eps`
/// are neighbors. Unbounded pieces are cut at ±1e6.
pub fn brute_force_adjacency(sites: &[Site], eps: f64) -> Vec<(SiteId, SiteId)> {
    let mut out = Vec::new();
    for i in 0..sites.len() {
        for j in i + 1..sites.len() {
            let (a, b) = (sites[i].pos, sites[j].pos);
            let m = Point::new((a.x + b.x) / 2.0, (a.y + b.y) / 2.0);
            let (dx, dy) = (b.x - a.x, b.y - a.y);
            let norm = (dx * dx + dy * dy).sqrt();
            let d = Point::new(-dy / norm, dx / norm);
            let (mut lo, mut hi) = (-1e6, 1e6);
            for (l, c) in sites.iter().enumerate() {
                if l == i || l == j {
                    continue;
                }
                let c = c.pos;
                // |x - a|^2 <= |x - c|^2  <=>  2 x.(c - a) <= |c|^2 - |a|^2
                let w = Point::new(c.x - a.x, c.y - a.y);
                let coef = 2.0 * (d.x * w.x + d.y * w.y);
                let rhs = (c.x * c.x + c.y * c.y)
                    - (a.x * a.x + a.y * a.y)
                    - 2.0 * (m.x * w.x + m.y * w.y);
                if coef.abs() < 1e-15 {
                    if rhs < 0.0 {
                        hi = lo - 1.0;
                    }
                } else if coef > 0.0 {
                    hi = f64::min(hi, rhs / coef);
                } else {
                    lo = f64::max(lo, rhs / coef);
                }
            }
            if hi - lo > eps {
                let (x, y) = (sites[i].id, sites[j].id);
                out.push((x.min(y), x.max(y)));
            }
        }
    }
    out.sort();
    out
}

pub fn random_sites(n: usize, seed: u64) -> Vec<Site> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| Site::new(i as u32, rng.random::<f64>(), rng.random::<f64>()))
        .collect()
}

/// Plane kNN by full sort, nearest first.
pub fn brute_knn(sites: &[Site], q: &Point, k: usize) -> Vec<SiteId> {
    let mut keyed: Vec<(f64, SiteId)> = sites.iter().map(|s| (q.dist2(&s.pos), s.id)).collect();
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    keyed.into_iter().take(k).map(|(_, id)| id).collect()
}

pub fn sorted(mut v: Vec<SiteId>) -> Vec<SiteId> {
    v.sort_unstable();
    v
}

/// W×H grid with unit spacing and lengths scaled by U(0.75, 1.25).
pub fn perturbed_grid(w: u32, h: u32, seed: u64) -> Graph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = Graph::grid(w, h).unwrap();
    let edges = base
        .edges()
        .iter()
        .map(|e| EdgeSpec {
            id: e.id,
            u: e.u,
            v: e.v,
            length: Some(e.length * rng.random_range(0.75..1.25)),
        })
        .collect();
    Graph::new(base.vertices().to_vec(), edges).unwrap()
}

pub fn random_vertices(graph: &Graph, n: usize, seed: u64) -> Vec<VertexId> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ids: Vec<VertexId> = graph.vertices().iter().map(|v| v.id).collect();
    for i in 0..n {
        let j = rng.random_range(i..ids.len());
        ids.swap(i, j);
    }
    ids.truncate(n);
    ids.sort();
    ids
}

pub fn random_position(graph: &Graph, rng: &mut ChaCha8Rng) -> NetworkPosition {
    let e = &graph.edges()[rng.random_range(0..graph.edges().len())];
    NetworkPosition {
        edge: e.id,
        offset: rng.random::<f64>() * e.length,
    }
}

/// All-pairs vertex distances by Floyd–Warshall, indexed by position in
/// `graph.vertices()`.
pub fn floyd_warshall(graph: &Graph) -> Vec<Vec<f64>> {
    let n = graph.vertices().len();
    let slot = |v: VertexId| graph.vertices().iter().position(|x| x.id == v).unwrap();
    let mut d = vec![vec![f64::INFINITY; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0.0;
    }
    for e in graph.edges() {
        let (a, b) = (slot(e.u), slot(e.v));
        d[a][b] = d[a][b].min(e.length);
        d[b][a] = d[b][a].min(e.length);
    }
    for m in 0..n {
        for i in 0..n {
            for j in 0..n {
                let via = d[i][m] + d[m][j];
                if via < d[i][j] {
                    d[i][j] = via;
                }
            }
        }
    }
    d
}

/// Distance from vertex slot `s` to position `p`, from an all-pairs table.
pub fn table_distance(graph: &Graph, d: &[Vec<f64>], s: usize, p: &NetworkPosition) -> f64 {
    let e = graph.edge(p.edge).unwrap();
    let slot = |v: VertexId| graph.vertices().iter().position(|x| x.id == v).unwrap();
    (d[s][slot(e.u)] + p.offset).min(d[s][slot(e.v)] + e.length - p.offset)
}

pub fn cycle(n: u32, length: f64) -> Graph {
    let vertices = (0..n)
        .map(|i| {
            let a = i as f64 * std::f64::consts::TAU / n as f64;
            Vertex {
                id: VertexId(i),
                pos: Point::new(a.cos(), a.sin()),
            }
        })
        .collect();
    let edges = (0..n)
        .map(|i| EdgeSpec {
            id: EdgeId(i),
            u: VertexId(i),
            v: VertexId((i + 1) % n),
            length: Some(length),
        })
        .collect();
    Graph::new(vertices, edges).unwrap()
}
