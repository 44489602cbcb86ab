use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{GraphSpec, Mode, Scenario, ScenarioError, SiteSet, TrajectorySpec};
use crate::engine::QueryConfig;
use crate::geometry::{Point, Rect, Site};
use crate::network::{EdgeSpec, Graph, VertexId};

const PLANE_WAYPOINTS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerateParams {
    pub mode: Mode,
    /// Number of sites.
    pub n: usize,
    /// Grid width and height in vertices (network mode).
    pub grid: Option<(u32, u32)>,
    pub k: usize,
    pub rho: f64,
    /// Number of ticks of the run, tick 0 included.
    pub ticks: u64,
    pub seed: u64,
}

/// Random scenario, deterministic in `params.seed`.
///
/// Plane: `n` uniform sites in the unit square and a random polyline.
/// Network: a grid with lengths perturbed by up to ±25%, `n` random site
/// vertices and a random walk without immediate backtracking.
pub fn generate_random(params: &GenerateParams) -> Result<Scenario, ScenarioError> {
    let (k, rho) = if params.n == 1 {
        (1, 1.0)
    } else {
        (params.k, params.rho)
    };
    if params.n == 0 {
        return Err(ScenarioError::Infeasible("n must be at least 1".into()));
    }
    let config = QueryConfig::new(k, rho).map_err(|e| ScenarioError::Infeasible(e.to_string()))?;
    if config.prefetch_size() > params.n {
        return Err(ScenarioError::Infeasible(format!(
            "floor(rho * k) = {} exceeds n = {}",
            config.prefetch_size(),
            params.n
        )));
    }
    if params.ticks == 0 {
        return Err(ScenarioError::Infeasible("ticks must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut s = match params.mode {
        Mode::Plane => plane(params.n, &mut rng),
        Mode::Network => {
            let (w, h) = params.grid.ok_or_else(|| {
                ScenarioError::Infeasible("network mode needs grid dimensions".into())
            })?;
            network(w, h, params.n, params.ticks, &mut rng)?
        }
    };
    s.k = k;
    s.rho = rho;
    s.seed = params.seed;
    s.ticks = Some(params.ticks);
    let length = path_length(&s)?;
    s.speed = if params.ticks > 1 && length > 0.0 {
        length / (params.ticks - 1) as f64
    } else {
        1.0
    };
    Ok(s)
}

fn plane(n: usize, rng: &mut ChaCha8Rng) -> Scenario {
    let mut sites: Vec<Site> = Vec::with_capacity(n);
    let mut seen = std::collections::HashSet::with_capacity(n);
    while sites.len() < n {
        let p = Point::new(rng.random::<f64>(), rng.random::<f64>());
        if seen.insert((p.x.to_bits(), p.y.to_bits())) {
            sites.push(Site {
                id: crate::geometry::SiteId(sites.len() as u32),
                pos: p,
            });
        }
    }
    let path = (0..PLANE_WAYPOINTS)
        .map(|_| Point::new(rng.random_range(0.05..0.95), rng.random_range(0.05..0.95)))
        .collect();
    Scenario {
        sites: SiteSet::Plane(sites),
        trajectory: TrajectorySpec::Plane(path),
        ..Scenario::empty(Mode::Plane)
    }
}

fn network(
    w: u32,
    h: u32,
    n: usize,
    ticks: u64,
    rng: &mut ChaCha8Rng,
) -> Result<Scenario, ScenarioError> {
    if w == 0 || h == 0 || (w as usize) * (h as usize) < 2 {
        return Err(ScenarioError::Infeasible(
            "grid needs at least two vertices".into(),
        ));
    }
    let grid = Graph::grid(w, h).map_err(|e| ScenarioError::Infeasible(e.to_string()))?;
    let count = grid.vertices().len();
    if n > count {
        return Err(ScenarioError::Infeasible(format!(
            "{n} sites do not fit on {count} vertices"
        )));
    }
    let edges: Vec<EdgeSpec> = grid
        .edges()
        .iter()
        .map(|e| EdgeSpec {
            id: e.id,
            u: e.u,
            v: e.v,
            length: Some(e.length * rng.random_range(0.75..1.25)),
        })
        .collect();
    let mut sites: Vec<VertexId> = index::sample(rng, count, n)
        .into_iter()
        .map(|i| grid.vertices()[i].id)
        .collect();
    sites.sort_unstable();

    // about one grid step per four ticks, at least one full crossing
    let steps = ((ticks / 4) as usize).max((w + h) as usize).min(4 * count);
    let mut walk = vec![grid.vertices()[rng.random_range(0..count)].id];
    for _ in 0..steps {
        let here = *walk.last().expect("non-empty");
        let prev = walk.len().checked_sub(2).map(|i| walk[i]);
        let slot = grid.vertex_slot(here).expect("grid vertex");
        let mut options: Vec<VertexId> = grid
            .adjacency(slot)
            .iter()
            .map(|&(n, _)| grid.vertices()[n].id)
            .filter(|v| Some(*v) != prev)
            .collect();
        if options.is_empty() {
            options.extend(prev);
        }
        walk.push(options[rng.random_range(0..options.len())]);
    }
    let positions: Vec<Point> = grid.vertices().iter().map(|v| v.pos).collect();
    Ok(Scenario {
        bbox: Rect::enclosing(&positions, 0.5).expect("non-empty grid"),
        sites: SiteSet::Network(sites),
        graph: Some(GraphSpec {
            vertices: grid.vertices().to_vec(),
            edges,
        }),
        trajectory: TrajectorySpec::Network(walk),
        ..Scenario::empty(Mode::Network)
    })
}

fn path_length(s: &Scenario) -> Result<f64, ScenarioError> {
    Ok(match &s.trajectory {
        TrajectorySpec::Plane(p) => p.windows(2).map(|w| w[0].dist(&w[1])).sum(),
        TrajectorySpec::Network(p) => {
            let graph = s.build_graph()?;
            p.windows(2)
                .map(|w| graph.edge_between(w[0], w[1]).map_or(0.0, |e| e.length))
                .sum()
        }
    })
}
