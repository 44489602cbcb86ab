//! Deterministic trajectory playback, brute-force verification and export.

mod export;
mod oracle;
mod trajectory;

use serde::Serialize;
use thiserror::Error;

use crate::engine::{EngineError, Metrics, NetQueryState, QueryState, TickEvent, ValidationResult};
use crate::geometry::{order_k_cell_polygon, GeometryError, Polygon, Site, SiteId, VoronoiIndex};
use crate::network::{
    shortest_distances, Graph, NetworkError, NetworkVoronoi, SearchLimit, VertexId,
};
use crate::scenario::{Scenario, ScenarioError, SiteSet, TrajectorySpec};

pub use export::{metrics_csv, reports_jsonl, METRICS_HEADER};
pub use oracle::{
    brute_force_oracle, brute_force_oracle_with, compare_runs, DiffReport, OracleTick,
};
pub use trajectory::{QueryPosition, ReportPosition, Trajectory};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// State after one tick.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TickReport {
    pub t: u64,
    pub pos: ReportPosition,
    /// Nearest first.
    pub knn: Vec<SiteId>,
    /// Sorted by id.
    pub is_set: Vec<SiteId>,
    /// The prefetch set `R`, nearest first as of its last verification.
    pub prefetch: Vec<SiteId>,
    pub valid_before_update: bool,
    pub event: TickEvent,
    /// Distance from the query to the farthest kNN member.
    pub green_radius: f64,
    /// Distance from the query to the nearest influential-set member, if any.
    pub red_radius: Option<f64>,
    pub comparisons: usize,
    pub scanned: usize,
    /// Full recomputations so far, the initial one included.
    pub recompute_count: u64,
}

// one per simulation, so the size gap does not matter
#[allow(clippy::large_enum_variant)]
enum World {
    Plane {
        index: VoronoiIndex,
        state: QueryState,
    },
    Network {
        graph: Graph,
        nv: NetworkVoronoi,
        state: NetQueryState,
    },
}

/// Steps one query along its trajectory, one tick per call.
///
/// Both batch runs and live sessions drive this type, so their report
/// streams agree tick for tick.
pub struct Simulation {
    scenario: Scenario,
    trajectory: Trajectory,
    world: World,
    /// Tick of the last emitted report.
    t: u64,
    started: bool,
    complete: bool,
    base_tick: u64,
    base_arc: f64,
    diagram_builds: u64,
}

impl Simulation {
    /// Validates the scenario, builds the diagram and initializes the query
    /// at the first trajectory point.
    pub fn new(scenario: Scenario) -> Result<Self, SimError> {
        scenario.validate()?;
        let (trajectory, world) = build_world(&scenario, 0.0)?;
        Ok(Self {
            scenario,
            trajectory,
            world,
            t: 0,
            started: false,
            complete: false,
            base_tick: 0,
            base_arc: 0.0,
            diagram_builds: 1,
        })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn trajectory(&self) -> &Trajectory {
        &self.trajectory
    }

    /// Tick of the most recent report (0 before the first).
    pub fn current_tick(&self) -> u64 {
        self.t
    }

    pub fn is_started(&self) -> bool {
        self.started
    }

    pub fn is_complete(&self) -> bool {
        self.complete
    }

    /// Diagram constructions by this simulation, edits included.
    pub fn diagram_builds(&self) -> u64 {
        self.diagram_builds
    }

    pub fn metrics(&self) -> Metrics {
        match &self.world {
            World::Plane { state, .. } => *state.metrics(),
            World::Network { state, .. } => *state.metrics(),
        }
    }

    pub fn speed(&self) -> f64 {
        self.trajectory.speed
    }

    fn arc_at(&self, t: u64) -> f64 {
        self.base_arc + (t - self.base_tick) as f64 * self.trajectory.speed
    }

    pub fn position(&self) -> QueryPosition {
        self.trajectory.position_at_arc(self.arc_at(self.t))
    }

    /// Takes effect from the next tick on.
    pub fn set_speed(&mut self, speed: f64) -> Result<(), SimError> {
        if !(speed.is_finite() && speed > 0.0) {
            return Err(SimError::InvalidArgument(format!(
                "speed must be positive, got {speed}"
            )));
        }
        self.base_arc = self.arc_at(self.t);
        self.base_tick = self.t;
        self.trajectory.speed = speed;
        Ok(())
    }

    /// Swaps in an edited scenario: the diagram is rebuilt and, mid-run, the
    /// query state is recomputed at the current position. The clock keeps
    /// running from the current tick.
    pub fn replace_scenario(&mut self, scenario: Scenario) -> Result<(), SimError> {
        scenario.validate()?;
        let arc = if self.started {
            self.arc_at(self.t)
        } else {
            0.0
        };
        let speed = self.trajectory.speed;
        let (mut trajectory, world) = build_world(&scenario, arc)?;
        trajectory.speed = speed;
        self.scenario = scenario;
        self.trajectory = trajectory;
        self.world = world;
        self.base_arc = arc;
        self.base_tick = self.t;
        self.diagram_builds += 1;
        if self.started {
            self.complete = self.reached_end(self.t);
        }
        Ok(())
    }

    fn reached_end(&self, t: u64) -> bool {
        match self.scenario.ticks {
            Some(n) => t + 1 >= n,
            None => self.arc_at(t) >= self.trajectory.length(),
        }
    }

    /// Report for the next tick, or `None` once the run is complete.
    /// The first call reports tick 0, the initial computation.
    pub fn step(&mut self) -> Result<Option<TickReport>, SimError> {
        if self.complete {
            return Ok(None);
        }
        let (validation, event, scanned) = if !self.started {
            self.started = true;
            let q = self.position();
            let v = match (&self.world, q) {
                (World::Plane { index, state }, QueryPosition::Plane(p)) => {
                    state.validate(index, &p)
                }
                (World::Network { graph, state, .. }, QueryPosition::Network(p)) => {
                    state.validate(graph, &p)
                }
                _ => unreachable!("mode mismatch"),
            };
            (v, TickEvent::None, v.comparisons)
        } else {
            self.t += 1;
            let q = self.position();
            let out = match (&mut self.world, q) {
                (World::Plane { index, state }, QueryPosition::Plane(p)) => {
                    state.tick(index, &p)?
                }
                (World::Network { graph, nv, state }, QueryPosition::Network(p)) => {
                    state.tick(graph, nv, &p)?
                }
                _ => unreachable!("mode mismatch"),
            };
            (out.validation, out.event, out.scanned)
        };
        self.complete = self.reached_end(self.t);
        Ok(Some(self.report(validation, event, scanned)?))
    }

    fn report(
        &self,
        v: ValidationResult,
        event: TickEvent,
        scanned: usize,
    ) -> Result<TickReport, SimError> {
        let q = self.position();
        let (pos, knn, is_set, prefetch, radii, recomputes) = match (&self.world, q) {
            (World::Plane { index, state }, QueryPosition::Plane(p)) => {
                let dist = |id: &SiteId| index.position(*id).map_or(f64::INFINITY, |s| s.dist(&p));
                let green = state.knn().iter().map(dist).fold(0.0, f64::max);
                let red = state.influential_set().iter().map(dist).reduce(f64::min);
                (
                    ReportPosition {
                        x: p.x,
                        y: p.y,
                        edge: None,
                        offset: None,
                    },
                    state.knn(),
                    state.influential_set(),
                    state.prefetch(),
                    (green, red),
                    state.metrics().full_recomputes,
                )
            }
            (World::Network { graph, state, .. }, QueryPosition::Network(p)) => {
                let point = graph.point_at(&p)?;
                let ids: Vec<SiteId> = state
                    .knn()
                    .iter()
                    .chain(state.influential_set())
                    .copied()
                    .collect();
                let slots: Vec<usize> = ids
                    .iter()
                    .map(|id| graph.vertex_slot(VertexId::from(*id)).expect("site vertex"))
                    .collect();
                let paths =
                    shortest_distances(graph, &graph.seeds(&p)?, SearchLimit::Targets(&slots));
                let k = state.knn().len();
                let green = slots[..k]
                    .iter()
                    .map(|s| paths.distance(*s))
                    .fold(0.0, f64::max);
                let red = slots[k..]
                    .iter()
                    .map(|s| paths.distance(*s))
                    .reduce(f64::min);
                (
                    ReportPosition {
                        x: point.x,
                        y: point.y,
                        edge: Some(p.edge),
                        offset: Some(p.offset),
                    },
                    state.knn(),
                    state.influential_set(),
                    state.prefetch(),
                    (green, red),
                    state.metrics().full_recomputes,
                )
            }
            _ => unreachable!("mode mismatch"),
        };
        Ok(TickReport {
            t: self.t,
            pos,
            knn: knn.to_vec(),
            is_set: is_set.to_vec(),
            prefetch: prefetch.to_vec(),
            valid_before_update: v.valid,
            event,
            green_radius: radii.0,
            red_radius: radii.1,
            comparisons: v.comparisons,
            scanned,
            recompute_count: recomputes,
        })
    }

    /// Order-k cell of the current kNN set clipped to the scene box; plane
    /// mode only. Costs a pass over all bisectors of the kNN set.
    pub fn cell_polygon(&self) -> Option<Polygon> {
        match &self.world {
            World::Plane { index, state } => {
                order_k_cell_polygon(index.sites(), state.knn(), &self.scenario.bbox).ok()
            }
            World::Network { .. } => None,
        }
    }
}

fn build_world(s: &Scenario, arc: f64) -> Result<(Trajectory, World), SimError> {
    let config = s.config()?;
    match (&s.sites, &s.trajectory) {
        (SiteSet::Plane(sites), TrajectorySpec::Plane(path)) => {
            let trajectory = Trajectory::plane(path.clone(), s.speed);
            let index = VoronoiIndex::build(sites)?;
            let QueryPosition::Plane(q) = trajectory.position_at_arc(arc) else {
                unreachable!()
            };
            let state = QueryState::init(&index, &q, config)?;
            Ok((trajectory, World::Plane { index, state }))
        }
        (SiteSet::Network(sites), TrajectorySpec::Network(path)) => {
            let graph = s.build_graph()?;
            let trajectory = Trajectory::network(&graph, path, s.speed)?;
            let nv = NetworkVoronoi::build(&graph, sites)?;
            let QueryPosition::Network(q) = trajectory.position_at_arc(arc) else {
                unreachable!()
            };
            let state = NetQueryState::init(&graph, &nv, &q, config)?;
            Ok((trajectory, World::Network { graph, nv, state }))
        }
        _ => Err(ScenarioError::Schema {
            field: "mode".into(),
            message: "sites and trajectory disagree on mode".into(),
        }
        .into()),
    }
}

/// Output of a complete batch run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub reports: Vec<TickReport>,
    pub metrics: Metrics,
    pub diagram_builds: u64,
}

/// Plays the whole trajectory.
pub fn run_simulation(scenario: &Scenario) -> Result<RunOutput, SimError> {
    let mut sim = Simulation::new(scenario.clone())?;
    let mut reports = Vec::new();
    while let Some(r) = sim.step()? {
        reports.push(r);
    }
    Ok(RunOutput {
        reports,
        metrics: sim.metrics(),
        diagram_builds: sim.diagram_builds(),
    })
}

/// Plane sites of a scenario, for callers that need raw coordinates.
pub fn plane_sites(s: &Scenario) -> Option<&[Site]> {
    match &s.sites {
        SiteSet::Plane(v) => Some(v),
        SiteSet::Network(_) => None,
    }
}
