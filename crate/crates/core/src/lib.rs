//! Moving k-nearest-neighbor queries maintained with influential neighbor sets.
//!
//! A query keeps a prefetched set `R` of nearest sites plus the Voronoi
//! neighbors of `R`. As long as every current neighbor is closer than every
//! site in that guard set, the answer is still correct and no search is needed.
//!
//! [`geometry`] and [`network`] hold the diagrams, [`engine`] the two query
//! engines, [`sim`] playback and verification, [`scenario`] the file format.

pub mod engine;
pub mod exec;
pub mod geometry;
pub mod network;
pub mod scenario;
pub mod sim;

pub use engine::{Metrics, NetQueryState, QueryConfig, QueryState, TickEvent, ValidationResult};
pub use exec::Exec;
pub use geometry::{Point, Rect, Site, SiteId, VoronoiIndex};
pub use network::{Graph, NetworkPosition, NetworkVoronoi, VertexId};
pub use scenario::{load_scenario, parse_scenario, save_scenario, Mode, Scenario, ScenarioError};
pub use sim::{run_simulation, SimError, Simulation, TickReport};
