//! Scenario files: a versioned JSON document describing sites, an optional
//! road network, the query parameters and the query trajectory.
//!
//! ```json
//! {"bbox": [0, 0, 1, 1], "k": 1, "mode": "plane", "rho": 1.0, "seed": 0,
//!  "sites": [{"id": 0, "x": 0.2, "y": 0.5}], "speed": 0.1,
//!  "trajectory": {"plane": [[0.1, 0.1], [0.9, 0.9]]}, "version": 1}
//! ```
//!
//! Network scenarios carry `"graph": {"vertices": [...], "edges": [...]}`,
//! list sites as vertex ids and give the trajectory as `{"network": [ids]}`.
//! `"ticks"` is optional and fixes the run length.

mod generate;

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::engine::QueryConfig;
use crate::geometry::{check_sites, Point, Rect, Site, SiteId};
use crate::network::{EdgeId, EdgeSpec, Graph, Vertex, VertexId};

pub use generate::{generate_random, GenerateParams};

pub const FORMAT_VERSION: u64 = 1;
pub const DEFAULT_K: usize = 5;
pub const DEFAULT_PLANE_RHO: f64 = 1.6;
pub const DEFAULT_NETWORK_RHO: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Plane,
    Network,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Plane => "plane",
            Mode::Network => "network",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SiteSet {
    Plane(Vec<Site>),
    /// Host vertices; the site id equals the vertex id.
    Network(Vec<VertexId>),
}

impl SiteSet {
    pub fn len(&self) -> usize {
        match self {
            SiteSet::Plane(s) => s.len(),
            SiteSet::Network(s) => s.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn ids(&self) -> Vec<SiteId> {
        match self {
            SiteSet::Plane(s) => s.iter().map(|s| s.id).collect(),
            SiteSet::Network(s) => s.iter().map(|v| v.site()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GraphSpec {
    pub vertices: Vec<Vertex>,
    pub edges: Vec<EdgeSpec>,
}

impl GraphSpec {
    pub fn build(&self) -> Result<Graph, crate::network::NetworkError> {
        Graph::new(self.vertices.clone(), self.edges.clone())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrajectorySpec {
    Plane(Vec<Point>),
    /// Consecutive vertices must share an edge.
    Network(Vec<VertexId>),
}

impl TrajectorySpec {
    pub fn len(&self) -> usize {
        match self {
            TrajectorySpec::Plane(p) => p.len(),
            TrajectorySpec::Network(p) => p.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub mode: Mode,
    pub k: usize,
    pub rho: f64,
    /// Distance travelled per tick.
    pub speed: f64,
    pub bbox: Rect,
    pub sites: SiteSet,
    /// Present exactly in network mode.
    pub graph: Option<GraphSpec>,
    pub trajectory: TrajectorySpec,
    pub seed: u64,
    /// Run length; when absent the run ends at the first tick that reaches
    /// the end of the trajectory.
    pub ticks: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScenarioError {
    #[error("malformed document: {0}")]
    Malformed(String),
    #[error("field \"{field}\": {message}")]
    Schema { field: String, message: String },
    #[error("field \"{field}\": {message}")]
    Invalid { field: String, message: String },
    #[error("infeasible parameters: {0}")]
    Infeasible(String),
    #[error("write failed: {0}")]
    Io(String),
}

impl ScenarioError {
    /// The offending field, when the error is tied to one.
    pub fn field(&self) -> Option<&str> {
        match self {
            ScenarioError::Schema { field, .. } | ScenarioError::Invalid { field, .. } => {
                Some(field)
            }
            _ => None,
        }
    }

    fn schema(field: impl Into<String>, message: impl Into<String>) -> Self {
        ScenarioError::Schema {
            field: field.into(),
            message: message.into(),
        }
    }

    fn invalid(field: impl Into<String>, message: impl fmt::Display) -> Self {
        ScenarioError::Invalid {
            field: field.into(),
            message: message.to_string(),
        }
    }
}

impl Scenario {
    /// Empty scene with the default parameters for `mode`. Not runnable until
    /// sites and a trajectory are added.
    pub fn empty(mode: Mode) -> Self {
        let (rho, sites, graph, trajectory) = match mode {
            Mode::Plane => (
                DEFAULT_PLANE_RHO,
                SiteSet::Plane(Vec::new()),
                None,
                TrajectorySpec::Plane(Vec::new()),
            ),
            Mode::Network => (
                DEFAULT_NETWORK_RHO,
                SiteSet::Network(Vec::new()),
                Some(GraphSpec::default()),
                TrajectorySpec::Network(Vec::new()),
            ),
        };
        Self {
            mode,
            k: DEFAULT_K,
            rho,
            speed: 0.01,
            bbox: Rect::unit(),
            sites,
            graph,
            trajectory,
            seed: 0,
            ticks: None,
        }
    }

    pub fn config(&self) -> Result<QueryConfig, ScenarioError> {
        QueryConfig::new(self.k, self.rho).map_err(|e| {
            let field = if self.k == 0 { "k" } else { "rho" };
            ScenarioError::invalid(field, e)
        })
    }

    /// Builds the road network; errors in plane mode.
    pub fn build_graph(&self) -> Result<Graph, ScenarioError> {
        let spec = self
            .graph
            .as_ref()
            .ok_or_else(|| ScenarioError::schema("graph", "required in network mode"))?;
        spec.build().map_err(|e| ScenarioError::invalid("graph", e))
    }

    /// Checks everything except that the scene has enough content to run:
    /// sites and trajectory may be empty and the graph may have no vertices.
    pub fn validate_structure(&self) -> Result<(), ScenarioError> {
        self.config()?;
        if !(self.speed.is_finite() && self.speed > 0.0) {
            return Err(ScenarioError::invalid(
                "speed",
                format!("must be positive, got {}", self.speed),
            ));
        }
        if !self.bbox.is_valid() {
            return Err(ScenarioError::invalid("bbox", "needs x0 < x1 and y0 < y1"));
        }
        if self.ticks == Some(0) {
            return Err(ScenarioError::invalid("ticks", "must be at least 1"));
        }
        match (self.mode, &self.sites, &self.trajectory) {
            (Mode::Plane, SiteSet::Plane(sites), TrajectorySpec::Plane(path)) => {
                if self.graph.is_some() {
                    return Err(ScenarioError::schema("graph", "not allowed in plane mode"));
                }
                if !sites.is_empty() {
                    check_sites(sites).map_err(|e| ScenarioError::invalid("sites", e))?;
                }
                if let Some(i) = path.iter().position(|p| !p.is_finite()) {
                    return Err(ScenarioError::invalid(
                        format!("trajectory.plane[{i}]"),
                        "non-finite point",
                    ));
                }
            }
            (Mode::Network, SiteSet::Network(sites), TrajectorySpec::Network(path)) => {
                let spec = self
                    .graph
                    .as_ref()
                    .ok_or_else(|| ScenarioError::schema("graph", "required in network mode"))?;
                if spec.vertices.is_empty() {
                    if !spec.edges.is_empty() {
                        return Err(ScenarioError::invalid(
                            "graph.edges",
                            "edges without vertices",
                        ));
                    }
                    if !sites.is_empty() || !path.is_empty() {
                        return Err(ScenarioError::invalid("graph", "graph has no vertices"));
                    }
                    return Ok(());
                }
                let graph = self.build_graph()?;
                let mut seen = HashSet::new();
                for &v in sites {
                    if !graph.has_vertex(v) {
                        return Err(ScenarioError::invalid(
                            "sites",
                            format!("vertex {v} not in graph"),
                        ));
                    }
                    if !seen.insert(v) {
                        return Err(ScenarioError::invalid(
                            "sites",
                            format!("duplicate site {v}"),
                        ));
                    }
                }
                check_network_path(&graph, path)?;
            }
            (Mode::Plane, ..) => {
                return Err(ScenarioError::schema(
                    "sites",
                    "plane mode needs plane sites and trajectory",
                ))
            }
            (Mode::Network, ..) => {
                return Err(ScenarioError::schema(
                    "sites",
                    "network mode needs vertex sites and trajectory",
                ))
            }
        }
        Ok(())
    }

    /// Full validation: structure plus a non-empty trajectory and enough
    /// sites for the prefetch set.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        self.validate_structure()?;
        if self.trajectory.is_empty() {
            return Err(ScenarioError::invalid(
                "trajectory",
                "needs at least one point",
            ));
        }
        let config = self.config()?;
        let n = self.sites.len();
        if config.prefetch_size() > n {
            return Err(ScenarioError::invalid(
                "k",
                format!(
                    "prefetch size {} exceeds the {n} available sites",
                    config.prefetch_size()
                ),
            ));
        }
        Ok(())
    }

    pub fn is_runnable(&self) -> bool {
        self.validate().is_ok()
    }

    pub fn to_json(&self) -> Value {
        let sites = match &self.sites {
            SiteSet::Plane(s) => s
                .iter()
                .map(|s| json!({"id": s.id.0, "x": s.pos.x, "y": s.pos.y}))
                .collect::<Vec<_>>(),
            SiteSet::Network(s) => s.iter().map(|v| json!(v.0)).collect(),
        };
        let trajectory = match &self.trajectory {
            TrajectorySpec::Plane(p) => {
                json!({"plane": p.iter().map(|p| [p.x, p.y]).collect::<Vec<_>>()})
            }
            TrajectorySpec::Network(p) => {
                json!({"network": p.iter().map(|v| v.0).collect::<Vec<_>>()})
            }
        };
        let mut doc = json!({
            "version": FORMAT_VERSION,
            "mode": self.mode.as_str(),
            "k": self.k,
            "rho": self.rho,
            "speed": self.speed,
            "bbox": <[f64; 4]>::from(self.bbox),
            "sites": sites,
            "trajectory": trajectory,
            "seed": self.seed,
        });
        let obj = doc.as_object_mut().expect("object literal");
        if let Some(g) = &self.graph {
            let vertices: Vec<Value> = g
                .vertices
                .iter()
                .map(|v| json!({"id": v.id.0, "x": v.pos.x, "y": v.pos.y}))
                .collect();
            let edges: Vec<Value> = g
                .edges
                .iter()
                .map(|e| {
                    let mut o = json!({"id": e.id.0, "u": e.u.0, "v": e.v.0});
                    if let Some(len) = e.length {
                        o["length"] = json!(len);
                    }
                    o
                })
                .collect();
            obj.insert(
                "graph".into(),
                json!({"vertices": vertices, "edges": edges}),
            );
        }
        if let Some(t) = self.ticks {
            obj.insert("ticks".into(), json!(t));
        }
        canonicalize(doc)
    }

    /// Parses a document without the runnability checks of [`Scenario::validate`].
    pub fn from_json(doc: &Value) -> Result<Self, ScenarioError> {
        let root = Obj::root(doc)?;
        let version = root.u64("version")?;
        if version != FORMAT_VERSION {
            return Err(ScenarioError::schema(
                "version",
                format!("unsupported version {version}"),
            ));
        }
        let mode = match root.str("mode")? {
            "plane" => Mode::Plane,
            "network" => Mode::Network,
            other => {
                return Err(ScenarioError::schema(
                    "mode",
                    format!("expected \"plane\" or \"network\", got {other:?}"),
                ))
            }
        };
        let k = root.u64("k")? as usize;
        let rho = root.f64("rho")?;
        let speed = root.f64("speed")?;
        let seed = root.u64("seed")?;
        let ticks = match root.get("ticks") {
            None | Some(Value::Null) => None,
            Some(_) => Some(root.u64("ticks")?),
        };
        let bbox = {
            let items = root.array("bbox")?;
            if items.len() != 4 {
                return Err(ScenarioError::schema("bbox", "expected [x0, y0, x1, y1]"));
            }
            let mut v = [0.0; 4];
            for (i, item) in items.iter().enumerate() {
                v[i] = number(item, &format!("bbox[{i}]"))?;
            }
            Rect::from(v)
        };

        let site_items = root.array("sites")?;
        let traj = root.object("trajectory")?;
        let (sites, trajectory, graph) = match mode {
            Mode::Plane => {
                if root.get("graph").is_some_and(|g| !g.is_null()) {
                    return Err(ScenarioError::schema("graph", "not allowed in plane mode"));
                }
                let mut sites = Vec::with_capacity(site_items.len());
                for (i, item) in site_items.iter().enumerate() {
                    let o = Obj::new(item, format!("sites[{i}]"))?;
                    sites.push(Site::new(o.u32("id")?, o.f64("x")?, o.f64("y")?));
                }
                let mut path = Vec::new();
                for (i, item) in traj.array("plane")?.iter().enumerate() {
                    let field = format!("trajectory.plane[{i}]");
                    let pair = item
                        .as_array()
                        .filter(|a| a.len() == 2)
                        .ok_or_else(|| ScenarioError::schema(&field, "expected [x, y]"))?;
                    path.push(Point::new(
                        number(&pair[0], &field)?,
                        number(&pair[1], &field)?,
                    ));
                }
                (SiteSet::Plane(sites), TrajectorySpec::Plane(path), None)
            }
            Mode::Network => {
                let g = root.object("graph")?;
                let mut vertices = Vec::new();
                for (i, item) in g.array("vertices")?.iter().enumerate() {
                    let o = Obj::new(item, format!("graph.vertices[{i}]"))?;
                    vertices.push(Vertex {
                        id: VertexId(o.u32("id")?),
                        pos: Point::new(o.f64("x")?, o.f64("y")?),
                    });
                }
                let mut edges = Vec::new();
                for (i, item) in g.array("edges")?.iter().enumerate() {
                    let o = Obj::new(item, format!("graph.edges[{i}]"))?;
                    let length = match o.get("length") {
                        None | Some(Value::Null) => None,
                        Some(_) => Some(o.f64("length")?),
                    };
                    edges.push(EdgeSpec {
                        id: EdgeId(o.u32("id")?),
                        u: VertexId(o.u32("u")?),
                        v: VertexId(o.u32("v")?),
                        length,
                    });
                }
                let mut sites = Vec::with_capacity(site_items.len());
                for (i, item) in site_items.iter().enumerate() {
                    sites.push(VertexId(unsigned(item, &format!("sites[{i}]"))?));
                }
                let mut path = Vec::new();
                for (i, item) in traj.array("network")?.iter().enumerate() {
                    path.push(VertexId(unsigned(
                        item,
                        &format!("trajectory.network[{i}]"),
                    )?));
                }
                (
                    SiteSet::Network(sites),
                    TrajectorySpec::Network(path),
                    Some(GraphSpec { vertices, edges }),
                )
            }
        };
        Ok(Self {
            mode,
            k,
            rho,
            speed,
            bbox,
            sites,
            graph,
            trajectory,
            seed,
            ticks,
        })
    }
}

fn check_network_path(graph: &Graph, path: &[VertexId]) -> Result<(), ScenarioError> {
    for (i, v) in path.iter().enumerate() {
        if !graph.has_vertex(*v) {
            return Err(ScenarioError::invalid(
                format!("trajectory.network[{i}]"),
                format!("vertex {v} not in graph"),
            ));
        }
    }
    for (i, w) in path.windows(2).enumerate() {
        if graph.edge_between(w[0], w[1]).is_none() {
            return Err(ScenarioError::invalid(
                format!("trajectory.network[{}]", i + 1),
                format!("vertices {} and {} are not adjacent", w[0], w[1]),
            ));
        }
    }
    Ok(())
}

/// Recursively sorts object keys so serialization is byte-stable whatever
/// map implementation serde_json was built with.
fn canonicalize(v: Value) -> Value {
    match v {
        Value::Object(map) => {
            let mut entries: Vec<(String, Value)> = map.into_iter().collect();
            entries.sort_by(|a, b| a.0.cmp(&b.0));
            Value::Object(
                entries
                    .into_iter()
                    .map(|(k, v)| (k, canonicalize(v)))
                    .collect(),
            )
        }
        Value::Array(items) => Value::Array(items.into_iter().map(canonicalize).collect()),
        other => other,
    }
}

/// Canonical UTF-8 JSON: sorted keys, two-space indentation, trailing newline.
pub fn save_scenario(s: &Scenario) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(&s.to_json()).expect("JSON values always serialize");
    out.push(b'\n');
    out
}

/// Parses and fully validates a scenario document.
pub fn load_scenario(bytes: &[u8]) -> Result<Scenario, ScenarioError> {
    let s = parse_scenario(bytes)?;
    s.validate()?;
    Ok(s)
}

/// Parses a document that may still be a draft: structure is checked, but
/// empty sites or trajectory are accepted.
pub fn parse_scenario(bytes: &[u8]) -> Result<Scenario, ScenarioError> {
    let doc: Value =
        serde_json::from_slice(bytes).map_err(|e| ScenarioError::Malformed(e.to_string()))?;
    let s = Scenario::from_json(&doc)?;
    s.validate_structure()?;
    Ok(s)
}

struct Obj<'a> {
    map: &'a Map<String, Value>,
    path: String,
}

fn number(v: &Value, field: &str) -> Result<f64, ScenarioError> {
    v.as_f64()
        .ok_or_else(|| ScenarioError::schema(field, "expected a number"))
}

fn unsigned(v: &Value, field: &str) -> Result<u32, ScenarioError> {
    v.as_u64()
        .and_then(|n| u32::try_from(n).ok())
        .ok_or_else(|| ScenarioError::schema(field, "expected a non-negative 32-bit integer"))
}

impl<'a> Obj<'a> {
    fn root(v: &'a Value) -> Result<Self, ScenarioError> {
        let map = v
            .as_object()
            .ok_or_else(|| ScenarioError::Malformed("top level must be an object".into()))?;
        Ok(Self {
            map,
            path: String::new(),
        })
    }

    fn new(v: &'a Value, path: String) -> Result<Self, ScenarioError> {
        let map = v
            .as_object()
            .ok_or_else(|| ScenarioError::schema(&path, "expected an object"))?;
        Ok(Self { map, path })
    }

    fn name(&self, key: &str) -> String {
        if self.path.is_empty() {
            key.to_string()
        } else {
            format!("{}.{key}", self.path)
        }
    }

    fn get(&self, key: &str) -> Option<&'a Value> {
        self.map.get(key)
    }

    fn req(&self, key: &str) -> Result<&'a Value, ScenarioError> {
        self.map
            .get(key)
            .ok_or_else(|| ScenarioError::schema(self.name(key), "missing required field"))
    }

    fn f64(&self, key: &str) -> Result<f64, ScenarioError> {
        number(self.req(key)?, &self.name(key))
    }

    fn u64(&self, key: &str) -> Result<u64, ScenarioError> {
        self.req(key)?
            .as_u64()
            .ok_or_else(|| ScenarioError::schema(self.name(key), "expected a non-negative integer"))
    }

    fn u32(&self, key: &str) -> Result<u32, ScenarioError> {
        unsigned(self.req(key)?, &self.name(key))
    }

    fn str(&self, key: &str) -> Result<&'a str, ScenarioError> {
        self.req(key)?
            .as_str()
            .ok_or_else(|| ScenarioError::schema(self.name(key), "expected a string"))
    }

    fn array(&self, key: &str) -> Result<&'a Vec<Value>, ScenarioError> {
        self.req(key)?
            .as_array()
            .ok_or_else(|| ScenarioError::schema(self.name(key), "expected an array"))
    }

    fn object(&self, key: &str) -> Result<Obj<'a>, ScenarioError> {
        Obj::new(self.req(key)?, self.name(key))
    }
}
