//! Scene edits posted by the editor.

use insq_core::geometry::{Point, Site, SiteId};
use insq_core::network::{EdgeId, EdgeSpec, Vertex, VertexId};
use insq_core::scenario::{GraphSpec, SiteSet, TrajectorySpec};
use insq_core::{Mode, Scenario, ScenarioError};
use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum TrajectoryInput {
    Plane { plane: Vec<[f64; 2]> },
    Network { network: Vec<u32> },
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum EditOp {
    /// Plane: a point, id defaulting to one past the largest. Network: a host vertex.
    AddSite {
        id: Option<u32>,
        x: Option<f64>,
        y: Option<f64>,
        vertex: Option<u32>,
    },
    /// Plane: new coordinates. Network: a new host vertex (the id follows it).
    MoveSite {
        id: u32,
        x: Option<f64>,
        y: Option<f64>,
        vertex: Option<u32>,
    },
    DeleteSite {
        id: u32,
    },
    /// A new vertex joined by Euclidean edges to each vertex in `connect`.
    AddNode {
        id: Option<u32>,
        x: f64,
        y: f64,
        #[serde(default)]
        connect: Vec<u32>,
    },
    MoveNode {
        id: u32,
        x: f64,
        y: f64,
    },
    /// Removes the vertex and its edges; a site hosted there goes with it.
    DeleteNode {
        id: u32,
    },
    AddEdge {
        id: Option<u32>,
        u: u32,
        v: u32,
        length: Option<f64>,
    },
    DeleteEdge {
        id: u32,
    },
    SetTrajectory {
        trajectory: TrajectoryInput,
    },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EditError {
    #[error("{op} is not available in {mode} mode")]
    WrongMode { op: &'static str, mode: Mode },
    #[error("{0}")]
    BadRequest(String),
    #[error(transparent)]
    Rejected(#[from] ScenarioError),
}

impl EditOp {
    pub fn name(&self) -> &'static str {
        match self {
            EditOp::AddSite { .. } => "add_site",
            EditOp::MoveSite { .. } => "move_site",
            EditOp::DeleteSite { .. } => "delete_site",
            EditOp::AddNode { .. } => "add_node",
            EditOp::MoveNode { .. } => "move_node",
            EditOp::DeleteNode { .. } => "delete_node",
            EditOp::AddEdge { .. } => "add_edge",
            EditOp::DeleteEdge { .. } => "delete_edge",
            EditOp::SetTrajectory { .. } => "set_trajectory",
        }
    }
}

fn coords(x: Option<f64>, y: Option<f64>) -> Result<Point, EditError> {
    match (x, y) {
        (Some(x), Some(y)) => Ok(Point::new(x, y)),
        _ => Err(EditError::BadRequest("x and y are required".into())),
    }
}

fn vertex(v: Option<u32>) -> Result<VertexId, EditError> {
    v.map(VertexId)
        .ok_or_else(|| EditError::BadRequest("vertex is required".into()))
}

fn graph_mut<'a>(s: &'a mut Scenario, op: &'static str) -> Result<&'a mut GraphSpec, EditError> {
    let mode = s.mode;
    s.graph.as_mut().ok_or(EditError::WrongMode { op, mode })
}

fn missing(what: &str, id: u32) -> EditError {
    EditError::BadRequest(format!("{what} {id} not found"))
}

/// Applies `op` to a copy of `scenario`. The caller decides how strictly to
/// validate the result.
pub fn apply_edit(scenario: &Scenario, op: &EditOp) -> Result<Scenario, EditError> {
    let mut s = scenario.clone();
    let mode = s.mode;
    let wrong = || EditError::WrongMode {
        op: op.name(),
        mode,
    };
    match (op, &mut s.sites) {
        (EditOp::AddSite { id, x, y, .. }, SiteSet::Plane(sites)) => {
            let id = id.unwrap_or_else(|| sites.iter().map(|s| s.id.0 + 1).max().unwrap_or(0));
            if sites.iter().any(|s| s.id.0 == id) {
                return Err(EditError::BadRequest(format!("site {id} already exists")));
            }
            sites.push(Site {
                id: SiteId(id),
                pos: coords(*x, *y)?,
            });
        }
        (EditOp::AddSite { vertex: v, .. }, SiteSet::Network(sites)) => {
            let v = vertex(*v)?;
            if sites.contains(&v) {
                return Err(EditError::BadRequest(format!(
                    "vertex {v} already hosts a site"
                )));
            }
            sites.push(v);
            sites.sort();
        }
        (EditOp::MoveSite { id, x, y, .. }, SiteSet::Plane(sites)) => {
            let site = sites
                .iter_mut()
                .find(|s| s.id.0 == *id)
                .ok_or_else(|| missing("site", *id))?;
            site.pos = coords(*x, *y)?;
        }
        (EditOp::MoveSite { id, vertex: v, .. }, SiteSet::Network(sites)) => {
            let to = vertex(*v)?;
            let slot = sites
                .iter()
                .position(|s| s.0 == *id)
                .ok_or_else(|| missing("site", *id))?;
            if sites.contains(&to) && sites[slot] != to {
                return Err(EditError::BadRequest(format!(
                    "vertex {to} already hosts a site"
                )));
            }
            sites[slot] = to;
            sites.sort();
        }
        (EditOp::DeleteSite { id }, SiteSet::Plane(sites)) => {
            let before = sites.len();
            sites.retain(|s| s.id.0 != *id);
            if sites.len() == before {
                return Err(missing("site", *id));
            }
        }
        (EditOp::DeleteSite { id }, SiteSet::Network(sites)) => {
            let before = sites.len();
            sites.retain(|s| s.0 != *id);
            if sites.len() == before {
                return Err(missing("site", *id));
            }
        }
        (EditOp::SetTrajectory { trajectory }, _) => {
            s.trajectory = match (mode, trajectory) {
                (Mode::Plane, TrajectoryInput::Plane { plane }) => {
                    TrajectorySpec::Plane(plane.iter().map(|p| Point::new(p[0], p[1])).collect())
                }
                (Mode::Network, TrajectoryInput::Network { network }) => {
                    TrajectorySpec::Network(network.iter().copied().map(VertexId).collect())
                }
                _ => return Err(wrong()),
            };
        }
        (EditOp::AddNode { .. } | EditOp::MoveNode { .. } | EditOp::DeleteNode { .. }, _)
        | (EditOp::AddEdge { .. } | EditOp::DeleteEdge { .. }, _) => {
            if mode != Mode::Network {
                return Err(wrong());
            }
            edit_graph(&mut s, op)?;
        }
    }
    Ok(s)
}

fn edit_graph(s: &mut Scenario, op: &EditOp) -> Result<(), EditError> {
    let name = op.name();
    match op {
        EditOp::AddNode { id, x, y, connect } => {
            let g = graph_mut(s, name)?;
            let id = id.unwrap_or_else(|| g.vertices.iter().map(|v| v.id.0 + 1).max().unwrap_or(0));
            if g.vertices.iter().any(|v| v.id.0 == id) {
                return Err(EditError::BadRequest(format!("vertex {id} already exists")));
            }
            for &other in connect {
                if !g.vertices.iter().any(|v| v.id.0 == other) {
                    return Err(missing("vertex", other));
                }
            }
            g.vertices.push(Vertex {
                id: VertexId(id),
                pos: Point::new(*x, *y),
            });
            let first = g.edges.iter().map(|e| e.id.0 + 1).max().unwrap_or(0);
            for (edge, &other) in (first..).zip(connect) {
                g.edges.push(EdgeSpec {
                    id: EdgeId(edge),
                    u: VertexId(id),
                    v: VertexId(other),
                    length: None,
                });
            }
        }
        EditOp::MoveNode { id, x, y } => {
            let g = graph_mut(s, name)?;
            let v = g
                .vertices
                .iter_mut()
                .find(|v| v.id.0 == *id)
                .ok_or_else(|| missing("vertex", *id))?;
            v.pos = Point::new(*x, *y);
        }
        EditOp::DeleteNode { id } => {
            let g = graph_mut(s, name)?;
            let before = g.vertices.len();
            g.vertices.retain(|v| v.id.0 != *id);
            if g.vertices.len() == before {
                return Err(missing("vertex", *id));
            }
            g.edges.retain(|e| e.u.0 != *id && e.v.0 != *id);
            if let SiteSet::Network(sites) = &mut s.sites {
                sites.retain(|v| v.0 != *id);
            }
        }
        EditOp::AddEdge { id, u, v, length } => {
            let g = graph_mut(s, name)?;
            let id = id.unwrap_or_else(|| g.edges.iter().map(|e| e.id.0 + 1).max().unwrap_or(0));
            if g.edges.iter().any(|e| e.id.0 == id) {
                return Err(EditError::BadRequest(format!("edge {id} already exists")));
            }
            g.edges.push(EdgeSpec {
                id: EdgeId(id),
                u: VertexId(*u),
                v: VertexId(*v),
                length: *length,
            });
        }
        EditOp::DeleteEdge { id } => {
            let g = graph_mut(s, name)?;
            let before = g.edges.len();
            g.edges.retain(|e| e.id.0 != *id);
            if g.edges.len() == before {
                return Err(missing("edge", *id));
            }
        }
        _ => unreachable!("graph ops only"),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn op(json: &str) -> EditOp {
        serde_json::from_str(json).unwrap()
    }

    #[test]
    fn parses_every_op() {
        for (text, name) in [
            (r#"{"op":"add_site","x":1,"y":2}"#, "add_site"),
            (r#"{"op":"move_site","id":1,"x":1,"y":2}"#, "move_site"),
            (r#"{"op":"delete_site","id":1}"#, "delete_site"),
            (r#"{"op":"add_node","x":1,"y":2,"connect":[0]}"#, "add_node"),
            (r#"{"op":"move_node","id":1,"x":1,"y":2}"#, "move_node"),
            (r#"{"op":"delete_node","id":1}"#, "delete_node"),
            (r#"{"op":"add_edge","u":1,"v":2}"#, "add_edge"),
            (r#"{"op":"delete_edge","id":1}"#, "delete_edge"),
            (
                r#"{"op":"set_trajectory","trajectory":{"plane":[[0,0],[1,1]]}}"#,
                "set_trajectory",
            ),
        ] {
            assert_eq!(op(text).name(), name);
        }
    }

    #[test]
    fn plane_site_ids_default_past_the_largest() {
        let s = Scenario::empty(Mode::Plane);
        let s = apply_edit(&s, &op(r#"{"op":"add_site","x":0.1,"y":0.1}"#)).unwrap();
        let s = apply_edit(&s, &op(r#"{"op":"add_site","x":0.2,"y":0.1}"#)).unwrap();
        assert_eq!(s.sites.ids(), vec![SiteId(0), SiteId(1)]);
    }

    #[test]
    fn graph_ops_need_network_mode() {
        let s = Scenario::empty(Mode::Plane);
        let err = apply_edit(&s, &op(r#"{"op":"add_node","x":1,"y":2}"#)).unwrap_err();
        assert!(matches!(err, EditError::WrongMode { op: "add_node", .. }));
        let err = apply_edit(
            &s,
            &op(r#"{"op":"set_trajectory","trajectory":{"network":[1]}}"#),
        )
        .unwrap_err();
        assert!(matches!(err, EditError::WrongMode { .. }));
    }

    #[test]
    fn delete_node_drops_edges_and_sites() {
        let mut s = Scenario::empty(Mode::Network);
        for (i, x) in [0.0, 1.0, 2.0].iter().enumerate() {
            let connect = if i == 0 {
                String::new()
            } else {
                format!(r#","connect":[{}]"#, i - 1)
            };
            s = apply_edit(
                &s,
                &op(&format!(r#"{{"op":"add_node","x":{x},"y":0{connect}}}"#)),
            )
            .unwrap();
        }
        s = apply_edit(&s, &op(r#"{"op":"add_site","vertex":2}"#)).unwrap();
        let g = s.graph.as_ref().unwrap();
        assert_eq!((g.vertices.len(), g.edges.len()), (3, 2));
        let s = apply_edit(&s, &op(r#"{"op":"delete_node","id":2}"#)).unwrap();
        assert_eq!(s.graph.as_ref().unwrap().edges.len(), 1);
        assert!(s.sites.is_empty());
    }
}
