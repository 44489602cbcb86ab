use serde::Serialize;

use crate::geometry::Point;
use crate::network::{EdgeId, Graph, NetworkError, NetworkPosition, VertexId};

/// Query location in either mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QueryPosition {
    Plane(Point),
    Network(NetworkPosition),
}

/// Position as it appears in reports and stream messages: coordinates,
/// plus the edge and offset in network mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReportPosition {
    pub x: f64,
    pub y: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub edge: Option<EdgeId>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub offset: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
struct Leg {
    edge: EdgeId,
    length: f64,
    /// Travelling from `u` to `v` of the edge.
    forward: bool,
}

#[derive(Debug, Clone, PartialEq)]
enum Path {
    Plane(Vec<Point>),
    Network {
        start: NetworkPosition,
        legs: Vec<Leg>,
    },
}

/// Polyline or vertex path played back at constant speed by arc length.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    path: Path,
    /// `cumulative[i]`: arc length at the start of leg `i`; one extra entry
    /// holds the total.
    cumulative: Vec<f64>,
    pub speed: f64,
}

fn prefix_sums(lengths: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut out = vec![0.0];
    for l in lengths {
        out.push(out.last().copied().unwrap_or(0.0) + l);
    }
    out
}

impl Trajectory {
    /// Panics on an empty polyline.
    pub fn plane(points: Vec<Point>, speed: f64) -> Self {
        assert!(!points.is_empty(), "trajectory needs a point");
        let cumulative = prefix_sums(points.windows(2).map(|w| w[0].dist(&w[1])));
        Self {
            path: Path::Plane(points),
            cumulative,
            speed,
        }
    }

    /// Consecutive vertices travel along the shortest edge joining them.
    pub fn network(graph: &Graph, vertices: &[VertexId], speed: f64) -> Result<Self, NetworkError> {
        let first = *vertices.first().ok_or(NetworkError::Empty)?;
        let start = graph.position_of_vertex(first)?;
        let mut legs = Vec::with_capacity(vertices.len().saturating_sub(1));
        for w in vertices.windows(2) {
            graph.vertex(w[1])?;
            let e = graph
                .edge_between(w[0], w[1])
                .ok_or(NetworkError::UnknownVertex(w[1]))?;
            legs.push(Leg {
                edge: e.id,
                length: e.length,
                forward: e.u == w[0],
            });
        }
        let cumulative = prefix_sums(legs.iter().map(|l| l.length));
        Ok(Self {
            path: Path::Network { start, legs },
            cumulative,
            speed,
        })
    }

    pub fn length(&self) -> f64 {
        *self.cumulative.last().expect("non-empty")
    }

    /// Position after travelling `s` along the path, clamped to its ends.
    pub fn position_at_arc(&self, s: f64) -> QueryPosition {
        let legs = self.cumulative.len() - 1;
        let (leg, local) = if legs == 0 {
            (None, 0.0)
        } else if s >= self.length() {
            (
                Some(legs - 1),
                self.cumulative[legs] - self.cumulative[legs - 1],
            )
        } else {
            let s = s.max(0.0);
            // last leg starting at or before s; skips zero-length legs
            let i = self.cumulative.partition_point(|c| *c <= s) - 1;
            (Some(i), s - self.cumulative[i])
        };
        match &self.path {
            Path::Plane(points) => match leg {
                None => QueryPosition::Plane(points[0]),
                Some(i) => {
                    let len = self.cumulative[i + 1] - self.cumulative[i];
                    let t = if len > 0.0 {
                        (local / len).min(1.0)
                    } else {
                        1.0
                    };
                    QueryPosition::Plane(points[i].lerp(&points[i + 1], t))
                }
            },
            Path::Network { start, legs } => match leg {
                None => QueryPosition::Network(*start),
                Some(i) => {
                    let l = &legs[i];
                    let local = local.min(l.length);
                    let offset = if l.forward { local } else { l.length - local };
                    QueryPosition::Network(NetworkPosition {
                        edge: l.edge,
                        offset,
                    })
                }
            },
        }
    }

    /// Position at tick `t` when moving at `self.speed` from the start.
    pub fn position_at(&self, t: u64) -> QueryPosition {
        self.position_at_arc(t as f64 * self.speed)
    }

    /// Ticks of a constant-speed run: through the first tick that reaches
    /// the end, or exactly `fixed` when given.
    pub fn tick_count(&self, fixed: Option<u64>) -> u64 {
        if let Some(n) = fixed {
            return n;
        }
        let len = self.length();
        let mut t = (len / self.speed).ceil().max(0.0) as u64;
        while t > 0 && (t - 1) as f64 * self.speed >= len {
            t -= 1;
        }
        while (t as f64) * self.speed < len {
            t += 1;
        }
        t + 1
    }
}
