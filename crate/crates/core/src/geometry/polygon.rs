use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::{GeometryError, Point, Rect, Site, SiteId};

/// Closed half-plane `a*x + b*y <= c`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct HalfPlane {
    a: f64,
    b: f64,
    c: f64,
}

impl HalfPlane {
    fn eval(&self, p: &Point) -> f64 {
        self.a * p.x + self.b * p.y - self.c
    }
}

/// Points at least as close to `me` as to `other`.
pub(crate) fn bisector_halfplane(me: &Point, other: &Point) -> HalfPlane {
    HalfPlane {
        a: 2.0 * (other.x - me.x),
        b: 2.0 * (other.y - me.y),
        c: (other.x * other.x + other.y * other.y) - (me.x * me.x + me.y * me.y),
    }
}

/// Counterclockwise ring; the closing edge is implicit.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Polygon {
    vertices: Vec<Point>,
}

impl Polygon {
    pub fn rect(r: &Rect) -> Self {
        Self {
            vertices: vec![
                r.min,
                Point::new(r.max.x, r.min.y),
                r.max,
                Point::new(r.min.x, r.max.y),
            ],
        }
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.len() < 3
    }

    pub fn area(&self) -> f64 {
        let n = self.vertices.len();
        if n < 3 {
            return 0.0;
        }
        let mut twice = 0.0;
        for i in 0..n {
            let p = self.vertices[i];
            let q = self.vertices[(i + 1) % n];
            twice += p.x * q.y - q.x * p.y;
        }
        twice / 2.0
    }

    /// Point-in-convex-polygon test; boundary points count as inside.
    pub fn contains(&self, p: &Point) -> bool {
        let n = self.vertices.len();
        if n < 3 {
            return false;
        }
        (0..n).all(|i| {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x) >= 0.0
        })
    }

    /// Sutherland-Hodgman clip against one half-plane.
    pub(crate) fn clip(&self, h: HalfPlane) -> Polygon {
        let n = self.vertices.len();
        if n < 3 {
            return Polygon::default();
        }
        let mut out: Vec<Point> = Vec::with_capacity(n + 1);
        for i in 0..n {
            let cur = self.vertices[i];
            let next = self.vertices[(i + 1) % n];
            let fc = h.eval(&cur);
            let fn_ = h.eval(&next);
            if fc <= 0.0 {
                push_distinct(&mut out, cur);
            }
            if (fc < 0.0 && fn_ > 0.0) || (fc > 0.0 && fn_ < 0.0) {
                let t = fc / (fc - fn_);
                push_distinct(&mut out, cur.lerp(&next, t));
            }
        }
        if out.len() > 1 && out[0] == out[out.len() - 1] {
            out.pop();
        }
        if out.len() < 3 {
            out.clear();
        }
        Polygon { vertices: out }
    }
}

fn push_distinct(out: &mut Vec<Point>, p: Point) {
    if out.last() != Some(&p) {
        out.push(p);
    }
}

/// Locus within `bbox` whose kNN set (with `k = subset.len()`) is `subset`.
///
/// Intersects the bisector half-planes of every inside/outside pair, which is
/// O(k·n) clips: meant for display and test oracles, not the query path.
/// Returns an empty polygon when the subset has no cell inside the box.
pub fn order_k_cell_polygon(
    sites: &[Site],
    subset: &[SiteId],
    bbox: &Rect,
) -> Result<Polygon, GeometryError> {
    if subset.is_empty() {
        return Err(GeometryError::InvalidArgument("empty subset".into()));
    }
    if !bbox.is_valid() {
        return Err(GeometryError::InvalidArgument(
            "degenerate bounding box".into(),
        ));
    }
    let inside: HashSet<SiteId> = subset.iter().copied().collect();
    let members: Vec<&Site> = sites.iter().filter(|s| inside.contains(&s.id)).collect();
    if members.len() != inside.len() {
        let missing = subset
            .iter()
            .find(|id| !sites.iter().any(|s| s.id == **id))
            .copied()
            .unwrap_or(subset[0]);
        return Err(GeometryError::NotFound(missing));
    }
    let mut poly = Polygon::rect(bbox);
    for outside in sites.iter().filter(|s| !inside.contains(&s.id)) {
        for m in &members {
            poly = poly.clip(bisector_halfplane(&m.pos, &outside.pos));
            if poly.is_empty() {
                return Ok(poly);
            }
        }
    }
    Ok(poly)
}
