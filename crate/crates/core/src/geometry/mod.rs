//! Planar primitives and the order-1 Voronoi index over the data objects.

mod kdtree;
mod polygon;
mod voronoi;

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use polygon::{order_k_cell_polygon, Polygon};
pub(crate) use voronoi::check_sites;
pub use voronoi::{update_sites, voronoi_builds, SiteEdit, VoronoiIndex};

/// Identifier of a data object.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SiteId(pub u32);

impl fmt::Display for SiteId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    #[inline]
    pub fn dist2(&self, other: &Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    pub fn dist(&self, other: &Point) -> f64 {
        self.dist2(other).sqrt()
    }

    pub fn lerp(&self, other: &Point, t: f64) -> Point {
        Point::new(
            self.x + (other.x - self.x) * t,
            self.y + (other.y - self.y) * t,
        )
    }
}

/// A data object: an identified point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Site {
    pub id: SiteId,
    pub pos: Point,
}

impl Site {
    pub fn new(id: u32, x: f64, y: f64) -> Self {
        Self {
            id: SiteId(id),
            pos: Point::new(x, y),
        }
    }
}

/// Squared distance to a query point with the site id as tie-breaker.
///
/// The lexicographic order on `(d2, id)` is the total order used for every
/// "closer than" decision, so kNN sets and verdicts are deterministic even
/// when sites are equidistant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceKey {
    pub d2: f64,
    pub id: SiteId,
}

impl DistanceKey {
    #[inline]
    pub fn new(q: &Point, site: &Site) -> Self {
        Self {
            d2: q.dist2(&site.pos),
            id: site.id,
        }
    }

    pub fn distance(&self) -> f64 {
        self.d2.sqrt()
    }
}

impl Eq for DistanceKey {}

impl PartialOrd for DistanceKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for DistanceKey {
    fn cmp(&self, other: &Self) -> Ordering {
        self.d2.total_cmp(&other.d2).then(self.id.cmp(&other.id))
    }
}

/// Axis-aligned rectangle, serialized as `[x0, y0, x1, y1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct Rect {
    pub min: Point,
    pub max: Point,
}

impl Rect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self {
            min: Point::new(x0, y0),
            max: Point::new(x1, y1),
        }
    }

    pub fn unit() -> Self {
        Self::new(0.0, 0.0, 1.0, 1.0)
    }

    pub fn is_valid(&self) -> bool {
        self.min.is_finite()
            && self.max.is_finite()
            && self.min.x < self.max.x
            && self.min.y < self.max.y
    }

    pub fn contains(&self, p: &Point) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    /// Smallest rectangle containing all points, grown by `margin` on every side.
    pub fn enclosing<'a>(points: impl IntoIterator<Item = &'a Point>, margin: f64) -> Option<Self> {
        let mut it = points.into_iter();
        let first = it.next()?;
        let (mut lo, mut hi) = (*first, *first);
        for p in it {
            lo.x = lo.x.min(p.x);
            lo.y = lo.y.min(p.y);
            hi.x = hi.x.max(p.x);
            hi.y = hi.y.max(p.y);
        }
        Some(Self::new(
            lo.x - margin,
            lo.y - margin,
            hi.x + margin,
            hi.y + margin,
        ))
    }
}

impl From<[f64; 4]> for Rect {
    fn from(v: [f64; 4]) -> Self {
        Rect::new(v[0], v[1], v[2], v[3])
    }
}

impl From<Rect> for [f64; 4] {
    fn from(r: Rect) -> Self {
        [r.min.x, r.min.y, r.max.x, r.max.y]
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("no sites given")]
    Empty,
    #[error("duplicate site id {0}")]
    DuplicateId(SiteId),
    #[error("sites {0} and {1} have identical coordinates")]
    CoincidentSites(SiteId, SiteId),
    #[error("site {0} has a non-finite coordinate")]
    NonFinite(SiteId),
    #[error("site {0} not found")]
    NotFound(SiteId),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Brute-force ordering of all sites by key. Used by oracles and small inputs.
pub fn sorted_by_key(sites: &[Site], q: &Point) -> Vec<DistanceKey> {
    let mut keys: Vec<DistanceKey> = sites.iter().map(|s| DistanceKey::new(q, s)).collect();
    keys.sort_unstable();
    keys
}
