use std::collections::{HashMap, HashSet};
use std::sync::atomic::{AtomicU64, Ordering as AtomicOrdering};

use robust::Coord;
use serde::{Deserialize, Serialize};
use spade::{DelaunayTriangulation, HasPosition, Point2, Triangulation};

use super::kdtree::KdTree;
use super::polygon::{bisector_halfplane, Polygon};
use super::{GeometryError, Point, Rect, Site, SiteId};

static BUILDS: AtomicU64 = AtomicU64::new(0);

/// Number of [`VoronoiIndex`] constructions performed by this process.
pub fn voronoi_builds() -> u64 {
    BUILDS.load(AtomicOrdering::Relaxed)
}

struct Vertex {
    pos: Point2<f64>,
    slot: usize,
}

impl HasPosition for Vertex {
    type Scalar = f64;

    fn position(&self) -> Point2<f64> {
        self.pos
    }
}

/// Immutable order-1 Voronoi structure over a set of sites.
///
/// Two sites are neighbors only when their cells share a boundary segment of
/// positive length; cells meeting at a single point (cocircular sites) are
/// not neighbors.
#[derive(Debug, Clone)]
pub struct VoronoiIndex {
    sites: Vec<Site>,
    slots: HashMap<SiteId, usize>,
    adjacency: Vec<Vec<SiteId>>,
    tree: KdTree,
}

impl VoronoiIndex {
    pub fn build(sites: &[Site]) -> Result<Self, GeometryError> {
        if sites.is_empty() {
            return Err(GeometryError::Empty);
        }
        let mut sites = sites.to_vec();
        sites.sort_by_key(|s| s.id);
        let mut slots = HashMap::with_capacity(sites.len());
        let mut seen_pos: HashMap<(u64, u64), SiteId> = HashMap::with_capacity(sites.len());
        for (slot, s) in sites.iter().enumerate() {
            if !s.pos.is_finite() {
                return Err(GeometryError::NonFinite(s.id));
            }
            if slots.insert(s.id, slot).is_some() {
                return Err(GeometryError::DuplicateId(s.id));
            }
            // +0.0 folds negative zero onto positive zero.
            let bits = ((s.pos.x + 0.0).to_bits(), (s.pos.y + 0.0).to_bits());
            if let Some(other) = seen_pos.insert(bits, s.id) {
                return Err(GeometryError::CoincidentSites(other, s.id));
            }
        }

        let adjacency = delaunay_adjacency(&sites)?;
        let tree = KdTree::build(&sites);
        BUILDS.fetch_add(1, AtomicOrdering::Relaxed);
        Ok(Self {
            sites,
            slots,
            adjacency,
            tree,
        })
    }

    /// Sites ordered by id.
    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn contains(&self, id: SiteId) -> bool {
        self.slots.contains_key(&id)
    }

    pub fn site(&self, id: SiteId) -> Result<&Site, GeometryError> {
        self.slots
            .get(&id)
            .map(|&s| &self.sites[s])
            .ok_or(GeometryError::NotFound(id))
    }

    #[inline]
    pub fn position(&self, id: SiteId) -> Option<Point> {
        self.slots.get(&id).map(|&s| self.sites[s].pos)
    }

    /// Voronoi neighbors of `id`, ascending by id.
    pub fn neighbors(&self, id: SiteId) -> Result<&[SiteId], GeometryError> {
        self.slots
            .get(&id)
            .map(|&s| self.adjacency[s].as_slice())
            .ok_or(GeometryError::NotFound(id))
    }

    /// The `m` nearest sites to `q`, ascending by [`super::DistanceKey`].
    pub fn knn(&self, q: &Point, m: usize) -> Result<Vec<SiteId>, GeometryError> {
        if m == 0 || m > self.sites.len() {
            return Err(GeometryError::InvalidArgument(format!(
                "m = {m} outside 1..={}",
                self.sites.len()
            )));
        }
        Ok(self
            .tree
            .nearest(&self.sites, q, m)
            .into_iter()
            .map(|slot| self.sites[slot].id)
            .collect())
    }

    /// Order-1 cell of `id` clipped to `bbox`.
    pub fn cell_polygon(&self, id: SiteId, bbox: &Rect) -> Result<Polygon, GeometryError> {
        let slot = *self.slots.get(&id).ok_or(GeometryError::NotFound(id))?;
        if !bbox.is_valid() {
            return Err(GeometryError::InvalidArgument(
                "degenerate bounding box".into(),
            ));
        }
        let me = self.sites[slot].pos;
        let mut poly = Polygon::rect(bbox);
        for nb in &self.adjacency[slot] {
            let other = self.sites[self.slots[nb]].pos;
            poly = poly.clip(bisector_halfplane(&me, &other));
            if poly.is_empty() {
                break;
            }
        }
        Ok(poly)
    }

    /// Pairs `(a, b)` with `a < b` that are Voronoi neighbors.
    pub fn edges(&self) -> Vec<(SiteId, SiteId)> {
        let mut out = Vec::new();
        for (slot, nbrs) in self.adjacency.iter().enumerate() {
            let a = self.sites[slot].id;
            out.extend(nbrs.iter().filter(|&&b| a < b).map(|&b| (a, b)));
        }
        out
    }
}

fn delaunay_adjacency(sites: &[Site]) -> Result<Vec<Vec<SiteId>>, GeometryError> {
    let mut adjacency = vec![Vec::new(); sites.len()];
    if sites.len() < 2 {
        return Ok(adjacency);
    }
    let vertices: Vec<Vertex> = sites
        .iter()
        .enumerate()
        .map(|(slot, s)| Vertex {
            pos: Point2::new(s.pos.x, s.pos.y),
            slot,
        })
        .collect();
    let dt = DelaunayTriangulation::<Vertex>::bulk_load(vertices)
        .map_err(|e| GeometryError::InvalidArgument(format!("triangulation failed: {e:?}")))?;
    if dt.num_vertices() != sites.len() {
        return Err(GeometryError::InvalidArgument(
            "triangulation dropped a vertex".into(),
        ));
    }

    for edge in dt.undirected_edges() {
        let [d, rev] = [edge.as_directed(), edge.as_directed().rev()];
        let a = d.from().data().slot;
        let b = d.to().data().slot;
        // An interior edge whose two triangles share a circumcircle is dual
        // to a zero-length Voronoi edge.
        if let (Some(c), Some(e)) = (d.opposite_vertex(), rev.opposite_vertex()) {
            let pa = coord(&sites[a].pos);
            let pb = coord(&sites[b].pos);
            let pc = coord(&sites[c.data().slot].pos);
            let pe = coord(&sites[e.data().slot].pos);
            if robust::incircle(pa, pb, pc, pe) == 0.0 {
                continue;
            }
        }
        adjacency[a].push(sites[b].id);
        adjacency[b].push(sites[a].id);
    }
    for nbrs in &mut adjacency {
        nbrs.sort_unstable();
        nbrs.dedup();
    }
    Ok(adjacency)
}

fn coord(p: &Point) -> Coord<f64> {
    Coord { x: p.x, y: p.y }
}

/// A single site edit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum SiteEdit {
    Add { id: SiteId, x: f64, y: f64 },
    Move { id: SiteId, x: f64, y: f64 },
    Remove { id: SiteId },
}

/// Applies `ops` in order and rebuilds the index from the resulting site set.
pub fn update_sites(index: &VoronoiIndex, ops: &[SiteEdit]) -> Result<VoronoiIndex, GeometryError> {
    let mut sites = index.sites.clone();
    for op in ops {
        match *op {
            SiteEdit::Add { id, x, y } => {
                if sites.iter().any(|s| s.id == id) {
                    return Err(GeometryError::DuplicateId(id));
                }
                sites.push(Site {
                    id,
                    pos: Point::new(x, y),
                });
            }
            SiteEdit::Move { id, x, y } => {
                let site = sites
                    .iter_mut()
                    .find(|s| s.id == id)
                    .ok_or(GeometryError::NotFound(id))?;
                site.pos = Point::new(x, y);
            }
            SiteEdit::Remove { id } => {
                let before = sites.len();
                sites.retain(|s| s.id != id);
                if sites.len() == before {
                    return Err(GeometryError::NotFound(id));
                }
            }
        }
    }
    VoronoiIndex::build(&sites)
}

/// Unique-id check without building; used by validators that must not bump
/// the build counter.
pub(crate) fn check_sites(sites: &[Site]) -> Result<(), GeometryError> {
    if sites.is_empty() {
        return Err(GeometryError::Empty);
    }
    let mut ids = HashSet::with_capacity(sites.len());
    let mut pos: HashMap<(u64, u64), SiteId> = HashMap::with_capacity(sites.len());
    for s in sites {
        if !s.pos.is_finite() {
            return Err(GeometryError::NonFinite(s.id));
        }
        if !ids.insert(s.id) {
            return Err(GeometryError::DuplicateId(s.id));
        }
        if let Some(o) = pos.insert(((s.pos.x + 0.0).to_bits(), (s.pos.y + 0.0).to_bits()), s.id) {
            return Err(GeometryError::CoincidentSites(o, s.id));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(v: &[u32]) -> Vec<SiteId> {
        v.iter().map(|&i| SiteId(i)).collect()
    }

    #[test]
    fn single_site_has_no_neighbors() {
        let idx = VoronoiIndex::build(&[Site::new(0, 0.0, 0.0)]).unwrap();
        assert!(idx.neighbors(SiteId(0)).unwrap().is_empty());
    }

    #[test]
    fn two_sites_are_mutual_neighbors() {
        let idx = VoronoiIndex::build(&[Site::new(0, 0.0, 0.0), Site::new(1, 2.0, 0.0)]).unwrap();
        assert_eq!(idx.neighbors(SiteId(0)).unwrap(), ids(&[1]).as_slice());
        assert_eq!(idx.neighbors(SiteId(1)).unwrap(), ids(&[0]).as_slice());
    }

    #[test]
    fn rejects_duplicates() {
        let dup_id = VoronoiIndex::build(&[Site::new(1, 0.0, 0.0), Site::new(1, 1.0, 0.0)]);
        assert_eq!(dup_id.unwrap_err(), GeometryError::DuplicateId(SiteId(1)));
        let dup_pos = VoronoiIndex::build(&[Site::new(1, 0.0, 0.0), Site::new(2, -0.0, 0.0)]);
        assert_eq!(
            dup_pos.unwrap_err(),
            GeometryError::CoincidentSites(SiteId(1), SiteId(2))
        );
        assert_eq!(VoronoiIndex::build(&[]).unwrap_err(), GeometryError::Empty);
        let nan = VoronoiIndex::build(&[Site::new(4, f64::NAN, 0.0)]);
        assert_eq!(nan.unwrap_err(), GeometryError::NonFinite(SiteId(4)));
    }

    #[test]
    fn grid_center_excludes_diagonals() {
        let mut sites = Vec::new();
        for i in 0..3 {
            for j in 0..3 {
                sites.push(Site::new(i * 3 + j, i as f64, j as f64));
            }
        }
        let idx = VoronoiIndex::build(&sites).unwrap();
        // center is id 4 at (1,1); side neighbors are (0,1)=1, (1,0)=3, (1,2)=5, (2,1)=7
        assert_eq!(
            idx.neighbors(SiteId(4)).unwrap(),
            ids(&[1, 3, 5, 7]).as_slice()
        );
        assert_eq!(idx.neighbors(SiteId(0)).unwrap(), ids(&[1, 3]).as_slice());
    }

    #[test]
    fn collinear_sites_chain() {
        let sites: Vec<_> = (0..5)
            .map(|i| Site::new(i, i as f64 * 2.0, i as f64))
            .collect();
        let idx = VoronoiIndex::build(&sites).unwrap();
        assert_eq!(idx.neighbors(SiteId(0)).unwrap(), ids(&[1]).as_slice());
        assert_eq!(idx.neighbors(SiteId(2)).unwrap(), ids(&[1, 3]).as_slice());
    }

    #[test]
    fn knn_examples() {
        let sites = [
            Site::new(1, 0.0, 0.0),
            Site::new(2, 3.0, 0.0),
            Site::new(3, 0.0, 4.0),
            Site::new(4, 6.0, 6.0),
        ];
        let idx = VoronoiIndex::build(&sites).unwrap();
        assert_eq!(idx.knn(&Point::new(1.0, 1.0), 2).unwrap(), ids(&[1, 2]));
        assert_eq!(idx.knn(&Point::new(6.0, 6.0), 1).unwrap(), ids(&[4]));
        assert_eq!(
            idx.knn(&Point::new(0.0, 0.0), 4).unwrap(),
            ids(&[1, 2, 3, 4])
        );
        assert!(matches!(
            idx.knn(&Point::new(0.0, 0.0), 5),
            Err(GeometryError::InvalidArgument(_))
        ));
        assert!(idx.knn(&Point::new(0.0, 0.0), 0).is_err());
    }

    #[test]
    fn unknown_ids_are_not_found() {
        let idx = VoronoiIndex::build(&[Site::new(0, 0.0, 0.0)]).unwrap();
        assert_eq!(
            idx.neighbors(SiteId(9)).unwrap_err(),
            GeometryError::NotFound(SiteId(9))
        );
        assert!(idx.cell_polygon(SiteId(9), &Rect::unit()).is_err());
    }

    #[test]
    fn two_site_cell_is_half_box() {
        let idx = VoronoiIndex::build(&[Site::new(0, 0.0, 0.0), Site::new(1, 2.0, 0.0)]).unwrap();
        let bbox = Rect::new(-1.0, -1.0, 3.0, 1.0);
        let cell = idx.cell_polygon(SiteId(0), &bbox).unwrap();
        assert!((cell.area() - 4.0).abs() < 1e-12);
        let xs: Vec<f64> = cell.vertices().iter().map(|p| p.x).collect();
        assert!(xs.iter().all(|&x| (-1.0..=1.0).contains(&x)));
        let single = VoronoiIndex::build(&[Site::new(0, 0.0, 0.0)]).unwrap();
        assert!((single.cell_polygon(SiteId(0), &bbox).unwrap().area() - 8.0).abs() < 1e-12);
    }

    #[test]
    fn edits_rebuild() {
        let idx = VoronoiIndex::build(&[Site::new(0, 0.0, 0.0)]).unwrap();
        let two = update_sites(
            &idx,
            &[SiteEdit::Add {
                id: SiteId(1),
                x: 2.0,
                y: 0.0,
            }],
        )
        .unwrap();
        assert_eq!(two.neighbors(SiteId(0)).unwrap(), ids(&[1]).as_slice());
        let back = update_sites(&two, &[SiteEdit::Remove { id: SiteId(1) }]).unwrap();
        assert!(back.neighbors(SiteId(0)).unwrap().is_empty());
        assert_eq!(
            update_sites(&idx, &[SiteEdit::Remove { id: SiteId(5) }]).unwrap_err(),
            GeometryError::NotFound(SiteId(5))
        );
        assert!(matches!(
            update_sites(
                &two,
                &[SiteEdit::Move {
                    id: SiteId(1),
                    x: 0.0,
                    y: 0.0
                }]
            ),
            Err(GeometryError::CoincidentSites(..))
        ));
    }
}
