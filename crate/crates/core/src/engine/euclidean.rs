use crate::geometry::{DistanceKey, GeometryError, Point, SiteId, VoronoiIndex};

use super::{
    sorted_contains, sorted_ids, EngineError, Metrics, QueryConfig, TickEvent, TickOutcome,
    ValidationResult,
};

/// Union of the Voronoi neighbors of `subset`, minus `subset`. Id-sorted.
///
/// Pure adjacency lookups: linear in the total degree of the subset.
pub fn influential_neighbor_set(
    index: &VoronoiIndex,
    subset: &[SiteId],
) -> Result<Vec<SiteId>, GeometryError> {
    let members = sorted_ids(subset);
    let mut out = Vec::new();
    for &id in &members {
        out.extend(
            index
                .neighbors(id)?
                .iter()
                .filter(|n| !sorted_contains(&members, **n)),
        );
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

#[inline]
fn key(index: &VoronoiIndex, q: &Point, id: SiteId) -> DistanceKey {
    let pos = index.position(id).expect("engine ids come from the index");
    DistanceKey {
        d2: q.dist2(&pos),
        id,
    }
}

fn max_key(index: &VoronoiIndex, q: &Point, ids: &[SiteId]) -> Option<DistanceKey> {
    ids.iter().map(|&id| key(index, q, id)).max()
}

fn min_key(index: &VoronoiIndex, q: &Point, ids: &[SiteId]) -> Option<DistanceKey> {
    ids.iter().map(|&id| key(index, q, id)).min()
}

/// `a ≺_q b`: every member of `a` is closer to `q` than every member of `b`.
fn precedes(index: &VoronoiIndex, q: &Point, a: &[SiteId], b: &[SiteId]) -> bool {
    match (max_key(index, q, a), min_key(index, q, b)) {
        (Some(far), Some(near)) => far < near,
        _ => true,
    }
}

/// Live state of one moving kNN query in the plane.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryState {
    config: QueryConfig,
    /// Ordered by key at the last verification.
    prefetch: Vec<SiteId>,
    ins_of_prefetch: Vec<SiteId>,
    influential: Vec<SiteId>,
    metrics: Metrics,
}

impl QueryState {
    pub fn init(index: &VoronoiIndex, q: &Point, config: QueryConfig) -> Result<Self, EngineError> {
        let mut metrics = Metrics::default();
        let state = Self::compute(index, q, config, &mut metrics)?;
        Ok(state)
    }

    fn compute(
        index: &VoronoiIndex,
        q: &Point,
        config: QueryConfig,
        metrics: &mut Metrics,
    ) -> Result<Self, EngineError> {
        let size = config.check_sites(index.len())?;
        let prefetch = index.knn(q, size)?;
        let ins_of_prefetch = influential_neighbor_set(index, &prefetch)?;
        metrics.full_recomputes += 1;
        let mut state = Self {
            config,
            prefetch,
            ins_of_prefetch,
            influential: Vec::new(),
            metrics: *metrics,
        };
        state.refresh_influential();
        Ok(state)
    }

    fn refresh_influential(&mut self) {
        let mut is = self.ins_of_prefetch.clone();
        is.extend_from_slice(&self.prefetch[self.config.k..]);
        is.sort_unstable();
        self.influential = is;
    }

    pub fn config(&self) -> QueryConfig {
        self.config
    }

    /// Current kNN set, nearest first (as of the last verification).
    pub fn knn(&self) -> &[SiteId] {
        &self.prefetch[..self.config.k]
    }

    pub fn prefetch(&self) -> &[SiteId] {
        &self.prefetch
    }

    /// `I(R)`, id-sorted.
    pub fn ins_of_prefetch(&self) -> &[SiteId] {
        &self.ins_of_prefetch
    }

    /// The influential set guarding the kNN set, id-sorted.
    pub fn influential_set(&self) -> &[SiteId] {
        &self.influential
    }

    pub fn metrics(&self) -> &Metrics {
        &self.metrics
    }

    /// One pass over the kNN set and the influential set.
    pub fn validate(&self, index: &VoronoiIndex, q: &Point) -> ValidationResult {
        let knn = self.knn();
        let far = max_key(index, q, knn).expect("k >= 1");
        let near = min_key(index, q, &self.influential);
        let valid = near.is_none_or(|n| far < n);
        ValidationResult {
            valid,
            candidate: near.map(|k| k.id),
            delete: Some(far.id),
            comparisons: knn.len() + self.influential.len(),
            off_subnetwork: false,
        }
    }

    /// Repairs the state after a failed validation: re-rank inside `R`,
    /// else swap one object into `R`, else recompute from scratch.
    pub fn apply_update(
        &mut self,
        index: &VoronoiIndex,
        q: &Point,
        result: &ValidationResult,
    ) -> Result<TickEvent, EngineError> {
        if result.valid {
            return Ok(TickEvent::None);
        }
        let before = sorted_ids(self.knn());
        let k = self.config.k;
        let candidate_in_prefetch = result
            .candidate
            .is_some_and(|c| self.prefetch[k..].contains(&c));

        let event = if candidate_in_prefetch && self.try_rerank(index, q) {
            TickEvent::Rerank
        } else if self.try_swap(index, q)? {
            TickEvent::Swap
        } else {
            let mut metrics = self.metrics;
            *self = Self::compute(index, q, self.config, &mut metrics)?;
            // compute() already counted it
            self.metrics.full_recomputes -= 1;
            TickEvent::Recompute
        };
        let changed = sorted_ids(self.knn()) != before;
        self.metrics.record_update(event, changed);
        Ok(event)
    }

    fn try_rerank(&mut self, index: &VoronoiIndex, q: &Point) -> bool {
        let mut sorted = self.prefetch.clone();
        sorted.sort_by_cached_key(|&id| key(index, q, id));
        if !precedes(index, q, &sorted[..self.config.k], &self.ins_of_prefetch) {
            return false;
        }
        self.prefetch = sorted;
        self.refresh_influential();
        true
    }

    fn try_swap(&mut self, index: &VoronoiIndex, q: &Point) -> Result<bool, EngineError> {
        let Some(incoming) = min_key(index, q, &self.ins_of_prefetch) else {
            return Ok(false);
        };
        let outgoing = max_key(index, q, &self.prefetch).expect("prefetch is nonempty");
        if incoming > outgoing {
            return Ok(false);
        }
        let mut next: Vec<SiteId> = self
            .prefetch
            .iter()
            .copied()
            .filter(|&id| id != outgoing.id)
            .collect();
        next.push(incoming.id);
        let next_ins = influential_neighbor_set(index, &next)?;
        if !precedes(index, q, &next, &next_ins) {
            return Ok(false);
        }
        next.sort_by_cached_key(|&id| key(index, q, id));
        self.prefetch = next;
        self.ins_of_prefetch = next_ins;
        self.refresh_influential();
        Ok(true)
    }

    /// Validate at `q` and repair if needed.
    pub fn tick(&mut self, index: &VoronoiIndex, q: &Point) -> Result<TickOutcome, EngineError> {
        let validation = self.validate(index, q);
        let scanned = self.config.k + self.influential.len();
        self.metrics.ticks += 1;
        self.metrics.validations += 1;
        self.metrics.comparisons += validation.comparisons as u64;
        let event = self.apply_update(index, q, &validation)?;
        Ok(TickOutcome {
            validation,
            event,
            scanned,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Site;

    fn ids(v: &[u32]) -> Vec<SiteId> {
        v.iter().map(|&i| SiteId(i)).collect()
    }

    fn two_sites() -> VoronoiIndex {
        VoronoiIndex::build(&[Site::new(0, 0.0, 0.0), Site::new(1, 10.0, 0.0)]).unwrap()
    }

    #[test]
    fn ins_examples() {
        let idx = two_sites();
        assert_eq!(
            influential_neighbor_set(&idx, &ids(&[0])).unwrap(),
            ids(&[1])
        );
        assert!(influential_neighbor_set(&idx, &ids(&[0, 1]))
            .unwrap()
            .is_empty());
        assert!(influential_neighbor_set(&idx, &ids(&[7])).is_err());
    }

    #[test]
    fn two_site_validation() {
        let idx = two_sites();
        let cfg = QueryConfig::new(1, 1.0).unwrap();
        let state = QueryState::init(&idx, &Point::new(0.0, 0.0), cfg).unwrap();
        assert_eq!(state.knn(), ids(&[0]).as_slice());
        assert_eq!(state.influential_set(), ids(&[1]).as_slice());

        let ok = state.validate(&idx, &Point::new(4.0, 0.0));
        assert!(ok.valid);
        assert_eq!(ok.comparisons, 2);

        let bad = state.validate(&idx, &Point::new(6.0, 0.0));
        assert!(!bad.valid);
        assert_eq!(bad.candidate, Some(SiteId(1)));
        assert_eq!(bad.delete, Some(SiteId(0)));
    }

    #[test]
    fn two_site_crossing_swaps() {
        let idx = two_sites();
        let cfg = QueryConfig::new(1, 1.0).unwrap();
        let mut state = QueryState::init(&idx, &Point::new(0.0, 0.0), cfg).unwrap();
        let q = Point::new(6.0, 0.0);
        let out = state.tick(&idx, &q).unwrap();
        assert_eq!(out.event, TickEvent::Swap);
        assert_eq!(state.knn(), ids(&[1]).as_slice());
        assert_eq!(state.influential_set(), ids(&[0]).as_slice());
        assert_eq!(state.metrics().swaps, 1);
        assert_eq!(state.metrics().full_recomputes, 1);
        assert_eq!(state.tick(&idx, &q).unwrap().event, TickEvent::None);
    }

    #[test]
    fn rank_change_inside_prefetch_is_rerank() {
        // four sites on a line; k = 2, rho = 2 keeps all of them in R
        let sites: Vec<_> = (0..4).map(|i| Site::new(i, i as f64 * 2.0, 0.0)).collect();
        let idx = VoronoiIndex::build(&sites).unwrap();
        let cfg = QueryConfig::new(2, 2.0).unwrap();
        let mut state = QueryState::init(&idx, &Point::new(1.0, 0.5), cfg).unwrap();
        assert_eq!(sorted_ids(state.knn()), ids(&[0, 1]));
        let before = sorted_ids(state.prefetch());
        // at x = 3.2 the brute-force order is 1 (1.2), 2 (0.8) closer: ranks 2 and 3 flip
        let out = state.tick(&idx, &Point::new(3.2, 0.5)).unwrap();
        assert_eq!(out.event, TickEvent::Rerank);
        assert_eq!(sorted_ids(state.knn()), ids(&[1, 2]));
        assert_eq!(sorted_ids(state.prefetch()), before);
        assert_eq!(state.metrics().reranks, 1);
    }

    #[test]
    fn rho_one_influential_set_is_ins() {
        let sites: Vec<_> = (0..9)
            .map(|i| Site::new(i, (i % 3) as f64, (i / 3) as f64 + 0.1 * i as f64))
            .collect();
        let idx = VoronoiIndex::build(&sites).unwrap();
        let state = QueryState::init(
            &idx,
            &Point::new(1.0, 1.0),
            QueryConfig::new(3, 1.0).unwrap(),
        )
        .unwrap();
        assert_eq!(state.prefetch(), state.knn());
        assert_eq!(state.influential_set(), state.ins_of_prefetch());
        assert!(state
            .influential_set()
            .iter()
            .all(|id| !state.knn().contains(id)));
    }

    #[test]
    fn too_few_sites() {
        let idx = two_sites();
        let err = QueryState::init(&idx, &Point::default(), QueryConfig::new(2, 1.6).unwrap())
            .unwrap_err();
        assert_eq!(
            err,
            EngineError::TooFewSites {
                needed: 3,
                available: 2
            }
        );
    }

    #[test]
    fn stationary_query_never_updates() {
        let sites: Vec<_> = (0..20)
            .map(|i| Site::new(i, (i * 7 % 11) as f64, (i * 5 % 13) as f64))
            .collect();
        let idx = VoronoiIndex::build(&sites).unwrap();
        let q = Point::new(4.3, 6.1);
        let mut state = QueryState::init(&idx, &q, QueryConfig::new(4, 1.5).unwrap()).unwrap();
        for _ in 0..10 {
            assert_eq!(state.tick(&idx, &q).unwrap().event, TickEvent::None);
        }
        assert_eq!(state.metrics().ticks, 10);
        assert_eq!(state.metrics().knn_changes, 0);
    }
}
