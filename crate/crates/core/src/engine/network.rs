use std::cmp::Ordering;

use crate::geometry::SiteId;
use crate::network::{
    approx_eq, cmp_keys, restricted_subnetwork, shortest_distances, sort_network_keys, Graph,
    NetworkDistanceKey, NetworkError, NetworkPosition, NetworkVoronoi, SearchLimit, Subnetwork,
    VertexId,
};

use super::{
    sorted_contains, sorted_ids, EngineError, Metrics, QueryConfig, TickEvent, TickOutcome,
    ValidationResult,
};

/// Union of the network Voronoi neighbors of `subset`, minus `subset`. Id-sorted.
pub fn network_influential_neighbor_set(
    nv: &NetworkVoronoi,
    subset: &[SiteId],
) -> Result<Vec<SiteId>, NetworkError> {
    let members = sorted_ids(subset);
    let mut out = Vec::new();
    for &id in &members {
        out.extend(
            nv.neighbors(id)?
                .iter()
                .filter(|n| !sorted_contains(&members, **n)),
        );
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

fn max_by_key(keys: &[NetworkDistanceKey]) -> Option<NetworkDistanceKey> {
    keys.iter().copied().reduce(|a, b| {
        if cmp_keys(&b, &a) == Ordering::Greater {
            b
        } else {
            a
        }
    })
}

fn min_by_key(keys: &[NetworkDistanceKey]) -> Option<NetworkDistanceKey> {
    keys.iter().copied().reduce(|a, b| {
        if cmp_keys(&b, &a) == Ordering::Less {
            b
        } else {
            a
        }
    })
}

fn precedes(a: &[NetworkDistanceKey], b: &[NetworkDistanceKey]) -> bool {
    match (max_by_key(a), min_by_key(b)) {
        (Some(far), Some(near)) => cmp_keys(&far, &near) == Ordering::Less,
        _ => true,
    }
}

/// Exact full-graph keys from `q` to each of `ids`.
fn full_keys(
    graph: &Graph,
    q: &NetworkPosition,
    ids: &[SiteId],
) -> Result<Vec<NetworkDistanceKey>, NetworkError> {
    let slots: Vec<usize> = ids
        .iter()
        .map(|&id| {
            graph
                .vertex_slot(VertexId::from(id))
                .ok_or(NetworkError::SiteNotVertex(id))
        })
        .collect::<Result<_, _>>()?;
    let paths = shortest_distances(graph, &graph.seeds(q)?, SearchLimit::Targets(&slots));
    Ok(ids
        .iter()
        .zip(&slots)
        .map(|(&id, &slot)| NetworkDistanceKey {
            d: paths.distance(slot),
            id,
        })
        .collect())
}

/// The `m` nearest sites by network distance, nearest first.
pub(crate) fn network_knn(
    graph: &Graph,
    nv: &NetworkVoronoi,
    q: &NetworkPosition,
    m: usize,
) -> Result<Vec<SiteId>, NetworkError> {
    let mut keys: Vec<NetworkDistanceKey> = Vec::new();
    let mut cutoff: Option<f64> = None;
    crate::network::search(graph, &graph.seeds(q)?, |slot, d| {
        if let Some(c) = cutoff {
            if d > c && !approx_eq(d, c) {
                return false;
            }
        }
        let id = graph.vertices()[slot].id.site();
        if nv.is_site(id) {
            keys.push(NetworkDistanceKey { d, id });
            if keys.len() == m {
                cutoff = Some(d);
            }
        }
        true
    });
    sort_network_keys(&mut keys);
    keys.truncate(m);
    Ok(keys.into_iter().map(|k| k.id).collect())
}

/// Live state of one moving kNN query on a road network.
///
/// Validation searches only the cached subnetwork formed by the Voronoi
/// cells of `R ∪ I(R)`; the cache is rebuilt whenever `R` changes as a set.
#[derive(Debug, Clone)]
pub struct NetQueryState {
    config: QueryConfig,
    prefetch: Vec<SiteId>,
    ins_of_prefetch: Vec<SiteId>,
    influential: Vec<SiteId>,
    subnetwork: Subnetwork,
    subnetwork_builds: u64,
    metrics: Metrics,
}

impl NetQueryState {
    pub fn init(
        graph: &Graph,
        nv: &NetworkVoronoi,
        q: &NetworkPosition,
        config: QueryConfig,
    ) -> Result<Self, EngineError> {
        let mut metrics = Metrics::default();
        Self::compute(graph, nv, q, config, &mut metrics, 0)
    }

    fn compute(
        graph: &Graph,
        nv: &NetworkVoronoi,
        q: &NetworkPosition,
        config: QueryConfig,
        metrics: &mut Metrics,
        subnetwork_builds: u64,
    ) -> Result<Self, EngineError> {
        let size = config.check_sites(nv.sites().len())?;
        let prefetch = network_knn(graph, nv, q, size)?;
        let ins_of_prefetch = network_influential_neighbor_set(nv, &prefetch)?;
        metrics.full_recomputes += 1;
        let mut state = Self {
            config,
            subnetwork: restricted_subnetwork(graph, nv, &[]),
            prefetch,
            ins_of_prefetch,
            influential: Vec::new(),
            subnetwork_builds,
            metrics: *metrics,
        };
        state.refresh_influential();
        state.rebuild_subnetwork(graph, nv);
        Ok(state)
    }

    fn refresh_influential(&mut self) {
        let mut is = self.ins_of_prefetch.clone();
        is.extend_from_slice(&self.prefetch[self.config.k..]);
        is.sort_unstable();
        self.influential = is;
    }

    fn rebuild_subnetwork(&mut self, graph: &Graph, nv: &NetworkVoronoi) {
        let mut members = self.prefetch.clone();
        members.extend_from_slice(&self.ins_of_prefetch);
        self.subnetwork = restricted_subnetwork(graph, nv, &members);
        self.subnetwork_builds += 1;
    }

    pub fn config(&self) -> QueryConfig {
        self.config
    }

    pub fn knn(&self) -> &[SiteId] {
        &self.prefetch[..self.config.k]
    }

    pub fn prefetch(&self) -> &[SiteId] {
        &self.prefetch
    }

    pub fn ins_of_prefetch(&self) -> &[SiteId] {
        &self.ins_of_prefetch
    }

    pub fn influential_set(&self) -> &[SiteId] {
        &self.influential
    }

    pub fn metrics(&self) -> &Metrics {
        &self.metrics
    }

    pub fn subnetwork(&self) -> &Subnetwork {
        &self.subnetwork
    }

    /// Times the cached subnetwork has been (re)built.
    pub fn subnetwork_builds(&self) -> u64 {
        self.subnetwork_builds
    }

    pub fn validate(&self, graph: &Graph, q: &NetworkPosition) -> ValidationResult {
        self.validate_traced(graph, q).0
    }

    /// Validation plus the ids of the subnetwork vertices the search settled.
    pub fn validate_traced(
        &self,
        graph: &Graph,
        q: &NetworkPosition,
    ) -> (ValidationResult, Vec<VertexId>) {
        let comparisons = self.config.k + self.influential.len();
        let Some(seeds) = self.subnetwork.seeds(graph, q) else {
            let result = ValidationResult {
                valid: false,
                candidate: None,
                delete: None,
                comparisons: 0,
                off_subnetwork: true,
            };
            return (result, Vec::new());
        };
        let sub = self.subnetwork.graph();
        let targets: Vec<(SiteId, Option<usize>)> = self
            .knn()
            .iter()
            .chain(&self.influential)
            .map(|&id| (id, self.subnetwork.vertex_slot(VertexId::from(id))))
            .collect();
        let slots: Vec<usize> = targets.iter().filter_map(|t| t.1).collect();
        let paths = shortest_distances(sub, &seeds, SearchLimit::Targets(&slots));
        let keys: Vec<NetworkDistanceKey> = targets
            .iter()
            .map(|&(id, slot)| NetworkDistanceKey {
                d: slot.map_or(f64::INFINITY, |s| paths.distance(s)),
                id,
            })
            .collect();
        let (knn_keys, is_keys) = keys.split_at(self.config.k);
        let far = max_by_key(knn_keys).expect("k >= 1");
        let near = min_by_key(is_keys);
        let valid = far.d.is_finite() && near.is_none_or(|n| cmp_keys(&far, &n) == Ordering::Less);
        let visited = paths
            .settled()
            .iter()
            .map(|&s| sub.vertices()[s].id)
            .collect();
        let result = ValidationResult {
            valid,
            candidate: near.map(|k| k.id),
            delete: Some(far.id),
            comparisons,
            off_subnetwork: false,
        };
        (result, visited)
    }

    pub fn apply_update(
        &mut self,
        graph: &Graph,
        nv: &NetworkVoronoi,
        q: &NetworkPosition,
        result: &ValidationResult,
    ) -> Result<TickEvent, EngineError> {
        if result.valid {
            return Ok(TickEvent::None);
        }
        let before = sorted_ids(self.knn());
        let k = self.config.k;
        let event = if result.off_subnetwork {
            self.recompute(graph, nv, q)?;
            TickEvent::Recompute
        } else {
            let candidate_in_prefetch = result
                .candidate
                .is_some_and(|c| self.prefetch[k..].contains(&c));
            let mut ids = self.prefetch.clone();
            ids.extend_from_slice(&self.ins_of_prefetch);
            let keys = full_keys(graph, q, &ids)?;
            let (r_keys, ins_keys) = keys.split_at(self.prefetch.len());
            if candidate_in_prefetch && self.try_rerank(r_keys, ins_keys) {
                TickEvent::Rerank
            } else if self.try_swap(graph, nv, q, r_keys, ins_keys)? {
                TickEvent::Swap
            } else {
                self.recompute(graph, nv, q)?;
                TickEvent::Recompute
            }
        };
        let changed = sorted_ids(self.knn()) != before;
        self.metrics.record_update(event, changed);
        Ok(event)
    }

    fn recompute(
        &mut self,
        graph: &Graph,
        nv: &NetworkVoronoi,
        q: &NetworkPosition,
    ) -> Result<(), EngineError> {
        let mut metrics = self.metrics;
        *self = Self::compute(
            graph,
            nv,
            q,
            self.config,
            &mut metrics,
            self.subnetwork_builds,
        )?;
        self.metrics.full_recomputes -= 1;
        Ok(())
    }

    fn try_rerank(
        &mut self,
        r_keys: &[NetworkDistanceKey],
        ins_keys: &[NetworkDistanceKey],
    ) -> bool {
        let mut sorted = r_keys.to_vec();
        sort_network_keys(&mut sorted);
        if !precedes(&sorted[..self.config.k], ins_keys) {
            return false;
        }
        self.prefetch = sorted.into_iter().map(|k| k.id).collect();
        self.refresh_influential();
        true
    }

    fn try_swap(
        &mut self,
        graph: &Graph,
        nv: &NetworkVoronoi,
        q: &NetworkPosition,
        r_keys: &[NetworkDistanceKey],
        ins_keys: &[NetworkDistanceKey],
    ) -> Result<bool, EngineError> {
        let (Some(incoming), Some(outgoing)) = (min_by_key(ins_keys), max_by_key(r_keys)) else {
            return Ok(false);
        };
        if cmp_keys(&incoming, &outgoing) == Ordering::Greater {
            return Ok(false);
        }
        let mut next: Vec<NetworkDistanceKey> = r_keys
            .iter()
            .copied()
            .filter(|k| k.id != outgoing.id)
            .collect();
        next.push(incoming);
        let next_ids: Vec<SiteId> = next.iter().map(|k| k.id).collect();
        let next_ins = network_influential_neighbor_set(nv, &next_ids)?;
        let next_ins_keys = full_keys(graph, q, &next_ins)?;
        if !precedes(&next, &next_ins_keys) {
            return Ok(false);
        }
        sort_network_keys(&mut next);
        self.prefetch = next.into_iter().map(|k| k.id).collect();
        self.ins_of_prefetch = next_ins;
        self.refresh_influential();
        self.rebuild_subnetwork(graph, nv);
        Ok(true)
    }

    pub fn tick(
        &mut self,
        graph: &Graph,
        nv: &NetworkVoronoi,
        q: &NetworkPosition,
    ) -> Result<TickOutcome, EngineError> {
        let validation = self.validate(graph, q);
        let scanned = self.config.k + self.influential.len();
        self.metrics.ticks += 1;
        self.metrics.validations += 1;
        self.metrics.comparisons += validation.comparisons as u64;
        let event = self.apply_update(graph, nv, q, &validation)?;
        Ok(TickOutcome {
            validation,
            event,
            scanned,
        })
    }
}
