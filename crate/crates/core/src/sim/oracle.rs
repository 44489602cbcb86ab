use serde::Serialize;

use super::{QueryPosition, SimError, TickReport, Trajectory};
use crate::engine::TickEvent;
use crate::exec::{par_map, Exec};
use crate::geometry::{DistanceKey, SiteId};
use crate::network::SiteDistanceTable;
use crate::scenario::{Scenario, SiteSet, TrajectorySpec};

/// Ground-truth kNN set at one tick, nearest first.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleTick {
    pub t: u64,
    pub knn: Vec<SiteId>,
}

/// Brute-force kNN at every tick of a constant-speed run of `scenario`.
///
/// Plane: a full scan of all sites by key. Network: per-site distance tables
/// from an array-scan shortest-path search, independent of the engine's
/// searches and of the Voronoi diagram.
pub fn brute_force_oracle(scenario: &Scenario) -> Result<Vec<OracleTick>, SimError> {
    brute_force_oracle_with(scenario, Exec::default())
}

pub fn brute_force_oracle_with(
    scenario: &Scenario,
    exec: Exec,
) -> Result<Vec<OracleTick>, SimError> {
    scenario.validate()?;
    let k = scenario.k;
    match (&scenario.sites, &scenario.trajectory) {
        (SiteSet::Plane(sites), TrajectorySpec::Plane(path)) => {
            let tr = Trajectory::plane(path.clone(), scenario.speed);
            let ticks: Vec<u64> = (0..tr.tick_count(scenario.ticks)).collect();
            Ok(par_map(exec, &ticks, |&t| {
                let QueryPosition::Plane(q) = tr.position_at(t) else {
                    unreachable!()
                };
                let mut keys: Vec<DistanceKey> =
                    sites.iter().map(|s| DistanceKey::new(&q, s)).collect();
                if k < keys.len() {
                    keys.select_nth_unstable(k - 1);
                    keys.truncate(k);
                }
                keys.sort_unstable();
                OracleTick {
                    t,
                    knn: keys.into_iter().map(|key| key.id).collect(),
                }
            }))
        }
        (SiteSet::Network(sites), TrajectorySpec::Network(path)) => {
            let graph = scenario.build_graph()?;
            let tr = Trajectory::network(&graph, path, scenario.speed)?;
            let ids: Vec<SiteId> = sites.iter().map(|v| v.site()).collect();
            let table = SiteDistanceTable::new(&graph, &ids)?;
            let ticks: Vec<u64> = (0..tr.tick_count(scenario.ticks)).collect();
            par_map(exec, &ticks, |&t| {
                let QueryPosition::Network(q) = tr.position_at(t) else {
                    unreachable!()
                };
                Ok(OracleTick {
                    t,
                    knn: table.knn_at(&graph, &q, k)?,
                })
            })
            .into_iter()
            .collect()
        }
        _ => unreachable!("validated scenario"),
    }
}

/// Engine-versus-oracle comparison of one run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DiffReport {
    pub total_ticks: usize,
    /// Ticks whose engine kNN set differs from the oracle's.
    pub mismatched_ticks: Vec<u64>,
    /// Ticks after the first where the oracle's kNN set changed.
    pub oracle_changes: usize,
    /// Ticks whose report carries an update event.
    pub engine_events: usize,
    pub engine_recomputes: usize,
    /// Ticks judged valid although the answer carried over from the
    /// previous tick differs from the oracle's set.
    pub unsound_valid_ticks: Vec<u64>,
}

impl DiffReport {
    pub fn is_clean(&self) -> bool {
        self.mismatched_ticks.is_empty() && self.unsound_valid_ticks.is_empty()
    }
}

fn as_set(ids: &[SiteId]) -> Vec<SiteId> {
    let mut v = ids.to_vec();
    v.sort_unstable();
    v
}

/// Tick-by-tick set comparison; the two runs must have equal lengths.
pub fn compare_runs(engine: &[TickReport], oracle: &[OracleTick]) -> Result<DiffReport, SimError> {
    if engine.len() != oracle.len() {
        return Err(SimError::InvalidArgument(format!(
            "engine has {} ticks, oracle has {}",
            engine.len(),
            oracle.len()
        )));
    }
    let mut mismatched = Vec::new();
    let mut unsound = Vec::new();
    let mut oracle_changes = 0;
    let mut prev: Option<Vec<SiteId>> = None;
    let mut prev_engine: Option<Vec<SiteId>> = None;
    for (r, o) in engine.iter().zip(oracle) {
        if r.t != o.t {
            return Err(SimError::InvalidArgument(format!(
                "tick {} paired with oracle tick {}",
                r.t, o.t
            )));
        }
        let truth = as_set(&o.knn);
        if as_set(&r.knn) != truth {
            mismatched.push(r.t);
        }
        if let Some(p) = &prev {
            if *p != truth {
                oracle_changes += 1;
            }
        }
        if r.valid_before_update && prev_engine.as_ref().is_some_and(|p| *p != truth) {
            unsound.push(r.t);
        }
        prev = Some(truth);
        prev_engine = Some(as_set(&r.knn));
    }
    Ok(DiffReport {
        total_ticks: engine.len(),
        mismatched_ticks: mismatched,
        oracle_changes,
        engine_events: engine.iter().filter(|r| r.event != TickEvent::None).count(),
        engine_recomputes: engine
            .iter()
            .filter(|r| r.event == TickEvent::Recompute)
            .count(),
        unsound_valid_ticks: unsound,
    })
}
