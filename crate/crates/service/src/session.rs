use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex, MutexGuard, PoisonError};
use std::time::{Duration, Instant};

use insq_core::geometry::VoronoiIndex;
use insq_core::scenario::SiteSet;
use insq_core::{Mode, Scenario, Simulation};
use serde::Serialize;
use serde_json::{json, Value};
use tokio::sync::broadcast;

use crate::edit::{apply_edit, EditOp};
use crate::error::ApiError;
use crate::message::{Broadcast, StreamMessage};

const CHANNEL_CAPACITY: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Idle,
    Running,
    Paused,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionStatus {
    pub id: String,
    pub status: RunStatus,
    pub mode: Mode,
    /// Tick of the last report, absent before the first.
    pub t: Option<u64>,
    pub complete: bool,
    pub runnable: bool,
    pub speed: f64,
}

struct Inner {
    scenario: Scenario,
    /// Built lazily on the first start or step.
    sim: Option<Simulation>,
    status: RunStatus,
    /// Bumped whenever a running loop must stop.
    generation: u64,
    speed: Option<f64>,
}

/// One user's scene and simulation. Commands lock the session, so they
/// apply in arrival order; the run loop takes the same lock per tick.
pub struct Session {
    id: String,
    inner: Mutex<Inner>,
    tx: broadcast::Sender<Arc<Broadcast>>,
    cell_subscribers: AtomicUsize,
    last_active: Mutex<Instant>,
}

/// Decrements the cell-subscriber count when a stream closes.
pub struct CellGuard(Arc<Session>);

impl Drop for CellGuard {
    fn drop(&mut self) {
        self.0.cell_subscribers.fetch_sub(1, Ordering::SeqCst);
    }
}

impl Session {
    pub fn new(id: String, now: Instant) -> Self {
        let (tx, _) = broadcast::channel(CHANNEL_CAPACITY);
        Self {
            id,
            inner: Mutex::new(Inner {
                scenario: Scenario::empty(Mode::Plane),
                sim: None,
                status: RunStatus::Idle,
                generation: 0,
                speed: None,
            }),
            tx,
            cell_subscribers: AtomicUsize::new(0),
            last_active: Mutex::new(now),
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    fn lock(&self) -> MutexGuard<'_, Inner> {
        self.inner.lock().unwrap_or_else(PoisonError::into_inner)
    }

    pub fn touch(&self, now: Instant) {
        *self
            .last_active
            .lock()
            .unwrap_or_else(PoisonError::into_inner) = now;
    }

    pub fn last_active(&self) -> Instant {
        *self
            .last_active
            .lock()
            .unwrap_or_else(PoisonError::into_inner)
    }

    pub fn subscribe(&self) -> broadcast::Receiver<Arc<Broadcast>> {
        self.tx.subscribe()
    }

    pub fn want_cells(self: &Arc<Self>) -> CellGuard {
        self.cell_subscribers.fetch_add(1, Ordering::SeqCst);
        CellGuard(self.clone())
    }

    fn send(&self, b: Broadcast) {
        // no receivers is fine
        let _ = self.tx.send(Arc::new(b));
    }

    pub fn status(&self) -> SessionStatus {
        let inner = self.lock();
        let sim = inner.sim.as_ref();
        SessionStatus {
            id: self.id.clone(),
            status: inner.status,
            mode: inner.scenario.mode,
            t: sim.filter(|s| s.is_started()).map(Simulation::current_tick),
            complete: sim.is_some_and(Simulation::is_complete),
            runnable: inner.scenario.is_runnable(),
            speed: sim.map_or(
                inner.speed.unwrap_or(inner.scenario.speed),
                Simulation::speed,
            ),
        }
    }

    pub fn scenario(&self) -> Scenario {
        self.lock().scenario.clone()
    }

    /// Replaces the scene; any run stops and the clock returns to tick 0.
    pub fn put_scenario(&self, scenario: Scenario) {
        let mut inner = self.lock();
        inner.generation += 1;
        inner.status = RunStatus::Idle;
        inner.sim = None;
        inner.speed = None;
        inner.scenario = scenario;
        self.send(Broadcast::Reset);
    }

    /// A scene that could run before the edit must still run after it;
    /// drafts only need to stay well formed. Mid-run, the query state is
    /// recomputed at the current position.
    pub fn edit(&self, op: &EditOp) -> Result<Scenario, ApiError> {
        let mut inner = self.lock();
        let next = apply_edit(&inner.scenario, op)?;
        if inner.scenario.is_runnable() {
            next.validate()?;
        } else {
            next.validate_structure()?;
        }
        match inner.sim.as_mut() {
            Some(sim) if sim.is_started() => sim.replace_scenario(next.clone())?,
            _ => inner.sim = None,
        }
        inner.scenario = next.clone();
        Ok(next)
    }

    fn ensure_sim(inner: &mut Inner) -> Result<&mut Simulation, ApiError> {
        if inner.sim.is_none() {
            let mut sim = Simulation::new(inner.scenario.clone())?;
            if let Some(speed) = inner.speed {
                sim.set_speed(speed)?;
            }
            inner.sim = Some(sim);
        }
        Ok(inner.sim.as_mut().expect("just built"))
    }

    /// Advances one tick and broadcasts the result. Returns the message sent.
    fn advance(&self, inner: &mut Inner) -> Result<Broadcast, ApiError> {
        let want_cell = self.cell_subscribers.load(Ordering::SeqCst) > 0;
        let sim = Self::ensure_sim(inner)?;
        let out = match sim.step()? {
            Some(report) => {
                let mut msg = StreamMessage::from(&report);
                if want_cell {
                    msg.cell = sim
                        .cell_polygon()
                        .map(|p| p.vertices().iter().map(|v| [v.x, v.y]).collect());
                }
                Broadcast::Tick(msg)
            }
            None => Broadcast::Complete {
                t: sim.current_tick(),
            },
        };
        let done = sim.is_complete();
        let t = sim.current_tick();
        self.send(out.clone());
        if done {
            inner.status = RunStatus::Idle;
            if matches!(out, Broadcast::Tick(_)) {
                self.send(Broadcast::Complete { t });
            }
        }
        Ok(out)
    }

    /// Starts (or restarts with a new interval) the run loop. A finished run
    /// reports completion at once instead.
    pub fn start(self: &Arc<Self>, interval: Duration) -> Result<Value, ApiError> {
        let mut inner = self.lock();
        let sim = Self::ensure_sim(&mut inner)?;
        if sim.is_complete() {
            let t = sim.current_tick();
            inner.status = RunStatus::Idle;
            self.send(Broadcast::Complete { t });
            return Ok(json!({ "complete": true, "t": t }));
        }
        inner.generation += 1;
        inner.status = RunStatus::Running;
        let generation = inner.generation;
        drop(inner);
        tokio::spawn(run_loop(self.clone(), generation, interval));
        Ok(json!({ "status": RunStatus::Running }))
    }

    pub fn pause(&self) -> Value {
        let mut inner = self.lock();
        if inner.status == RunStatus::Running {
            inner.generation += 1;
            inner.status = RunStatus::Paused;
        }
        json!({ "status": inner.status })
    }

    /// One tick while not running; the reply is the streamed message.
    pub fn step(&self) -> Result<Value, ApiError> {
        let mut inner = self.lock();
        if inner.status == RunStatus::Running {
            return Err(ApiError::conflict("cannot step while running"));
        }
        inner.status = RunStatus::Paused;
        let out = self.advance(&mut inner)?;
        Ok(serde_json::from_str(&out.to_text(true)).expect("valid JSON"))
    }

    /// Distance per tick from the next tick on; kept until the scene is replaced.
    pub fn set_speed(&self, speed: f64) -> Result<Value, ApiError> {
        if !(speed.is_finite() && speed > 0.0) {
            return Err(ApiError {
                field: Some("speed".into()),
                ..ApiError::bad_request(format!("speed must be positive, got {speed}"))
            });
        }
        let mut inner = self.lock();
        if let Some(sim) = inner.sim.as_mut() {
            sim.set_speed(speed)?;
        }
        inner.speed = Some(speed);
        Ok(json!({ "speed": speed }))
    }

    pub fn is_running(&self) -> bool {
        self.lock().status == RunStatus::Running
    }

    /// Stops any run loop; used when the session is dropped.
    pub fn stop(&self) {
        let mut inner = self.lock();
        inner.generation += 1;
        if inner.status == RunStatus::Running {
            inner.status = RunStatus::Paused;
        }
    }

    /// Order-1 diagram of the current scene for display.
    pub fn diagram(&self) -> Result<Value, ApiError> {
        let scenario = self.scenario();
        match &scenario.sites {
            SiteSet::Plane(sites) if sites.is_empty() => {
                Ok(json!({ "mode": "plane", "cells": [] }))
            }
            SiteSet::Plane(sites) => {
                let index =
                    VoronoiIndex::build(sites).map_err(|e| ApiError::bad_request(e.to_string()))?;
                let cells: Vec<Value> = sites
                    .iter()
                    .map(|s| {
                        let poly = index
                            .cell_polygon(s.id, &scenario.bbox)
                            .map(|p| p.vertices().iter().map(|v| [v.x, v.y]).collect::<Vec<_>>());
                        json!({ "site": s.id, "polygon": poly.unwrap_or_default() })
                    })
                    .collect();
                Ok(json!({ "mode": "plane", "cells": cells }))
            }
            SiteSet::Network(sites) if sites.is_empty() => {
                Ok(json!({ "mode": "network", "edges": [] }))
            }
            SiteSet::Network(sites) => {
                let graph = scenario.build_graph()?;
                let nv = insq_core::NetworkVoronoi::build(&graph, sites)
                    .map_err(|e| ApiError::bad_request(e.to_string()))?;
                let mut edges = Vec::with_capacity(graph.edges().len());
                for e in graph.edges() {
                    let segments = nv
                        .segments(&graph, e.id)
                        .map_err(|e| ApiError::bad_request(e.to_string()))?;
                    edges.push(json!({ "edge": e.id, "u": e.u, "v": e.v, "length": e.length, "segments": segments }));
                }
                Ok(json!({ "mode": "network", "edges": edges }))
            }
        }
    }
}

async fn run_loop(session: Arc<Session>, generation: u64, interval: Duration) {
    loop {
        if interval.is_zero() {
            tokio::task::yield_now().await;
        } else {
            tokio::time::sleep(interval).await;
        }
        let mut inner = session.lock();
        if inner.generation != generation || inner.status != RunStatus::Running {
            return;
        }
        if let Err(e) = session.advance(&mut inner) {
            tracing::warn!(session = %session.id, error = %e.error, "run stopped");
            inner.status = RunStatus::Idle;
            return;
        }
        if inner.status != RunStatus::Running {
            return;
        }
    }
}
