use insq_core::engine::TickEvent;
use insq_core::geometry::SiteId;
use insq_core::sim::{ReportPosition, TickReport};
use serde::Serialize;

/// One tick as sent over the stream.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StreamMessage {
    pub t: u64,
    pub pos: ReportPosition,
    pub knn: Vec<SiteId>,
    pub ins: Vec<SiteId>,
    pub prefetch: Vec<SiteId>,
    pub valid: bool,
    pub event: TickEvent,
    pub green_radius: f64,
    pub red_radius: Option<f64>,
    /// Order-k cell, only for clients that asked for it.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cell: Option<Vec<[f64; 2]>>,
}

impl From<&TickReport> for StreamMessage {
    fn from(r: &TickReport) -> Self {
        Self {
            t: r.t,
            pos: r.pos,
            knn: r.knn.clone(),
            ins: r.is_set.clone(),
            prefetch: r.prefetch.clone(),
            valid: r.valid_before_update,
            event: r.event,
            green_radius: r.green_radius,
            red_radius: r.red_radius,
            cell: None,
        }
    }
}

/// Everything a session pushes to its subscribers.
#[derive(Debug, Clone, PartialEq)]
pub enum Broadcast {
    Tick(StreamMessage),
    /// The run reached its last tick.
    Complete {
        t: u64,
    },
    /// The scenario was replaced and the run is back at tick 0.
    Reset,
}

impl Broadcast {
    /// JSON text for one subscriber; `cell` is dropped unless requested.
    pub fn to_text(&self, with_cell: bool) -> String {
        let value = match self {
            Broadcast::Tick(m) if !with_cell && m.cell.is_some() => {
                serde_json::to_value(StreamMessage {
                    cell: None,
                    ..m.clone()
                })
            }
            Broadcast::Tick(m) => serde_json::to_value(m),
            Broadcast::Complete { t } => Ok(serde_json::json!({ "complete": true, "t": t })),
            Broadcast::Reset => Ok(serde_json::json!({ "reset": true })),
        };
        value.expect("messages always serialize").to_string()
    }
}
