//! Warning-message protocol: beacon scheduling for halted vehicles,
//! duplicate suppression, single-relay roadside units, and detour planning
//! for vehicles that learn about a blocked edge ahead.
//!
//! Every beacon emission is its own message, keyed by (origin, sequence
//! number). Stations absorb each message id at most once no matter how many
//! copies reach them; a roadside unit additionally re-broadcasts each new
//! message a single time while the hop budget allows.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::Vec2;
use crate::mobility::{VehicleId, VehicleState, VehicleStatus};
use crate::netgraph::{EdgeId, EdgeWeights, NetError, NodeId, RoadNetwork, Route};

/// Messaging parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    /// Beacon period of a halted vehicle, s.
    #[serde(default = "default_beacon_interval")]
    pub beacon_interval_s: f64,
    /// Relay budget: a message created at hop 0 may be re-broadcast until its
    /// hop count reaches this value.
    #[serde(default = "default_max_hops")]
    pub max_hops: u8,
    /// Application payload carried by each frame, bytes.
    #[serde(default = "default_payload_bytes")]
    pub payload_bytes: u32,
}

fn default_beacon_interval() -> f64 {
    1.0
}
fn default_max_hops() -> u8 {
    1
}
fn default_payload_bytes() -> u32 {
    256
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            beacon_interval_s: default_beacon_interval(),
            max_hops: default_max_hops(),
            payload_bytes: default_payload_bytes(),
        }
    }
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<(), ProtocolError> {
        if !(self.beacon_interval_s > 0.0) {
            return Err(ProtocolError::InvalidConfig(
                "beacon_interval_s must be positive".into(),
            ));
        }
        if self.payload_bytes == 0 {
            return Err(ProtocolError::InvalidConfig(
                "payload_bytes must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Globally unique message identity: the halted originator plus the beacon
/// sequence number.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub struct MsgId {
    pub origin: VehicleId,
    pub seq: u32,
}

impl fmt::Display for MsgId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.origin, self.seq)
    }
}

/// The beacon payload: which edge is blocked and where the sender sits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WarningMessage {
    pub id: MsgId,
    pub blocked_edge: EdgeId,
    pub pos: Vec2,
    pub created_s: f64,
}

/// Roadside unit identifier.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct RsuId(pub u32);

impl fmt::Display for RsuId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "rsu{}", self.0)
    }
}

/// Transceiver identity on the shared channel.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub enum Station {
    Veh(VehicleId),
    Rsu(RsuId),
}

impl fmt::Display for Station {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Station::Veh(v) => v.fmt(f),
            Station::Rsu(r) => r.fmt(f),
        }
    }
}

/// Returns the beacon sequence number due at `now_s` for a vehicle halted
/// since `halt_start_s`, if this instant lies on the beacon grid. The first
/// beacon (sequence 0) goes out the moment the halt begins.
pub fn beacon_seq(halt_start_s: f64, now_s: f64, interval_s: f64) -> Option<u32> {
    let elapsed = now_s - halt_start_s;
    if elapsed < -1e-9 {
        return None;
    }
    let k = (elapsed / interval_s).round();
    if k >= 0.0 && (elapsed - k * interval_s).abs() <= 1e-6 {
        Some(k as u32)
    } else {
        None
    }
}

/// A fixed roadside relay: absorbs each message once and re-broadcasts it if
/// the hop budget allows.
#[derive(Debug, Clone)]
pub struct Rsu {
    pub id: RsuId,
    pub node: NodeId,
    pub pos: Vec2,
    seen: BTreeSet<MsgId>,
}

impl Rsu {
    pub fn new(id: RsuId, node: NodeId, pos: Vec2) -> Self {
        Rsu {
            id,
            node,
            pos,
            seen: BTreeSet::new(),
        }
    }

    pub fn seen_count(&self) -> usize {
        self.seen.len()
    }

    /// Processes one decoded frame carrying `msg` at `hop`. Returns the hop
    /// count to relay the message at, or `None` when the message is a
    /// duplicate or the hop budget is spent. At most one `Some` per message
    /// id over the unit's lifetime.
    pub fn handle(&mut self, msg: &WarningMessage, hop: u8, max_hops: u8) -> Option<u8> {
        if !self.seen.insert(msg.id) {
            return None;
        }
        if hop < max_hops {
            Some(hop + 1)
        } else {
            None
        }
    }
}

/// Per-vehicle protocol state: which messages it has decoded and which edges
/// it therefore believes are blocked.
#[derive(Debug, Clone, Default)]
pub struct VehicleComms {
    seen: BTreeSet<MsgId>,
    known_blocked: BTreeSet<EdgeId>,
}

impl VehicleComms {
    /// Absorbs one decoded warning. Returns true the first time this message
    /// id is seen.
    pub fn absorb(&mut self, msg: &WarningMessage) -> bool {
        if !self.seen.insert(msg.id) {
            return false;
        }
        self.known_blocked.insert(msg.blocked_edge.clone());
        true
    }

    pub fn known_blocked(&self) -> &BTreeSet<EdgeId> {
        &self.known_blocked
    }

    pub fn seen_count(&self) -> usize {
        self.seen.len()
    }
}

/// First known-blocked edge strictly ahead on a driving vehicle's route, if
/// any. The edge currently under the vehicle cannot be avoided and never
/// triggers a detour.
pub fn blocked_edge_ahead<'a>(
    vehicle: &'a VehicleState,
    known_blocked: &BTreeSet<EdgeId>,
) -> Option<&'a EdgeId> {
    if !matches!(vehicle.status, VehicleStatus::Driving) {
        return None;
    }
    vehicle
        .remaining_edges()
        .iter()
        .find(|e| known_blocked.contains(*e))
}

/// Plans a detour for a vehicle with a known-blocked edge ahead: the route
/// prefix up to and including the current edge is kept, and the remainder is
/// replaced by the cheapest path from the current edge's downstream node that
/// avoids every known-blocked edge. Returns `None` when no detour is needed,
/// none exists, or the best detour is the current route.
pub fn plan_detour(
    net: &RoadNetwork,
    vehicle: &VehicleState,
    known_blocked: &BTreeSet<EdgeId>,
    base_weights: &EdgeWeights,
) -> Result<Option<Route>, ProtocolError> {
    if blocked_edge_ahead(vehicle, known_blocked).is_none() {
        return Ok(None);
    }
    let current = net.edge(vehicle.current_edge())?;
    let dest = {
        let last = net.edge(
            vehicle
                .route
                .edges()
                .last()
                .expect("routes are never empty"),
        )?;
        last.to.clone()
    };
    let mut weights = base_weights.clone();
    for edge in known_blocked {
        if weights.contains_key(edge) {
            weights.insert(edge.clone(), f64::INFINITY);
        }
    }
    let suffix = match crate::netgraph::shortest_path(net, &current.to, &dest, &weights) {
        Ok(route) => route,
        Err(NetError::Unreachable { .. }) => return Ok(None),
        Err(e) => return Err(e.into()),
    };
    let mut edges: Vec<EdgeId> = vehicle.route.edges()[..=vehicle.edge_index].to_vec();
    edges.extend(suffix.edges().iter().cloned());
    let detour = Route::new(net, edges)?;
    if detour.edges() == vehicle.route.edges() {
        return Ok(None);
    }
    Ok(Some(detour))
}

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("invalid protocol configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Net(#[from] NetError),
}
