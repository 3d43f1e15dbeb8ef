//! Microscopic vehicle movement: Krauss-style car following on a single
//! effective lane per edge, static and vehicle-actuated traffic signals,
//! vehicle spawning, and the accident-halt lifecycle.
//!
//! The worked unit here is the safe-speed update: a follower never plans a
//! speed that could close more than the net gap to its leader even if the
//! leader brakes at full strength for a reaction time, which is what keeps
//! the no-collision invariant inherent rather than patched up afterwards.

mod world;

pub use world::{StatusCounts, TrajectoryRow, World};

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::Vec2;
use crate::netgraph::{EdgeId, NetError, NodeId, RoadNetwork, Route};

/// Driver/vehicle characteristics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleParams {
    /// Maximum acceleration, m/s^2.
    #[serde(default = "default_accel")]
    pub accel_mps2: f64,
    /// Comfortable full braking, m/s^2.
    #[serde(default = "default_decel")]
    pub decel_mps2: f64,
    /// Driver reaction time, s.
    #[serde(default = "default_tau")]
    pub tau_s: f64,
    /// Standstill gap kept to the leader, m.
    #[serde(default = "default_min_gap")]
    pub min_gap_m: f64,
    /// Vehicle length, m.
    #[serde(default = "default_length")]
    pub length_m: f64,
    /// Dawdling factor in [0, 1]; 0 disables randomness.
    #[serde(default = "default_sigma")]
    pub sigma: f64,
}

fn default_accel() -> f64 {
    2.6
}
fn default_decel() -> f64 {
    4.5
}
fn default_tau() -> f64 {
    1.0
}
fn default_min_gap() -> f64 {
    2.5
}
fn default_length() -> f64 {
    5.0
}
fn default_sigma() -> f64 {
    0.5
}

impl Default for VehicleParams {
    fn default() -> Self {
        VehicleParams {
            accel_mps2: default_accel(),
            decel_mps2: default_decel(),
            tau_s: default_tau(),
            min_gap_m: default_min_gap(),
            length_m: default_length(),
            sigma: default_sigma(),
        }
    }
}

impl VehicleParams {
    pub fn validate(&self) -> Result<(), MobilityError> {
        if !(self.accel_mps2 > 0.0) {
            return Err(MobilityError::InvalidParams("accel_mps2 must be positive".into()));
        }
        if !(self.decel_mps2 > 0.0) {
            return Err(MobilityError::InvalidParams("decel_mps2 must be positive".into()));
        }
        if !(self.tau_s > 0.0) {
            return Err(MobilityError::InvalidParams("tau_s must be positive".into()));
        }
        if !(self.min_gap_m >= 0.0) {
            return Err(MobilityError::InvalidParams("min_gap_m must be nonnegative".into()));
        }
        if !(self.length_m > 0.0) {
            return Err(MobilityError::InvalidParams("length_m must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.sigma) {
            return Err(MobilityError::InvalidParams("sigma must be in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Dense vehicle identifier, assigned in spawn-order by the world.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct VehicleId(pub u32);

impl fmt::Display for VehicleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.0)
    }
}

/// Lifecycle of a vehicle within one run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum VehicleStatus {
    /// Scheduled but not yet on the road.
    Pending,
    Driving,
    /// Stopped on its edge until `resume_s`.
    Halted { resume_s: f64 },
    Arrived,
}

impl VehicleStatus {
    pub fn label(self) -> &'static str {
        match self {
            VehicleStatus::Pending => "pending",
            VehicleStatus::Driving => "driving",
            VehicleStatus::Halted { .. } => "halted",
            VehicleStatus::Arrived => "arrived",
        }
    }
}

/// Monotone per-vehicle trip totals.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Accumulated {
    pub travel_time_s: f64,
    pub distance_m: f64,
    pub co2_mass: f64,
}

/// Full per-vehicle simulation state.
#[derive(Debug, Clone)]
pub struct VehicleState {
    pub id: VehicleId,
    pub params: VehicleParams,
    pub route: Route,
    /// Index of the edge currently occupied within `route`.
    pub edge_index: usize,
    /// Front-bumper position from the upstream end of the current edge, m.
    pub offset_m: f64,
    pub speed_mps: f64,
    pub status: VehicleStatus,
    /// Scheduled entry time; actual spawn may be later if the entry edge is
    /// congested.
    pub entry_time_s: f64,
    /// Time the vehicle actually started driving.
    pub spawn_time_s: Option<f64>,
    pub accumulated: Accumulated,
    pub is_test_vehicle: bool,
    pub reroutes: u32,
    /// Time the accident halt began, kept after resuming.
    pub halt_start_s: Option<f64>,
    /// Position frozen at the halt, used as the warning transmit origin.
    pub halt_pos: Option<Vec2>,
    /// Edge this vehicle blocked while halted.
    pub blocked_edge: Option<EdgeId>,
}

impl VehicleState {
    pub fn new(
        id: VehicleId,
        params: VehicleParams,
        route: Route,
        entry_time_s: f64,
        is_test_vehicle: bool,
    ) -> Self {
        VehicleState {
            id,
            params,
            route,
            edge_index: 0,
            offset_m: 0.0,
            speed_mps: 0.0,
            status: VehicleStatus::Pending,
            entry_time_s,
            spawn_time_s: None,
            accumulated: Accumulated::default(),
            is_test_vehicle,
            reroutes: 0,
            halt_start_s: None,
            halt_pos: None,
            blocked_edge: None,
        }
    }

    pub fn current_edge(&self) -> &EdgeId {
        &self.route.edges()[self.edge_index]
    }

    /// Edges strictly ahead of the current one.
    pub fn remaining_edges(&self) -> &[EdgeId] {
        &self.route.edges()[self.edge_index + 1..]
    }

    pub fn is_on_road(&self) -> bool {
        matches!(
            self.status,
            VehicleStatus::Driving | VehicleStatus::Halted { .. }
        )
    }
}

/// The vehicle immediately ahead, real or virtual, as seen by a follower.
/// `gap_m` is the bumper-to-bumper distance (leader rear minus follower
/// front); a stop line is a zero-length stationary leader whose rear sits on
/// the line.
#[derive(Debug, Clone, Copy)]
pub struct Leader {
    pub gap_m: f64,
    pub speed_mps: f64,
}

/// One car-following update. Returns the follower's speed for the next step:
/// the free-acceleration speed capped by the safe speed toward the leader and
/// by the edge speed limit, reduced by a random dawdle `sigma * a * dt * u`
/// with `u` drawn uniformly from [0, 1), floored at zero.
pub fn krauss_step(
    self_speed: f64,
    speed_limit: f64,
    leader: Option<Leader>,
    params: &VehicleParams,
    dt: f64,
    dawdle_u: f64,
) -> f64 {
    let mut v = self_speed + params.accel_mps2 * dt;
    if let Some(l) = leader {
        let g_net = (l.gap_m - params.min_gap_m).max(0.0);
        let bt = params.decel_mps2 * params.tau_s;
        let v_safe = -bt
            + (bt * bt + l.speed_mps * l.speed_mps + 2.0 * params.decel_mps2 * g_net).sqrt();
        v = v.min(v_safe);
    }
    v = v.min(speed_limit);
    let dawdle = params.sigma * params.accel_mps2 * dt * dawdle_u;
    (v - dawdle).max(0.0)
}

/// One signal phase: the set of incoming edges it serves and its timing.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SignalPhase {
    pub green_edges: BTreeSet<EdgeId>,
    pub min_green_s: f64,
    pub max_green_s: f64,
    pub yellow_s: f64,
}

/// Signal operating mode. Static cycles fixed greens; actuated holds green
/// while the served approach keeps producing detections.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SignalMode {
    Static,
    Actuated { detector_m: f64, gap_s: f64 },
}

/// A signal plan at one node.
#[derive(Debug, Clone)]
pub struct SignalController {
    pub node: NodeId,
    pub phases: Vec<SignalPhase>,
    pub mode: SignalMode,
}

impl SignalController {
    /// Builds a two-phase plan at `node` grouping incoming edges by axis:
    /// approaches that run mostly east-west against those that run mostly
    /// north-south. Degenerate nodes get a single all-green phase.
    pub fn two_phase_axis(
        net: &RoadNetwork,
        node: &NodeId,
        min_green_s: f64,
        max_green_s: f64,
        yellow_s: f64,
        mode: SignalMode,
    ) -> Result<Self, MobilityError> {
        let mut horizontal = BTreeSet::new();
        let mut vertical = BTreeSet::new();
        for edge_id in net.in_edges(node) {
            let edge = net.edge(edge_id)?;
            let from = net.node(&edge.from)?.pos();
            let to = net.node(&edge.to)?.pos();
            if (to.x - from.x).abs() >= (to.y - from.y).abs() {
                horizontal.insert(edge_id.clone());
            } else {
                vertical.insert(edge_id.clone());
            }
        }
        let mut phases = Vec::new();
        for green_edges in [horizontal, vertical] {
            if !green_edges.is_empty() {
                phases.push(SignalPhase {
                    green_edges,
                    min_green_s,
                    max_green_s,
                    yellow_s,
                });
            }
        }
        let ctrl = SignalController {
            node: node.clone(),
            phases,
            mode,
        };
        ctrl.validate(net)?;
        Ok(ctrl)
    }

    /// Checks the plan covers every incoming edge with at least one green.
    pub fn validate(&self, net: &RoadNetwork) -> Result<(), MobilityError> {
        if self.phases.is_empty() {
            return Err(MobilityError::EmptySignalPlan(self.node.clone()));
        }
        for phase in &self.phases {
            if !(phase.min_green_s > 0.0)
                || phase.max_green_s < phase.min_green_s
                || phase.yellow_s < 0.0
            {
                return Err(MobilityError::InvalidParams(format!(
                    "bad phase timing at node {}",
                    self.node
                )));
            }
        }
        for edge_id in net.in_edges(&self.node) {
            if !self
                .phases
                .iter()
                .any(|p| p.green_edges.contains(edge_id))
            {
                return Err(MobilityError::UncoveredApproach {
                    node: self.node.clone(),
                    edge: edge_id.clone(),
                });
            }
        }
        Ok(())
    }
}

/// Stage within the current phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SignalStage {
    Green,
    Yellow,
}

/// Mutable controller state.
#[derive(Debug, Clone, Copy)]
pub struct SignalState {
    pub phase: usize,
    pub stage: SignalStage,
    pub stage_start_s: f64,
    pub last_detection_s: f64,
}

impl SignalState {
    pub fn new(start_s: f64) -> Self {
        SignalState {
            phase: 0,
            stage: SignalStage::Green,
            stage_start_s: start_s,
            last_detection_s: start_s,
        }
    }
}

const TIME_EPS: f64 = 1e-9;

/// Advances one controller by one tick at time `now`. `detections` holds the
/// incoming edges that currently have a vehicle inside the detector zone
/// (only consulted in actuated mode).
///
/// Static mode runs each phase green for `min_green_s` then yellow for
/// `yellow_s`. Actuated mode holds green while the served approach keeps
/// detecting, gaps out `gap_s` after the later of the last detection and the
/// end of minimum green, and never exceeds `max_green_s`.
pub fn signal_step(
    ctrl: &SignalController,
    state: &mut SignalState,
    detections: &BTreeSet<EdgeId>,
    now: f64,
) {
    let phase = &ctrl.phases[state.phase];
    match state.stage {
        SignalStage::Green => {
            let elapsed = now - state.stage_start_s;
            let expire = match ctrl.mode {
                SignalMode::Static => elapsed + TIME_EPS >= phase.min_green_s,
                SignalMode::Actuated { gap_s, .. } => {
                    let served = phase
                        .green_edges
                        .iter()
                        .any(|e| detections.contains(e));
                    if served {
                        state.last_detection_s = now;
                    }
                    let gap_ref = state
                        .last_detection_s
                        .max(state.stage_start_s + phase.min_green_s);
                    elapsed + TIME_EPS >= phase.max_green_s
                        || now + TIME_EPS >= gap_ref + gap_s
                }
            };
            if expire {
                state.stage = SignalStage::Yellow;
                state.stage_start_s = now;
            }
        }
        SignalStage::Yellow => {
            if now - state.stage_start_s + TIME_EPS >= phase.yellow_s {
                state.phase = (state.phase + 1) % ctrl.phases.len();
                state.stage = SignalStage::Green;
                state.stage_start_s = now;
                state.last_detection_s = now;
            }
        }
    }
}

/// Whether `edge` may discharge through the controller right now.
pub fn is_green(ctrl: &SignalController, state: &SignalState, edge: &EdgeId) -> bool {
    state.stage == SignalStage::Green
        && ctrl.phases[state.phase].green_edges.contains(edge)
}

/// A scheduled accident: the vehicle halts `start_offset_s` after it entered
/// the network and stays put for `duration_s`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EventSchedule {
    pub vehicle: VehicleId,
    pub start_offset_s: f64,
    pub duration_s: f64,
}

/// Applies the halt/resume lifecycle to one vehicle at time `now`. Firing
/// requires the vehicle to be driving; a vehicle that arrives before its
/// offset elapses never halts. The caller records the halt position.
/// Returns true when the halt fired this call.
pub fn event_transition(vehicle: &mut VehicleState, sched: &EventSchedule, now: f64) -> bool {
    match vehicle.status {
        VehicleStatus::Driving => {
            if vehicle.halt_start_s.is_none() {
                if let Some(spawn) = vehicle.spawn_time_s {
                    if now + TIME_EPS >= spawn + sched.start_offset_s {
                        vehicle.status = VehicleStatus::Halted {
                            resume_s: now + sched.duration_s,
                        };
                        vehicle.speed_mps = 0.0;
                        vehicle.halt_start_s = Some(now);
                        vehicle.blocked_edge = Some(vehicle.current_edge().clone());
                        return true;
                    }
                }
            }
            false
        }
        VehicleStatus::Halted { resume_s } => {
            if now + TIME_EPS >= resume_s {
                vehicle.status = VehicleStatus::Driving;
            }
            false
        }
        _ => false,
    }
}

#[derive(Debug, Error)]
pub enum MobilityError {
    #[error("invalid vehicle parameters: {0}")]
    InvalidParams(String),
    #[error("signal plan at {0} has no phases")]
    EmptySignalPlan(NodeId),
    #[error("signal plan at {node} leaves approach {edge} without a green phase")]
    UncoveredApproach { node: NodeId, edge: EdgeId },
    #[error("unknown vehicle {0}")]
    UnknownVehicle(VehicleId),
    #[error("replacement route does not pass through the vehicle's current edge")]
    RouteMismatch,
    #[error(transparent)]
    Net(#[from] NetError),
}
