//! The traffic world: owns the road network, all vehicles, signal
//! controllers, and scheduled halts, and advances them in lockstep.
//!
//! Each step runs in phases: spawn pending vehicles, apply halt/resume
//! transitions, tick signals, plan every driving vehicle's speed against the
//! *current* snapshot (so planning order cannot leak between vehicles), then
//! execute movement vehicle-by-vehicle with conservative clamping against
//! live positions. Planning keeps followers behind leaders by construction;
//! the movement clamp covers the one case planning cannot see — two vehicles
//! converging on the same downstream edge in the same step — and a final
//! audit counts any surviving bumper overlap instead of hiding it.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::Rng;

use crate::emissions::{co2_rate, EmissionCoeffs};
use crate::geom::Vec2;
use crate::netgraph::{EdgeId, NodeId, RoadNetwork, Route};

use super::{
    event_transition, is_green, krauss_step, signal_step, EventSchedule, Leader, MobilityError,
    SignalController, SignalState, VehicleId, VehicleParams, VehicleState, VehicleStatus,
};

const TIME_EPS: f64 = 1e-9;
/// Tolerance for the post-move bumper-overlap audit, m.
const GAP_AUDIT_EPS: f64 = 1e-9;

/// Vehicle counts by lifecycle stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct StatusCounts {
    pub pending: usize,
    pub driving: usize,
    pub halted: usize,
    pub arrived: usize,
}

impl StatusCounts {
    pub fn total(&self) -> usize {
        self.pending + self.driving + self.halted + self.arrived
    }
}

/// One sampled vehicle state, recorded at the end of a step.
#[derive(Debug, Clone)]
pub struct TrajectoryRow {
    pub t_s: f64,
    pub vehicle: VehicleId,
    pub edge: EdgeId,
    pub offset_m: f64,
    pub speed_mps: f64,
    pub status: &'static str,
}

/// Discrete-time traffic simulation state.
pub struct World {
    net: RoadNetwork,
    vehicles: Vec<VehicleState>,
    events: BTreeMap<VehicleId, EventSchedule>,
    signals: BTreeMap<NodeId, (SignalController, SignalState)>,
    emission_coeffs: EmissionCoeffs,
    clock_s: f64,
    negative_gap_events: u64,
    trajectory: Option<Vec<TrajectoryRow>>,
}

impl World {
    pub fn new(net: RoadNetwork, emission_coeffs: EmissionCoeffs) -> Self {
        World {
            net,
            vehicles: Vec::new(),
            events: BTreeMap::new(),
            signals: BTreeMap::new(),
            emission_coeffs,
            clock_s: 0.0,
            negative_gap_events: 0,
            trajectory: None,
        }
    }

    pub fn net(&self) -> &RoadNetwork {
        &self.net
    }

    pub fn clock_s(&self) -> f64 {
        self.clock_s
    }

    /// Total bumper-overlap incidents observed by the post-move audit.
    pub fn negative_gap_events(&self) -> u64 {
        self.negative_gap_events
    }

    /// Registers a vehicle; ids are assigned densely in registration order.
    pub fn add_vehicle(
        &mut self,
        params: VehicleParams,
        route: Route,
        entry_time_s: f64,
        is_test_vehicle: bool,
    ) -> Result<VehicleId, MobilityError> {
        params.validate()?;
        if !(entry_time_s >= 0.0) {
            return Err(MobilityError::InvalidParams(
                "entry_time_s must be nonnegative".into(),
            ));
        }
        let id = VehicleId(self.vehicles.len() as u32);
        self.vehicles
            .push(VehicleState::new(id, params, route, entry_time_s, is_test_vehicle));
        Ok(id)
    }

    /// Schedules (or replaces) the halt event for one vehicle.
    pub fn schedule_event(&mut self, sched: EventSchedule) -> Result<(), MobilityError> {
        if sched.vehicle.0 as usize >= self.vehicles.len() {
            return Err(MobilityError::UnknownVehicle(sched.vehicle));
        }
        if !(sched.start_offset_s >= 0.0) || !(sched.duration_s > 0.0) {
            return Err(MobilityError::InvalidParams(
                "event offset must be nonnegative and duration positive".into(),
            ));
        }
        self.events.insert(sched.vehicle, sched);
        Ok(())
    }

    /// Installs (or replaces) the signal controller at its node.
    pub fn add_signal(&mut self, ctrl: SignalController) -> Result<(), MobilityError> {
        ctrl.validate(&self.net)?;
        let state = SignalState::new(self.clock_s);
        self.signals.insert(ctrl.node.clone(), (ctrl, state));
        Ok(())
    }

    pub fn vehicle(&self, id: VehicleId) -> Option<&VehicleState> {
        self.vehicles.get(id.0 as usize)
    }

    pub fn vehicles(&self) -> &[VehicleState] {
        &self.vehicles
    }

    pub fn signal(&self, node: &NodeId) -> Option<&(SignalController, SignalState)> {
        self.signals.get(node)
    }

    /// Map position of a vehicle: entry node while pending, along the current
    /// edge while on the road, destination once arrived.
    pub fn position_of(&self, id: VehicleId) -> Option<Vec2> {
        let v = self.vehicles.get(id.0 as usize)?;
        let (edge_id, offset) = match v.status {
            VehicleStatus::Pending => (v.route.edges().first()?, 0.0),
            VehicleStatus::Driving | VehicleStatus::Halted { .. } => {
                (v.current_edge(), v.offset_m)
            }
            VehicleStatus::Arrived => (v.route.edges().last()?, f64::INFINITY),
        };
        self.net.position_on_edge(edge_id, offset).ok()
    }

    /// Replaces a vehicle's route. The new route must contain the vehicle's
    /// current edge at its current index so position state stays valid.
    /// Returns whether the route actually changed; only changes count as
    /// reroutes.
    pub fn apply_route(&mut self, id: VehicleId, route: Route) -> Result<bool, MobilityError> {
        let v = self
            .vehicles
            .get_mut(id.0 as usize)
            .ok_or(MobilityError::UnknownVehicle(id))?;
        if route.edges().get(v.edge_index) != Some(v.current_edge()) {
            return Err(MobilityError::RouteMismatch);
        }
        if route.edges() == v.route.edges() {
            return Ok(false);
        }
        v.route = route;
        v.reroutes += 1;
        Ok(true)
    }

    pub fn counts(&self) -> StatusCounts {
        let mut c = StatusCounts::default();
        for v in &self.vehicles {
            match v.status {
                VehicleStatus::Pending => c.pending += 1,
                VehicleStatus::Driving => c.driving += 1,
                VehicleStatus::Halted { .. } => c.halted += 1,
                VehicleStatus::Arrived => c.arrived += 1,
            }
        }
        c
    }

    /// Starts recording per-step vehicle rows.
    pub fn enable_trajectory(&mut self) {
        if self.trajectory.is_none() {
            self.trajectory = Some(Vec::new());
        }
    }

    pub fn trajectory(&self) -> &[TrajectoryRow] {
        self.trajectory.as_deref().unwrap_or(&[])
    }

    /// Renders the recorded trajectory as CSV.
    pub fn trajectory_csv(&self) -> String {
        let mut out = String::from("t_s,vehicle,edge,offset_m,speed_mps,status\n");
        for r in self.trajectory() {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.t_s, r.vehicle, r.edge, r.offset_m, r.speed_mps, r.status
            );
        }
        out
    }

    /// Advances the world by one step of length `dt`. The RNG feeds only the
    /// dawdle draws: exactly one draw per registered vehicle per step, in id
    /// order, regardless of status, so the stream depends only on fleet size
    /// and step count.
    pub fn advance<R: Rng + ?Sized>(&mut self, dt: f64, rng: &mut R) {
        assert!(dt > 0.0, "dt must be positive");
        let now = self.clock_s;

        self.spawn_pending(now);
        self.apply_events(now);

        let mut occupancy = build_occupancy(&self.vehicles);
        self.step_signals(&occupancy, now);

        let dawdle: Vec<f64> = (0..self.vehicles.len()).map(|_| rng.random()).collect();
        let speeds = self.plan_speeds(&occupancy, &dawdle, dt);
        self.move_vehicles(&mut occupancy, &speeds, dt);
        self.audit_gaps(&occupancy);

        if let Some(trajectory) = &mut self.trajectory {
            trajectory.extend(
                self.vehicles
                    .iter()
                    .filter(|v| v.is_on_road())
                    .map(|v| TrajectoryRow {
                        t_s: now,
                        vehicle: v.id,
                        edge: v.current_edge().clone(),
                        offset_m: v.offset_m,
                        speed_mps: v.speed_mps,
                        status: v.status.label(),
                    }),
            );
        }

        debug_assert_eq!(self.counts().total(), self.vehicles.len());
        self.clock_s = now + dt;
    }

    /// Puts due pending vehicles on the road when their entry edge has room:
    /// every occupant's rear bumper must be at least the entrant's minimum
    /// gap downstream of the entry point. Congested entries retry next step.
    fn spawn_pending(&mut self, now: f64) {
        for idx in 0..self.vehicles.len() {
            let v = &self.vehicles[idx];
            if !matches!(v.status, VehicleStatus::Pending) || v.entry_time_s > now + TIME_EPS {
                continue;
            }
            let first_edge = v.route.edges()[0].clone();
            let needed = v.params.min_gap_m;
            let blocked = self.vehicles.iter().any(|w| {
                w.is_on_road()
                    && *w.current_edge() == first_edge
                    && w.offset_m - w.params.length_m < needed
            });
            if blocked {
                continue;
            }
            let v = &mut self.vehicles[idx];
            v.status = VehicleStatus::Driving;
            v.spawn_time_s = Some(now);
            v.offset_m = 0.0;
            v.speed_mps = 0.0;
        }
    }

    fn apply_events(&mut self, now: f64) {
        for (vid, sched) in &self.events {
            let v = &mut self.vehicles[vid.0 as usize];
            let fired = event_transition(v, sched, now);
            if fired {
                let pos = self
                    .net
                    .position_on_edge(v.current_edge(), v.offset_m)
                    .expect("validated route edge must exist");
                v.halt_pos = Some(pos);
            }
        }
    }

    fn step_signals(&mut self, occupancy: &Occupancy, now: f64) {
        let net = &self.net;
        let vehicles = &self.vehicles;
        for (node, (ctrl, state)) in self.signals.iter_mut() {
            let mut detections = std::collections::BTreeSet::new();
            if let SignalMode::Actuated { detector_m, .. } = ctrl.mode {
                for edge_id in net.in_edges(node) {
                    let Ok(edge) = net.edge(edge_id) else { continue };
                    let Some(queue) = occupancy.get(edge_id) else { continue };
                    let demand = queue.iter().any(|&vi| {
                        let w = &vehicles[vi];
                        matches!(w.status, VehicleStatus::Driving)
                            && edge.length_m - w.offset_m <= detector_m
                    });
                    if demand {
                        detections.insert(edge_id.clone());
                    }
                }
            }
            signal_step(ctrl, state, &detections, now);
        }
    }

    /// Computes every driving vehicle's next speed from the current snapshot.
    /// Queues are walked front to back; each vehicle sees either its real
    /// predecessor, a stop line rendered as a stationary zero-length leader,
    /// or the rear of the queue on its next edge.
    fn plan_speeds(&self, occupancy: &Occupancy, dawdle: &[f64], dt: f64) -> Vec<f64> {
        let mut speeds = vec![0.0; self.vehicles.len()];
        for (edge_id, queue) in occupancy {
            let edge = self.net.edge(edge_id).expect("occupied edge must exist");
            for (i, &vi) in queue.iter().enumerate() {
                let v = &self.vehicles[vi];
                if !matches!(v.status, VehicleStatus::Driving) {
                    continue;
                }
                let leader = if i > 0 {
                    let ld = &self.vehicles[queue[i - 1]];
                    Some(Leader {
                        gap_m: ld.offset_m - ld.params.length_m - v.offset_m,
                        speed_mps: ld.speed_mps,
                    })
                } else {
                    self.front_leader(v, edge_id, edge.length_m, occupancy)
                };
                speeds[vi] = krauss_step(
                    v.speed_mps,
                    edge.speed_limit_mps,
                    leader,
                    &v.params,
                    dt,
                    dawdle[vi],
                );
            }
        }
        speeds
    }

    /// Virtual leader for the first vehicle on an edge: a red or yellow
    /// signal is a stationary leader whose rear sits on the stop line;
    /// otherwise the rear-most vehicle on the next route edge, seen across
    /// the junction.
    fn front_leader(
        &self,
        v: &VehicleState,
        edge_id: &EdgeId,
        edge_len: f64,
        occupancy: &Occupancy,
    ) -> Option<Leader> {
        let edge = self.net.edge(edge_id).expect("occupied edge must exist");
        if let Some((ctrl, state)) = self.signals.get(&edge.to) {
            if !is_green(ctrl, state, edge_id) {
                return Some(Leader {
                    gap_m: edge_len - v.offset_m,
                    speed_mps: 0.0,
                });
            }
        }
        let next = v.route.edges().get(v.edge_index + 1)?;
        let tail_vi = *occupancy.get(next)?.last()?;
        let tail = &self.vehicles[tail_vi];
        Some(Leader {
            gap_m: (edge_len - v.offset_m) + (tail.offset_m - tail.params.length_m),
            speed_mps: tail.speed_mps,
        })
    }

    /// Executes planned movement one vehicle at a time in id order, clamping
    /// against live positions. Planned speeds already respect same-edge
    /// leaders and stop lines; the clamp only bites when independent queues
    /// merge onto one edge in the same step, and it never moves anyone
    /// backwards, so the scheme cannot create overlaps planning missed.
    fn move_vehicles(&mut self, occupancy: &mut Occupancy, speeds: &[f64], dt: f64) {
        // Indexed loop: the body mutates vehicles[idx] while reading its
        // predecessor through the occupancy queues.
        #[allow(clippy::needless_range_loop)]
        for idx in 0..self.vehicles.len() {
            match self.vehicles[idx].status {
                VehicleStatus::Driving => {}
                VehicleStatus::Halted { .. } => {
                    let v = &mut self.vehicles[idx];
                    v.accumulated.travel_time_s += dt;
                    v.accumulated.co2_mass += co2_rate(0.0, 0.0, &self.emission_coeffs) * dt;
                    continue;
                }
                _ => continue,
            }

            let old_speed = self.vehicles[idx].speed_mps;
            let mut remaining = speeds[idx] * dt;
            let mut moved = 0.0;
            loop {
                let v = &self.vehicles[idx];
                let edge_id = v.current_edge().clone();
                let edge_len = self
                    .net
                    .edge(&edge_id)
                    .expect("validated route edge must exist")
                    .length_m;
                let queue = occupancy.get_mut(&edge_id).expect("driving vehicle indexed");
                let pos = queue
                    .iter()
                    .position(|&i| i == idx)
                    .expect("driving vehicle present in its queue");
                let max_front = if pos > 0 {
                    let pred = &self.vehicles[queue[pos - 1]];
                    pred.offset_m - pred.params.length_m
                } else {
                    f64::INFINITY
                };

                let v = &mut self.vehicles[idx];
                let want = remaining.min(edge_len - v.offset_m);
                let allowed = (max_front - v.offset_m).max(0.0);
                let step = want.min(allowed);
                v.offset_m += step;
                moved += step;
                remaining -= step;
                if step < want {
                    // Clamped by a live predecessor; forfeit the rest.
                    break;
                }
                if v.offset_m < edge_len - TIME_EPS {
                    break;
                }
                v.offset_m = edge_len;

                if v.edge_index + 1 == v.route.edges().len() {
                    debug_assert_eq!(pos, 0, "arriving vehicle must lead its queue");
                    queue.remove(pos);
                    v.status = VehicleStatus::Arrived;
                    break;
                }
                if remaining <= 0.0 {
                    break;
                }
                // Crossing the junction: budget entry so the final offset
                // stays behind the rear of the downstream queue.
                let next_id = v.route.edges()[v.edge_index + 1].clone();
                let tail_rear = occupancy
                    .get(&next_id)
                    .and_then(|q| q.last())
                    .map(|&ti| {
                        let t = &self.vehicles[ti];
                        t.offset_m - t.params.length_m
                    })
                    .unwrap_or(f64::INFINITY);
                if tail_rear <= 0.0 {
                    // No room beyond the junction: wait on the stop line and
                    // forfeit the rest of this step's budget.
                    break;
                }
                remaining = remaining.min(tail_rear);
                let queue = occupancy.get_mut(&edge_id).expect("edge queue exists");
                debug_assert_eq!(queue[0], idx, "crossing vehicle must lead its queue");
                queue.remove(0);
                occupancy.entry(next_id).or_default().push(idx);
                let v = &mut self.vehicles[idx];
                v.edge_index += 1;
                v.offset_m = 0.0;
            }

            let v = &mut self.vehicles[idx];
            v.speed_mps = moved / dt;
            let accel = (v.speed_mps - old_speed) / dt;
            v.accumulated.travel_time_s += dt;
            v.accumulated.distance_m += moved;
            v.accumulated.co2_mass += co2_rate(v.speed_mps, accel, &self.emission_coeffs) * dt;
            if matches!(v.status, VehicleStatus::Arrived) {
                v.speed_mps = 0.0;
            }
        }
    }

    /// Counts bumper overlaps after movement. This should never fire; it is
    /// the watchdog for the no-collision invariant, not a corrective device.
    fn audit_gaps(&mut self, occupancy: &Occupancy) {
        for queue in occupancy.values() {
            for pair in queue.windows(2) {
                let front = &self.vehicles[pair[0]];
                let back = &self.vehicles[pair[1]];
                let gap = front.offset_m - front.params.length_m - back.offset_m;
                if gap < -GAP_AUDIT_EPS {
                    self.negative_gap_events += 1;
                    log::warn!(
                        "negative gap {:.6} m between {} and {} on {}",
                        gap,
                        front.id,
                        back.id,
                        front.current_edge()
                    );
                }
            }
        }
    }
}

use super::SignalMode;

type Occupancy = BTreeMap<EdgeId, Vec<usize>>;

/// Indexes on-road vehicles by edge, front of the edge first.
fn build_occupancy(vehicles: &[VehicleState]) -> Occupancy {
    let mut occ: Occupancy = BTreeMap::new();
    for (idx, v) in vehicles.iter().enumerate() {
        if v.is_on_road() {
            occ.entry(v.current_edge().clone()).or_default().push(idx);
        }
    }
    for queue in occ.values_mut() {
        queue.sort_by(|&a, &b| {
            vehicles[b]
                .offset_m
                .total_cmp(&vehicles[a].offset_m)
                .then_with(|| vehicles[a].id.cmp(&vehicles[b].id))
        });
    }
    occ
}
