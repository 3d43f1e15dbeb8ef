//! Discrete-time co-simulation of urban road traffic and vehicle-to-vehicle /
//! vehicle-to-infrastructure warning messaging.
//!
//! Vehicles follow a Krauss-style car-following model over a road graph with
//! signalized intersections. A vehicle involved in an accident halts on its
//! edge and broadcasts warning beacons; roadside units relay them once; any
//! driving vehicle that decodes a warning about an edge still ahead on its
//! route computes a detour around it. Scenario runs compare the connected
//! fleet against best-case (no accidents) and worst-case (accidents, no
//! communication) baselines across a sweep of communication ranges.
//!
//! Module map:
//! - [`netgraph`]: road network, synthetic grids, deterministic shortest paths
//! - [`mobility`]: car following, traffic signals, accident lifecycle, world stepping
//! - [`radio`]: link budget, path loss, slot-level reception with capture
//! - [`protocol`]: beaconing, duplicate suppression, RSU relay, rerouting
//! - [`emissions`]: speed/acceleration CO2 polynomial and integration
//! - [`scenario`]: configuration, run orchestration, range sweeps, report export
//! - [`cli`]: the `v2xlab` command-line entry points

// Validation code writes `!(x > 0.0)` on purpose: unlike `x <= 0.0`, it also
// rejects NaN, so one comparison covers both failure modes.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod emissions;
pub mod geom;
pub mod mobility;
pub mod netgraph;
pub mod protocol;
pub mod radio;
pub mod scenario;
