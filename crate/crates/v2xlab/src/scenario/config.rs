//! Typed scenario configuration with per-field defaults, TOML/JSON loading,
//! and validation. Section defaults reproduce the reference urban scenario
//! (1220 vehicles, 6 probe vehicles, 47 accidents, 30 roadside units,
//! 4600 s); the shipped desk scenario overrides them to a size that sweeps
//! in seconds.

use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::emissions::EmissionCoeffs;
use crate::mobility::{SignalMode, VehicleParams};
use crate::netgraph::{grid_network, load_network, RoadNetwork};
use crate::protocol::ProtocolConfig;
use crate::radio::RadioConfig;

use super::ScenarioError;

/// Road network source: an explicit file, or a synthetic grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkSection {
    /// Network JSON file; when set, the grid parameters are ignored.
    pub file: Option<PathBuf>,
    pub grid_rows: u32,
    pub grid_cols: u32,
    pub block_m: f64,
    pub speed_limit_mps: f64,
    /// Every `signal_stride`-th interior grid node carries a signal.
    pub signal_stride: u32,
}

impl Default for NetworkSection {
    fn default() -> Self {
        NetworkSection {
            file: None,
            grid_rows: 8,
            grid_cols: 8,
            block_m: 120.0,
            speed_limit_mps: 13.9,
            signal_stride: 2,
        }
    }
}

/// Fleet composition and timing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrafficSection {
    /// Total fleet size, probe vehicles included.
    pub n_vehicles: u32,
    /// The first `n_test_vehicles` vehicle ids are measurement probes with
    /// origin/destination and entry times drawn from `test_route_seed`, so
    /// they stay identical across seeds, ranges, and modes.
    pub n_test_vehicles: u32,
    /// Background-fleet entry times are uniform in this window.
    pub entry_window_s: [f64; 2],
    /// Probe entry window; defaults to `entry_window_s` when absent.
    pub test_entry_window_s: Option<[f64; 2]>,
    pub duration_s: f64,
    pub dt_s: f64,
    /// Base seed: sweep seeds count up from here.
    pub seed: u64,
    /// Dedicated stream for probe routes and entries.
    pub test_route_seed: u64,
    pub vehicle: VehicleParams,
}

impl Default for TrafficSection {
    fn default() -> Self {
        TrafficSection {
            n_vehicles: 1220,
            n_test_vehicles: 6,
            entry_window_s: [0.0, 600.0],
            test_entry_window_s: None,
            duration_s: 4600.0,
            dt_s: 1.0,
            seed: 1,
            test_route_seed: 9001,
            vehicle: VehicleParams::default(),
        }
    }
}

impl TrafficSection {
    pub fn test_entry_window(&self) -> [f64; 2] {
        self.test_entry_window_s.unwrap_or(self.entry_window_s)
    }
}

/// Accident schedule: how many background vehicles halt, when, for how long.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EventsSection {
    pub n_events: u32,
    /// Halt onset, uniform in this window of seconds after the vehicle's
    /// entry.
    pub start_offset_range_s: [f64; 2],
    pub halt_duration_s: f64,
}

impl Default for EventsSection {
    fn default() -> Self {
        EventsSection {
            n_events: 47,
            start_offset_range_s: [153.0, 350.0],
            halt_duration_s: 300.0,
        }
    }
}

/// Radio, messaging, and roadside-unit parameters. The physical-layer fields
/// mirror [`RadioConfig`] one for one (the resolution slot length is tied to
/// the simulation step instead of being configured separately).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadioSection {
    pub tx_power_mw: f64,
    pub bitrate_bps: f64,
    pub min_power_dbm: f64,
    pub noise_floor_dbm: f64,
    pub range_m: f64,
    pub path_loss_exponent: f64,
    pub ref_loss_db: f64,
    pub capture_threshold_db: f64,
    pub antenna_gain_dbi: f64,
    pub sinr_threshold_db: Option<f64>,
    pub n_rsus: u32,
    pub beacon_interval_s: f64,
    pub max_hops: u8,
    pub payload_bytes: u32,
}

impl Default for RadioSection {
    fn default() -> Self {
        let radio = RadioConfig::default();
        let proto = ProtocolConfig::default();
        RadioSection {
            tx_power_mw: radio.tx_power_mw,
            bitrate_bps: radio.bitrate_bps,
            min_power_dbm: radio.min_power_dbm,
            noise_floor_dbm: radio.noise_floor_dbm,
            range_m: radio.range_m,
            path_loss_exponent: radio.path_loss_exponent,
            ref_loss_db: radio.ref_loss_db,
            capture_threshold_db: radio.capture_threshold_db,
            antenna_gain_dbi: radio.antenna_gain_dbi,
            sinr_threshold_db: radio.sinr_threshold_db,
            n_rsus: 30,
            beacon_interval_s: proto.beacon_interval_s,
            max_hops: proto.max_hops,
            payload_bytes: proto.payload_bytes,
        }
    }
}

impl RadioSection {
    /// Physical-layer view of this section; the slot length is the
    /// simulation step.
    pub fn radio_config(&self, dt_s: f64) -> RadioConfig {
        RadioConfig {
            tx_power_mw: self.tx_power_mw,
            bitrate_bps: self.bitrate_bps,
            min_power_dbm: self.min_power_dbm,
            noise_floor_dbm: self.noise_floor_dbm,
            range_m: self.range_m,
            path_loss_exponent: self.path_loss_exponent,
            ref_loss_db: self.ref_loss_db,
            capture_threshold_db: self.capture_threshold_db,
            slot_s: dt_s,
            antenna_gain_dbi: self.antenna_gain_dbi,
            sinr_threshold_db: self.sinr_threshold_db,
        }
    }

    pub fn protocol_config(&self) -> ProtocolConfig {
        ProtocolConfig {
            beacon_interval_s: self.beacon_interval_s,
            max_hops: self.max_hops,
            payload_bytes: self.payload_bytes,
        }
    }
}

/// Signal plan kind for the connected scenario; baselines always run static
/// plans.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalKind {
    Static,
    Actuated,
}

/// Signal timing shared by every signalized node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SignalsSection {
    pub mode: SignalKind,
    pub min_green_s: f64,
    pub max_green_s: f64,
    pub yellow_s: f64,
    pub detector_m: f64,
    pub gap_s: f64,
}

impl Default for SignalsSection {
    fn default() -> Self {
        SignalsSection {
            mode: SignalKind::Actuated,
            min_green_s: 10.0,
            max_green_s: 30.0,
            yellow_s: 3.0,
            detector_m: 50.0,
            gap_s: 3.0,
        }
    }
}

impl SignalsSection {
    pub fn signal_mode(&self, kind: SignalKind) -> SignalMode {
        match kind {
            SignalKind::Static => SignalMode::Static,
            SignalKind::Actuated => SignalMode::Actuated {
                detector_m: self.detector_m,
                gap_s: self.gap_s,
            },
        }
    }
}

/// Sweep policy: the swept communication ranges, how many seeds to average,
/// and how many of those seeds also get baseline runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub ranges_m: Vec<f64>,
    pub n_seeds: u32,
    pub baseline_seeds: u32,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            ranges_m: vec![100.0, 200.0, 300.0, 400.0, 500.0, 600.0],
            n_seeds: 5,
            baseline_seeds: 1,
        }
    }
}

/// Complete scenario description.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub network: NetworkSection,
    pub traffic: TrafficSection,
    pub events: EventsSection,
    pub radio: RadioSection,
    pub emissions: EmissionCoeffs,
    pub signals: SignalsSection,
    pub sweep: SweepSection,
}

impl ScenarioConfig {
    /// Loads a config from TOML (default) or JSON (`.json` extension).
    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let cfg: ScenarioConfig = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text)
                .map_err(|e| ScenarioError::Config(format!("{}: {e}", path.display())))?
        } else {
            toml::from_str(&text)
                .map_err(|e| ScenarioError::Config(format!("{}: {e}", path.display())))?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Cross-field validation beyond what deserialization can express.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |msg: String| Err(ScenarioError::Config(msg));

        let n = &self.network;
        if n.file.is_none() {
            if n.grid_rows < 2 || n.grid_cols < 2 {
                return bad("network grid needs at least 2x2 nodes".into());
            }
            if !(n.block_m > 0.0) || !(n.speed_limit_mps > 0.0) {
                return bad("network block_m and speed_limit_mps must be positive".into());
            }
            if n.signal_stride == 0 {
                return bad("network signal_stride must be at least 1".into());
            }
        }

        let t = &self.traffic;
        if t.n_vehicles == 0 {
            return bad("traffic n_vehicles must be at least 1".into());
        }
        if t.n_test_vehicles > t.n_vehicles {
            return bad("traffic n_test_vehicles cannot exceed n_vehicles".into());
        }
        if !(t.dt_s > 0.0) {
            return bad("traffic dt_s must be positive".into());
        }
        if !(t.duration_s >= t.dt_s) {
            return bad("traffic duration_s must cover at least one step".into());
        }
        for (name, w) in [
            ("entry_window_s", t.entry_window_s),
            ("test_entry_window_s", t.test_entry_window()),
        ] {
            if !(w[0] >= 0.0) || !(w[1] >= w[0]) {
                return bad(format!("traffic {name} must be an ascending nonnegative window"));
            }
            if w[1] > t.duration_s {
                return bad(format!("traffic {name} must end within duration_s"));
            }
        }
        t.vehicle
            .validate()
            .map_err(|e| ScenarioError::Config(e.to_string()))?;
        if t.dt_s > t.vehicle.tau_s {
            // The safe-speed guarantee (a follower can always stop in time)
            // needs the step to fit within the driver reaction time.
            return bad("traffic dt_s must not exceed the vehicle reaction time tau_s".into());
        }

        let e = &self.events;
        if e.n_events > t.n_vehicles - t.n_test_vehicles {
            return bad(
                "events n_events cannot exceed the background fleet (probes never halt)".into(),
            );
        }
        if !(e.start_offset_range_s[0] >= 0.0)
            || !(e.start_offset_range_s[1] >= e.start_offset_range_s[0])
        {
            return bad("events start_offset_range_s must be an ascending nonnegative window".into());
        }
        if !(e.halt_duration_s > 0.0) {
            return bad("events halt_duration_s must be positive".into());
        }

        self.radio
            .radio_config(t.dt_s)
            .validate()
            .map_err(|e| ScenarioError::Config(e.to_string()))?;
        self.radio
            .protocol_config()
            .validate()
            .map_err(|e| ScenarioError::Config(e.to_string()))?;

        let s = &self.signals;
        if !(s.min_green_s > 0.0) || s.max_green_s < s.min_green_s {
            return bad("signals require 0 < min_green_s <= max_green_s".into());
        }
        if s.yellow_s < 0.0 || s.detector_m < 0.0 || s.gap_s < 0.0 {
            return bad("signals yellow_s, detector_m, gap_s must be nonnegative".into());
        }

        let w = &self.sweep;
        if w.ranges_m.is_empty() {
            return bad("sweep ranges_m must not be empty".into());
        }
        if !w.ranges_m.iter().all(|r| *r > 0.0) {
            return bad("sweep ranges_m must be positive".into());
        }
        if !w.ranges_m.windows(2).all(|p| p[0] < p[1]) {
            return bad("sweep ranges_m must be strictly ascending".into());
        }
        if w.n_seeds == 0 {
            return bad("sweep n_seeds must be at least 1".into());
        }
        if w.baseline_seeds == 0 || w.baseline_seeds > w.n_seeds {
            return bad("sweep baseline_seeds must be in 1..=n_seeds".into());
        }

        Ok(())
    }

    /// Builds the road network: loaded from `network.file` (resolved against
    /// `base_dir` when relative) or synthesized as a grid.
    pub fn build_network(&self, base_dir: Option<&Path>) -> Result<RoadNetwork, ScenarioError> {
        let n = &self.network;
        match &n.file {
            Some(file) => {
                let path = match base_dir {
                    Some(dir) if file.is_relative() => dir.join(file),
                    _ => file.clone(),
                };
                let reader = File::open(&path).map_err(|e| ScenarioError::Io {
                    path: path.clone(),
                    source: e,
                })?;
                Ok(load_network(BufReader::new(reader))?)
            }
            None => Ok(grid_network(
                n.grid_rows,
                n.grid_cols,
                n.block_m,
                n.speed_limit_mps,
                n.signal_stride,
            )),
        }
    }

    /// Seed list for a sweep of `n_seeds` runs: consecutive from the base
    /// seed.
    pub fn sweep_seeds(&self, n_seeds: u32) -> Vec<u64> {
        (0..u64::from(n_seeds))
            .map(|i| self.traffic.seed.wrapping_add(i))
            .collect()
    }
}
