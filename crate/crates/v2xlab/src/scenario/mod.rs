//! Scenario assembly and experiment orchestration: typed configuration,
//! roadside-unit placement, single runs, range sweeps with baselines, KPI
//! aggregation, and report export.

mod config;
mod place;
mod report;
mod run;
mod sweep;

pub use config::{
    EventsSection, NetworkSection, RadioSection, ScenarioConfig, SignalKind, SignalsSection,
    SweepSection, TrafficSection,
};
pub use place::place_rsus;
pub use report::{
    export_report, messages_csv, summary_csv, test_vehicles_csv_run, test_vehicles_csv_sweep,
    BaselineChoice, ReportKind, ReportSource, MPH_PER_MPS,
};
pub use run::{
    run_scenario, MessageCounters, MessageLogRow, RunParams, RunReport, Totals, VehicleRecord,
};
pub use sweep::{
    percent_change, run_sweep, Direction, MessageMeans, ModeStats, RangeStats, RunSummary,
    SweepOutcome, SweepReport, TestVehicleStat,
};

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Experiment mode: the connected fleet under test, or one of the two
/// communication-disabled baselines (best case without accidents, worst case
/// with accidents).
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Connected,
    BestCase,
    WorstCase,
}

impl Mode {
    pub fn label(self) -> &'static str {
        match self {
            Mode::Connected => "connected",
            Mode::BestCase => "best_case",
            Mode::WorstCase => "worst_case",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("invalid scenario configuration: {0}")]
    Config(String),
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Net(#[from] crate::netgraph::NetError),
    #[error(transparent)]
    Mobility(#[from] crate::mobility::MobilityError),
    #[error(transparent)]
    Radio(#[from] crate::radio::RadioError),
    #[error(transparent)]
    Protocol(#[from] crate::protocol::ProtocolError),
    #[error("cannot encode report: {0}")]
    Json(#[from] serde_json::Error),
}
