//! Export of run and sweep results: summary CSVs, probe-vehicle tables,
//! message logs, and plot-ready per-range series.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{
    percent_change, Direction, MessageLogRow, RangeStats, RunReport, RunSummary, ScenarioError,
    SweepReport,
};

/// Unit conversion for the speed columns that are exported in both units.
pub const MPH_PER_MPS: f64 = 2.236_936_292_054_4;

/// Which baseline relative-change series are computed against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineChoice {
    Worst,
    Best,
}

/// What [`export_report`] writes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportKind {
    /// `summary.csv`: one KPI row per run.
    Summary,
    /// `messages.csv`: the per-judgement channel log (runs only).
    Messages,
    /// `test_vehicles.csv`: probe trip table.
    TestVehicles,
    /// The per-range plot file family (sweeps only).
    PlotData,
}

/// The result a report is derived from.
#[derive(Debug, Clone, Copy)]
pub enum ReportSource<'a> {
    Run(&'a RunReport),
    Sweep(&'a SweepReport),
}

/// One KPI row per run. The column set is the tool's stable export surface;
/// code that consumes these files can rely on this exact header.
pub fn summary_csv(rows: &[RunSummary]) -> String {
    let mut out = String::from(
        "mode,range_m,seed,avg_time_s,avg_distance_m,avg_speed_mps,avg_co2,\
         msgs_sent,msgs_received,msgs_lost_collision,msgs_lost_sensitivity,msgs_lost_range\n",
    );
    for s in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            s.mode,
            s.range_m,
            s.seed,
            s.avg_travel_time_s,
            s.avg_distance_m,
            s.avg_speed_mps,
            s.avg_co2,
            s.messages.sent,
            s.messages.received,
            s.messages.lost_collision,
            s.messages.lost_sensitivity,
            s.messages.lost_range,
        );
    }
    out
}

/// Per-judgement channel log of one run.
pub fn messages_csv(rows: &[MessageLogRow]) -> String {
    let mut out = String::from("t_s,receiver,sender,msg,hop,distance_m,verdict\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.t_s, r.receiver, r.sender, r.msg, r.hop, r.distance_m, r.verdict
        );
    }
    out
}

/// Probe trip table for a single run.
pub fn test_vehicles_csv_run(report: &RunReport) -> String {
    let mut out = String::from(
        "vehicle,mode,range_m,seed,travel_time_s,distance_m,mean_speed_mps,mean_speed_mph,co2,\
         reroutes,status\n",
    );
    for v in report.vehicles.iter().filter(|v| v.is_test) {
        let _ = writeln!(
            out,
            "v{},{},{},{},{},{},{},{},{},{},{}",
            v.id,
            report.mode,
            report.range_m,
            report.seed,
            v.travel_time_s,
            v.distance_m,
            v.mean_speed_mps,
            v.mean_speed_mps * MPH_PER_MPS,
            v.co2,
            v.reroutes,
            v.status,
        );
    }
    out
}

/// Probe trip table for a sweep: seed-averaged KPIs per (mode, range, probe).
pub fn test_vehicles_csv_sweep(report: &SweepReport) -> String {
    let mut out = String::from(
        "mode,range_m,vehicle,avg_travel_time_s,avg_distance_m,avg_speed_mps,avg_speed_mph,\
         avg_co2\n",
    );
    for t in &report.test_vehicles {
        let _ = writeln!(
            out,
            "{},{},v{},{},{},{},{},{}",
            t.mode,
            t.range_m,
            t.vehicle,
            t.avg_travel_time_s,
            t.avg_distance_m,
            t.avg_speed_mps,
            t.avg_speed_mps * MPH_PER_MPS,
            t.avg_co2,
        );
    }
    out
}

fn write_file(dir: &Path, name: &str, content: &str) -> Result<u64, ScenarioError> {
    let path = dir.join(name);
    fs::write(&path, content).map_err(|e| ScenarioError::Io {
        path: path.clone(),
        source: e,
    })?;
    Ok(content.len() as u64)
}

/// One plot column: output file, per-range value, then the file-specific
/// extras (both baseline levels, or one baseline level and a direction).
type LevelSeries = (&'static str, fn(&RangeStats) -> f64, f64, f64);
type ChangeSeries = (&'static str, fn(&RangeStats) -> f64, f64, Direction);

fn plot_data(report: &SweepReport, dir: &Path, baseline: BaselineChoice) -> Result<u64, ScenarioError> {
    let base = match baseline {
        BaselineChoice::Worst => &report.worst_case,
        BaselineChoice::Best => &report.best_case,
    };
    let mut bytes = 0;

    let mut msgs = String::from("range_m,sent,received,lost_collision,lost_sensitivity,lost_range\n");
    for r in &report.per_range {
        let _ = writeln!(
            msgs,
            "{},{},{},{},{},{}",
            r.range_m,
            r.messages.sent,
            r.messages.received,
            r.messages.lost_collision,
            r.messages.lost_sensitivity,
            r.messages.lost_range
        );
    }
    bytes += write_file(dir, "messages.csv", &msgs)?;

    let series: [LevelSeries; 3] = [
        (
            "avg_travel_time.csv",
            |r| r.avg_travel_time_s,
            report.best_case.avg_travel_time_s,
            report.worst_case.avg_travel_time_s,
        ),
        (
            "avg_distance.csv",
            |r| r.avg_distance_m,
            report.best_case.avg_distance_m,
            report.worst_case.avg_distance_m,
        ),
        (
            "avg_co2.csv",
            |r| r.avg_co2,
            report.best_case.avg_co2,
            report.worst_case.avg_co2,
        ),
    ];
    for (name, pick, best, worst) in series {
        let mut out = String::from("range_m,connected,best_case,worst_case\n");
        for r in &report.per_range {
            let _ = writeln!(out, "{},{},{},{}", r.range_m, pick(r), best, worst);
        }
        bytes += write_file(dir, name, &out)?;
    }

    let mut speed = String::from(
        "range_m,connected_mps,connected_mph,best_case_mps,best_case_mph,\
         worst_case_mps,worst_case_mph\n",
    );
    for r in &report.per_range {
        let _ = writeln!(
            speed,
            "{},{},{},{},{},{},{}",
            r.range_m,
            r.avg_speed_mps,
            r.avg_speed_mps * MPH_PER_MPS,
            report.best_case.avg_speed_mps,
            report.best_case.avg_speed_mps * MPH_PER_MPS,
            report.worst_case.avg_speed_mps,
            report.worst_case.avg_speed_mps * MPH_PER_MPS,
        );
    }
    bytes += write_file(dir, "avg_speed.csv", &speed)?;

    let changes: [ChangeSeries; 4] = [
        (
            "time_change_pct.csv",
            |r| r.avg_travel_time_s,
            base.avg_travel_time_s,
            Direction::Reduction,
        ),
        (
            "distance_change_pct.csv",
            |r| r.avg_distance_m,
            base.avg_distance_m,
            Direction::Increase,
        ),
        (
            "speed_change_pct.csv",
            |r| r.avg_speed_mps,
            base.avg_speed_mps,
            Direction::Increase,
        ),
        (
            "co2_change_pct.csv",
            |r| r.avg_co2,
            base.avg_co2,
            Direction::Reduction,
        ),
    ];
    for (name, pick, baseline_value, direction) in changes {
        let mut out = String::from("range_m,change_pct\n");
        for r in &report.per_range {
            let _ = writeln!(
                out,
                "{},{}",
                r.range_m,
                percent_change(pick(r), baseline_value, direction)?
            );
        }
        bytes += write_file(dir, name, &out)?;
    }

    let mut probes = String::from("mode,range_m,vehicle,avg_travel_time_s\n");
    for t in &report.test_vehicles {
        let _ = writeln!(
            probes,
            "{},{},v{},{}",
            t.mode, t.range_m, t.vehicle, t.avg_travel_time_s
        );
    }
    bytes += write_file(dir, "test_travel_time.csv", &probes)?;

    Ok(bytes)
}

/// Writes one report product into `out_dir` (created if missing) and returns
/// the bytes written. Kinds that need data the source does not carry fail
/// with a configuration error.
pub fn export_report(
    src: ReportSource<'_>,
    kind: ReportKind,
    out_dir: &Path,
    baseline: BaselineChoice,
) -> Result<u64, ScenarioError> {
    fs::create_dir_all(out_dir).map_err(|e| ScenarioError::Io {
        path: out_dir.to_path_buf(),
        source: e,
    })?;
    match (src, kind) {
        (ReportSource::Run(run), ReportKind::Summary) => {
            write_file(out_dir, "summary.csv", &summary_csv(&[RunSummary::from(run)]))
        }
        (ReportSource::Run(run), ReportKind::Messages) => {
            let log = run.message_log.as_ref().ok_or_else(|| {
                ScenarioError::Config(
                    "this run carries no message log; rerun the simulation with logging on".into(),
                )
            })?;
            write_file(out_dir, "messages.csv", &messages_csv(log))
        }
        (ReportSource::Run(run), ReportKind::TestVehicles) => {
            write_file(out_dir, "test_vehicles.csv", &test_vehicles_csv_run(run))
        }
        (ReportSource::Run(_), ReportKind::PlotData) => Err(ScenarioError::Config(
            "plot data needs a sweep result, not a single run".into(),
        )),
        (ReportSource::Sweep(sweep), ReportKind::Summary) => {
            write_file(out_dir, "summary.csv", &summary_csv(&sweep.summaries))
        }
        (ReportSource::Sweep(_), ReportKind::Messages) => Err(ScenarioError::Config(
            "sweeps do not keep per-frame logs; run a single simulation with logging on".into(),
        )),
        (ReportSource::Sweep(sweep), ReportKind::TestVehicles) => write_file(
            out_dir,
            "test_vehicles.csv",
            &test_vehicles_csv_sweep(sweep),
        ),
        (ReportSource::Sweep(sweep), ReportKind::PlotData) => plot_data(sweep, out_dir, baseline),
    }
}
