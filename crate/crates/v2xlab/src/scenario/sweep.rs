//! Range sweep: connected runs over a grid of communication ranges and
//! seeds, plus communication-disabled baseline runs, reduced to per-range
//! statistics against both baselines.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::netgraph::RoadNetwork;

use super::{
    run_scenario, MessageCounters, Mode, RunParams, RunReport, ScenarioConfig, ScenarioError,
};

/// Which way a KPI is supposed to move relative to its baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Smaller is better (travel time, emissions).
    Reduction,
    /// Bigger is better (speed; distance grows under detours).
    Increase,
}

/// Relative change of `value` against `baseline`, in percent, signed so that
/// movement in the stated direction is positive.
pub fn percent_change(
    value: f64,
    baseline: f64,
    direction: Direction,
) -> Result<f64, ScenarioError> {
    if !(baseline > 0.0) {
        return Err(ScenarioError::Config(format!(
            "percent change needs a positive baseline, got {baseline}"
        )));
    }
    Ok(match direction {
        Direction::Reduction => (baseline - value) / baseline * 100.0,
        Direction::Increase => (value - baseline) / baseline * 100.0,
    })
}

/// Flat KPI row for one run; one line per run in summary exports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub mode: Mode,
    pub range_m: f64,
    pub seed: u64,
    pub avg_travel_time_s: f64,
    pub avg_distance_m: f64,
    pub avg_speed_mps: f64,
    pub avg_co2: f64,
    pub test_avg_travel_time_s: f64,
    pub test_avg_distance_m: f64,
    pub test_avg_speed_mps: f64,
    pub test_avg_co2: f64,
    pub spawned: u32,
    pub arrived: u32,
    pub halts: u32,
    pub messages: MessageCounters,
    pub negative_gap_events: u64,
    pub conservation_ok: bool,
    pub accounting_ok: bool,
}

impl From<&RunReport> for RunSummary {
    fn from(r: &RunReport) -> Self {
        RunSummary {
            mode: r.mode,
            range_m: r.range_m,
            seed: r.seed,
            avg_travel_time_s: r.totals.avg_travel_time_s,
            avg_distance_m: r.totals.avg_distance_m,
            avg_speed_mps: r.totals.avg_speed_mps,
            avg_co2: r.totals.avg_co2,
            test_avg_travel_time_s: r.totals.test_avg_travel_time_s,
            test_avg_distance_m: r.totals.test_avg_distance_m,
            test_avg_speed_mps: r.totals.test_avg_speed_mps,
            test_avg_co2: r.totals.test_avg_co2,
            spawned: r.totals.spawned,
            arrived: r.totals.arrived,
            halts: r.halts,
            messages: r.messages,
            negative_gap_events: r.negative_gap_events,
            conservation_ok: r.conservation_ok,
            accounting_ok: r.accounting_ok,
        }
    }
}

/// Channel tallies averaged over seeds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MessageMeans {
    pub sent: f64,
    pub received: f64,
    pub lost_collision: f64,
    pub lost_sensitivity: f64,
    pub lost_range: f64,
}

/// Connected-mode KPIs at one range, averaged over seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RangeStats {
    pub range_m: f64,
    pub avg_travel_time_s: f64,
    pub avg_distance_m: f64,
    pub avg_speed_mps: f64,
    pub avg_co2: f64,
    pub test_avg_travel_time_s: f64,
    pub test_avg_distance_m: f64,
    pub test_avg_speed_mps: f64,
    pub test_avg_co2: f64,
    pub messages: MessageMeans,
    /// Fleet travel-time reduction against the worst-case baseline.
    pub time_improvement_vs_worst_pct: f64,
}

/// Baseline KPIs averaged over the baseline seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeStats {
    pub avg_travel_time_s: f64,
    pub avg_distance_m: f64,
    pub avg_speed_mps: f64,
    pub avg_co2: f64,
    pub test_avg_travel_time_s: f64,
    pub test_avg_distance_m: f64,
    pub test_avg_speed_mps: f64,
    pub test_avg_co2: f64,
}

/// One probe vehicle's trip KPIs in one (mode, range) cell, averaged over
/// seeds. Baseline rows carry range 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestVehicleStat {
    pub mode: Mode,
    pub range_m: f64,
    pub vehicle: u32,
    pub avg_travel_time_s: f64,
    pub avg_distance_m: f64,
    pub avg_speed_mps: f64,
    pub avg_co2: f64,
}

/// Self-contained sweep result: per-run rows plus every aggregate the report
/// exporter needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub ranges_m: Vec<f64>,
    pub seeds: Vec<u64>,
    pub baseline_seeds: Vec<u64>,
    pub summaries: Vec<RunSummary>,
    pub per_range: Vec<RangeStats>,
    pub best_case: ModeStats,
    pub worst_case: ModeStats,
    /// Range with the largest fleet travel-time improvement over the
    /// worst-case baseline; ties go to the shorter range.
    pub best_range_m: f64,
    pub test_vehicles: Vec<TestVehicleStat>,
}

/// Sweep result plus the full per-run reports for callers that want them.
#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub report: SweepReport,
    pub runs: Vec<RunReport>,
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut n) = (0.0, 0u32);
    for v in values {
        sum += v;
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        sum / f64::from(n)
    }
}

/// Total-distance-over-total-time speed across runs, consistent with how a
/// single run averages speed.
fn pooled_speed(rows: &[(f64, f64)]) -> f64 {
    let t: f64 = rows.iter().map(|(ti, _)| ti).sum();
    let d: f64 = rows.iter().map(|(_, di)| di).sum();
    if t > 0.0 {
        d / t
    } else {
        0.0
    }
}

fn mode_stats(rows: &[&RunSummary]) -> ModeStats {
    ModeStats {
        avg_travel_time_s: mean(rows.iter().map(|s| s.avg_travel_time_s)),
        avg_distance_m: mean(rows.iter().map(|s| s.avg_distance_m)),
        avg_speed_mps: mean(rows.iter().map(|s| s.avg_speed_mps)),
        avg_co2: mean(rows.iter().map(|s| s.avg_co2)),
        test_avg_travel_time_s: mean(rows.iter().map(|s| s.test_avg_travel_time_s)),
        test_avg_distance_m: mean(rows.iter().map(|s| s.test_avg_distance_m)),
        test_avg_speed_mps: mean(rows.iter().map(|s| s.test_avg_speed_mps)),
        test_avg_co2: mean(rows.iter().map(|s| s.test_avg_co2)),
    }
}

/// Runs the full experiment grid: one connected run per (range, seed), plus
/// best- and worst-case baseline runs on the first `baseline_seeds` seeds.
/// `jobs` caps the worker threads; `None` uses the default pool.
pub fn run_sweep(
    cfg: &ScenarioConfig,
    net: &RoadNetwork,
    ranges: &[f64],
    seeds: &[u64],
    jobs: Option<usize>,
) -> Result<SweepOutcome, ScenarioError> {
    if ranges.is_empty() {
        return Err(ScenarioError::Config("sweep needs at least one range".into()));
    }
    if seeds.is_empty() {
        return Err(ScenarioError::Config("sweep needs at least one seed".into()));
    }
    let n_baseline = (cfg.sweep.baseline_seeds as usize).clamp(1, seeds.len());
    let baseline_seeds = &seeds[..n_baseline];

    let mut tasks: Vec<RunParams> = Vec::new();
    for &range_m in ranges {
        for &seed in seeds {
            tasks.push(RunParams {
                mode: Mode::Connected,
                range_m,
                seed,
                record_message_log: false,
            });
        }
    }
    for mode in [Mode::BestCase, Mode::WorstCase] {
        for &seed in baseline_seeds {
            tasks.push(RunParams {
                mode,
                range_m: 0.0,
                seed,
                record_message_log: false,
            });
        }
    }

    let execute = || -> Result<Vec<RunReport>, ScenarioError> {
        tasks
            .par_iter()
            .map(|p| run_scenario(cfg, net, p))
            .collect()
    };
    let runs = match jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| ScenarioError::Config(format!("cannot build worker pool: {e}")))?
            .install(execute),
        None => execute(),
    }?;

    let summaries: Vec<RunSummary> = runs.iter().map(RunSummary::from).collect();
    let connected = |r: f64| {
        summaries
            .iter()
            .filter(move |s| s.mode == Mode::Connected && s.range_m == r)
            .collect::<Vec<_>>()
    };
    let by_mode = |m: Mode| {
        summaries
            .iter()
            .filter(move |s| s.mode == m)
            .collect::<Vec<_>>()
    };
    let best_case = mode_stats(&by_mode(Mode::BestCase));
    let worst_case = mode_stats(&by_mode(Mode::WorstCase));

    let mut per_range = Vec::with_capacity(ranges.len());
    for &range_m in ranges {
        let rows = connected(range_m);
        let stats = mode_stats(&rows);
        per_range.push(RangeStats {
            range_m,
            time_improvement_vs_worst_pct: percent_change(
                stats.avg_travel_time_s,
                worst_case.avg_travel_time_s,
                Direction::Reduction,
            )?,
            avg_travel_time_s: stats.avg_travel_time_s,
            avg_distance_m: stats.avg_distance_m,
            avg_speed_mps: stats.avg_speed_mps,
            avg_co2: stats.avg_co2,
            test_avg_travel_time_s: stats.test_avg_travel_time_s,
            test_avg_distance_m: stats.test_avg_distance_m,
            test_avg_speed_mps: stats.test_avg_speed_mps,
            test_avg_co2: stats.test_avg_co2,
            messages: MessageMeans {
                sent: mean(rows.iter().map(|s| s.messages.sent as f64)),
                received: mean(rows.iter().map(|s| s.messages.received as f64)),
                lost_collision: mean(rows.iter().map(|s| s.messages.lost_collision as f64)),
                lost_sensitivity: mean(rows.iter().map(|s| s.messages.lost_sensitivity as f64)),
                lost_range: mean(rows.iter().map(|s| s.messages.lost_range as f64)),
            },
        });
    }

    let mut best_range_m = per_range[0].range_m;
    let mut best_improvement = per_range[0].time_improvement_vs_worst_pct;
    for stats in &per_range[1..] {
        if stats.time_improvement_vs_worst_pct > best_improvement {
            best_improvement = stats.time_improvement_vs_worst_pct;
            best_range_m = stats.range_m;
        }
    }

    // Per-probe trip statistics for every (mode, range) cell.
    let n_test = cfg.traffic.n_test_vehicles;
    let mut cells: Vec<(Mode, f64)> = ranges.iter().map(|&r| (Mode::Connected, r)).collect();
    cells.push((Mode::BestCase, 0.0));
    cells.push((Mode::WorstCase, 0.0));
    let mut test_vehicles = Vec::new();
    for (mode, range_m) in cells {
        for vehicle in 0..n_test {
            let trips: Vec<(f64, f64, f64)> = runs
                .iter()
                .filter(|r| r.mode == mode && r.range_m == range_m)
                .flat_map(|r| &r.vehicles)
                .filter(|v| v.is_test && v.id == vehicle)
                .map(|v| (v.travel_time_s, v.distance_m, v.co2))
                .collect();
            let speed_rows: Vec<(f64, f64)> =
                trips.iter().map(|&(t, d, _)| (t, d)).collect();
            test_vehicles.push(TestVehicleStat {
                mode,
                range_m,
                vehicle,
                avg_travel_time_s: mean(trips.iter().map(|t| t.0)),
                avg_distance_m: mean(trips.iter().map(|t| t.1)),
                avg_speed_mps: pooled_speed(&speed_rows),
                avg_co2: mean(trips.iter().map(|t| t.2)),
            });
        }
    }

    Ok(SweepOutcome {
        report: SweepReport {
            ranges_m: ranges.to_vec(),
            seeds: seeds.to_vec(),
            baseline_seeds: baseline_seeds.to_vec(),
            summaries,
            per_range,
            best_case,
            worst_case,
            best_range_m,
            test_vehicles,
        },
        runs,
    })
}
