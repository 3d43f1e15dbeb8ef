//! Command-line interface: single runs, range sweeps, report re-export, and
//! synthetic network generation.
//!
//! Exit codes: 0 on success, 1 on usage errors (bad flags or malformed
//! argument syntax), 2 on configuration or data errors (unreadable files,
//! invalid scenarios). Log verbosity comes from the `V2XLAB_LOG` environment
//! variable (`error|warn|info|debug`).

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::netgraph::{grid_network, write_network};
use crate::scenario::{
    export_report, run_scenario, run_sweep, BaselineChoice, Mode, ReportKind, ReportSource,
    RunParams, RunReport, ScenarioConfig, ScenarioError, SweepReport,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "v2xlab",
    version,
    about = "Co-simulation of urban traffic and V2X warning messaging",
    disable_help_subcommand = true
)]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Debug, Subcommand)]
enum Verb {
    /// Run one scenario and export its report.
    Simulate(SimulateArgs),
    /// Run connected simulations over a range grid plus baselines.
    Sweep(SweepArgs),
    /// Re-export reports from a results directory.
    Report(ReportArgs),
    /// Generate a synthetic grid network file.
    GenNet(GenNetArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Connected,
    Worst,
    Best,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Connected => Mode::Connected,
            ModeArg::Worst => Mode::WorstCase,
            ModeArg::Best => Mode::BestCase,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BaselineArg {
    Worst,
    Best,
}

impl From<BaselineArg> for BaselineChoice {
    fn from(b: BaselineArg) -> BaselineChoice {
        match b {
            BaselineArg::Worst => BaselineChoice::Worst,
            BaselineArg::Best => BaselineChoice::Best,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Csv,
    Plotdata,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Scenario file (TOML, or JSON by extension).
    #[arg(long)]
    config: PathBuf,
    /// Communication range override in meters.
    #[arg(long)]
    range: Option<f64>,
    #[arg(long, value_enum, default_value_t = ModeArg::Connected)]
    mode: ModeArg,
    /// Seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Keep the per-frame message log (larger output).
    #[arg(long)]
    logs: bool,
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// Scenario file (TOML, or JSON by extension).
    #[arg(long)]
    config: PathBuf,
    /// Range grid in meters as A:B:STEP (or a single value).
    #[arg(long)]
    ranges: Option<String>,
    /// Number of seeds, consecutive from the config seed.
    #[arg(long)]
    seeds: Option<u32>,
    /// Worker threads (defaults to one per CPU).
    #[arg(long)]
    jobs: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// Directory holding sweep.json or run.json.
    #[arg(long = "in")]
    input: PathBuf,
    /// Baseline for relative-change series.
    #[arg(long, value_enum, default_value_t = BaselineArg::Worst)]
    baseline: BaselineArg,
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    format: FormatArg,
    /// Output directory (defaults to the input directory).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GenNetArgs {
    /// Grid size as RxC nodes, e.g. 8x8.
    #[arg(long)]
    grid: String,
    /// Block edge length in meters.
    #[arg(long)]
    block: f64,
    /// Speed limit in m/s.
    #[arg(long, default_value_t = 13.9)]
    speed: f64,
    /// Place a signal at every Nth interior node.
    #[arg(long, default_value_t = 2)]
    signal_stride: u32,
    /// Output network JSON file.
    #[arg(long)]
    out: PathBuf,
}

/// Parses `A:B:STEP` (inclusive of B) or a single value, in meters.
fn parse_ranges(text: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = text.split(':').collect();
    let num = |s: &str| -> Result<f64, String> {
        let v: f64 = s
            .trim()
            .parse()
            .map_err(|_| format!("'{s}' is not a number in range grid '{text}'"))?;
        if !v.is_finite() || v <= 0.0 {
            return Err(format!("range values must be positive, got '{s}'"));
        }
        Ok(v)
    };
    match parts.as_slice() {
        [single] => Ok(vec![num(single)?]),
        [start, end, step] => {
            let (a, b, s) = (num(start)?, num(end)?, num(step)?);
            if b < a {
                return Err(format!("range grid '{text}' ends before it starts"));
            }
            let mut out = Vec::new();
            let mut k = 0u32;
            loop {
                let v = a + f64::from(k) * s;
                if v > b + 1e-9 {
                    break;
                }
                out.push(v);
                k += 1;
            }
            Ok(out)
        }
        _ => Err(format!("range grid '{text}' is not A:B:STEP or a single value")),
    }
}

/// Parses `RxC` grid dimensions.
fn parse_grid(text: &str) -> Result<(u32, u32), String> {
    let (r, c) = text
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("grid '{text}' is not RxC"))?;
    let rows: u32 = r
        .trim()
        .parse()
        .map_err(|_| format!("'{r}' is not a row count in grid '{text}'"))?;
    let cols: u32 = c
        .trim()
        .parse()
        .map_err(|_| format!("'{c}' is not a column count in grid '{text}'"))?;
    if rows < 2 || cols < 2 {
        return Err(format!("grid '{text}' needs at least 2x2 nodes"));
    }
    Ok((rows, cols))
}

fn usage_error(msg: &str) -> i32 {
    eprintln!("error[usage]: {msg}");
    EXIT_USAGE
}

fn data_error(e: &ScenarioError) -> i32 {
    eprintln!("error[config]: {e}");
    EXIT_DATA
}

fn write_json<T: serde::Serialize>(value: &T, path: &Path) -> Result<(), ScenarioError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|source| ScenarioError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn ensure_dir(dir: &Path) -> Result<(), ScenarioError> {
    fs::create_dir_all(dir).map_err(|source| ScenarioError::Io {
        path: dir.to_path_buf(),
        source,
    })
}

fn simulate(args: &SimulateArgs) -> Result<(), ScenarioError> {
    let mut cfg = ScenarioConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.traffic.seed = seed;
    }
    let net = cfg.build_network(args.config.parent())?;
    let params = RunParams {
        mode: args.mode.into(),
        range_m: args.range.unwrap_or(cfg.radio.range_m),
        seed: cfg.traffic.seed,
        record_message_log: args.logs,
    };
    let report = run_scenario(&cfg, &net, &params)?;

    ensure_dir(&args.out)?;
    write_json(&report, &args.out.join("run.json"))?;
    export_report(
        ReportSource::Run(&report),
        ReportKind::Summary,
        &args.out,
        BaselineChoice::Worst,
    )?;
    export_report(
        ReportSource::Run(&report),
        ReportKind::TestVehicles,
        &args.out,
        BaselineChoice::Worst,
    )?;
    if report.message_log.is_some() {
        export_report(
            ReportSource::Run(&report),
            ReportKind::Messages,
            &args.out,
            BaselineChoice::Worst,
        )?;
    }

    println!(
        "{} run (range {} m, seed {}): {} spawned / {} arrived, avg time {:.1} s, \
         avg speed {:.2} m/s, sent {}, received {}",
        report.mode,
        report.range_m,
        report.seed,
        report.totals.spawned,
        report.totals.arrived,
        report.totals.avg_travel_time_s,
        report.totals.avg_speed_mps,
        report.messages.sent,
        report.messages.received,
    );
    println!("results in {}", args.out.display());
    Ok(())
}

/// File name of one run inside a sweep output directory.
fn run_file_name(report: &RunReport) -> String {
    format!("{}-r{}-s{}.json", report.mode, report.range_m, report.seed)
}

fn sweep(args: &SweepArgs) -> Result<(), ScenarioError> {
    let cfg = ScenarioConfig::load(&args.config)?;
    let net = cfg.build_network(args.config.parent())?;
    let ranges = match &args.ranges {
        Some(text) => parse_ranges(text).map_err(ScenarioError::Config)?,
        None => cfg.sweep.ranges_m.clone(),
    };
    let n_seeds = args.seeds.unwrap_or(cfg.sweep.n_seeds);
    if n_seeds == 0 {
        return Err(ScenarioError::Config("sweep needs at least one seed".into()));
    }
    let seeds = cfg.sweep_seeds(n_seeds);
    let outcome = run_sweep(&cfg, &net, &ranges, &seeds, args.jobs)?;

    ensure_dir(&args.out)?;
    let runs_dir = args.out.join("runs");
    ensure_dir(&runs_dir)?;
    for run in &outcome.runs {
        write_json(run, &runs_dir.join(run_file_name(run)))?;
    }
    write_json(&outcome.report, &args.out.join("sweep.json"))?;
    export_report(
        ReportSource::Sweep(&outcome.report),
        ReportKind::Summary,
        &args.out,
        BaselineChoice::Worst,
    )?;
    export_report(
        ReportSource::Sweep(&outcome.report),
        ReportKind::TestVehicles,
        &args.out,
        BaselineChoice::Worst,
    )?;

    for stats in &outcome.report.per_range {
        println!(
            "range {:>5} m: avg time {:.1} s, avg speed {:.2} m/s, \
             improvement vs worst case {:+.2}%",
            stats.range_m,
            stats.avg_travel_time_s,
            stats.avg_speed_mps,
            stats.time_improvement_vs_worst_pct,
        );
    }
    println!(
        "{} runs; best range {} m; results in {}",
        outcome.runs.len(),
        outcome.report.best_range_m,
        args.out.display()
    );
    Ok(())
}

fn report(args: &ReportArgs) -> Result<(), ScenarioError> {
    let out_dir = args.out.as_deref().unwrap_or(&args.input);
    let baseline: BaselineChoice = args.baseline.into();
    let sweep_path = args.input.join("sweep.json");
    let run_path = args.input.join("run.json");

    let read = |path: &Path| -> Result<String, ScenarioError> {
        fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.to_path_buf(),
            source,
        })
    };

    if sweep_path.is_file() {
        let report: SweepReport = serde_json::from_str(&read(&sweep_path)?)?;
        let src = ReportSource::Sweep(&report);
        match args.format {
            FormatArg::Csv => {
                export_report(src, ReportKind::Summary, out_dir, baseline)?;
                export_report(src, ReportKind::TestVehicles, out_dir, baseline)?;
            }
            FormatArg::Plotdata => {
                export_report(src, ReportKind::PlotData, out_dir, baseline)?;
            }
        }
    } else if run_path.is_file() {
        let report: RunReport = serde_json::from_str(&read(&run_path)?)?;
        let src = ReportSource::Run(&report);
        match args.format {
            FormatArg::Csv => {
                export_report(src, ReportKind::Summary, out_dir, baseline)?;
                export_report(src, ReportKind::TestVehicles, out_dir, baseline)?;
                if report.message_log.is_some() {
                    export_report(src, ReportKind::Messages, out_dir, baseline)?;
                }
            }
            FormatArg::Plotdata => {
                export_report(src, ReportKind::PlotData, out_dir, baseline)?;
            }
        }
    } else {
        return Err(ScenarioError::Config(format!(
            "no sweep.json or run.json in {}",
            args.input.display()
        )));
    }
    println!("reports written to {}", out_dir.display());
    Ok(())
}

fn gen_net(args: &GenNetArgs, rows: u32, cols: u32) -> Result<(), ScenarioError> {
    if !(args.block > 0.0) {
        return Err(ScenarioError::Config("block length must be positive".into()));
    }
    if !(args.speed > 0.0) {
        return Err(ScenarioError::Config("speed limit must be positive".into()));
    }
    if args.signal_stride == 0 {
        return Err(ScenarioError::Config("signal stride must be at least 1".into()));
    }
    let net = grid_network(rows, cols, args.block, args.speed, args.signal_stride);
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        ensure_dir(parent)?;
    }
    let file = fs::File::create(&args.out).map_err(|source| ScenarioError::Io {
        path: args.out.clone(),
        source,
    })?;
    write_network(&net, std::io::BufWriter::new(file))?;
    println!(
        "wrote {} ({} nodes, {} edges)",
        args.out.display(),
        net.node_count(),
        net.edge_count()
    );
    Ok(())
}

/// Parses `argv` (including the program name) and runs the chosen verb.
/// Returns the process exit code instead of exiting, so tests and thin
/// `main` wrappers can both use it.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(
        env_logger::Env::new().filter_or("V2XLAB_LOG", "warn"),
    )
    .try_init();

    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return code;
        }
    };

    let result = match &cli.verb {
        Verb::Simulate(args) => simulate(args),
        Verb::Sweep(args) => {
            // Malformed grid syntax is a usage problem, not a config one.
            if let Some(text) = &args.ranges {
                if let Err(msg) = parse_ranges(text) {
                    return usage_error(&msg);
                }
            }
            sweep(args)
        }
        Verb::Report(args) => report(args),
        Verb::GenNet(args) => match parse_grid(&args.grid) {
            Ok((rows, cols)) => gen_net(args, rows, cols),
            Err(msg) => return usage_error(&msg),
        },
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => data_error(&e),
    }
}
