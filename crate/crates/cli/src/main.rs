//! `chosim` command-line front end.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{info, warn};

use chosim::config::{HoMode, Scheme, SimConfig};
use chosim::deployment::build_topology;
use chosim::engine::{point_config, run, summarize, sweep, SweepAxes, SweepPoint};
use chosim::error::SimError;
use chosim::kpi::{build_report, KpiReport};
use chosim::ledger::{read_events_csv, write_events_csv, LedgerError};

#[derive(Parser, Debug)]
#[command(name = "chosim", version, about = "System-level CHO / FCHO mobility simulator")]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one simulation.
    Run(RunArgs),
    /// Run a mode x scheme x speed x seed grid.
    Sweep(SweepArgs),
    /// Dump the cell layout and beam boresights as JSON.
    Topology(TopologyArgs),
    /// Rebuild kpi.json from an events.csv file.
    Report(ReportArgs),
}

#[derive(Args, Debug, Clone)]
struct ConfigArgs {
    /// JSON config file; omitted keys take their defaults. Without it the
    /// desk-scale configuration (42 UEs, 60 s) is used.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Override a config value, e.g. `--set handover.o_exec=3`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VAL")]
    overrides: Vec<String>,

    /// Simulated duration in seconds.
    #[arg(long, value_name = "S")]
    duration: Option<f64>,
}

#[derive(Args, Debug, Clone)]
struct OutputArgs {
    /// Output directory, created if absent.
    #[arg(long)]
    out: PathBuf,

    /// Overwrite existing output files.
    #[arg(long)]
    force: bool,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long)]
    mode: Option<HoMode>,
    /// iso, mpue-a3 or mpue-a1.
    #[arg(long)]
    scheme: Option<Scheme>,
    /// UE speed in km/h.
    #[arg(long, value_name = "KMH")]
    speed: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Comma-separated handover modes.
    #[arg(long, value_delimiter = ',', default_values = ["cho", "fcho"])]
    mode: Vec<HoMode>,
    /// Comma-separated UE schemes.
    #[arg(long, value_delimiter = ',', default_values = ["iso", "mpue-a3", "mpue-a1"])]
    scheme: Vec<Scheme>,
    /// Comma-separated speeds in km/h.
    #[arg(long, value_delimiter = ',', default_values = ["60"])]
    speed: Vec<f64>,
    /// Comma-separated seeds.
    #[arg(long, value_delimiter = ',', default_values = ["1"])]
    seed: Vec<u64>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct TopologyArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Write topology.json here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    force: bool,
}

#[derive(Args, Debug)]
struct ReportArgs {
    /// events.csv written by `run`.
    events: PathBuf,
    /// Write kpi.json and kpi.csv here instead of printing kpi.json.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    force: bool,
}

/// Failure with its process exit code.
#[derive(Debug)]
enum CliError {
    /// Bad input: configuration, arguments, files. Exit code 2.
    Usage(String),
    /// Internal consistency violation. Exit code 3.
    Internal(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Internal(_) => 3,
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            e if e.is_usage() => CliError::Usage(e.to_string()),
            SimError::Ledger(ref l) if is_input_error(l) => CliError::Usage(e.to_string()),
            e => CliError::Internal(e.to_string()),
        }
    }
}

fn is_input_error(e: &LedgerError) -> bool {
    matches!(
        e,
        LedgerError::Format(_) | LedgerError::Row { .. } | LedgerError::Csv(_) | LedgerError::Io(_)
    )
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Usage(format!("{}: {e}", path.display()))
}

type CliResult<T> = Result<T, CliError>;

fn load_config(args: &ConfigArgs) -> CliResult<SimConfig> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
            SimConfig::from_json(&text)?
        }
        None => SimConfig::desk(),
    };
    if let Some(s) = args.duration {
        if !(s > 0.0) {
            return Err(CliError::Usage(format!("--duration must be positive, got {s}")));
        }
        cfg.run.duration_ms = (s * 1000.0).round() as u64;
    }
    for kv in &args.overrides {
        let (key, value) = kv
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--set expects KEY=VAL, got '{kv}'")))?;
        cfg = cfg.with_override(key.trim(), value.trim())?;
    }
    Ok(cfg)
}

/// Creates `dir` and refuses to clobber any of `files` unless `force`.
fn prepare_output(dir: &Path, files: &[&str], force: bool) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    if !force {
        if let Some(f) = files.iter().map(|f| dir.join(f)).find(|p| p.exists()) {
            return Err(CliError::Usage(format!("{} exists; pass --force to overwrite", f.display())));
        }
    }
    Ok(())
}

fn write_file(path: &Path, contents: &[u8]) -> CliResult<()> {
    fs::write(path, contents).map_err(|e| io_err(path, e))
}

fn csv_text(rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}

fn kpi_json(report: &KpiReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}

fn kpi_csv(reports: &[KpiReport]) -> String {
    let header: Vec<String> = KpiReport::csv_header().iter().map(|s| s.to_string()).collect();
    csv_text(std::iter::once(header).chain(reports.iter().map(KpiReport::csv_record)))
}

fn config_echo(cfg: &SimConfig) -> String {
    let echo = serde_json::json!({
        "config_hash": cfg.hash(),
        "seed": cfg.run.seed,
        "config": cfg,
    });
    let mut s = serde_json::to_string_pretty(&echo).expect("config serializes");
    s.push('\n');
    s
}

fn cmd_run(args: RunArgs) -> CliResult<()> {
    let mut cfg = load_config(&args.config)?;
    if let Some(m) = args.mode {
        cfg.handover.mode = m;
    }
    if let Some(s) = args.scheme {
        cfg.ue.scheme = s;
    }
    if let Some(v) = args.speed {
        cfg.ue.speed_kmh = v;
    }
    if let Some(s) = args.seed {
        cfg.run.seed = s;
    }
    cfg.validate()?;
    let dir = &args.output.out;
    prepare_output(dir, &["kpi.json", "kpi.csv", "events.csv", "config-echo.json"], args.output.force)?;

    let output = run(&cfg)?;
    let mut events = Vec::new();
    write_events_csv(&mut events, &output.meta, output.ledger.events()).map_err(SimError::from)?;
    write_file(&dir.join("events.csv"), &events)?;
    write_file(&dir.join("kpi.json"), kpi_json(&output.report).as_bytes())?;
    write_file(&dir.join("kpi.csv"), kpi_csv(std::slice::from_ref(&output.report)).as_bytes())?;
    write_file(&dir.join("config-echo.json"), config_echo(&cfg).as_bytes())?;
    let r = &output.report;
    info!("wrote {} events to {}", output.ledger.len(), dir.display());
    println!(
        "{} {} {} km/h seed {}: attempts {}, failures {:.3}%, fast handovers {:.3}%, outage {:.3}%",
        r.mode.as_str(),
        r.scheme.as_str(),
        r.speed_kmh,
        r.seed,
        r.ho_attempts,
        r.mobility_failure_pct,
        r.fast_handover_pct,
        r.outage_pct
    );
    Ok(())
}

/// Metrics shown in the aggregated comparison table.
const MEANS_METRICS: [&str; 8] = [
    "mobility_failure_pct",
    "fast_handover_pct",
    "outage_pct",
    "prepare_per_ue_min",
    "release_per_ue_min",
    "replace_per_ue_min",
    "total_cho_events_per_ue_min",
    "fcho_cfg_per_ue_min",
];

fn means_csv(reports: &[KpiReport]) -> String {
    let mut header = vec!["mode".to_string(), "scheme".into(), "speed_kmh".into(), "n_runs".into()];
    for m in MEANS_METRICS {
        header.push(format!("{m}_mean"));
        header.push(format!("{m}_std"));
    }
    let mut rows = vec![header];
    for cell in summarize(reports) {
        let mut row = vec![
            cell.mode.as_str().to_string(),
            cell.scheme.as_str().to_string(),
            cell.speed_kmh.to_string(),
            cell.n_runs.to_string(),
        ];
        for m in MEANS_METRICS {
            let (_, mean, std) = cell.metrics.iter().find(|(n, _, _)| n == m).expect("metric present");
            row.push(mean.to_string());
            row.push(std.to_string());
        }
        rows.push(row);
    }
    csv_text(rows)
}

fn cmd_sweep(args: SweepArgs) -> CliResult<()> {
    let cfg = load_config(&args.config)?;
    let axes = SweepAxes {
        modes: args.mode,
        schemes: args.scheme,
        speeds_kmh: args.speed,
        seeds: args.seed,
    };
    let dir = &args.output.out;
    prepare_output(dir, &["comparison.csv", "comparison-means.csv", "config-echo.json"], args.output.force)?;
    info!("sweeping {} runs", axes.points().len());
    let outcome = sweep(&cfg, &axes)?;
    write_file(&dir.join("comparison.csv"), kpi_csv(&outcome.reports).as_bytes())?;
    write_file(&dir.join("comparison-means.csv"), means_csv(&outcome.reports).as_bytes())?;
    write_file(&dir.join("config-echo.json"), config_echo(&cfg).as_bytes())?;
    println!("{} runs written to {}", outcome.reports.len(), dir.display());
    match outcome.failure {
        None => Ok(()),
        Some((p, e)) => {
            warn!("run {} failed; completed runs were kept", describe(&cfg, &p));
            Err(e.into())
        }
    }
}

fn describe(base: &SimConfig, p: &SweepPoint) -> String {
    let cfg = point_config(base, p);
    format!("{} {} {} km/h seed {} ({})", p.mode.as_str(), p.scheme.as_str(), p.speed_kmh, p.seed, cfg.hash())
}

fn cmd_topology(args: TopologyArgs) -> CliResult<()> {
    let cfg = load_config(&args.config)?;
    cfg.validate()?;
    let topo = build_topology(&cfg)?;
    let mut json = topo.to_json();
    json.push('\n');
    match args.out {
        Some(dir) => {
            prepare_output(&dir, &["topology.json"], args.force)?;
            write_file(&dir.join("topology.json"), json.as_bytes())
        }
        None => {
            print!("{json}");
            Ok(())
        }
    }
}

fn cmd_report(args: ReportArgs) -> CliResult<()> {
    let file = fs::File::open(&args.events).map_err(|e| io_err(&args.events, e))?;
    let (meta, ledger) = read_events_csv(std::io::BufReader::new(file))
        .map_err(|e| CliError::Usage(format!("{}: {e}", args.events.display())))?;
    let hash = meta.config.hash();
    if hash != meta.config_hash {
        warn!("config header does not match recorded hash {}; using {hash}", meta.config_hash);
    }
    let report = build_report(ledger.events(), &meta.outage_ms, &meta.config, &hash)?;
    match args.out {
        Some(dir) => {
            prepare_output(&dir, &["kpi.json", "kpi.csv"], args.force)?;
            write_file(&dir.join("kpi.json"), kpi_json(&report).as_bytes())?;
            write_file(&dir.join("kpi.csv"), kpi_csv(std::slice::from_ref(&report)).as_bytes())
        }
        None => {
            print!("{}", kpi_json(&report));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Topology(a) => cmd_topology(a),
        Command::Report(a) => cmd_report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (CliError::Usage(msg) | CliError::Internal(msg)) = &e;
            eprintln!("error: {msg}");
            ExitCode::from(e.code())
        }
    }
}
