//! Append-only record of signaling events and failures, overhead
//! counters, and the `events.csv` interchange format.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{HoMode, SimConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EventKind {
    MeasReportPrep,
    ChoPrepare,
    ChoRelease,
    ChoReplace,
    FchoCfgRequest,
    FchoCfgModification,
    HoExecStart,
    HoSuccess,
    Hof,
    Rlf,
    Reestablish,
}

impl EventKind {
    pub const ALL: [EventKind; 11] = [
        EventKind::MeasReportPrep,
        EventKind::ChoPrepare,
        EventKind::ChoRelease,
        EventKind::ChoReplace,
        EventKind::FchoCfgRequest,
        EventKind::FchoCfgModification,
        EventKind::HoExecStart,
        EventKind::HoSuccess,
        EventKind::Hof,
        EventKind::Rlf,
        EventKind::Reestablish,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::MeasReportPrep => "MEAS_REPORT_PREP",
            EventKind::ChoPrepare => "CHO_PREPARE",
            EventKind::ChoRelease => "CHO_RELEASE",
            EventKind::ChoReplace => "CHO_REPLACE",
            EventKind::FchoCfgRequest => "FCHO_CFG_REQUEST",
            EventKind::FchoCfgModification => "FCHO_CFG_MODIFICATION",
            EventKind::HoExecStart => "HO_EXEC_START",
            EventKind::HoSuccess => "HO_SUCCESS",
            EventKind::Hof => "HOF",
            EventKind::Rlf => "RLF",
            EventKind::Reestablish => "REESTABLISH",
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EventKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EventKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown event kind '{s}'"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignalEvent {
    pub time_ms: u64,
    pub ue_id: u32,
    pub kind: EventKind,
    pub source_cell: Option<usize>,
    pub target_cell: Option<usize>,
}

impl SignalEvent {
    pub fn new(time_ms: u64, ue_id: u32, kind: EventKind, source_cell: Option<usize>, target_cell: Option<usize>) -> Self {
        Self {
            time_ms,
            ue_id,
            kind,
            source_cell,
            target_cell,
        }
    }
}

#[derive(Debug, Error)]
pub enum LedgerError {
    #[error("ue {ue_id}: event at {time_ms} ms precedes earlier event at {last_ms} ms")]
    TimeRegression { ue_id: u32, time_ms: u64, last_ms: u64 },
    #[error("ue {ue_id}: HO_SUCCESS toward cell {target:?} at {time_ms} ms without matching HO_EXEC_START")]
    OrphanSuccess { ue_id: u32, time_ms: u64, target: Option<usize> },
    #[error("events file: {0}")]
    Format(String),
    #[error("events file line {line}: {message}")]
    Row { line: u64, message: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Events ordered by (time, ue_id); events sharing both keep emission order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EventLedger {
    events: Vec<SignalEvent>,
    last_time: HashMap<u32, u64>,
    open_exec: HashMap<u32, Option<usize>>,
}

impl EventLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, event: SignalEvent) -> Result<(), LedgerError> {
        if let Some(&last_ms) = self.last_time.get(&event.ue_id) {
            if event.time_ms < last_ms {
                return Err(LedgerError::TimeRegression {
                    ue_id: event.ue_id,
                    time_ms: event.time_ms,
                    last_ms,
                });
            }
        }
        match event.kind {
            EventKind::HoExecStart => {
                self.open_exec.insert(event.ue_id, event.target_cell);
            }
            EventKind::HoSuccess => match self.open_exec.remove(&event.ue_id) {
                Some(target) if target == event.target_cell => {}
                _ => {
                    return Err(LedgerError::OrphanSuccess {
                        ue_id: event.ue_id,
                        time_ms: event.time_ms,
                        target: event.target_cell,
                    })
                }
            },
            EventKind::Hof => {
                self.open_exec.remove(&event.ue_id);
            }
            _ => {}
        }
        self.last_time.insert(event.ue_id, event.time_ms);
        let key = (event.time_ms, event.ue_id);
        let pos = self.events.partition_point(|e| (e.time_ms, e.ue_id) <= key);
        self.events.insert(pos, event);
        Ok(())
    }

    pub fn record_all(&mut self, events: impl IntoIterator<Item = SignalEvent>) -> Result<(), LedgerError> {
        events.into_iter().try_for_each(|e| self.record(e))
    }

    pub fn events(&self) -> &[SignalEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn count(&self, kind: EventKind) -> usize {
        self.events.iter().filter(|e| e.kind == kind).count()
    }

    /// Rebuilds a ledger from stored events, re-running the consistency checks.
    pub fn from_events(events: impl IntoIterator<Item = SignalEvent>) -> Result<Self, LedgerError> {
        let mut ledger = Self::new();
        ledger.record_all(events)?;
        Ok(ledger)
    }
}

/// Signaling events normalized to one UE over one minute.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct OverheadCounters {
    pub prepare_per_ue_min: f64,
    pub release_per_ue_min: f64,
    pub replace_per_ue_min: f64,
    pub fcho_cfg_per_ue_min: f64,
    pub total_cho_events_per_ue_min: f64,
}

pub fn count_overhead<'a>(events: impl IntoIterator<Item = &'a SignalEvent>, n_ue: usize, sim_minutes: f64) -> OverheadCounters {
    let (mut prep, mut rel, mut rep, mut cfg) = (0usize, 0usize, 0usize, 0usize);
    for e in events {
        match e.kind {
            EventKind::ChoPrepare => prep += 1,
            EventKind::ChoRelease => rel += 1,
            EventKind::ChoReplace => rep += 1,
            EventKind::FchoCfgRequest | EventKind::FchoCfgModification => cfg += 1,
            _ => {}
        }
    }
    let norm = n_ue as f64 * sim_minutes;
    if norm <= 0.0 {
        return OverheadCounters::default();
    }
    OverheadCounters {
        prepare_per_ue_min: prep as f64 / norm,
        release_per_ue_min: rel as f64 / norm,
        replace_per_ue_min: rep as f64 / norm,
        fcho_cfg_per_ue_min: cfg as f64 / norm,
        total_cho_events_per_ue_min: (prep + rel + rep) as f64 / norm,
    }
}

/// Configuration messages sent when `new_cell` joins an FCHO prepared set:
/// one request toward the new cell and one modification toward each cell
/// that was already prepared.
pub fn emit_fcho_config_events(time_ms: u64, ue_id: u32, new_cell: usize, existing: &[usize], serving: usize) -> Vec<SignalEvent> {
    std::iter::once(SignalEvent::new(time_ms, ue_id, EventKind::FchoCfgRequest, Some(serving), Some(new_cell)))
        .chain(existing.iter().filter(|&&c| c != new_cell).map(|&c| {
            SignalEvent::new(time_ms, ue_id, EventKind::FchoCfgModification, Some(serving), Some(c))
        }))
        .collect()
}

/// Per-cell gNB reservation statistics from replaying the ledger.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ResourceUsage {
    /// Largest number of simultaneously outstanding preparations per cell.
    pub peak_outstanding: Vec<usize>,
    /// Accumulated reservation time per cell, in UE-milliseconds.
    pub reserved_ue_ms: Vec<u64>,
}

/// Replays preparations, releases, executions and failures to track which
/// cells hold resources for which UE. Unknown cells are ignored.
pub fn replay_resources(events: &[SignalEvent], n_cells: usize, mode: HoMode, end_ms: u64) -> ResourceUsage {
    let mut held: HashMap<u32, BTreeSet<usize>> = HashMap::new();
    let mut since = vec![HashMap::<u32, u64>::new(); n_cells];
    let mut usage = ResourceUsage {
        peak_outstanding: vec![0; n_cells],
        reserved_ue_ms: vec![0; n_cells],
    };

    fn acquire(usage: &mut ResourceUsage, since: &mut [HashMap<u32, u64>], held: &mut BTreeSet<usize>, ue: u32, cell: usize, t: u64) {
        if cell < since.len() && held.insert(cell) {
            since[cell].insert(ue, t);
            usage.peak_outstanding[cell] = usage.peak_outstanding[cell].max(since[cell].len());
        }
    }
    fn free(usage: &mut ResourceUsage, since: &mut [HashMap<u32, u64>], held: &mut BTreeSet<usize>, ue: u32, cell: usize, t: u64) {
        if held.remove(&cell) {
            if let Some(t0) = since[cell].remove(&ue) {
                usage.reserved_ue_ms[cell] += t.saturating_sub(t0);
            }
        }
    }

    for e in events {
        let set = held.entry(e.ue_id).or_default();
        let t = e.time_ms;
        match e.kind {
            EventKind::ChoPrepare => {
                if let Some(c) = e.target_cell {
                    acquire(&mut usage, &mut since, set, e.ue_id, c, t);
                }
            }
            EventKind::ChoRelease => {
                if let Some(c) = e.target_cell {
                    free(&mut usage, &mut since, set, e.ue_id, c, t);
                }
            }
            EventKind::ChoReplace => {
                if let Some(c) = e.source_cell {
                    free(&mut usage, &mut since, set, e.ue_id, c, t);
                }
                if let Some(c) = e.target_cell {
                    acquire(&mut usage, &mut since, set, e.ue_id, c, t);
                }
            }
            EventKind::HoSuccess => {
                if let Some(c) = e.target_cell {
                    free(&mut usage, &mut since, set, e.ue_id, c, t);
                }
                match mode {
                    HoMode::Cho => {
                        for c in std::mem::take(set) {
                            set.insert(c);
                            free(&mut usage, &mut since, set, e.ue_id, c, t);
                        }
                    }
                    HoMode::Fcho => {
                        if let Some(c) = e.source_cell {
                            acquire(&mut usage, &mut since, set, e.ue_id, c, t);
                        }
                    }
                }
            }
            EventKind::Hof | EventKind::Rlf => {
                for c in std::mem::take(set) {
                    set.insert(c);
                    free(&mut usage, &mut since, set, e.ue_id, c, t);
                }
            }
            _ => {}
        }
    }
    for (cell, holders) in since.iter().enumerate() {
        for &t0 in holders.values() {
            usage.reserved_ue_ms[cell] += end_ms.saturating_sub(t0);
        }
    }
    usage
}

/// Run information stored alongside the events so reports can be rebuilt
/// from `events.csv` alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub config_hash: String,
    pub config: SimConfig,
    /// Outage per UE after warm-up, in ms.
    pub outage_ms: Vec<u64>,
}

const META_CONFIG: &str = "config";
const META_HASH: &str = "config_hash";
const META_OUTAGE: &str = "outage_ms";
const META_SEED: &str = "seed";

pub fn write_events_csv<W: Write>(mut out: W, meta: &RunMeta, events: &[SignalEvent]) -> Result<(), LedgerError> {
    let config = serde_json::to_string(&meta.config).map_err(|e| LedgerError::Format(e.to_string()))?;
    let outage: Vec<String> = meta.outage_ms.iter().map(u64::to_string).collect();
    writeln!(out, "# {META_HASH}={}", meta.config_hash)?;
    writeln!(out, "# {META_SEED}={}", meta.config.run.seed)?;
    writeln!(out, "# {META_CONFIG}={config}")?;
    writeln!(out, "# {META_OUTAGE}={}", outage.join(" "))?;
    let mut w = csv::Writer::from_writer(out);
    for e in events {
        w.serialize(e)?;
    }
    if events.is_empty() {
        w.write_record(["time_ms", "ue_id", "kind", "source_cell", "target_cell"])?;
    }
    w.flush()?;
    Ok(())
}

/// Parses `events.csv` and replays it through the ledger checks.
/// Errors name the 1-based file line of the first offending row.
pub fn read_events_csv<R: Read>(mut input: R) -> Result<(RunMeta, EventLedger), LedgerError> {
    let mut text = String::new();
    input.read_to_string(&mut text)?;
    let header: HashMap<&str, &str> = text
        .lines()
        .filter_map(|l| l.strip_prefix("# "))
        .filter_map(|l| l.split_once('='))
        .collect();
    let get = |k: &str| header.get(k).copied().ok_or_else(|| LedgerError::Format(format!("missing '{k}' header line")));
    let config: SimConfig = serde_json::from_str(get(META_CONFIG)?).map_err(|e| LedgerError::Format(format!("config header: {e}")))?;
    let outage_ms = get(META_OUTAGE)?
        .split_whitespace()
        .map(|v| v.parse::<u64>().map_err(|e| LedgerError::Format(format!("outage value '{v}': {e}"))))
        .collect::<Result<Vec<_>, _>>()?;
    let meta = RunMeta {
        config_hash: get(META_HASH)?.to_string(),
        config,
        outage_ms,
    };

    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let mut ledger = EventLedger::new();
    let mut record = csv::StringRecord::new();
    let headers = reader.headers()?.clone();
    loop {
        let line = reader.position().line();
        let row = |message: String| LedgerError::Row { line, message };
        match reader.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => return Err(row(e.to_string())),
        }
        let event: SignalEvent = record.deserialize(Some(&headers)).map_err(|e| row(e.to_string()))?;
        ledger.record(event).map_err(|e| row(e.to_string()))?;
    }
    Ok((meta, ledger))
}
