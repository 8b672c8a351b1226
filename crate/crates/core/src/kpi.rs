//! Handover outcome classification and run-level KPIs.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::config::{HoMode, Scheme, SimConfig};
use crate::error::{Result, SimError};
use crate::ledger::{count_overhead, replay_resources, EventKind, OverheadCounters, ResourceUsage, SignalEvent};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum HoOutcome {
    Success,
    Hof,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HoRecord {
    pub ue_id: u32,
    pub time_ms: u64,
    pub from_cell: usize,
    pub to_cell: usize,
    pub outcome: HoOutcome,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FastHandover {
    PingPong,
    ShortStay,
    None,
}

/// Classifies `next` against the previous successful handover of the same UE.
pub fn classify_fast_handover(prev: &HoRecord, next: &HoRecord, t_fh_ms: u64) -> FastHandover {
    if next.time_ms.saturating_sub(prev.time_ms) > t_fh_ms || prev.to_cell != next.from_cell {
        FastHandover::None
    } else if next.to_cell == prev.from_cell {
        FastHandover::PingPong
    } else {
        FastHandover::ShortStay
    }
}

fn pct(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        100.0 * num / den
    } else {
        0.0
    }
}

pub fn mobility_failure_pct(hofs: usize, rlfs: usize, successes: usize) -> f64 {
    pct((hofs + rlfs) as f64, (successes + hofs + rlfs) as f64)
}

pub fn outage_pct(outage_ms: &[u64], n_ue: usize, simulated_ms: u64) -> f64 {
    pct(outage_ms.iter().sum::<u64>() as f64, n_ue as f64 * simulated_ms as f64)
}

/// Handover executions with their outcome, in ledger order.
pub fn ho_records(events: &[SignalEvent]) -> Vec<HoRecord> {
    events
        .iter()
        .filter_map(|e| {
            let outcome = match e.kind {
                EventKind::HoSuccess => HoOutcome::Success,
                EventKind::Hof => HoOutcome::Hof,
                _ => return None,
            };
            Some(HoRecord {
                ue_id: e.ue_id,
                time_ms: e.time_ms,
                from_cell: e.source_cell?,
                to_cell: e.target_cell?,
                outcome,
            })
        })
        .collect()
}

/// Classification of every successful handover. Failures and
/// reestablishments break a UE's chain.
pub fn classify_all(events: &[SignalEvent], t_fh_ms: u64) -> Vec<(HoRecord, FastHandover)> {
    let mut last: HashMap<u32, HoRecord> = HashMap::new();
    let mut out = Vec::new();
    for e in events {
        match e.kind {
            EventKind::HoSuccess => {
                let (Some(from_cell), Some(to_cell)) = (e.source_cell, e.target_cell) else {
                    continue;
                };
                let rec = HoRecord {
                    ue_id: e.ue_id,
                    time_ms: e.time_ms,
                    from_cell,
                    to_cell,
                    outcome: HoOutcome::Success,
                };
                let class = last
                    .get(&e.ue_id)
                    .map_or(FastHandover::None, |prev| classify_fast_handover(prev, &rec, t_fh_ms));
                out.push((rec, class));
                last.insert(e.ue_id, rec);
            }
            EventKind::Hof | EventKind::Rlf | EventKind::Reestablish => {
                last.remove(&e.ue_id);
            }
            _ => {}
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KpiReport {
    pub config_hash: String,
    pub mode: HoMode,
    pub scheme: Scheme,
    pub speed_kmh: f64,
    pub seed: u64,
    pub n_ue: usize,
    /// Time span the KPIs cover (run duration minus warm-up).
    pub measured_ms: u64,
    pub ho_attempts: usize,
    pub successes: usize,
    pub hofs: usize,
    pub rlfs: usize,
    pub reestablishments: usize,
    pub mobility_failure_pct: f64,
    pub ping_pongs: usize,
    pub short_stays: usize,
    pub fast_handover_pct: f64,
    pub outage_pct: f64,
    pub ho_attempts_per_ue_min: f64,
    #[serde(flatten)]
    pub overhead: OverheadCounters,
    pub resources: ResourceUsage,
}

const CSV_COLUMNS: [&str; 23] = [
    "config_hash",
    "mode",
    "scheme",
    "speed_kmh",
    "seed",
    "n_ue",
    "measured_ms",
    "ho_attempts",
    "successes",
    "hofs",
    "rlfs",
    "reestablishments",
    "mobility_failure_pct",
    "ping_pongs",
    "short_stays",
    "fast_handover_pct",
    "outage_pct",
    "ho_attempts_per_ue_min",
    "prepare_per_ue_min",
    "release_per_ue_min",
    "replace_per_ue_min",
    "fcho_cfg_per_ue_min",
    "total_cho_events_per_ue_min",
];

impl KpiReport {
    pub fn csv_header() -> &'static [&'static str] {
        &CSV_COLUMNS
    }

    /// Flat row matching [`KpiReport::csv_header`].
    pub fn csv_record(&self) -> Vec<String> {
        let o = &self.overhead;
        vec![
            self.config_hash.clone(),
            self.mode.as_str().to_string(),
            self.scheme.as_str().to_string(),
            self.speed_kmh.to_string(),
            self.seed.to_string(),
            self.n_ue.to_string(),
            self.measured_ms.to_string(),
            self.ho_attempts.to_string(),
            self.successes.to_string(),
            self.hofs.to_string(),
            self.rlfs.to_string(),
            self.reestablishments.to_string(),
            self.mobility_failure_pct.to_string(),
            self.ping_pongs.to_string(),
            self.short_stays.to_string(),
            self.fast_handover_pct.to_string(),
            self.outage_pct.to_string(),
            self.ho_attempts_per_ue_min.to_string(),
            o.prepare_per_ue_min.to_string(),
            o.release_per_ue_min.to_string(),
            o.replace_per_ue_min.to_string(),
            o.fcho_cfg_per_ue_min.to_string(),
            o.total_cho_events_per_ue_min.to_string(),
        ]
    }

    /// Numeric KPI columns, used for sweep aggregation.
    pub fn metrics(&self) -> Vec<(&'static str, f64)> {
        let o = &self.overhead;
        vec![
            ("ho_attempts", self.ho_attempts as f64),
            ("successes", self.successes as f64),
            ("hofs", self.hofs as f64),
            ("rlfs", self.rlfs as f64),
            ("mobility_failure_pct", self.mobility_failure_pct),
            ("ping_pongs", self.ping_pongs as f64),
            ("short_stays", self.short_stays as f64),
            ("fast_handover_pct", self.fast_handover_pct),
            ("outage_pct", self.outage_pct),
            ("ho_attempts_per_ue_min", self.ho_attempts_per_ue_min),
            ("prepare_per_ue_min", o.prepare_per_ue_min),
            ("release_per_ue_min", o.release_per_ue_min),
            ("replace_per_ue_min", o.replace_per_ue_min),
            ("fcho_cfg_per_ue_min", o.fcho_cfg_per_ue_min),
            ("total_cho_events_per_ue_min", o.total_cho_events_per_ue_min),
        ]
    }

    fn check(&self) -> Result<()> {
        let fail = |msg: String| Err(SimError::Invariant(msg));
        if self.ho_attempts != self.successes + self.hofs {
            return fail(format!("attempts {} != successes {} + hofs {}", self.ho_attempts, self.successes, self.hofs));
        }
        if self.ping_pongs + self.short_stays > self.successes {
            return fail("more fast handovers than successful handovers".into());
        }
        for (name, v) in [
            ("mobility_failure_pct", self.mobility_failure_pct),
            ("fast_handover_pct", self.fast_handover_pct),
            ("outage_pct", self.outage_pct),
        ] {
            if !(0.0..=100.0).contains(&v) {
                return fail(format!("{name} = {v} outside [0, 100]"));
            }
        }
        Ok(())
    }
}

/// Aggregates KPIs over the post-warm-up part of a finished run.
///
/// `outage_ms` holds each UE's outage after warm-up. Every HOF and RLF in
/// the full ledger must be followed by exactly one reestablishment.
pub fn build_report(events: &[SignalEvent], outage_ms: &[u64], cfg: &SimConfig, config_hash: &str) -> Result<KpiReport> {
    let warmup = cfg.kpi.warmup_ms;
    let measured_ms = cfg.run.duration_ms.saturating_sub(warmup);
    let n_ue = cfg.ue.n_ue;
    if outage_ms.len() != n_ue {
        return Err(SimError::Invariant(format!("{} outage entries for {n_ue} UEs", outage_ms.len())));
    }
    if let Some(u) = outage_ms.iter().position(|&o| o > measured_ms) {
        return Err(SimError::Invariant(format!("ue {u} outage exceeds measured time")));
    }
    let failures_total = events.iter().filter(|e| matches!(e.kind, EventKind::Hof | EventKind::Rlf)).count();
    let reest_total = events.iter().filter(|e| e.kind == EventKind::Reestablish).count();
    if failures_total != reest_total {
        return Err(SimError::Invariant(format!(
            "{failures_total} failures but {reest_total} reestablishments"
        )));
    }

    let measured: Vec<SignalEvent> = events.iter().filter(|e| e.time_ms >= warmup).copied().collect();
    let count = |k: EventKind| measured.iter().filter(|e| e.kind == k).count();
    let successes = count(EventKind::HoSuccess);
    let hofs = count(EventKind::Hof);
    let rlfs = count(EventKind::Rlf);
    let (mut ping_pongs, mut short_stays) = (0, 0);
    for (rec, class) in classify_all(events, cfg.kpi.t_fh_ms) {
        if rec.time_ms < warmup {
            continue;
        }
        match class {
            FastHandover::PingPong => ping_pongs += 1,
            FastHandover::ShortStay => short_stays += 1,
            FastHandover::None => {}
        }
    }
    let minutes = measured_ms as f64 / 60_000.0;
    let attempts_den = (successes + hofs + rlfs) as f64;
    let report = KpiReport {
        config_hash: config_hash.to_string(),
        mode: cfg.handover.mode,
        scheme: cfg.ue.scheme,
        speed_kmh: cfg.ue.speed_kmh,
        seed: cfg.run.seed,
        n_ue,
        measured_ms,
        ho_attempts: successes + hofs,
        successes,
        hofs,
        rlfs,
        reestablishments: count(EventKind::Reestablish),
        mobility_failure_pct: mobility_failure_pct(hofs, rlfs, successes),
        ping_pongs,
        short_stays,
        fast_handover_pct: pct((ping_pongs + short_stays) as f64, attempts_den),
        outage_pct: outage_pct(outage_ms, n_ue, measured_ms),
        ho_attempts_per_ue_min: if minutes > 0.0 { (successes + hofs) as f64 / (n_ue as f64 * minutes) } else { 0.0 },
        overhead: count_overhead(&measured, n_ue, minutes),
        resources: replay_resources(events, n_cells(cfg), cfg.handover.mode, cfg.run.duration_ms),
    };
    report.check()?;
    Ok(report)
}

fn n_cells(cfg: &SimConfig) -> usize {
    cfg.deployment.n_sites * crate::deployment::CELLS_PER_SITE
}
