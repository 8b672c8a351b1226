//! Simulation clock, per-tick orchestration and multi-run sweeps.
//!
//! Each tick processes UEs in ascending id:
//! motion, measurement and filtering (SSB instants only), access and
//! reestablishment progress, condition monitors and signaling (SSB
//! instants only), serving-link supervision, outage accounting.

use log::{debug, info};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::channel::{doppler_hz, Channel, FadingProcess, ShadowMap};
use crate::config::{HoMode, Scheme, SimConfig};
use crate::deployment::{build_topology, Topology, BEAMS_PER_CELL};
use crate::error::{Result, SimError};
use crate::handover::{best_by_l3, Fired, HandoverState, HoOffsets};
use crate::kpi::{build_report, KpiReport};
use crate::ledger::{emit_fcho_config_events, EventKind, EventLedger, RunMeta, SignalEvent};
use crate::link::{ue_sinr_db, AccessOutcome, LinkParams, NoiseModel, SinrState};
use crate::rng::{substream, Stream};
use crate::ue::{step_motion, Motion, PanelConfig, RrcState, UeContext};

/// Everything the engine tracks for one UE.
#[derive(Debug, Clone)]
pub struct UeSim {
    pub ctx: UeContext,
    pub ho: HandoverState,
    pub link: SinrState,
    /// Outage over the whole run, warm-up included.
    pub outage_total_ms: u64,
    motion_rng: ChaCha8Rng,
}

impl UeSim {
    pub fn serving(&self) -> usize {
        self.ho.serving
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Running,
    Finished,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RunHandle {
    pub config_hash: String,
    pub seed: u64,
    pub ticks: u64,
    pub status: RunStatus,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub handle: RunHandle,
    pub ledger: EventLedger,
    pub report: KpiReport,
    pub meta: RunMeta,
}

pub struct Simulation {
    cfg: SimConfig,
    config_hash: String,
    topology: Topology,
    shadow: ShadowMap,
    panels: PanelConfig,
    offsets: HoOffsets,
    link_params: LinkParams,
    noise_dbm: f64,
    ues: Vec<UeSim>,
    ledger: EventLedger,
    tick: u64,
}

impl Simulation {
    /// Validates `cfg`, builds the network and drops the UEs. Every UE takes
    /// one measurement at t = 0 and attaches to its strongest cell.
    pub fn new(cfg: &SimConfig) -> Result<Self> {
        cfg.validate()?;
        let topology = build_topology(cfg)?;
        let n_cells = topology.n_cells;
        let seed = cfg.run.seed;
        let ch = &cfg.channel;
        let shadow = if ch.shadowing {
            ShadowMap::generate(
                &topology.bounds,
                n_cells,
                ch.shadow_sigma_db,
                ch.shadow_decorrelation_m,
                ch.shadow_grid_pitch_m,
                ch.shadow_components,
                seed,
            )
        } else {
            ShadowMap::flat(n_cells)
        };
        let panels = PanelConfig::from_config(&cfg.ue);
        let mut drop_rng = substream(seed, Stream::Drop, 0);
        let channel = Channel {
            topology: &topology,
            shadow: &shadow,
            carrier_ghz: cfg.radio.carrier_ghz,
            rx_height_m: cfg.radio.rx_height_m,
        };
        let window = cfg.window_instants();
        let speed = cfg.speed_mps();
        let mut ues = Vec::with_capacity(cfg.ue.n_ue);
        for id in 0..cfg.ue.n_ue {
            let motion = Motion {
                position: topology.drop_area.sample_uniform(&mut drop_rng),
                heading_deg: drop_rng.random_range(0.0..360.0),
                speed_mps: speed,
            };
            let mut ctx = UeContext::new(id, motion, cfg.ue.scheme, n_cells, cfg.ue.l3_coefficient);
            if ch.fading {
                let mut rng = substream(seed, Stream::Fading, id as u64);
                let fd = doppler_hz(speed, cfg.radio.carrier_ghz);
                ctx.fading = Some(FadingProcess::new(&mut rng, n_cells * BEAMS_PER_CELL, ch.fading_sinusoids, fd));
            }
            let samples = ctx.measure(&channel, &panels, 0, cfg.run.ssb_period_ms)?;
            ctx.update_filters(&samples);
            let serving = ctx
                .filters
                .strongest_cell()
                .ok_or_else(|| SimError::Invariant(format!("ue {id} measured no cell at t=0")))?;
            ues.push(UeSim {
                ctx,
                ho: HandoverState::new(serving, n_cells, cfg.handover.max_prepared, window),
                link: SinrState::default(),
                outage_total_ms: 0,
                motion_rng: substream(seed, Stream::Motion, id as u64),
            });
        }
        info!(
            "run {}: {} UEs, {} cells, {} ticks, mode {}, scheme {}",
            cfg.hash(),
            cfg.ue.n_ue,
            n_cells,
            cfg.n_ticks(),
            cfg.handover.mode.as_str(),
            cfg.ue.scheme.as_str()
        );
        Ok(Self {
            config_hash: cfg.hash(),
            offsets: HoOffsets::from_config(cfg),
            link_params: LinkParams::from_config(cfg),
            noise_dbm: NoiseModel::from_config(cfg).power_dbm(),
            cfg: cfg.clone(),
            topology,
            shadow,
            panels,
            ues,
            ledger: EventLedger::new(),
            tick: 0,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn ues(&self) -> &[UeSim] {
        &self.ues
    }

    pub fn ledger(&self) -> &EventLedger {
        &self.ledger
    }

    /// Time of the next tick to run.
    pub fn time_ms(&self) -> u64 {
        self.tick * self.cfg.run.dt_ms
    }

    pub fn ticks_done(&self) -> u64 {
        self.tick
    }

    pub fn is_done(&self) -> bool {
        self.tick >= self.cfg.n_ticks()
    }

    pub fn step(&mut self) -> Result<()> {
        let t = self.time_ms();
        let dt = self.cfg.run.dt_ms;
        let ssb_period = self.cfg.run.ssb_period_ms;
        let ssb = t.is_multiple_of(ssb_period);
        let channel = Channel {
            topology: &self.topology,
            shadow: &self.shadow,
            carrier_ghz: self.cfg.radio.carrier_ghz,
            rx_height_m: self.cfg.radio.rx_height_m,
        };
        let ctx = TickContext {
            channel,
            panels: &self.panels,
            offsets: &self.offsets,
            link: &self.link_params,
            cfg: &self.cfg,
            noise_dbm: self.noise_dbm,
            t,
        };
        let mut events = Vec::new();
        for ue in &mut self.ues {
            if self.tick > 0 {
                step_motion(&mut ue.ctx.motion, dt, &self.topology.bounds, &mut ue.motion_rng);
                if ssb {
                    let samples = ue.ctx.measure(&channel, &self.panels, t, ssb_period)?;
                    ue.ctx.update_filters(&samples);
                }
            }
            ctx.advance(ue, ssb, &mut events);
            self.ledger.record_all(events.drain(..))?;
        }
        self.tick += 1;
        Ok(())
    }

    /// Runs the remaining ticks, calling `observe` after each one.
    pub fn run_with_observer<F: FnMut(&Simulation) -> Result<()>>(mut self, mut observe: F) -> Result<RunOutput> {
        while !self.is_done() {
            self.step()?;
            observe(&self)?;
        }
        self.finish()
    }

    pub fn finish(self) -> Result<RunOutput> {
        let outage_ms: Vec<u64> = self.ues.iter().map(|u| u.link.outage_ms).collect();
        let report = build_report(self.ledger.events(), &outage_ms, &self.cfg, &self.config_hash)?;
        debug!("run {} finished with {} events", self.config_hash, self.ledger.len());
        Ok(RunOutput {
            handle: RunHandle {
                config_hash: self.config_hash.clone(),
                seed: self.cfg.run.seed,
                ticks: self.tick,
                status: if self.is_done() { RunStatus::Finished } else { RunStatus::Running },
            },
            meta: RunMeta {
                config_hash: self.config_hash,
                config: self.cfg,
                outage_ms,
            },
            ledger: self.ledger,
            report,
        })
    }
}

struct TickContext<'a> {
    channel: Channel<'a>,
    panels: &'a PanelConfig,
    offsets: &'a HoOffsets,
    link: &'a LinkParams,
    cfg: &'a SimConfig,
    noise_dbm: f64,
    t: u64,
}

impl TickContext<'_> {
    fn sinr(&self, ue: &UeSim, cell: usize) -> f64 {
        let beam0 = ue.ctx.filters.best_beam(cell).unwrap_or(0);
        ue_sinr_db(
            &self.channel,
            &ue.ctx,
            self.panels,
            cell,
            beam0,
            self.cfg.link.scheduled_beams,
            self.noise_dbm,
            self.t,
        )
    }

    fn event(&self, ue: &UeSim, kind: EventKind, source: Option<usize>, target: Option<usize>) -> SignalEvent {
        SignalEvent::new(self.t, ue.ctx.id as u32, kind, source, target)
    }

    /// Failure handling shared by RLF and HOF: reestablish toward the
    /// strongest cell after `t_reest`, dropping all preparations.
    fn fail(&self, ue: &mut UeSim, failure: SignalEvent, out: &mut Vec<SignalEvent>) {
        let source = ue.ho.serving;
        let target = ue.ctx.filters.strongest_cell().unwrap_or(source);
        out.push(failure);
        out.push(self.event(ue, EventKind::Reestablish, Some(source), Some(target)));
        ue.ho.reestablish(target);
        ue.link.reset_timers();
        ue.ctx.rrc = RrcState::Reestablishing {
            target,
            until_ms: self.t + self.link.t_reest_ms,
        };
    }

    fn advance(&self, ue: &mut UeSim, ssb: bool, out: &mut Vec<SignalEvent>) {
        let t = self.t;
        let mode = self.cfg.handover.mode;
        match ue.ctx.rrc {
            RrcState::Accessing { target, since_ms } if t > since_ms => {
                let gamma = self.sinr(ue, target);
                match ue.link.access_step(gamma, t - since_ms, self.cfg.run.dt_ms, self.link) {
                    AccessOutcome::Continue => {}
                    AccessOutcome::Success => {
                        let source = ue.ho.serving;
                        out.push(self.event(ue, EventKind::HoSuccess, Some(source), Some(target)));
                        let promoted = ue
                            .ho
                            .complete_handover(target, mode, t)
                            .expect("access target stays prepared while accessing");
                        if mode == HoMode::Fcho {
                            self.emit_config(ue, &promoted, out);
                        }
                        ue.link.reset_timers();
                        ue.ctx.rrc = RrcState::Connected;
                    }
                    AccessOutcome::Failure => {
                        let failure = self.event(ue, EventKind::Hof, Some(ue.ho.serving), Some(target));
                        self.fail(ue, failure, out);
                    }
                }
            }
            RrcState::Reestablishing { until_ms, .. } if t >= until_ms => {
                ue.link.reset_timers();
                ue.ctx.rrc = RrcState::Connected;
            }
            _ => {}
        }

        if ue.ctx.rrc == RrcState::Connected {
            let promoted = ue.ho.prepared.promote(t);
            if mode == HoMode::Fcho {
                self.emit_config(ue, &promoted, out);
            }
            if ssb {
                self.signaling(ue, out);
            }
        }

        let mut gamma = f64::NAN;
        if ue.ctx.rrc == RrcState::Connected {
            gamma = self.sinr(ue, ue.ho.serving);
            if ue.link.rlf_step(gamma, self.cfg.run.dt_ms, self.link) {
                let failure = self.event(ue, EventKind::Rlf, Some(ue.ho.serving), None);
                self.fail(ue, failure, out);
            }
        }

        let dt = self.cfg.run.dt_ms;
        if crate::link::is_outage(gamma, ue.ctx.rrc, self.link) {
            ue.outage_total_ms += dt;
        }
        if t >= self.cfg.kpi.warmup_ms {
            ue.link.outage_step(gamma, ue.ctx.rrc, dt, self.link);
        }
    }

    /// FCHO configuration exchange for cells that just became ready.
    fn emit_config(&self, ue: &UeSim, promoted: &[usize], out: &mut Vec<SignalEvent>) {
        let mut ready: Vec<usize> = ue.ho.prepared.ready_cells().filter(|c| !promoted.contains(c)).collect();
        for &cell in promoted {
            out.extend(emit_fcho_config_events(self.t, ue.ctx.id as u32, cell, &ready, ue.ho.serving));
            ready.push(cell);
        }
    }

    /// Monitor evaluation and the resulting signaling at an SSB instant.
    fn signaling(&self, ue: &mut UeSim, out: &mut Vec<SignalEvent>) {
        let t = self.t;
        let latency = self.cfg.handover.prep_latency_ms;
        let l3 = ue.ctx.filters.l3().to_vec();
        let fired = ue.ho.tick_monitors(&l3, self.offsets);
        if fired.is_empty() {
            return;
        }
        let serving = ue.ho.serving;

        if let Some(target) = ue.ho.select_execution(&fired, &l3) {
            out.push(self.event(ue, EventKind::HoExecStart, Some(serving), Some(target)));
            ue.link.reset_timers();
            ue.ctx.rrc = RrcState::Accessing { target, since_ms: t };
            return;
        }

        for f in &fired {
            if let Fired::Release(cell) = *f {
                if ue.ho.apply_release(cell).is_ok() {
                    out.push(self.event(ue, EventKind::ChoRelease, Some(serving), Some(cell)));
                }
            }
        }

        let replace = best_by_l3(
            fired.iter().filter_map(|f| match f {
                Fired::Replace { strong, .. } => Some(*strong),
                _ => None,
            }),
            &l3,
        );
        if let Some(strong) = replace {
            if let Some((weak, _)) = ue.ho.prepared.weakest(&l3) {
                if ue.ho.apply_replace(weak, strong, &l3, t, latency).is_ok() {
                    out.push(self.event(ue, EventKind::ChoReplace, Some(weak), Some(strong)));
                }
            }
        }

        let mut candidates: Vec<usize> = fired
            .iter()
            .filter_map(|f| match f {
                Fired::Prepare(c) => Some(*c),
                _ => None,
            })
            .collect();
        candidates.sort_by(|a, b| {
            let (pa, pb) = (l3[*a].unwrap_or(f64::NEG_INFINITY), l3[*b].unwrap_or(f64::NEG_INFINITY));
            pb.total_cmp(&pa).then(a.cmp(b))
        });
        for cell in candidates {
            if ue.ho.prepared.is_full() {
                break;
            }
            if let Ok(true) = ue.ho.apply_preparation(cell, t, latency) {
                out.push(self.event(ue, EventKind::MeasReportPrep, Some(serving), Some(cell)));
                out.push(self.event(ue, EventKind::ChoPrepare, Some(serving), Some(cell)));
            }
        }
    }
}

/// Runs one simulation to completion.
pub fn run(cfg: &SimConfig) -> Result<RunOutput> {
    Simulation::new(cfg)?.run_with_observer(|_| Ok(()))
}

/// One point of a sweep grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepPoint {
    pub mode: HoMode,
    pub scheme: Scheme,
    pub speed_kmh: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepAxes {
    pub modes: Vec<HoMode>,
    pub schemes: Vec<Scheme>,
    pub speeds_kmh: Vec<f64>,
    pub seeds: Vec<u64>,
}

impl SweepAxes {
    pub fn points(&self) -> Vec<SweepPoint> {
        let mut pts = Vec::new();
        for &speed_kmh in &self.speeds_kmh {
            for &mode in &self.modes {
                for &scheme in &self.schemes {
                    for &seed in &self.seeds {
                        pts.push(SweepPoint {
                            mode,
                            scheme,
                            speed_kmh,
                            seed,
                        });
                    }
                }
            }
        }
        pts
    }
}

#[derive(Debug)]
pub struct SweepOutcome {
    /// Reports of every completed run, in grid order.
    pub reports: Vec<KpiReport>,
    /// First failing grid point, if any.
    pub failure: Option<(SweepPoint, SimError)>,
}

pub fn point_config(base: &SimConfig, p: &SweepPoint) -> SimConfig {
    let mut cfg = base.clone();
    cfg.handover.mode = p.mode;
    cfg.ue.scheme = p.scheme;
    cfg.ue.speed_kmh = p.speed_kmh;
    cfg.run.seed = p.seed;
    cfg
}

/// Runs every grid point concurrently. A failing run does not discard the
/// reports of runs that completed.
pub fn sweep(base: &SimConfig, axes: &SweepAxes) -> Result<SweepOutcome> {
    if axes.modes.is_empty() || axes.schemes.is_empty() || axes.speeds_kmh.is_empty() || axes.seeds.is_empty() {
        return Err(SimError::Config("sweep axes must be non-empty".into()));
    }
    let points = axes.points();
    for p in &points {
        point_config(base, p).validate()?;
    }
    let results: Vec<(SweepPoint, Result<KpiReport>)> = points
        .par_iter()
        .map(|p| (*p, run(&point_config(base, p)).map(|o| o.report)))
        .collect();
    let mut outcome = SweepOutcome {
        reports: Vec::new(),
        failure: None,
    };
    for (p, r) in results {
        match r {
            Ok(rep) => outcome.reports.push(rep),
            Err(e) if outcome.failure.is_none() => outcome.failure = Some((p, e)),
            Err(_) => {}
        }
    }
    Ok(outcome)
}

/// Mean and sample standard deviation of each KPI over the seeds of one
/// (mode, scheme, speed) cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellSummary {
    pub mode: HoMode,
    pub scheme: Scheme,
    pub speed_kmh: f64,
    pub n_runs: usize,
    pub metrics: Vec<(String, f64, f64)>,
}

type GroupKey = (HoMode, Scheme, f64);

pub fn summarize(reports: &[KpiReport]) -> Vec<CellSummary> {
    let mut cells: Vec<CellSummary> = Vec::new();
    let mut groups: Vec<(GroupKey, Vec<&KpiReport>)> = Vec::new();
    for r in reports {
        let key = (r.mode, r.scheme, r.speed_kmh);
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, g)) => g.push(r),
            None => groups.push((key, vec![r])),
        }
    }
    for ((mode, scheme, speed_kmh), group) in groups {
        let names: Vec<&str> = group[0].metrics().iter().map(|(n, _)| *n).collect();
        let metrics = names
            .iter()
            .enumerate()
            .map(|(i, name)| {
                let vals: Vec<f64> = group.iter().map(|r| r.metrics()[i].1).collect();
                let (mean, std) = mean_std(&vals);
                (name.to_string(), mean, std)
            })
            .collect();
        cells.push(CellSummary {
            mode,
            scheme,
            speed_kmh,
            n_runs: group.len(),
            metrics,
        });
    }
    cells
}

pub fn mean_std(vals: &[f64]) -> (f64, f64) {
    let n = vals.len() as f64;
    if vals.is_empty() {
        return (0.0, 0.0);
    }
    let mean = vals.iter().sum::<f64>() / n;
    let var = if vals.len() > 1 {
        vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}
