//! Downlink SINR, threshold-based RLF / HOF detection and outage accounting.

use crate::channel::{link_index, Channel};
use crate::config::{Scheme, SimConfig};
use crate::deployment::BEAMS_PER_CELL;
use crate::ue::{best_panel, panel_rx_gain, PanelConfig, RrcState, UeContext};

pub const THERMAL_NOISE_DBM_HZ: f64 = -174.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub bandwidth_mhz: f64,
    pub noise_figure_db: f64,
}

impl NoiseModel {
    pub fn from_config(cfg: &SimConfig) -> Self {
        Self {
            bandwidth_mhz: cfg.radio.bandwidth_mhz,
            noise_figure_db: cfg.radio.noise_figure_db,
        }
    }

    pub fn power_dbm(&self) -> f64 {
        THERMAL_NOISE_DBM_HZ + 10.0 * (self.bandwidth_mhz * 1e6).log10() + self.noise_figure_db
    }
}

pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

pub fn mw_to_dbm(mw: f64) -> f64 {
    10.0 * mw.log10()
}

/// Mean linear power of the `k` strongest beams (all of them if fewer).
pub fn mean_top_k_mw(beam_dbm: &[f64], k: usize) -> f64 {
    let mut mw: Vec<f64> = beam_dbm.iter().map(|&p| dbm_to_mw(p)).collect();
    mw.sort_by(|a, b| b.total_cmp(a));
    let k = k.min(mw.len());
    if k == 0 {
        return 0.0;
    }
    mw[..k].iter().sum::<f64>() / k as f64
}

/// `S / (N + ΣI)` in dB, all inputs in the linear mW domain except the signal.
pub fn sinr_from_powers(signal_dbm: f64, interference_mw: f64, noise_dbm: f64) -> f64 {
    signal_dbm - mw_to_dbm(dbm_to_mw(noise_dbm) + interference_mw)
}

/// SINR of `ue` if served by `beam0` of `cell`.
///
/// MPUE schemes receive data on the panel facing the serving cell; every
/// interferer arrives through that same panel. Each other cell radiates
/// its `scheduled_beams` strongest beams toward the UE at full load.
pub fn ue_sinr_db(
    channel: &Channel<'_>,
    ue: &UeContext,
    panels: &PanelConfig,
    cell: usize,
    beam0: usize,
    scheduled_beams: usize,
    noise_dbm: f64,
    time_ms: u64,
) -> f64 {
    let pos = &ue.motion.position;
    let heading = ue.motion.heading_deg;
    let serving_link = channel.cell_link(cell, pos);
    let data_panel = match ue.scheme {
        Scheme::Iso => 0,
        _ => best_panel(ue.scheme, panels, heading, serving_link.arrival_azimuth_deg).0,
    };
    let rx_gain = |arrival: f64| panel_rx_gain(ue.scheme, panels, heading, data_panel, arrival);

    let signal = channel.beam_rx_dbm(
        cell,
        &serving_link,
        beam0,
        rx_gain(serving_link.arrival_azimuth_deg),
        ue.fade_db(link_index(cell, beam0), time_ms),
    );
    let mut interference = 0.0;
    let mut beams = [0.0; BEAMS_PER_CELL];
    for other in (0..channel.topology.n_cells).filter(|&c| c != cell) {
        let link = channel.cell_link(other, pos);
        let g = rx_gain(link.arrival_azimuth_deg);
        for (b, p) in beams.iter_mut().enumerate() {
            *p = channel.beam_rx_dbm(other, &link, b, g, ue.fade_db(link_index(other, b), time_ms));
        }
        interference += mean_top_k_mw(&beams, scheduled_beams);
    }
    sinr_from_powers(signal, interference, noise_dbm)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkParams {
    pub gamma_out_db: f64,
    pub gamma_in_db: f64,
    pub t_rlf_ms: u64,
    pub t_hof_ms: u64,
    pub t_reest_ms: u64,
    pub access_ms: u64,
}

impl LinkParams {
    pub fn from_config(cfg: &SimConfig) -> Self {
        Self {
            gamma_out_db: cfg.link.gamma_out_db,
            gamma_in_db: cfg.link.gamma_in_db,
            t_rlf_ms: cfg.link.t_rlf_ms,
            t_hof_ms: cfg.link.t_hof_ms,
            t_reest_ms: cfg.link.t_reest_ms,
            access_ms: cfg.handover.access_ms,
        }
    }
}

impl Default for LinkParams {
    fn default() -> Self {
        Self::from_config(&SimConfig::default())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AccessOutcome {
    Continue,
    Success,
    Failure,
}

/// Per-UE radio link supervision state.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SinrState {
    pub gamma_db: f64,
    /// Time spent out of sync since the RLF timer started.
    pub rlf_timer_ms: Option<u64>,
    /// Consecutive time the access target has been below `γ_out`.
    pub hof_timer_ms: u64,
    pub outage_ms: u64,
}

impl SinrState {
    /// Serving-link supervision for one tick. Returns true when RLF is declared.
    ///
    /// The timer starts below `γ_out` and stops only above `γ_in`; in the
    /// band between the two it keeps its current state.
    pub fn rlf_step(&mut self, gamma_db: f64, dt_ms: u64, p: &LinkParams) -> bool {
        self.gamma_db = gamma_db;
        self.rlf_timer_ms = if gamma_db < p.gamma_out_db {
            Some(self.rlf_timer_ms.unwrap_or(0) + dt_ms)
        } else if gamma_db > p.gamma_in_db {
            None
        } else {
            self.rlf_timer_ms.map(|t| t + dt_ms)
        };
        match self.rlf_timer_ms {
            Some(t) if t >= p.t_rlf_ms => {
                self.rlf_timer_ms = None;
                true
            }
            _ => false,
        }
    }

    /// Random-access supervision toward the target cell for one tick.
    /// `elapsed_ms` is the time since the execution started.
    pub fn access_step(&mut self, gamma_target_db: f64, elapsed_ms: u64, dt_ms: u64, p: &LinkParams) -> AccessOutcome {
        self.gamma_db = gamma_target_db;
        if gamma_target_db < p.gamma_out_db {
            self.hof_timer_ms += dt_ms;
        } else {
            self.hof_timer_ms = 0;
        }
        if self.hof_timer_ms >= p.t_hof_ms {
            self.hof_timer_ms = 0;
            AccessOutcome::Failure
        } else if elapsed_ms >= p.access_ms && gamma_target_db >= p.gamma_out_db {
            self.hof_timer_ms = 0;
            AccessOutcome::Success
        } else {
            AccessOutcome::Continue
        }
    }

    /// Clears supervision timers, e.g. after a state change.
    pub fn reset_timers(&mut self) {
        self.rlf_timer_ms = None;
        self.hof_timer_ms = 0;
    }

    /// Adds `dt_ms` of outage when the UE cannot communicate.
    pub fn outage_step(&mut self, gamma_db: f64, rrc: RrcState, dt_ms: u64, p: &LinkParams) -> bool {
        let out = is_outage(gamma_db, rrc, p);
        if out {
            self.outage_ms += dt_ms;
        }
        out
    }
}

pub fn is_outage(gamma_db: f64, rrc: RrcState, p: &LinkParams) -> bool {
    match rrc {
        RrcState::Connected => gamma_db < p.gamma_out_db,
        RrcState::Accessing { .. } | RrcState::Reestablishing { .. } => true,
    }
}
