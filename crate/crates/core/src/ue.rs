//! UE motion, antenna panels, RSRP acquisition and L1/L3 filtering.

use rand::Rng;

use crate::channel::{link_index, Channel, FadingProcess};
use crate::config::{Scheme, UeConfig};
use crate::deployment::BEAMS_PER_CELL;
use crate::error::{Result, SimError};
use crate::geometry::{wrap_deg, Hexagon, Point};

pub const N_PANELS: usize = 3;

/// Panel pattern: `peak - 12 (δ / 90°)²`, floored.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelConfig {
    pub offsets_deg: [f64; N_PANELS],
    pub peak_gain_dbi: f64,
    pub floor_dbi: f64,
    pub pattern_width_deg: f64,
}

impl PanelConfig {
    pub fn from_config(cfg: &UeConfig) -> Self {
        Self {
            offsets_deg: [0.0, 120.0, -120.0],
            peak_gain_dbi: cfg.panel_peak_gain_dbi,
            floor_dbi: cfg.panel_floor_dbi,
            pattern_width_deg: 90.0,
        }
    }

    pub fn gain(&self, offset_deg: f64) -> f64 {
        let r = wrap_deg(offset_deg) / self.pattern_width_deg;
        (self.peak_gain_dbi - 12.0 * r * r).max(self.floor_dbi)
    }
}

impl Default for PanelConfig {
    fn default() -> Self {
        Self::from_config(&UeConfig::default())
    }
}

/// Receive gain of `panel` for a wave arriving from `arrival_azimuth_deg`.
/// The isotropic scheme has a flat 0 dBi pattern.
pub fn panel_rx_gain(scheme: Scheme, panels: &PanelConfig, heading_deg: f64, panel: usize, arrival_azimuth_deg: f64) -> f64 {
    match scheme {
        Scheme::Iso => 0.0,
        Scheme::MpueA3 | Scheme::MpueA1 => {
            panels.gain(arrival_azimuth_deg - heading_deg - panels.offsets_deg[panel])
        }
    }
}

/// Index and gain of the panel best facing `arrival_azimuth_deg`.
pub fn best_panel(scheme: Scheme, panels: &PanelConfig, heading_deg: f64, arrival_azimuth_deg: f64) -> (usize, f64) {
    (0..N_PANELS)
        .map(|p| (p, panel_rx_gain(scheme, panels, heading_deg, p, arrival_azimuth_deg)))
        .fold((0, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Motion {
    pub position: Point,
    pub heading_deg: f64,
    pub speed_mps: f64,
}

impl Motion {
    pub fn displacement(&self, dt_ms: u64) -> Point {
        let step = self.speed_mps * dt_ms as f64 / 1000.0;
        Point::from_polar(step, self.heading_deg)
    }
}

const MAX_BOUNCE_DRAWS: usize = 32;

/// Advances the UE along its heading. When the step would leave `bounds`, a
/// new heading pointing back inside across the crossed edge is drawn.
/// Returns true if a bounce occurred.
pub fn step_motion<R: Rng + ?Sized>(motion: &mut Motion, dt_ms: u64, bounds: &Hexagon, rng: &mut R) -> bool {
    let d = motion.displacement(dt_ms);
    let next = Point::new(motion.position.x + d.x, motion.position.y + d.y);
    let Some(outward) = bounds.violated_edge(&next) else {
        motion.position = next;
        return false;
    };
    for _ in 0..MAX_BOUNCE_DRAWS {
        motion.heading_deg = wrap_deg(outward + 180.0 + rng.random_range(-90.0..90.0));
        let d = motion.displacement(dt_ms);
        let candidate = Point::new(motion.position.x + d.x, motion.position.y + d.y);
        if bounds.contains(&candidate) {
            motion.position = candidate;
            return true;
        }
    }
    true
}

/// Radio resource control state of a UE.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RrcState {
    Connected,
    /// Random access toward `target`, started at `since_ms`.
    Accessing { target: usize, since_ms: u64 },
    /// Connection reestablishment toward `target`, finishing at `until_ms`.
    Reestablishing { target: usize, until_ms: u64 },
}

/// Raw RSRP sample of one (cell, beam) at an SSB instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkSample {
    pub cell_id: usize,
    pub beam_index: u8,
    pub rx_power_dbm: f64,
    pub time_ms: u64,
}

/// One step of the L3 exponential filter; the first value initializes it.
pub fn l3_step(previous: Option<f64>, l1_quality: f64, coefficient: f64) -> f64 {
    match previous {
        Some(prev) => (1.0 - coefficient) * prev + coefficient * l1_quality,
        None => l1_quality,
    }
}

/// L1 moving average per beam, strongest-beam consolidation and the L3
/// exponential filter per cell.
#[derive(Debug, Clone)]
pub struct Filters {
    coefficient: f64,
    last_sample: Vec<Option<f64>>,
    beam_l1: Vec<Option<f64>>,
    cell_l1: Vec<Option<f64>>,
    l3: Vec<Option<f64>>,
}

impl Filters {
    pub fn new(n_cells: usize, coefficient: f64) -> Self {
        Self {
            coefficient,
            last_sample: vec![None; n_cells * BEAMS_PER_CELL],
            beam_l1: vec![None; n_cells * BEAMS_PER_CELL],
            cell_l1: vec![None; n_cells],
            l3: vec![None; n_cells],
        }
    }

    pub fn update(&mut self, samples: &[LinkSample]) {
        let mut touched = vec![false; self.l3.len()];
        for s in samples {
            let k = link_index(s.cell_id, usize::from(s.beam_index) - 1);
            let l1 = match self.last_sample[k] {
                Some(prev) => 0.5 * (prev + s.rx_power_dbm),
                None => s.rx_power_dbm,
            };
            self.last_sample[k] = Some(s.rx_power_dbm);
            self.beam_l1[k] = Some(l1);
            touched[s.cell_id] = true;
        }
        for (cell, _) in touched.iter().enumerate().filter(|(_, t)| **t) {
            let q = self.beam_l1[cell * BEAMS_PER_CELL..(cell + 1) * BEAMS_PER_CELL]
                .iter()
                .flatten()
                .copied()
                .fold(f64::NEG_INFINITY, f64::max);
            self.cell_l1[cell] = Some(q);
            self.l3[cell] = Some(l3_step(self.l3[cell], q, self.coefficient));
        }
    }

    pub fn l3(&self) -> &[Option<f64>] {
        &self.l3
    }

    pub fn cell_l1(&self, cell: usize) -> Option<f64> {
        self.cell_l1[cell]
    }

    pub fn beam_l1(&self, cell: usize, beam0: usize) -> Option<f64> {
        self.beam_l1[link_index(cell, beam0)]
    }

    /// 0-based index of the strongest L1 beam of `cell`.
    pub fn best_beam(&self, cell: usize) -> Option<usize> {
        (0..BEAMS_PER_CELL)
            .filter_map(|b| self.beam_l1(cell, b).map(|v| (b, v)))
            .fold(None, |best: Option<(usize, f64)>, cur| match best {
                Some(b) if b.1 >= cur.1 => Some(b),
                _ => Some(cur),
            })
            .map(|(b, _)| b)
    }

    /// Cell with the highest L3 value; ties resolve to the lower id.
    pub fn strongest_cell(&self) -> Option<usize> {
        self.l3
            .iter()
            .enumerate()
            .filter_map(|(c, v)| v.map(|v| (c, v)))
            .fold(None, |best: Option<(usize, f64)>, cur| match best {
                Some(b) if b.1 >= cur.1 => Some(b),
                _ => Some(cur),
            })
            .map(|(c, _)| c)
    }
}

#[derive(Debug, Clone)]
pub struct UeContext {
    pub id: usize,
    pub motion: Motion,
    pub scheme: Scheme,
    pub rrc: RrcState,
    /// Panel measured at the next SSB instant (MPUE-A1 only).
    pub active_panel: usize,
    /// Last reading through each panel, per (cell, beam). MPUE-A1 only.
    pub panel_readings: Vec<[Option<f64>; N_PANELS]>,
    pub filters: Filters,
    pub fading: Option<FadingProcess>,
}

impl UeContext {
    pub fn new(id: usize, motion: Motion, scheme: Scheme, n_cells: usize, l3_coefficient: f64) -> Self {
        Self {
            id,
            motion,
            scheme,
            rrc: RrcState::Connected,
            active_panel: 0,
            panel_readings: if scheme == Scheme::MpueA1 {
                vec![[None; N_PANELS]; n_cells * BEAMS_PER_CELL]
            } else {
                Vec::new()
            },
            filters: Filters::new(n_cells, l3_coefficient),
            fading: None,
        }
    }

    pub fn fade_db(&self, link: usize, time_ms: u64) -> f64 {
        self.fading.as_ref().map_or(0.0, |f| f.gain_db(link, time_ms))
    }

    /// Takes one raw RSRP sample per (cell, beam) according to the UE scheme.
    ///
    /// MPUE-A3 reads all panels and keeps the best; MPUE-A1 reads only the
    /// active panel, reports the best of the stored (possibly outdated)
    /// per-panel readings, then advances the active panel round-robin.
    pub fn measure(
        &mut self,
        channel: &Channel<'_>,
        panels: &PanelConfig,
        time_ms: u64,
        ssb_period_ms: u64,
    ) -> Result<Vec<LinkSample>> {
        if !time_ms.is_multiple_of(ssb_period_ms) {
            return Err(SimError::OffSsbGrid { time_ms, period_ms: ssb_period_ms });
        }
        let n_cells = channel.topology.n_cells;
        let mut samples = Vec::with_capacity(n_cells * BEAMS_PER_CELL);
        let heading = self.motion.heading_deg;
        for cell in 0..n_cells {
            let link = channel.cell_link(cell, &self.motion.position);
            let panel_gain = match self.scheme {
                Scheme::Iso => 0.0,
                Scheme::MpueA3 => best_panel(self.scheme, panels, heading, link.arrival_azimuth_deg).1,
                Scheme::MpueA1 => panel_rx_gain(self.scheme, panels, heading, self.active_panel, link.arrival_azimuth_deg),
            };
            for beam0 in 0..BEAMS_PER_CELL {
                let k = link_index(cell, beam0);
                let fade = self.fade_db(k, time_ms);
                let rx = channel.beam_rx_dbm(cell, &link, beam0, panel_gain, fade);
                let reported = if self.scheme == Scheme::MpueA1 {
                    let readings = &mut self.panel_readings[k];
                    readings[self.active_panel] = Some(rx);
                    readings.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max)
                } else {
                    rx
                };
                samples.push(LinkSample {
                    cell_id: cell,
                    beam_index: beam0 as u8 + 1,
                    rx_power_dbm: reported,
                    time_ms,
                });
            }
        }
        if self.scheme == Scheme::MpueA1 {
            self.active_panel = (self.active_panel + 1) % N_PANELS;
        }
        Ok(samples)
    }

    pub fn update_filters(&mut self, samples: &[LinkSample]) {
        self.filters.update(samples);
    }
}
