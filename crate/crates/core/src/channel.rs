//! Large-scale propagation, correlated shadowing and optional fast fading.
//!
//! Received power is assembled additively in dB:
//! `rx = tx_power + tx_gain + ue_gain - path_loss - shadow + fade`.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::deployment::{tx_gain, Topology, BEAMS_PER_CELL};
use crate::geometry::{Hexagon, Point};
use crate::rng::{substream, Stream};

/// Urban-micro line-of-sight path loss in dB. Distances below 1 m are clamped.
pub fn path_loss_db(distance_3d_m: f64, carrier_ghz: f64) -> f64 {
    let d = distance_3d_m.max(1.0);
    32.4 + 21.0 * d.log10() + 20.0 * carrier_ghz.log10()
}

/// Per-cell spatially correlated log-normal shadowing.
///
/// Each cell's field is a random-phase sum of plane waves whose wavenumbers
/// are drawn from the spectrum of the exponential correlation
/// `exp(-d / d_cor)`, sampled on a regular grid and read back with bilinear
/// interpolation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShadowMap {
    pub sigma_db: f64,
    pub decorrelation_m: f64,
    pub pitch_m: f64,
    pub seed: u64,
    origin: Point,
    nx: usize,
    ny: usize,
    fields: Vec<Vec<f64>>,
}

impl ShadowMap {
    /// A map that returns 0 dB everywhere.
    pub fn flat(n_cells: usize) -> Self {
        Self {
            sigma_db: 0.0,
            decorrelation_m: 1.0,
            pitch_m: 1.0,
            seed: 0,
            origin: Point::default(),
            nx: 0,
            ny: 0,
            fields: vec![Vec::new(); n_cells],
        }
    }

    pub fn generate(
        area: &Hexagon,
        n_cells: usize,
        sigma_db: f64,
        decorrelation_m: f64,
        pitch_m: f64,
        components: usize,
        seed: u64,
    ) -> Self {
        let (lo, hi) = area.bounding_box();
        let origin = Point::new(lo.x - pitch_m, lo.y - pitch_m);
        let nx = ((hi.x - origin.x) / pitch_m).ceil() as usize + 2;
        let ny = ((hi.y - origin.y) / pitch_m).ceil() as usize + 2;

        let fields = (0..n_cells)
            .map(|cell| {
                let mut rng = substream(seed, Stream::Shadow, cell as u64);
                spectral_field(&mut rng, origin, nx, ny, pitch_m, sigma_db, decorrelation_m, components)
            })
            .collect();
        Self {
            sigma_db,
            decorrelation_m,
            pitch_m,
            seed,
            origin,
            nx,
            ny,
            fields,
        }
    }

    pub fn n_cells(&self) -> usize {
        self.fields.len()
    }

    /// Shadowing in dB for `cell` at `p`; positions off the grid are clamped to its edge.
    pub fn shadow_at(&self, cell: usize, p: &Point) -> f64 {
        let field = &self.fields[cell];
        if field.is_empty() {
            return 0.0;
        }
        let gx = ((p.x - self.origin.x) / self.pitch_m).clamp(0.0, (self.nx - 1) as f64);
        let gy = ((p.y - self.origin.y) / self.pitch_m).clamp(0.0, (self.ny - 1) as f64);
        let ix = (gx.floor() as usize).min(self.nx - 2);
        let iy = (gy.floor() as usize).min(self.ny - 2);
        let fx = gx - ix as f64;
        let fy = gy - iy as f64;
        let at = |x: usize, y: usize| field[y * self.nx + x];
        let bottom = at(ix, iy) * (1.0 - fx) + at(ix + 1, iy) * fx;
        let top = at(ix, iy + 1) * (1.0 - fx) + at(ix + 1, iy + 1) * fx;
        bottom * (1.0 - fy) + top * fy
    }
}

#[allow(clippy::too_many_arguments)]
fn spectral_field<R: Rng>(
    rng: &mut R,
    origin: Point,
    nx: usize,
    ny: usize,
    pitch: f64,
    sigma: f64,
    dcor: f64,
    components: usize,
) -> Vec<f64> {
    let mut field = vec![0.0; nx * ny];
    let amplitude = sigma * (2.0 / components as f64).sqrt();
    for _ in 0..components {
        // radial CDF of the 2-D exponential-correlation spectrum: 1 - (1 + k²L²)^(-1/2)
        let u: f64 = rng.random();
        let k = ((1.0 - u).powi(-2) - 1.0).sqrt() / dcor;
        let dir: f64 = rng.random_range(0.0..2.0 * PI);
        let phase: f64 = rng.random_range(0.0..2.0 * PI);
        let (kx, ky) = (k * dir.cos(), k * dir.sin());
        let (step_s, step_c) = (kx * pitch).sin_cos();
        for iy in 0..ny {
            let y = origin.y + iy as f64 * pitch;
            let (mut s, mut c) = (kx * origin.x + ky * y + phase).sin_cos();
            let row = &mut field[iy * nx..(iy + 1) * nx];
            for v in row.iter_mut() {
                *v += amplitude * c;
                let c_next = c * step_c - s * step_s;
                s = s * step_c + c * step_s;
                c = c_next;
            }
        }
    }
    // pin the realized grid to zero mean and the target spread
    let n = field.len() as f64;
    let mean = field.iter().sum::<f64>() / n;
    let sd = (field.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    if sd > 0.0 {
        let scale = sigma / sd;
        field.iter_mut().for_each(|v| *v = (*v - mean) * scale);
    }
    field
}

/// Rayleigh fast fading per (cell, beam) link, built as a sum of
/// sinusoids with Jakes-type Doppler spread.
#[derive(Debug, Clone)]
pub struct FadingProcess {
    sinusoids: usize,
    /// 2π·f_d·cos(α) in rad/ms, flattened per link.
    omega: Vec<f64>,
    phase: Vec<f64>,
}

impl FadingProcess {
    pub fn new<R: Rng>(rng: &mut R, n_links: usize, sinusoids: usize, doppler_hz: f64) -> Self {
        let n = n_links * sinusoids;
        let mut omega = Vec::with_capacity(n);
        let mut phase = Vec::with_capacity(n);
        for _ in 0..n {
            let alpha: f64 = rng.random_range(0.0..2.0 * PI);
            omega.push(2.0 * PI * doppler_hz * alpha.cos() / 1000.0);
            phase.push(rng.random_range(0.0..2.0 * PI));
        }
        Self { sinusoids, omega, phase }
    }

    pub fn n_links(&self) -> usize {
        self.omega.len() / self.sinusoids
    }

    /// Linear power gain of `link` at `time_ms`; unit mean over long windows.
    pub fn power_gain(&self, link: usize, time_ms: u64) -> f64 {
        let t = time_ms as f64;
        let base = link * self.sinusoids;
        let (mut re, mut im) = (0.0, 0.0);
        for m in base..base + self.sinusoids {
            let (s, c) = (self.omega[m] * t + self.phase[m]).sin_cos();
            re += c;
            im += s;
        }
        (re * re + im * im) / self.sinusoids as f64
    }

    pub fn gain_db(&self, link: usize, time_ms: u64) -> f64 {
        10.0 * self.power_gain(link, time_ms).max(1e-12).log10()
    }
}

pub fn doppler_hz(speed_mps: f64, carrier_ghz: f64) -> f64 {
    speed_mps * carrier_ghz * 1e9 / 299_792_458.0
}

pub fn link_index(cell: usize, beam0: usize) -> usize {
    cell * BEAMS_PER_CELL + beam0
}

/// Geometry and beam-independent losses between one cell and one UE position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellLink {
    pub distance_3d_m: f64,
    pub path_loss_db: f64,
    pub shadow_db: f64,
    pub theta_deg: f64,
    pub phi_deg: f64,
    /// Azimuth from the UE toward the cell site.
    pub arrival_azimuth_deg: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct Channel<'a> {
    pub topology: &'a Topology,
    pub shadow: &'a ShadowMap,
    pub carrier_ghz: f64,
    pub rx_height_m: f64,
}

impl<'a> Channel<'a> {
    pub fn cell_link(&self, cell_id: usize, ue: &Point) -> CellLink {
        let cell = &self.topology.cells[cell_id];
        let horizontal = cell.position.distance(ue);
        let dz = cell.antenna_height_m - self.rx_height_m;
        let distance_3d_m = horizontal.hypot(dz);
        let (theta_deg, phi_deg) = cell.local_direction(ue, self.rx_height_m);
        CellLink {
            distance_3d_m,
            path_loss_db: path_loss_db(distance_3d_m, self.carrier_ghz),
            shadow_db: self.shadow.shadow_at(cell_id, ue),
            theta_deg,
            phi_deg,
            arrival_azimuth_deg: ue.azimuth_to(&cell.position),
        }
    }

    /// Received power of one beam (0-based `beam0`) given precomputed link geometry.
    pub fn beam_rx_dbm(&self, cell_id: usize, link: &CellLink, beam0: usize, ue_gain_dbi: f64, fade_db: f64) -> f64 {
        let cell = &self.topology.cells[cell_id];
        let g = tx_gain(&cell.beams[beam0], (link.theta_deg, link.phi_deg));
        cell.tx_power_dbm + g + ue_gain_dbi - link.path_loss_db - link.shadow_db + fade_db
    }

    /// Received power in dBm of `beam_index` (1..=12) of `cell_id` at `ue`.
    pub fn rx_power(
        &self,
        cell_id: usize,
        beam_index: u8,
        ue: &Point,
        ue_panel_gain_dbi: f64,
        fading: Option<&FadingProcess>,
        time_ms: u64,
    ) -> f64 {
        let beam0 = usize::from(beam_index) - 1;
        let fade = fading.map_or(0.0, |f| f.gain_db(link_index(cell_id, beam0), time_ms));
        let link = self.cell_link(cell_id, ue);
        self.beam_rx_dbm(cell_id, &link, beam0, ue_panel_gain_dbi, fade)
    }
}
