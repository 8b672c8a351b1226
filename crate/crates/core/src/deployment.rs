//! Hexagonal multi-site deployment with a 12-beam grid of beams per cell.
//!
//! Each cell carries eight narrow outer beams pointed at the horizon and
//! four wider inner beams tilted down toward the site. Beam gains follow a
//! Gaussian main lobe clamped at a fixed floor below the peak.

use serde::{Deserialize, Serialize};

use crate::config::SimConfig;
use crate::error::{Result, SimError};
use crate::geometry::{wrap_deg, Hexagon, Point};

pub const CELLS_PER_SITE: usize = 3;
pub const BEAMS_PER_CELL: usize = 12;
pub const OUTER_BEAMS: usize = 8;

/// Sector boresights in degrees; any 120°-spaced triple is equivalent.
pub const SECTOR_BORESIGHTS_DEG: [f64; CELLS_PER_SITE] = [30.0, 150.0, 270.0];

/// Depth of the main lobe below peak at which the pattern is floored.
pub const LOBE_FLOOR_DB: f64 = 25.0;

const ELEMENT_GAIN_DBI: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BeamClass {
    Outer,
    Inner,
}

impl BeamClass {
    pub fn of(index: u8) -> Result<Self> {
        match index {
            1..=8 => Ok(BeamClass::Outer),
            9..=12 => Ok(BeamClass::Inner),
            _ => Err(SimError::Domain(format!("beam index {index} outside 1..=12"))),
        }
    }

    /// Panel dimensions (columns, rows) that set gain and beamwidth.
    pub fn panel(self) -> (u32, u32) {
        match self {
            BeamClass::Outer => (16, 8),
            BeamClass::Inner => (8, 4),
        }
    }

    pub fn peak_gain_dbi(self) -> f64 {
        let (cols, rows) = self.panel();
        10.0 * f64::from(cols * rows).log10() + ELEMENT_GAIN_DBI
    }

    /// (azimuth, elevation) half-power beamwidths in degrees.
    pub fn beamwidths_deg(self) -> (f64, f64) {
        match self {
            BeamClass::Outer => (6.4, 9.2),
            BeamClass::Inner => (12.8, 18.4),
        }
    }
}

/// Pointing direction `(elevation θ, azimuth φ)` of beam `b` in degrees.
///
/// θ is measured from zenith, so 90° is the horizon; φ is relative to
/// the cell boresight.
pub fn beam_direction(b: u8) -> Result<(f64, f64)> {
    match BeamClass::of(b)? {
        BeamClass::Outer => Ok((90.0, -52.5 + 15.0 * f64::from(b - 1))),
        BeamClass::Inner => Ok((97.0, -45.0 + 30.0 * f64::from(b - 9))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Beam {
    pub index: u8,
    pub elevation_deg: f64,
    pub azimuth_deg: f64,
    pub class: BeamClass,
    pub peak_gain_dbi: f64,
    pub beamwidth_az_deg: f64,
    pub beamwidth_el_deg: f64,
}

impl Beam {
    pub fn new(index: u8) -> Result<Self> {
        let class = BeamClass::of(index)?;
        let (elevation_deg, azimuth_deg) = beam_direction(index)?;
        let (beamwidth_az_deg, beamwidth_el_deg) = class.beamwidths_deg();
        Ok(Self {
            index,
            elevation_deg,
            azimuth_deg,
            class,
            peak_gain_dbi: class.peak_gain_dbi(),
            beamwidth_az_deg,
            beamwidth_el_deg,
        })
    }

    pub fn floor_gain_dbi(&self) -> f64 {
        self.peak_gain_dbi - LOBE_FLOOR_DB
    }

    /// Gain toward `(theta, phi)` given in the cell's local frame.
    pub fn gain(&self, theta_deg: f64, phi_deg: f64) -> f64 {
        let daz = wrap_deg(phi_deg - self.azimuth_deg) / self.beamwidth_az_deg;
        let del = (theta_deg - self.elevation_deg) / self.beamwidth_el_deg;
        let g = self.peak_gain_dbi - 12.0 * (daz * daz + del * del);
        g.max(self.floor_gain_dbi())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub id: usize,
    pub site_index: usize,
    pub position: Point,
    pub boresight_azimuth_deg: f64,
    pub tx_power_dbm: f64,
    pub antenna_height_m: f64,
    pub beams: Vec<Beam>,
}

impl Cell {
    /// Direction from this cell toward a UE, as `(theta, phi)` in the local frame.
    pub fn local_direction(&self, ue: &Point, rx_height_m: f64) -> (f64, f64) {
        let horizontal = self.position.distance(ue);
        let drop = self.antenna_height_m - rx_height_m;
        let theta = 90.0 + drop.atan2(horizontal).to_degrees();
        let phi = wrap_deg(self.position.azimuth_to(ue) - self.boresight_azimuth_deg);
        (theta, phi)
    }
}

/// Transmit-side gain of `beam` toward `direction` (local frame).
pub fn tx_gain(beam: &Beam, direction: (f64, f64)) -> f64 {
    beam.gain(direction.0, direction.1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub sites: Vec<Point>,
    pub cells: Vec<Cell>,
    pub inter_site_distance_m: f64,
    pub n_cells: usize,
    /// Region UEs are dropped into.
    pub drop_area: Hexagon,
    /// Region UEs are kept inside; equals the drop area plus a margin.
    pub bounds: Hexagon,
}

pub fn build_topology(cfg: &SimConfig) -> Result<Topology> {
    let d = &cfg.deployment;
    if !(d.isd_m > 0.0) {
        return Err(SimError::Config(format!("inter-site distance must be positive, got {}", d.isd_m)));
    }
    let rings = match d.n_sites {
        7 => 1.0,
        1 => 0.0,
        n => return Err(SimError::Config(format!("unsupported site count {n}"))),
    };

    let mut sites = vec![Point::new(0.0, 0.0)];
    if d.n_sites == 7 {
        sites.extend((0..6).map(|k| Point::from_polar(d.isd_m, 60.0 * k as f64)));
    }

    let beams: Vec<Beam> = (1..=BEAMS_PER_CELL as u8)
        .map(Beam::new)
        .collect::<Result<_>>()?;

    let cells: Vec<Cell> = sites
        .iter()
        .enumerate()
        .flat_map(|(s, &position)| {
            let beams = &beams;
            SECTOR_BORESIGHTS_DEG.iter().enumerate().map(move |(k, &boresight)| Cell {
                id: s * CELLS_PER_SITE + k,
                site_index: s,
                position,
                boresight_azimuth_deg: boresight,
                tx_power_dbm: cfg.radio.tx_power_dbm,
                antenna_height_m: cfg.radio.tx_height_m,
                beams: beams.clone(),
            })
        })
        .collect();

    let drop_area = Hexagon::new(d.isd_m * (rings + 0.5));
    let bounds = Hexagon::new(drop_area.apothem + d.bounds_margin_m);
    Ok(Topology {
        n_cells: cells.len(),
        sites,
        cells,
        inter_site_distance_m: d.isd_m,
        drop_area,
        bounds,
    })
}

impl Topology {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("topology serializes")
    }
}
