//! Run configuration. Every tunable of a run lives here; nothing else in
//! the crate carries its own defaults.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Result, SimError};

/// Handover mechanism under test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HoMode {
    Cho,
    Fcho,
}

impl HoMode {
    pub fn as_str(self) -> &'static str {
        match self {
            HoMode::Cho => "cho",
            HoMode::Fcho => "fcho",
        }
    }
}

impl std::str::FromStr for HoMode {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cho" => Ok(HoMode::Cho),
            "fcho" => Ok(HoMode::Fcho),
            other => Err(SimError::Config(format!("unknown handover mode '{other}'"))),
        }
    }
}

/// UE antenna architecture and measurement scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Scheme {
    #[serde(rename = "iso")]
    Iso,
    #[serde(rename = "mpue-a3")]
    MpueA3,
    #[serde(rename = "mpue-a1")]
    MpueA1,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Iso => "iso",
            Scheme::MpueA3 => "mpue-a3",
            Scheme::MpueA1 => "mpue-a1",
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "iso" | "isotropic" => Ok(Scheme::Iso),
            "mpue-a3" | "a3" => Ok(Scheme::MpueA3),
            "mpue-a1" | "a1" => Ok(Scheme::MpueA1),
            other => Err(SimError::Config(format!("unknown UE scheme '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub duration_ms: u64,
    pub dt_ms: u64,
    pub ssb_period_ms: u64,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            duration_ms: 60_000,
            dt_ms: 10,
            ssb_period_ms: 20,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeploymentConfig {
    /// 7 for the standard hexagon, 1 for an isolated site.
    pub n_sites: usize,
    pub isd_m: f64,
    /// Margin added around the drop hexagon before UEs bounce.
    pub bounds_margin_m: f64,
}

impl Default for DeploymentConfig {
    fn default() -> Self {
        Self {
            n_sites: 7,
            isd_m: 200.0,
            bounds_margin_m: 50.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadioConfig {
    pub carrier_ghz: f64,
    pub bandwidth_mhz: f64,
    pub tx_power_dbm: f64,
    pub tx_height_m: f64,
    pub rx_height_m: f64,
    pub noise_figure_db: f64,
}

impl Default for RadioConfig {
    fn default() -> Self {
        Self {
            carrier_ghz: 28.0,
            bandwidth_mhz: 100.0,
            tx_power_dbm: 40.0,
            tx_height_m: 10.0,
            rx_height_m: 1.5,
            noise_figure_db: 9.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelConfig {
    pub shadowing: bool,
    pub shadow_sigma_db: f64,
    pub shadow_decorrelation_m: f64,
    pub shadow_grid_pitch_m: f64,
    /// Number of spectral components summed per shadow field.
    pub shadow_components: usize,
    pub fading: bool,
    /// Sinusoids per (cell, beam) fading process.
    pub fading_sinusoids: usize,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            shadowing: true,
            shadow_sigma_db: 4.0,
            shadow_decorrelation_m: 25.0,
            shadow_grid_pitch_m: 5.0,
            shadow_components: 256,
            fading: false,
            fading_sinusoids: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UeConfig {
    pub n_ue: usize,
    pub speed_kmh: f64,
    pub scheme: Scheme,
    pub panel_peak_gain_dbi: f64,
    pub panel_floor_dbi: f64,
    pub l3_coefficient: f64,
}

impl Default for UeConfig {
    fn default() -> Self {
        Self {
            n_ue: 420,
            speed_kmh: 60.0,
            scheme: Scheme::Iso,
            panel_peak_gain_dbi: 5.0,
            panel_floor_dbi: -10.0,
            l3_coefficient: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HandoverConfig {
    pub mode: HoMode,
    /// Condition offsets in dB.
    pub o_prep: f64,
    pub o_exec: f64,
    /// Must exceed `o_prep`; the difference is the release hysteresis.
    pub o_rel: f64,
    pub o_rep: f64,
    /// Monitoring time shared by the preparation, execution, release and replace conditions.
    pub window_ms: u64,
    pub max_prepared: usize,
    pub prep_latency_ms: u64,
    pub access_ms: u64,
}

impl Default for HandoverConfig {
    fn default() -> Self {
        Self {
            mode: HoMode::Cho,
            o_prep: 10.0,
            o_exec: 3.0,
            o_rel: 13.0,
            o_rep: 3.0,
            window_ms: 80,
            max_prepared: 4,
            prep_latency_ms: 40,
            access_ms: 40,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkConfig {
    pub gamma_out_db: f64,
    pub gamma_in_db: f64,
    pub t_rlf_ms: u64,
    pub t_hof_ms: u64,
    pub t_reest_ms: u64,
    pub scheduled_beams: usize,
}

impl Default for LinkConfig {
    fn default() -> Self {
        Self {
            gamma_out_db: -8.0,
            gamma_in_db: -6.0,
            t_rlf_ms: 1000,
            t_hof_ms: 200,
            t_reest_ms: 200,
            scheduled_beams: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KpiConfig {
    pub t_fh_ms: u64,
    /// Leading interval excluded from every KPI.
    pub warmup_ms: u64,
}

impl Default for KpiConfig {
    fn default() -> Self {
        Self {
            t_fh_ms: 1000,
            warmup_ms: 2000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub run: RunConfig,
    pub deployment: DeploymentConfig,
    pub radio: RadioConfig,
    pub channel: ChannelConfig,
    pub ue: UeConfig,
    pub handover: HandoverConfig,
    pub link: LinkConfig,
    pub kpi: KpiConfig,
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(SimError::Config(msg()))
    }
}

impl SimConfig {
    /// Desk-scale variant: 42 UEs instead of 420, everything else unchanged.
    pub fn desk() -> Self {
        let mut cfg = Self::default();
        cfg.ue.n_ue = 42;
        cfg
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| SimError::Config(e.to_string()))
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Applies a dotted-key override such as `handover.o_exec=3`.
    ///
    /// The value is parsed as JSON when possible and as a bare string otherwise.
    pub fn with_override(&self, key: &str, value: &str) -> Result<Self> {
        let mut tree = serde_json::to_value(self).expect("config serializes");
        let mut node = &mut tree;
        let mut parts = key.split('.').peekable();
        while let Some(part) = parts.next() {
            let child = node
                .as_object_mut()
                .and_then(|obj| obj.get_mut(part))
                .ok_or_else(|| SimError::Config(format!("unknown config key '{key}'")))?;
            if parts.peek().is_none() {
                *child = serde_json::from_str(value)
                    .unwrap_or_else(|_| serde_json::Value::String(value.to_string()));
                break;
            }
            node = child;
        }
        serde_json::from_value(tree).map_err(|e| SimError::Config(format!("{key}={value}: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        let r = &self.run;
        check(r.dt_ms > 0, || "run.dt_ms must be positive".into())?;
        check(r.ssb_period_ms > 0 && r.ssb_period_ms.is_multiple_of(r.dt_ms), || {
            format!("run.ssb_period_ms ({}) must be a positive multiple of run.dt_ms ({})", r.ssb_period_ms, r.dt_ms)
        })?;
        check(r.duration_ms > 0 && r.duration_ms.is_multiple_of(r.dt_ms), || {
            "run.duration_ms must be a positive multiple of run.dt_ms".into()
        })?;
        check(self.kpi.warmup_ms < r.duration_ms, || "kpi.warmup_ms must be shorter than the run".into())?;

        let d = &self.deployment;
        check(d.isd_m > 0.0 && d.isd_m.is_finite(), || "deployment.isd_m must be positive".into())?;
        check(d.n_sites == 7 || d.n_sites == 1, || {
            format!("deployment.n_sites must be 7 (hexagon) or 1, got {}", d.n_sites)
        })?;
        check(d.bounds_margin_m >= 0.0, || "deployment.bounds_margin_m must be non-negative".into())?;

        let radio = &self.radio;
        check(radio.carrier_ghz > 0.0, || "radio.carrier_ghz must be positive".into())?;
        check(radio.bandwidth_mhz > 0.0, || "radio.bandwidth_mhz must be positive".into())?;

        let c = &self.channel;
        check(c.shadow_sigma_db >= 0.0, || "channel.shadow_sigma_db must be non-negative".into())?;
        check(c.shadow_decorrelation_m > 0.0, || "channel.shadow_decorrelation_m must be positive".into())?;
        check(c.shadow_grid_pitch_m > 0.0, || "channel.shadow_grid_pitch_m must be positive".into())?;
        check(c.shadow_components > 0, || "channel.shadow_components must be positive".into())?;
        check(c.fading_sinusoids > 0, || "channel.fading_sinusoids must be positive".into())?;

        let u = &self.ue;
        check(u.n_ue > 0, || "ue.n_ue must be positive".into())?;
        check(u.speed_kmh >= 0.0 && u.speed_kmh.is_finite(), || "ue.speed_kmh must be non-negative".into())?;
        check(u.l3_coefficient > 0.0 && u.l3_coefficient <= 1.0, || {
            "ue.l3_coefficient must lie in (0, 1]".into()
        })?;

        let h = &self.handover;
        check(h.o_rel - h.o_prep > 0.0, || {
            format!(
                "release offset ({}) must exceed preparation offset ({}) by a positive hysteresis",
                h.o_rel, h.o_prep
            )
        })?;
        check(h.window_ms > 0 && h.window_ms.is_multiple_of(r.ssb_period_ms), || {
            format!("handover.window_ms ({}) must be a positive multiple of the SSB period", h.window_ms)
        })?;
        check(h.max_prepared > 0, || "handover.max_prepared must be positive".into())?;

        let l = &self.link;
        check(l.gamma_in_db >= l.gamma_out_db, || "link.gamma_in_db must not be below link.gamma_out_db".into())?;
        check(l.scheduled_beams > 0, || "link.scheduled_beams must be positive".into())?;
        Ok(())
    }

    pub fn o_hys_db(&self) -> f64 {
        self.handover.o_rel - self.handover.o_prep
    }

    pub fn window_instants(&self) -> u32 {
        (self.handover.window_ms / self.run.ssb_period_ms) as u32
    }

    pub fn n_ticks(&self) -> u64 {
        self.run.duration_ms / self.run.dt_ms
    }

    pub fn speed_mps(&self) -> f64 {
        self.ue.speed_kmh / 3.6
    }

    /// Short stable digest of the canonical JSON form.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        hex::encode(&digest[..8])
    }
}
