//! Experiment configuration (TOML).

use std::collections::HashSet;
use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::{ChannelModel, GainNormalization};
use crate::graphene::{build_codebook, Amplitudes, PhaseCodebook, CALIBRATED_MAX_PHASE_DEG, CALIBRATED_MEAN_AMPLITUDE, MAX_CODEBOOK_BITS};
use crate::optimizer::{exhaustive_grid_size, OptimizerSettings, EXHAUSTIVE_LIMIT};
use crate::{Error, Result};

/// Beamforming schemes, in the order rows are reported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Agd,
    Cgd,
    Random,
    NoRis,
    Exhaustive,
}

impl Scheme {
    pub const ALL: [Scheme; 5] = [Scheme::Agd, Scheme::Cgd, Scheme::Random, Scheme::NoRis, Scheme::Exhaustive];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Agd => "agd",
            Scheme::Cgd => "cgd",
            Scheme::Random => "random",
            Scheme::NoRis => "no_ris",
            Scheme::Exhaustive => "exhaustive",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    #[default]
    None,
    VsSnr,
    VsNris,
    VsPhimax,
    VsBits,
}

impl SweepKind {
    pub fn name(self) -> &'static str {
        match self {
            SweepKind::None => "none",
            SweepKind::VsSnr => "vs_snr",
            SweepKind::VsNris => "vs_nris",
            SweepKind::VsPhimax => "vs_phimax",
            SweepKind::VsBits => "vs_bits",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        [Self::None, Self::VsSnr, Self::VsNris, Self::VsPhimax, Self::VsBits]
            .into_iter()
            .find(|k| k.name() == s)
    }

    /// Whether the sweep takes its points from `sweep.values`.
    pub fn uses_values(self) -> bool {
        matches!(self, SweepKind::VsNris | SweepKind::VsPhimax | SweepKind::VsBits)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    pub n_bs: usize,
    pub n_ris: usize,
    pub n_ms: usize,
    pub m_bs: usize,
    pub m_ms: usize,
    pub n_streams: usize,
    pub carrier_freq_hz: f64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            n_bs: 64,
            n_ris: 64,
            n_ms: 16,
            m_bs: 6,
            m_ms: 4,
            n_streams: 4,
            carrier_freq_hz: 1.6e12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryConfig {
    pub bs_ris_m: f64,
    pub ris_ms_m: f64,
    pub bs_ms_m: f64,
    pub kappa_per_m: f64,
    pub xi: f64,
    pub n_nlos: usize,
    pub n_nlos_direct: usize,
    pub ris_spacing_m: f64,
    pub nlos_excess_min_m: f64,
    pub nlos_excess_max_m: f64,
    pub nlos_split_min: f64,
    pub nlos_split_max: f64,
    pub normalization: GainNormalization,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        let m = ChannelModel::default();
        Self {
            bs_ris_m: m.bs_ris_m,
            ris_ms_m: m.ris_ms_m,
            bs_ms_m: m.bs_ms_m,
            kappa_per_m: m.kappa_per_m,
            xi: m.xi,
            n_nlos: m.n_nlos,
            n_nlos_direct: m.n_nlos_direct,
            ris_spacing_m: m.ris_spacing_m,
            nlos_excess_min_m: m.nlos_excess_range_m.0,
            nlos_excess_max_m: m.nlos_excess_range_m.1,
            nlos_split_min: m.nlos_split_range.0,
            nlos_split_max: m.nlos_split_range.1,
            normalization: GainNormalization::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CodebookConfig {
    pub max_phase_deg: f64,
    pub bits: u32,
    pub mean_amplitude: f64,
    /// Per-phase amplitudes; overrides `mean_amplitude` when present.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub amplitudes: Option<Vec<f64>>,
}

impl Default for CodebookConfig {
    fn default() -> Self {
        Self {
            max_phase_deg: CALIBRATED_MAX_PHASE_DEG,
            bits: 2,
            mean_amplitude: CALIBRATED_MEAN_AMPLITUDE,
            amplitudes: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub n_realizations: usize,
    pub master_seed: u64,
    pub schemes: Vec<Scheme>,
    pub snr_grid_db: Vec<f64>,
    pub random_draws: usize,
    /// Realizations (separate seed streams) used to pick the C-GD step;
    /// 0 uses `optimizer.fixed_step` as given.
    pub cgd_calibration_realizations: usize,
    pub cgd_step_grid: Vec<f64>,
    /// Record wall time per scheme. Off by default because timings make the
    /// CSV non-reproducible.
    pub timing: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            n_realizations: 50,
            master_seed: 1,
            schemes: vec![Scheme::Agd, Scheme::Cgd, Scheme::Random, Scheme::NoRis],
            snr_grid_db: vec![10.0],
            random_draws: 1,
            cgd_calibration_realizations: 10,
            cgd_step_grid: vec![1e-4, 1e-3, 1e-2, 1e-1, 1.0],
            timing: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub kind: SweepKind,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub system: SystemConfig,
    pub geometry: GeometryConfig,
    pub codebook: CodebookConfig,
    pub run: RunConfig,
    pub sweep: SweepConfig,
    pub optimizer: OptimizerSettings,
}

/// One sweep point with everything the runner needs.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub value: f64,
    pub model: ChannelModel,
    pub codebook: PhaseCodebook,
}

fn positive(key: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(key, format!("must be finite and > 0, got {v}")))
    }
}

fn ordered_range(key: &str, lo: f64, hi: f64) -> Result<()> {
    if lo.is_finite() && hi.is_finite() && lo <= hi {
        Ok(())
    } else {
        Err(Error::config(key, format!("range [{lo}, {hi}] is not ordered")))
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> std::result::Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.system;
        for (key, v) in [("system.n_bs", s.n_bs), ("system.n_ris", s.n_ris), ("system.n_ms", s.n_ms), ("system.n_streams", s.n_streams)] {
            if v == 0 {
                return Err(Error::config(key, "must be >= 1"));
            }
        }
        let chain = |key: &str, rel: &str, big: usize, small: usize| {
            if big >= small {
                Ok(())
            } else {
                Err(Error::config(key, format!("constraint {rel} violated ({big} < {small})")))
            }
        };
        chain("system.m_bs", "n_bs ≥ m_bs", s.n_bs, s.m_bs)?;
        chain("system.n_streams", "m_bs ≥ n_streams", s.m_bs, s.n_streams)?;
        chain("system.m_ms", "n_ms ≥ m_ms", s.n_ms, s.m_ms)?;
        chain("system.n_streams", "m_ms ≥ n_streams", s.m_ms, s.n_streams)?;
        positive("system.carrier_freq_hz", s.carrier_freq_hz)?;

        let g = &self.geometry;
        positive("geometry.bs_ris_m", g.bs_ris_m)?;
        positive("geometry.ris_ms_m", g.ris_ms_m)?;
        positive("geometry.bs_ms_m", g.bs_ms_m)?;
        positive("geometry.ris_spacing_m", g.ris_spacing_m)?;
        if !(g.kappa_per_m >= 0.0 && g.kappa_per_m.is_finite()) {
            return Err(Error::config("geometry.kappa_per_m", "must be finite and >= 0"));
        }
        if !(g.xi >= 0.0 && g.xi <= 1.0) {
            return Err(Error::config("geometry.xi", "must lie in [0, 1]"));
        }
        if g.n_nlos_direct == 0 {
            return Err(Error::config("geometry.n_nlos_direct", "the blocked direct hop needs at least one reflected path"));
        }
        ordered_range("geometry.nlos_excess_min_m", g.nlos_excess_min_m, g.nlos_excess_max_m)?;
        if g.nlos_excess_min_m < 0.0 {
            return Err(Error::config("geometry.nlos_excess_min_m", "must be >= 0"));
        }
        ordered_range("geometry.nlos_split_min", g.nlos_split_min, g.nlos_split_max)?;
        if !(g.nlos_split_min >= 0.0 && g.nlos_split_max <= 1.0) {
            return Err(Error::config("geometry.nlos_split_min", "split fractions must lie in [0, 1]"));
        }

        let r = &self.run;
        if r.n_realizations == 0 {
            return Err(Error::config("run.n_realizations", "must be >= 1"));
        }
        if r.schemes.is_empty() {
            return Err(Error::config("run.schemes", "at least one scheme is required"));
        }
        let mut seen = HashSet::new();
        for sch in &r.schemes {
            if !seen.insert(sch) {
                return Err(Error::config("run.schemes", format!("scheme `{}` listed twice", sch.name())));
            }
        }
        if r.snr_grid_db.is_empty() {
            return Err(Error::config("run.snr_grid_db", "grid is empty"));
        }
        if r.snr_grid_db.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("run.snr_grid_db", "values must be finite"));
        }
        if r.snr_grid_db.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config("run.snr_grid_db", "values must be strictly increasing"));
        }
        if r.random_draws == 0 {
            return Err(Error::config("run.random_draws", "must be >= 1"));
        }
        if r.cgd_step_grid.is_empty() || r.cgd_step_grid.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::config("run.cgd_step_grid", "needs at least one finite value > 0"));
        }

        self.optimizer.validate()?;

        let sw = &self.sweep;
        if sw.kind.uses_values() && sw.values.is_empty() {
            return Err(Error::config("sweep.values", format!("sweep `{}` needs at least one value", sw.kind.name())));
        }
        if !sw.kind.uses_values() && !sw.values.is_empty() {
            return Err(Error::config("sweep.values", format!("sweep `{}` takes no values", sw.kind.name())));
        }
        for p in self.sweep_points()? {
            if r.schemes.contains(&Scheme::Exhaustive) {
                let size = exhaustive_grid_size(p.codebook.len(), p.model.n_ris);
                if size > EXHAUSTIVE_LIMIT {
                    return Err(Error::config(
                        "run.schemes",
                        format!("exhaustive search needs (2^b)^n_ris = {size:.3e} ≤ 1e6 grid points"),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn snr_grid_db(&self) -> &[f64] {
        &self.run.snr_grid_db
    }

    fn channel_model(&self, n_ris: usize) -> ChannelModel {
        let (s, g) = (&self.system, &self.geometry);
        ChannelModel {
            n_bs: s.n_bs,
            n_ris,
            n_ms: s.n_ms,
            carrier_freq_hz: s.carrier_freq_hz,
            bs_ris_m: g.bs_ris_m,
            ris_ms_m: g.ris_ms_m,
            bs_ms_m: g.bs_ms_m,
            kappa_per_m: g.kappa_per_m,
            xi: g.xi,
            n_nlos: g.n_nlos,
            n_nlos_direct: g.n_nlos_direct,
            ris_spacing_m: g.ris_spacing_m,
            nlos_excess_range_m: (g.nlos_excess_min_m, g.nlos_excess_max_m),
            nlos_split_range: (g.nlos_split_min, g.nlos_split_max),
            azimuth_range_rad: (0.0, 2.0 * PI),
            elevation_range_rad: (0.0, PI),
        }
    }

    fn codebook(&self, max_phase_deg: f64, bits: u32) -> Result<PhaseCodebook> {
        let amps = match &self.codebook.amplitudes {
            Some(list) => Amplitudes::PerPhase(list.clone()),
            None => Amplitudes::Uniform(self.codebook.mean_amplitude),
        };
        build_codebook(max_phase_deg.to_radians(), bits, amps)
    }

    /// Expands the sweep into points. `vs_snr` and `none` yield a single
    /// point; SNR is always swept inside each point.
    pub fn sweep_points(&self) -> Result<Vec<SweepPoint>> {
        let base_bits = self.codebook.bits;
        let base_phi = self.codebook.max_phase_deg;
        let point = |value: f64, n_ris: usize, phi: f64, bits: u32| -> Result<SweepPoint> {
            Ok(SweepPoint {
                value,
                model: self.channel_model(n_ris),
                codebook: self.codebook(phi, bits)?,
            })
        };
        match self.sweep.kind {
            SweepKind::None | SweepKind::VsSnr => Ok(vec![point(0.0, self.system.n_ris, base_phi, base_bits)?]),
            SweepKind::VsNris => self
                .sweep
                .values
                .iter()
                .map(|&v| {
                    if !(v >= 1.0 && v.fract() == 0.0 && v <= 1e6) {
                        return Err(Error::config("sweep.values", format!("n_ris value {v} is not a positive integer")));
                    }
                    point(v, v as usize, base_phi, base_bits)
                })
                .collect(),
            SweepKind::VsPhimax => self
                .sweep
                .values
                .iter()
                .map(|&v| point(v, self.system.n_ris, v, base_bits))
                .collect(),
            SweepKind::VsBits => self
                .sweep
                .values
                .iter()
                .map(|&v| {
                    if !(v >= 1.0 && v.fract() == 0.0 && v <= MAX_CODEBOOK_BITS as f64) {
                        return Err(Error::config(
                            "sweep.values",
                            format!("bit depth {v} is not an integer in 1..={MAX_CODEBOOK_BITS}"),
                        ));
                    }
                    point(v, self.system.n_ris, base_phi, v as u32)
                })
                .collect(),
        }
    }
}

pub fn parse_config(text: &str, path: &Path) -> Result<ExperimentConfig> {
    let cfg = ExperimentConfig::from_toml_str(text).map_err(|msg| Error::Parse {
        path: path.to_path_buf(),
        msg,
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text, path)
}

/// Annotated listing of every key with its default value.
pub const CONFIG_REFERENCE: &str = r#"# Experiment configuration reference. Every key is optional; the values
# shown are the defaults. Unknown keys are rejected.

[system]
n_bs = 64                  # BS antennas
n_ris = 64                 # RIS elements
n_ms = 16                  # MS antennas
m_bs = 6                   # BS RF chains (n_bs >= m_bs >= n_streams)
m_ms = 4                   # MS RF chains (n_ms >= m_ms >= n_streams)
n_streams = 4              # data streams
carrier_freq_hz = 1.6e12

[geometry]
bs_ris_m = 10.0            # BS to RIS distance
ris_ms_m = 20.0            # RIS to MS distance
bs_ms_m = 25.0             # blocked direct BS to MS distance
kappa_per_m = 0.2          # molecular absorption coefficient
xi = 1e-6                  # reflection coefficient of scattered paths
n_nlos = 2                 # reflected paths per RIS hop
n_nlos_direct = 3          # reflected paths of the direct hop (no LoS)
ris_spacing_m = 7e-5       # RIS element pitch
nlos_excess_min_m = 1.0    # extra length of a reflected path over the LoS range
nlos_excess_max_m = 10.0
nlos_split_min = 0.3       # fraction of the LoS range covered by the first leg
nlos_split_max = 0.7
normalization = "los_reference"  # or "none": divide each hop by its |LoS gain|

[codebook]
max_phase_deg = 306.82     # largest realizable element phase
bits = 2                   # phase levels = 2^bits
mean_amplitude = 0.8       # uniform reflection amplitude, in [0.5, 1]
# amplitudes = [..]        # per-level amplitudes (2^bits entries), overrides mean_amplitude

[run]
n_realizations = 50
master_seed = 1
schemes = ["agd", "cgd", "random", "no_ris"]   # also "exhaustive" (small grids only)
snr_grid_db = [10.0]       # strictly increasing
random_draws = 1           # codebook draws per realization for "random"
cgd_calibration_realizations = 10  # 0 = use optimizer.fixed_step unchanged
cgd_step_grid = [1e-4, 1e-3, 1e-2, 1e-1, 1.0]
timing = false             # record wall time (makes the CSV non-reproducible)

[sweep]
kind = "none"              # none | vs_snr | vs_nris | vs_phimax | vs_bits
values = []                # n_ris values, phi_max in degrees, or bit depths

[optimizer]
max_iterations = 100
fixed_step = 0.01          # C-GD step in units of 1/(mean_amplitude^2 * tr D)
c2_epsilon = 1e-12         # |C2| <= c2_epsilon*|C0| falls back to fallback_step
fallback_step = 0.01       # same units as fixed_step
init_phases = "zeros"           # or "random"
"#;
