//! Electrically tunable graphene reflecting element.
//!
//! Conductivity follows the intraband (Drude-type) model with an
//! `e^{+jωt}` time convention, so a lossy sheet has `Re(σ) > 0` and the
//! reactive part sits in `Im(σ) > 0`. The Fermi level is driven by the gate
//! voltage through the residual-density carrier model, and the reflection
//! phase of the element comes from a Fabry–Perot cavity estimate.
//!
//! The beamforming pipeline does not use the analytic phase model directly.
//! It consumes a [`PhaseCodebook`] built from calibrated full-wave values
//! (maximum phase 306.82°, mean amplitude 0.8).

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::{Error, Result, SPEED_OF_LIGHT};

/// Elementary charge (C).
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
/// Reduced Planck constant (J·s).
pub const HBAR: f64 = 1.054_571_817e-34;
/// Boltzmann constant (J/K).
pub const BOLTZMANN: f64 = 1.380_649e-23;
/// Vacuum permittivity (F/m).
pub const VACUUM_PERMITTIVITY: f64 = 8.854_187_812_8e-12;

/// Calibrated maximum phase response of the element at 1.6 THz (degrees).
pub const CALIBRATED_MAX_PHASE_DEG: f64 = 306.82;
/// Calibrated mean reflection amplitude of the element.
pub const CALIBRATED_MEAN_AMPLITUDE: f64 = 0.8;

/// Material parameters of the gated graphene sheet.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrapheneParams {
    pub temperature_k: f64,
    pub relaxation_time_s: f64,
    pub fermi_velocity_m_s: f64,
    /// Residual carrier density at the charge-neutral point (m⁻²).
    pub residual_carrier_density_m2: f64,
    /// Gate capacitivity coefficient (m⁻⁴·V⁻²).
    pub electrode_capacitivity: f64,
    /// Voltage of the charge-neutral point (V).
    pub compensating_voltage_v: f64,
}

impl Default for GrapheneParams {
    fn default() -> Self {
        Self {
            temperature_k: 300.0,
            relaxation_time_s: 1e-12,
            fermi_velocity_m_s: 1e6,
            residual_carrier_density_m2: 1e15,
            electrode_capacitivity: 5e31,
            compensating_voltage_v: 0.0,
        }
    }
}

impl GrapheneParams {
    pub fn new(
        temperature_k: f64,
        relaxation_time_s: f64,
        fermi_velocity_m_s: f64,
        residual_carrier_density_m2: f64,
        electrode_capacitivity: f64,
        compensating_voltage_v: f64,
    ) -> Result<Self> {
        let p = Self {
            temperature_k,
            relaxation_time_s,
            fermi_velocity_m_s,
            residual_carrier_density_m2,
            electrode_capacitivity,
            compensating_voltage_v,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("temperature_k", self.temperature_k),
            ("relaxation_time_s", self.relaxation_time_s),
            ("fermi_velocity_m_s", self.fermi_velocity_m_s),
            ("electrode_capacitivity", self.electrode_capacitivity),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Domain(format!("{name} must be finite and > 0, got {v}")));
            }
        }
        if !(self.residual_carrier_density_m2.is_finite() && self.residual_carrier_density_m2 >= 0.0) {
            return Err(Error::Domain(format!(
                "residual_carrier_density_m2 must be >= 0, got {}",
                self.residual_carrier_density_m2
            )));
        }
        if !self.compensating_voltage_v.is_finite() {
            return Err(Error::Domain("compensating_voltage_v must be finite".into()));
        }
        Ok(())
    }
}

/// Unit-cell geometry of the graphene/quartz/gold reflecting element.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElementGeometry {
    pub patch_width_m: f64,
    pub period_m: f64,
    pub substrate_thickness_m: f64,
    pub metal_thickness_m: f64,
    pub graphene_thickness_m: f64,
    /// Integer order of the Fabry–Perot resonance.
    pub resonance_order: i32,
}

impl Default for ElementGeometry {
    fn default() -> Self {
        Self {
            patch_width_m: 66e-6,
            period_m: 70e-6,
            substrate_thickness_m: 38e-6,
            metal_thickness_m: 1e-6,
            graphene_thickness_m: 1e-9,
            resonance_order: 1,
        }
    }
}

impl ElementGeometry {
    pub fn validate(&self) -> Result<()> {
        let lengths = [
            ("patch_width_m", self.patch_width_m),
            ("period_m", self.period_m),
            ("substrate_thickness_m", self.substrate_thickness_m),
            ("metal_thickness_m", self.metal_thickness_m),
            ("graphene_thickness_m", self.graphene_thickness_m),
        ];
        for (name, v) in lengths {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Domain(format!("{name} must be > 0, got {v}")));
            }
        }
        if self.patch_width_m >= self.period_m {
            return Err(Error::Domain(format!(
                "patch width {} m must be smaller than the period {} m",
                self.patch_width_m, self.period_m
            )));
        }
        Ok(())
    }
}

/// Intraband sheet conductivity (S) at Fermi level `fermi_level_j` and angular
/// frequency `angular_freq_rad_s`.
pub fn surface_conductivity(
    params: &GrapheneParams,
    fermi_level_j: f64,
    angular_freq_rad_s: f64,
) -> Result<Complex64> {
    if !fermi_level_j.is_finite() || !angular_freq_rad_s.is_finite() {
        return Err(Error::Domain("non-finite Fermi level or frequency".into()));
    }
    if angular_freq_rad_s <= 0.0 {
        return Err(Error::Domain(format!(
            "angular frequency must be > 0, got {angular_freq_rad_s}"
        )));
    }
    if fermi_level_j < 0.0 {
        return Err(Error::Domain(format!("Fermi level must be >= 0, got {fermi_level_j}")));
    }
    params.validate()?;

    let kt = BOLTZMANN * params.temperature_k;
    let thermal = ln_two_cosh(fermi_level_j / (2.0 * kt));
    let prefactor = 2.0 * ELEMENTARY_CHARGE * ELEMENTARY_CHARGE / (PI * HBAR * HBAR) * kt * thermal;
    let denom = Complex64::new(angular_freq_rad_s, 1.0 / params.relaxation_time_s);
    Ok(prefactor * Complex64::i() / denom)
}

/// `ln(2 cosh x)` without overflow for large `x`.
fn ln_two_cosh(x: f64) -> f64 {
    let a = x.abs();
    // 2cosh(a) = e^a (1 + e^{-2a})
    a + (-2.0 * a).exp().ln_1p()
}

/// Fermi level magnitude (J) reached at gate voltage `applied_voltage_v`.
pub fn fermi_level_from_voltage(params: &GrapheneParams, applied_voltage_v: f64) -> f64 {
    let dv = params.compensating_voltage_v - applied_voltage_v;
    let n0 = params.residual_carrier_density_m2;
    let carrier_density = (n0 * n0 + params.electrode_capacitivity * dv * dv).sqrt();
    HBAR * params.fermi_velocity_m_s * (PI * carrier_density).sqrt()
}

/// Effective permittivity of a graphene film of thickness `graphene_thickness_m`
/// with sheet conductivity `sigma`.
pub fn effective_permittivity(
    sigma: Complex64,
    angular_freq_rad_s: f64,
    graphene_thickness_m: f64,
) -> Result<Complex64> {
    if !(graphene_thickness_m > 0.0) || !graphene_thickness_m.is_finite() {
        return Err(Error::Domain(format!(
            "graphene thickness must be > 0, got {graphene_thickness_m}"
        )));
    }
    if !(angular_freq_rad_s > 0.0) {
        return Err(Error::Domain(format!(
            "angular frequency must be > 0, got {angular_freq_rad_s}"
        )));
    }
    let scale = angular_freq_rad_s * VACUUM_PERMITTIVITY * graphene_thickness_m;
    Ok(Complex64::new(1.0, 0.0) + Complex64::i() * sigma / scale)
}

/// Fabry–Perot reflection phase (rad): `mπ − a·k0·Re(n_eff)` with the
/// principal branch `Re(n_eff) ≥ 0`.
pub fn analytic_phase_response(geom: &ElementGeometry, eps_eff: Complex64, freq_hz: f64) -> Result<f64> {
    if !(freq_hz > 0.0) || !freq_hz.is_finite() {
        return Err(Error::Domain(format!("frequency must be > 0, got {freq_hz}")));
    }
    let k0 = 2.0 * PI * freq_hz / SPEED_OF_LIGHT;
    let n_eff = eps_eff.sqrt();
    Ok(f64::from(geom.resonance_order) * PI - geom.patch_width_m * k0 * n_eff.re)
}

/// Chains voltage-free Fermi levels through conductivity, permittivity and the
/// cavity model. Returns one phase (rad) per entry of `fermi_levels_j`.
pub fn phase_versus_fermi_level(
    params: &GrapheneParams,
    geom: &ElementGeometry,
    freq_hz: f64,
    fermi_levels_j: &[f64],
) -> Result<Vec<f64>> {
    geom.validate()?;
    let omega = 2.0 * PI * freq_hz;
    fermi_levels_j
        .iter()
        .map(|&ef| {
            let sigma = surface_conductivity(params, ef, omega)?;
            let eps = effective_permittivity(sigma, omega, geom.graphene_thickness_m)?;
            analytic_phase_response(geom, eps, freq_hz)
        })
        .collect()
}

/// Amplitude specification for [`build_codebook`].
#[derive(Debug, Clone, PartialEq)]
pub enum Amplitudes {
    Uniform(f64),
    PerPhase(Vec<f64>),
}

/// Discrete phase set of a `bits`-bit element and the matching amplitudes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseCodebook {
    pub max_phase_rad: f64,
    pub bits: u32,
    pub phases_rad: Vec<f64>,
    pub amplitudes: Vec<f64>,
    pub mean_amplitude: f64,
}

/// Largest bit depth accepted by [`build_codebook`].
pub const MAX_CODEBOOK_BITS: u32 = 16;

pub fn build_codebook(max_phase_rad: f64, bits: u32, amplitudes: Amplitudes) -> Result<PhaseCodebook> {
    if bits < 1 || bits > MAX_CODEBOOK_BITS {
        return Err(Error::config(
            "codebook.bits",
            format!("bit depth must be in 1..={MAX_CODEBOOK_BITS}, got {bits}"),
        ));
    }
    if !(max_phase_rad > 0.0 && max_phase_rad <= 2.0 * PI + 1e-12) {
        return Err(Error::config(
            "codebook.max_phase_deg",
            format!("maximum phase must lie in (0, 360] degrees, got {}", max_phase_rad.to_degrees()),
        ));
    }
    let levels = 1usize << bits;
    let amplitudes = match amplitudes {
        Amplitudes::Uniform(a) => vec![a; levels],
        Amplitudes::PerPhase(list) => {
            if list.len() != levels {
                return Err(Error::config(
                    "codebook.amplitudes",
                    format!("expected {levels} amplitudes for {bits} bits, got {}", list.len()),
                ));
            }
            list
        }
    };
    if let Some(bad) = amplitudes.iter().find(|a| !(0.0..=1.0).contains(*a)) {
        return Err(Error::config(
            "codebook.amplitudes",
            format!("amplitude {bad} outside [0, 1]"),
        ));
    }
    let mean_amplitude = amplitudes.iter().sum::<f64>() / levels as f64;
    if !(0.5..=1.0).contains(&mean_amplitude) {
        return Err(Error::config(
            "codebook.mean_amplitude",
            format!("mean amplitude {mean_amplitude} outside [0.5, 1]"),
        ));
    }
    let step = max_phase_rad / levels as f64;
    let phases_rad = (0..levels).map(|k| k as f64 * step).collect();
    Ok(PhaseCodebook {
        max_phase_rad,
        bits,
        phases_rad,
        amplitudes,
        mean_amplitude,
    })
}

impl PhaseCodebook {
    /// Codebook with the calibrated element response at `bits` bits.
    pub fn calibrated(bits: u32) -> Result<Self> {
        build_codebook(
            CALIBRATED_MAX_PHASE_DEG.to_radians(),
            bits,
            Amplitudes::Uniform(CALIBRATED_MEAN_AMPLITUDE),
        )
    }

    pub fn len(&self) -> usize {
        self.phases_rad.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases_rad.is_empty()
    }
}
