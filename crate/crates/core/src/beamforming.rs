//! Cascaded RIS channel, SVD transceivers and achievable rate.
//!
//! With the precoder and combiner fixed to the dominant right/left singular
//! vectors of `H_e = H2·diag(θ)·H1`, the log-det rate collapses to a sum over
//! the leading `N_s` singular values. The rate is always computed from the
//! general log-det expression; the singular-value form is kept as
//! [`rate_from_singular_values`] for cross-checking.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::{CMatrix, CVector, Error, Result};

/// RIS phase configuration and its reflection vector `θ_n = μ̄·e^{jφ_n}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReflectionState {
    pub phases_rad: Vec<f64>,
    pub mean_amplitude: f64,
    pub theta: CVector,
}

impl ReflectionState {
    pub fn new(phases_rad: Vec<f64>, mean_amplitude: f64) -> Self {
        let theta = CVector::from_iterator(
            phases_rad.len(),
            phases_rad.iter().map(|&p| Complex64::from_polar(mean_amplitude, p)),
        );
        Self {
            phases_rad,
            mean_amplitude,
            theta,
        }
    }

    pub fn len(&self) -> usize {
        self.phases_rad.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases_rad.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeamformerPair {
    /// `N_BS × N_s` precoder.
    pub precoder: CMatrix,
    /// `N_MS × N_s` combiner.
    pub combiner: CMatrix,
    pub n_streams: usize,
    /// All singular values of the channel, largest first.
    pub singular_values: Vec<f64>,
}

/// `H2·diag(θ)·H1`.
pub fn cascaded_channel(h1: &CMatrix, h2: &CMatrix, state: &ReflectionState) -> Result<CMatrix> {
    cascaded_with_theta(h1, h2, &state.theta)
}

pub(crate) fn cascaded_with_theta(h1: &CMatrix, h2: &CMatrix, theta: &CVector) -> Result<CMatrix> {
    let n_ris = theta.len();
    if h1.nrows() != n_ris || h2.ncols() != n_ris {
        return Err(Error::Usage(format!(
            "cascade shapes disagree: H1 is {}x{}, H2 is {}x{}, RIS has {n_ris} elements",
            h1.nrows(),
            h1.ncols(),
            h2.nrows(),
            h2.ncols()
        )));
    }
    let mut scaled = h1.clone();
    for (mut row, &t) in scaled.row_iter_mut().zip(theta.iter()) {
        row *= t;
    }
    Ok(h2 * scaled)
}

/// Precoder = first `n_streams` right singular vectors, combiner = first
/// `n_streams` left singular vectors.
pub fn svd_beamformers(he: &CMatrix, n_streams: usize) -> Result<BeamformerPair> {
    let (n_ms, n_bs) = he.shape();
    if n_streams == 0 || n_streams > n_ms.min(n_bs) {
        return Err(Error::Usage(format!(
            "cannot carry {n_streams} streams over a {n_ms}x{n_bs} channel"
        )));
    }
    let svd = he.clone().svd(true, true);
    let u = svd.u.ok_or_else(|| Error::Numerical("SVD did not return U".into()))?;
    let v_t = svd.v_t.ok_or_else(|| Error::Numerical("SVD did not return Vᴴ".into()))?;
    let sv = svd.singular_values;
    if sv.iter().any(|s| !s.is_finite()) {
        return Err(Error::Numerical("non-finite singular value".into()));
    }

    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]));

    let mut precoder = CMatrix::zeros(n_bs, n_streams);
    let mut combiner = CMatrix::zeros(n_ms, n_streams);
    for (k, &idx) in order.iter().take(n_streams).enumerate() {
        combiner.set_column(k, &u.column(idx));
        precoder.set_column(k, &v_t.row(idx).adjoint());
    }
    Ok(BeamformerPair {
        precoder,
        combiner,
        n_streams,
        singular_values: order.iter().map(|&i| sv[i]).collect(),
    })
}

fn check_rate_args(snr_linear: f64, n_streams: usize) -> Result<()> {
    if !(snr_linear >= 0.0) || !snr_linear.is_finite() {
        return Err(Error::Usage(format!("SNR must be finite and >= 0, got {snr_linear}")));
    }
    if n_streams == 0 {
        return Err(Error::Usage("at least one stream is required".into()));
    }
    Ok(())
}

/// `log2 |I + ρ/(δ²N_s)·(WᴴW)⁻¹·Wᴴ·H_e·F·Fᴴ·H_eᴴ·W|` in bits/s/Hz, with
/// `snr_linear = ρ/δ²`.
pub fn achievable_rate(he: &CMatrix, pair: &BeamformerPair, snr_linear: f64, n_streams: usize) -> Result<f64> {
    check_rate_args(snr_linear, n_streams)?;
    let (w, f) = (&pair.combiner, &pair.precoder);
    if w.nrows() != he.nrows() || f.nrows() != he.ncols() || w.ncols() != n_streams || f.ncols() != n_streams {
        return Err(Error::Usage(format!(
            "beamformer shapes W {:?}, F {:?} do not fit a {:?} channel with {n_streams} streams",
            w.shape(),
            f.shape(),
            he.shape()
        )));
    }
    // WᴴW = L·Lᴴ turns the generalized problem into log det(I + c·G·Gᴴ)
    // with G = L⁻¹·Wᴴ·H_e·F.
    let gram = w.adjoint() * w;
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::Numerical("combiner Gram matrix WᴴW is singular".into()))?;
    let mut g = w.adjoint() * he * f;
    if !chol.l_dirty().solve_lower_triangular_mut(&mut g) {
        return Err(Error::Numerical("combiner Gram factor is singular".into()));
    }
    let c = snr_linear / n_streams as f64;
    let mut m = &g * g.adjoint() * Complex64::new(c, 0.0);
    for k in 0..n_streams {
        m[(k, k)] += Complex64::new(1.0, 0.0);
    }
    let chol = m
        .cholesky()
        .ok_or_else(|| Error::Numerical("rate matrix is not positive definite".into()))?;
    let log_det: f64 = chol.l_dirty().diagonal().iter().map(|d| d.re.ln()).sum::<f64>() * 2.0;
    Ok(log_det / std::f64::consts::LN_2)
}

/// `Σ_k log2(1 + ρ/(δ²N_s)·σ_k²)` over the leading `n_streams` values.
pub fn rate_from_singular_values(singular_values: &[f64], snr_linear: f64, n_streams: usize) -> Result<f64> {
    check_rate_args(snr_linear, n_streams)?;
    let c = snr_linear / n_streams as f64;
    Ok(singular_values
        .iter()
        .take(n_streams)
        .map(|s| (c * s * s).ln_1p() / std::f64::consts::LN_2)
        .sum())
}

/// `N_s·log2(1 + ρ/(δ²N_s)·tr(H_e·H_eᴴ))`.
pub fn jensen_upper_bound(he: &CMatrix, snr_linear: f64, n_streams: usize) -> Result<f64> {
    check_rate_args(snr_linear, n_streams)?;
    let c = snr_linear / n_streams as f64;
    Ok(n_streams as f64 * (c * he.norm_squared()).ln_1p() / std::f64::consts::LN_2)
}

/// Singular values only, largest first.
pub fn singular_values(he: &CMatrix) -> Vec<f64> {
    let sv: DVector<f64> = he.clone().singular_values();
    let mut v: Vec<f64> = sv.iter().copied().collect();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}
