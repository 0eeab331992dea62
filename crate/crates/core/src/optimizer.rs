//! Passive beamforming: optimization of the RIS phase vector.
//!
//! The achievable rate is bounded through `tr(H_e·H_eᴴ) = θᴴ·D·θ` with
//! `D = conj(H1·H1ᴴ) ⊙ (H2ᴴ·H2)`. Writing `θ_n = μ̄·e^{jφ_n}` gives the
//! unconstrained objective
//!
//! ```text
//! f(φ) = −μ̄² Σ_p Σ_q e^{−jφ_p}·D_pq·e^{jφ_q}
//! ```
//!
//! which every scheme here minimises (equivalently: maximises the trace
//! `−f`). Descent runs on continuous phases and is mapped onto the codebook
//! once at the end.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::graphene::PhaseCodebook;
use crate::{CMatrix, CVector, Error, Result};

/// Largest codebook grid [`run_exhaustive`] will enumerate.
pub const EXHAUSTIVE_LIMIT: f64 = 1e6;

/// Hermitian PSD matrix `D` with `θᴴ·D·θ = ‖H2·diag(θ)·H1‖_F²`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticForm {
    pub d: CMatrix,
    /// `(N_BS, N_MS, N_RIS)` of the channels the form was built from.
    pub source_dims: (usize, usize, usize),
}

impl QuadraticForm {
    pub fn n_ris(&self) -> usize {
        self.d.nrows()
    }

    /// `‖D − Dᴴ‖_F / ‖D‖_F`.
    pub fn hermitian_defect(&self) -> f64 {
        let norm = self.d.norm();
        if norm == 0.0 {
            return 0.0;
        }
        (&self.d - self.d.adjoint()).norm() / norm
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let herm = (&self.d + self.d.adjoint()) * Complex64::new(0.5, 0.0);
        let mut ev: Vec<f64> = herm.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// Real trace of `D`, i.e. `Σ_n ‖H1[n,:]‖²·‖H2[:,n]‖²`.
    pub fn trace(&self) -> f64 {
        self.d.diagonal().iter().map(|z| z.re).sum()
    }

    /// Curvature scale `μ̄²·tr(D)` of the phase objective, used to express
    /// fixed step sizes in dimensionless units.
    pub fn curvature_scale(&self, mean_amplitude: f64) -> f64 {
        let s = mean_amplitude * mean_amplitude * self.trace();
        if s > 0.0 && s.is_finite() {
            s
        } else {
            1.0
        }
    }
}

pub fn build_quadratic_form(h1: &CMatrix, h2: &CMatrix) -> Result<QuadraticForm> {
    let n_ris = h1.nrows();
    if h2.ncols() != n_ris {
        return Err(Error::Usage(format!(
            "H1 has {n_ris} rows but H2 has {} columns",
            h2.ncols()
        )));
    }
    let tx_gram = h1 * h1.adjoint();
    let rx_gram = h2.adjoint() * h2;
    let d = rx_gram.zip_map(&tx_gram, |b, a| b * a.conj());
    Ok(QuadraticForm {
        d,
        source_dims: (h1.ncols(), h2.nrows(), n_ris),
    })
}

fn unit_phasors(phases: &[f64]) -> CVector {
    CVector::from_iterator(phases.len(), phases.iter().map(|&p| Complex64::from_polar(1.0, p)))
}

fn check_len(form: &QuadraticForm, phases: &[f64]) {
    assert_eq!(
        phases.len(),
        form.n_ris(),
        "phase vector length does not match the RIS size"
    );
}

/// `Σ_p Σ_q e^{−jφ_p}·D_pq·e^{jφ_q}`, including its (round-off) imaginary part.
pub fn phase_quadratic_sum(form: &QuadraticForm, phases: &[f64]) -> Complex64 {
    check_len(form, phases);
    let e = unit_phasors(phases);
    let de = &form.d * &e;
    e.iter().zip(de.iter()).map(|(a, b)| a.conj() * b).sum()
}

/// `f(φ)`; always `≤ 0` for a PSD `D`.
pub fn objective(form: &QuadraticForm, phases: &[f64], mean_amplitude: f64) -> f64 {
    -mean_amplitude * mean_amplitude * phase_quadratic_sum(form, phases).re
}

/// `θᴴ·D·θ = −f(φ)`, the quantity the schemes maximise.
pub fn trace_objective(form: &QuadraticForm, phases: &[f64], mean_amplitude: f64) -> f64 {
    -objective(form, phases, mean_amplitude)
}

/// Gradient of `f` with respect to `φ`, as complex entries before the
/// imaginary round-off is discarded.
pub fn gradient_complex(form: &QuadraticForm, phases: &[f64], mean_amplitude: f64) -> Vec<Complex64> {
    check_len(form, phases);
    let e = unit_phasors(phases);
    let row_sums = &form.d * &e; // Σ_q D_nq e^{jφ_q}
    let col_sums = form.d.transpose() * e.conjugate(); // Σ_p D_pn e^{−jφ_p}
    let mu2 = mean_amplitude * mean_amplitude;
    let j = Complex64::i();
    (0..phases.len())
        .map(|n| mu2 * j * (e[n].conj() * row_sums[n] - e[n] * col_sums[n]))
        .collect()
}

pub fn gradient(form: &QuadraticForm, phases: &[f64], mean_amplitude: f64) -> Vec<f64> {
    gradient_complex(form, phases, mean_amplitude)
        .into_iter()
        .map(|g| g.re)
        .collect()
}

/// Coefficients of the second-order model `f(φ − λ·∇f) ≈ C0 + C1·λ + C2·λ²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepModel {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    /// Largest imaginary part met while summing, relative to the real parts.
    pub imag_residue: f64,
}

impl StepModel {
    pub fn eval(&self, step: f64) -> f64 {
        self.c0 + self.c1 * step + self.c2 * step * step
    }
}

/// Expands `exp(jλΓ_pq)` to second order, with `Γ_pq = ∂f/∂φ_p − ∂f/∂φ_q`.
pub fn step_model(form: &QuadraticForm, phases: &[f64], grad: &[f64], mean_amplitude: f64) -> StepModel {
    check_len(form, phases);
    assert_eq!(grad.len(), phases.len());
    let n = phases.len();
    let e = unit_phasors(phases);
    let mu2 = mean_amplitude * mean_amplitude;
    let j = Complex64::i();
    let (mut s0, mut s1, mut s2) = (Complex64::default(), Complex64::default(), Complex64::default());
    for p in 0..n {
        let ep = e[p].conj();
        for q in 0..n {
            let w = form.d[(p, q)] * ep * e[q]; // D_pq·e^{j(φ_q − φ_p)}
            let gamma = grad[p] - grad[q];
            s0 += w;
            s1 += w * j * gamma;
            s2 += w * (gamma * gamma * 0.5);
        }
    }
    let c0 = -mu2 * s0;
    let c1 = -mu2 * s1;
    let c2 = mu2 * s2;
    let scale = c0.re.abs().max(c1.re.abs()).max(c2.re.abs()).max(f64::MIN_POSITIVE);
    let imag_residue = c0.im.abs().max(c1.im.abs()).max(c2.im.abs()) / scale;
    StepModel {
        c0: c0.re,
        c1: c1.re,
        c2: c2.re,
        imag_residue,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitPhases {
    #[default]
    Zeros,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerSettings {
    pub max_iterations: usize,
    /// Constant-step size, in units of `1 / (μ̄²·tr D)`.
    pub fixed_step: f64,
    /// `|C2| ≤ c2_epsilon·|C0|` counts as a degenerate quadratic model.
    pub c2_epsilon: f64,
    /// Step used when the quadratic model is degenerate, in the same units
    /// as `fixed_step`.
    pub fallback_step: f64,
    pub init_phases: InitPhases,
    /// Seed for [`InitPhases::Random`]; set per realization by the harness.
    #[serde(skip)]
    pub init_seed: u64,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            fixed_step: 1e-2,
            c2_epsilon: 1e-12,
            fallback_step: 1e-2,
            init_phases: InitPhases::Zeros,
            init_seed: 0,
        }
    }
}

impl OptimizerSettings {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations < 1 {
            return Err(Error::config("optimizer.max_iterations", "must be >= 1"));
        }
        if !(self.fixed_step > 0.0) || !self.fixed_step.is_finite() {
            return Err(Error::config("optimizer.fixed_step", "must be finite and > 0"));
        }
        if !(self.c2_epsilon > 0.0) {
            return Err(Error::config("optimizer.c2_epsilon", "must be > 0"));
        }
        if !(self.fallback_step > 0.0) || !self.fallback_step.is_finite() {
            return Err(Error::config("optimizer.fallback_step", "must be finite and > 0"));
        }
        Ok(())
    }
}

/// Step size from a quadratic model: the vertex when the model is convex,
/// `|C1|/|C2|` when it is concave, the fallback otherwise.
pub fn step_from_model(model: &StepModel, c2_epsilon: f64, fallback_step: f64) -> f64 {
    let guard = c2_epsilon * model.c0.abs();
    if model.c2 > guard {
        -model.c1 / (2.0 * model.c2)
    } else if model.c2 < -guard {
        model.c1.abs() / model.c2.abs()
    } else {
        fallback_step
    }
}

/// Adaptive step `λ^i` at `phases` given the gradient there.
pub fn adaptive_step(
    form: &QuadraticForm,
    phases: &[f64],
    grad: &[f64],
    mean_amplitude: f64,
    settings: &OptimizerSettings,
) -> f64 {
    let model = step_model(form, phases, grad, mean_amplitude);
    let fallback = settings.fallback_step / form.curvature_scale(mean_amplitude);
    step_from_model(&model, settings.c2_epsilon, fallback)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Trace objective `−f(φ^i)`.
    pub objective: f64,
    /// Step used to reach this iterate (0 for the starting point).
    pub step: f64,
    /// `‖∇f‖₂` at the previous iterate.
    pub gradient_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GdTrace {
    pub iterations: Vec<IterationRecord>,
    /// Best continuous iterate.
    pub best_phases_rad: Vec<f64>,
    pub best_objective: f64,
    pub best_iteration: usize,
    /// Best iterate mapped onto the codebook.
    pub quantized_phases_rad: Vec<f64>,
    pub quantized_objective: f64,
}

impl GdTrace {
    /// Plain-text rows `iter objective step grad_norm`.
    pub fn format_rows(&self) -> String {
        let mut s = String::from("iter,objective,step,grad_norm\n");
        for r in &self.iterations {
            s.push_str(&format!("{},{:e},{:e},{:e}\n", r.iteration, r.objective, r.step, r.gradient_norm));
        }
        s
    }
}

#[derive(Debug, Clone, Copy)]
enum StepRule {
    Adaptive,
    Fixed(f64),
}

fn initial_phases(n: usize, settings: &OptimizerSettings) -> Vec<f64> {
    match settings.init_phases {
        InitPhases::Zeros => vec![0.0; n],
        InitPhases::Random => {
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(settings.init_seed);
            (0..n).map(|_| rng.random_range(0.0..TAU)).collect()
        }
    }
}

fn descend(form: &QuadraticForm, codebook: &PhaseCodebook, settings: &OptimizerSettings, rule: StepRule) -> GdTrace {
    let mu = codebook.mean_amplitude;
    let n = form.n_ris();
    let mut phases = initial_phases(n, settings);
    let start = trace_objective(form, &phases, mu);

    let mut iterations = Vec::with_capacity(settings.max_iterations + 1);
    iterations.push(IterationRecord {
        iteration: 0,
        objective: start,
        step: 0.0,
        gradient_norm: 0.0,
    });
    let mut best_phases = phases.clone();
    let mut best_objective = start;
    let mut best_iteration = 0;

    for i in 0..settings.max_iterations {
        let grad = gradient(form, &phases, mu);
        let step = match rule {
            StepRule::Adaptive => adaptive_step(form, &phases, &grad, mu, settings),
            StepRule::Fixed(step) => step,
        };
        for (p, g) in phases.iter_mut().zip(&grad) {
            *p -= step * g;
        }
        let value = trace_objective(form, &phases, mu);
        iterations.push(IterationRecord {
            iteration: i + 1,
            objective: value,
            step,
            gradient_norm: grad.iter().map(|g| g * g).sum::<f64>().sqrt(),
        });
        if value > best_objective {
            best_objective = value;
            best_phases.clone_from(&phases);
            best_iteration = i + 1;
        }
    }

    let quantized = quantize_phases(&best_phases, codebook);
    let quantized_objective = trace_objective(form, &quantized, mu);
    GdTrace {
        iterations,
        best_phases_rad: best_phases,
        best_objective,
        best_iteration,
        quantized_phases_rad: quantized,
        quantized_objective,
    }
}

/// Gradient descent with the step chosen from a local quadratic model at
/// every iteration. The best iterate by trace objective is kept and
/// quantized onto the codebook.
pub fn run_agd(form: &QuadraticForm, codebook: &PhaseCodebook, settings: &OptimizerSettings) -> GdTrace {
    descend(form, codebook, settings, StepRule::Adaptive)
}

/// Constant-step gradient descent; `settings.fixed_step` is scaled by
/// `1 / (μ̄²·tr D)`.
pub fn run_cgd(form: &QuadraticForm, codebook: &PhaseCodebook, settings: &OptimizerSettings) -> GdTrace {
    let step = settings.fixed_step / form.curvature_scale(codebook.mean_amplitude);
    descend(form, codebook, settings, StepRule::Fixed(step))
}

/// Draws each element's phase uniformly from the codebook, `n_draws` times,
/// keeping the best draw.
pub fn run_random_phase(
    form: &QuadraticForm,
    codebook: &PhaseCodebook,
    n_draws: usize,
    rng: &mut impl Rng,
) -> Result<GdTrace> {
    if n_draws < 1 {
        return Err(Error::Usage("random phase scheme needs at least one draw".into()));
    }
    let mu = codebook.mean_amplitude;
    let n = form.n_ris();
    let mut iterations = Vec::with_capacity(n_draws);
    let mut best: Option<(Vec<f64>, f64, usize)> = None;
    for draw in 0..n_draws {
        let phases: Vec<f64> = (0..n)
            .map(|_| codebook.phases_rad[rng.random_range(0..codebook.len())])
            .collect();
        let value = trace_objective(form, &phases, mu);
        iterations.push(IterationRecord {
            iteration: draw,
            objective: value,
            step: 0.0,
            gradient_norm: 0.0,
        });
        if best.as_ref().is_none_or(|(_, b, _)| value > *b) {
            best = Some((phases, value, draw));
        }
    }
    let (phases, value, draw) = best.expect("at least one draw");
    Ok(GdTrace {
        iterations,
        best_phases_rad: phases.clone(),
        best_objective: value,
        best_iteration: draw,
        quantized_phases_rad: phases,
        quantized_objective: value,
    })
}

/// Number of grid points `(2^b)^N` an exhaustive search would visit.
pub fn exhaustive_grid_size(codebook_len: usize, n_ris: usize) -> f64 {
    (codebook_len as f64).powi(n_ris as i32)
}

/// Exact discrete optimum of `θᴴ·D·θ` over the codebook grid. Grid points
/// are visited in lexicographic order of codebook indices (last element
/// fastest) and only a strictly larger value (beyond round-off) replaces the
/// incumbent, so ties resolve to the first point.
pub fn run_exhaustive(form: &QuadraticForm, codebook: &PhaseCodebook) -> Result<(Vec<f64>, f64)> {
    let n = form.n_ris();
    let levels = codebook.len();
    let size = exhaustive_grid_size(levels, n);
    if size > EXHAUSTIVE_LIMIT {
        return Err(Error::Usage(format!(
            "exhaustive search over {levels}^{n} = {size:.3e} points exceeds the {EXHAUSTIVE_LIMIT:e} limit"
        )));
    }
    let mu = codebook.mean_amplitude;
    let mut digits = vec![0usize; n];
    let mut phases = vec![codebook.phases_rad[0]; n];
    let mut best_phases = phases.clone();
    let mut best = trace_objective(form, &phases, mu);
    loop {
        // odometer increment, last position fastest
        let mut pos = n;
        loop {
            if pos == 0 {
                return Ok((best_phases, best));
            }
            pos -= 1;
            digits[pos] += 1;
            if digits[pos] < levels {
                phases[pos] = codebook.phases_rad[digits[pos]];
                break;
            }
            digits[pos] = 0;
            phases[pos] = codebook.phases_rad[0];
        }
        let value = trace_objective(form, &phases, mu);
        if value > best + 1e-12 * best.abs() {
            best = value;
            best_phases.clone_from(&phases);
        }
    }
}

/// Maps each phase to the nearest codebook entry by circular distance
/// (period 2π). Ties go to the lower codebook index.
pub fn quantize_phases(phases: &[f64], codebook: &PhaseCodebook) -> Vec<f64> {
    phases.iter().map(|&p| nearest_codebook_phase(p, codebook)).collect()
}

fn nearest_codebook_phase(phase: f64, codebook: &PhaseCodebook) -> f64 {
    let wrapped = phase.rem_euclid(TAU);
    let mut best = (f64::INFINITY, codebook.phases_rad[0]);
    for &c in &codebook.phases_rad {
        let d = (wrapped - c).abs();
        let d = d.min(TAU - d);
        if d < best.0 - 1e-12 {
            best = (d, c);
        }
    }
    best.1
}

/// Picks the constant step (from `grid`, in `fixed_step` units) with the best
/// mean quantized objective over `forms`. Ties keep the earlier grid value.
pub fn calibrate_fixed_step(
    forms: &[QuadraticForm],
    codebook: &PhaseCodebook,
    settings: &OptimizerSettings,
    grid: &[f64],
) -> Result<f64> {
    if grid.is_empty() {
        return Err(Error::config("optimizer.cgd_step_grid", "grid is empty"));
    }
    if forms.is_empty() {
        return Ok(grid[0]);
    }
    let mut best = (f64::NEG_INFINITY, grid[0]);
    for &step in grid {
        let s = OptimizerSettings {
            fixed_step: step,
            ..*settings
        };
        let mean = forms
            .iter()
            .map(|f| run_cgd(f, codebook, &s).quantized_objective)
            .sum::<f64>()
            / forms.len() as f64;
        if mean > best.0 {
            best = (mean, step);
        }
    }
    Ok(best.1)
}
