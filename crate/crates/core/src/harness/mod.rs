//! Seeded Monte-Carlo sweeps over channel realizations.
//!
//! Every realization draws from its own ChaCha8 streams, seeded by
//! [`derive_seed`]`(master_seed, realization, tag)`, so results do not depend
//! on how realizations are scheduled across workers. Aggregation always
//! walks realizations in index order.

pub mod config;
pub mod csv;
pub mod presets;

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::beamforming::{achievable_rate, cascaded_channel, svd_beamformers, ReflectionState};
use crate::channel::{sample_channel, write_dump, ChannelDump, ChannelModel, ChannelRealization, GainNormalization, Hop, HopChannel};
use crate::optimizer::{
    build_quadratic_form, calibrate_fixed_step, run_agd, run_cgd, run_exhaustive, run_random_phase, OptimizerSettings,
    QuadraticForm,
};
use crate::{CMatrix, Error, Result};

pub use config::{load_config, parse_config, ExperimentConfig, Scheme, SweepKind, SweepPoint, CONFIG_REFERENCE};
pub use csv::{format_csv, format_g9, write_csv, CSV_HEADER};

/// Seed tag of the random-phase scheme's stream.
pub const TAG_RANDOM_PHASE: u64 = 4;
/// Seed tag of random optimizer initialisation.
pub const TAG_RANDOM_INIT: u64 = 5;
/// Added to hop tags for the C-GD calibration channels, which must not
/// overlap the evaluation channels.
pub const TAG_CALIBRATION_OFFSET: u64 = 16;

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `splitmix64(splitmix64(splitmix64(master) ^ index) ^ tag·φ64)`, where
/// φ64 = 0x9E3779B97F4A7C15. Each result seeds a `ChaCha8Rng` via
/// `seed_from_u64`.
pub fn derive_seed(master_seed: u64, index: u64, tag: u64) -> u64 {
    let h = splitmix64(splitmix64(master_seed) ^ index);
    splitmix64(h ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

pub fn stream(master_seed: u64, index: u64, tag: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master_seed, index, tag))
}

/// Draws the hops of realization `index`. `tag_offset` separates
/// calibration streams from evaluation streams.
pub fn sample_realization(
    model: &ChannelModel,
    master_seed: u64,
    index: u64,
    tag_offset: u64,
    with_direct: bool,
) -> Result<ChannelRealization> {
    let hop = |h: Hop| sample_channel(model, h, &mut stream(master_seed, index, tag_offset + h.seed_tag()));
    Ok(ChannelRealization {
        seed: master_seed,
        h1: hop(Hop::BsRis)?,
        h2: hop(Hop::RisMs)?,
        direct: if with_direct { Some(hop(Hop::BsMsDirect)?) } else { None },
    })
}

/// One row of a sweep: aggregates over realizations.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub sweep_value: f64,
    pub scheme: Scheme,
    pub snr_db: f64,
    pub mean_rate: f64,
    pub std_rate: f64,
    pub n_realizations: usize,
    pub mean_iterations: f64,
    pub mean_wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepResult {
    pub rows: Vec<ResultRow>,
    /// `(sweep_value, fixed_step)` chosen for C-GD at each sweep point.
    pub cgd_steps: Vec<(f64, f64)>,
}

impl SweepResult {
    pub fn row(&self, sweep_value: f64, scheme: Scheme, snr_db: f64) -> Option<&ResultRow> {
        self.rows
            .iter()
            .find(|r| r.sweep_value == sweep_value && r.scheme == scheme && r.snr_db == snr_db)
    }

    pub fn mean_rate(&self, sweep_value: f64, scheme: Scheme, snr_db: f64) -> Option<f64> {
        self.row(sweep_value, scheme, snr_db).map(|r| r.mean_rate)
    }
}

/// Result of one scheme on one realization.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeOutcome {
    pub scheme: Scheme,
    /// Rate per SNR grid entry, bits/s/Hz.
    pub rates: Vec<f64>,
    pub iterations: f64,
    pub wall_ms: f64,
    pub phases_rad: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Worker threads; 0 means one per available core.
    pub workers: usize,
    /// Write every sampled realization here as a channel dump.
    pub dump_dir: Option<PathBuf>,
}

fn normalized(hop: &HopChannel, mode: GainNormalization) -> CMatrix {
    hop.scaled_matrix(mode)
}

fn snr_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

fn rates_for(he: &CMatrix, cfg: &ExperimentConfig) -> Result<Vec<f64>> {
    let ns = cfg.system.n_streams;
    let pair = svd_beamformers(he, ns)?;
    cfg.snr_grid_db()
        .iter()
        .map(|&db| achievable_rate(he, &pair, snr_linear(db), ns))
        .collect()
}

/// Runs every configured scheme on one realization.
pub fn evaluate_realization(
    cfg: &ExperimentConfig,
    point: &SweepPoint,
    realization: &ChannelRealization,
    index: u64,
    cgd_step: f64,
) -> Result<Vec<SchemeOutcome>> {
    let mode = cfg.geometry.normalization;
    let h1 = normalized(&realization.h1, mode);
    let h2 = normalized(&realization.h2, mode);
    let codebook = &point.codebook;
    let mu = codebook.mean_amplitude;
    let master = cfg.run.master_seed;

    let mut schemes = cfg.run.schemes.clone();
    schemes.sort();
    let needs_form = schemes.iter().any(|s| *s != Scheme::NoRis);
    let form: Option<QuadraticForm> = if needs_form { Some(build_quadratic_form(&h1, &h2)?) } else { None };

    let settings = OptimizerSettings {
        init_seed: derive_seed(master, index, TAG_RANDOM_INIT),
        ..cfg.optimizer
    };

    let mut out = Vec::with_capacity(schemes.len());
    for scheme in schemes {
        let start = Instant::now();
        let (phases, iterations) = match scheme {
            Scheme::Agd => {
                let t = run_agd(form.as_ref().expect("form built"), codebook, &settings);
                (Some(t.quantized_phases_rad), t.best_iteration as f64)
            }
            Scheme::Cgd => {
                let s = OptimizerSettings {
                    fixed_step: cgd_step,
                    ..settings
                };
                let t = run_cgd(form.as_ref().expect("form built"), codebook, &s);
                (Some(t.quantized_phases_rad), t.best_iteration as f64)
            }
            Scheme::Random => {
                let mut rng = stream(master, index, TAG_RANDOM_PHASE);
                let t = run_random_phase(form.as_ref().expect("form built"), codebook, cfg.run.random_draws, &mut rng)?;
                (Some(t.quantized_phases_rad), cfg.run.random_draws as f64)
            }
            Scheme::NoRis => (None, 0.0),
            Scheme::Exhaustive => {
                let (p, _) = run_exhaustive(form.as_ref().expect("form built"), codebook)?;
                let grid = codebook.len() as f64;
                (Some(p), grid.powi(point.model.n_ris as i32))
            }
        };
        let wall_ms = if cfg.run.timing { start.elapsed().as_secs_f64() * 1e3 } else { 0.0 };
        let he = match &phases {
            Some(p) => cascaded_channel(&h1, &h2, &ReflectionState::new(p.clone(), mu))?,
            None => {
                let direct = realization
                    .direct
                    .as_ref()
                    .ok_or_else(|| Error::Usage("no_ris needs the direct BS-MS hop".into()))?;
                normalized(direct, mode)
            }
        };
        out.push(SchemeOutcome {
            scheme,
            rates: rates_for(&he, cfg)?,
            iterations,
            wall_ms,
            phases_rad: phases,
        });
    }
    Ok(out)
}

/// Chooses the C-GD step for a sweep point on dedicated calibration
/// channels; returns `optimizer.fixed_step` when calibration is off or C-GD
/// is not requested.
pub fn cgd_step_for(cfg: &ExperimentConfig, point: &SweepPoint) -> Result<f64> {
    let n_cal = cfg.run.cgd_calibration_realizations;
    if n_cal == 0 || !cfg.run.schemes.contains(&Scheme::Cgd) {
        return Ok(cfg.optimizer.fixed_step);
    }
    let mode = cfg.geometry.normalization;
    let forms = (0..n_cal as u64)
        .into_par_iter()
        .map(|i| {
            let real = sample_realization(&point.model, cfg.run.master_seed, i, TAG_CALIBRATION_OFFSET, false)?;
            build_quadratic_form(&normalized(&real.h1, mode), &normalized(&real.h2, mode))
        })
        .collect::<Result<Vec<_>>>()?;
    let settings = OptimizerSettings {
        init_seed: derive_seed(cfg.run.master_seed, 0, TAG_CALIBRATION_OFFSET + TAG_RANDOM_INIT),
        ..cfg.optimizer
    };
    calibrate_fixed_step(&forms, &point.codebook, &settings, &cfg.run.cgd_step_grid)
}

fn aggregate(values: impl Iterator<Item = f64> + Clone, n: usize) -> (f64, f64) {
    let mean = values.clone().sum::<f64>() / n as f64;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    (mean, var.sqrt())
}

fn build_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Usage(format!("cannot start worker pool: {e}")))
}

pub fn run_experiment(cfg: &ExperimentConfig, options: &RunOptions) -> Result<SweepResult> {
    cfg.validate()?;
    let pool = build_pool(options.workers)?;
    pool.install(|| run_in_pool(cfg, options))
}

fn run_in_pool(cfg: &ExperimentConfig, options: &RunOptions) -> Result<SweepResult> {
    if let Some(dir) = &options.dump_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let n = cfg.run.n_realizations;
    let with_direct = cfg.run.schemes.contains(&Scheme::NoRis);
    let master = cfg.run.master_seed;
    let snrs = cfg.snr_grid_db();

    let mut result = SweepResult::default();
    for (p_idx, point) in cfg.sweep_points()?.iter().enumerate() {
        let cgd_step = cgd_step_for(cfg, point)?;
        result.cgd_steps.push((point.value, cgd_step));

        let outcomes = (0..n as u64)
            .into_par_iter()
            .map(|r| {
                let real = sample_realization(&point.model, master, r, 0, with_direct)?;
                if let Some(dir) = &options.dump_dir {
                    dump_realization(dir, p_idx, r, &real)?;
                }
                evaluate_realization(cfg, point, &real, r, cgd_step)
            })
            .collect::<Result<Vec<_>>>()?;

        let n_schemes = outcomes.first().map_or(0, Vec::len);
        for s in 0..n_schemes {
            let scheme = outcomes[0][s].scheme;
            let (iters, _) = aggregate(outcomes.iter().map(|o| o[s].iterations), n);
            let (wall, _) = aggregate(outcomes.iter().map(|o| o[s].wall_ms), n);
            for (k, &snr_db) in snrs.iter().enumerate() {
                let (mean, std) = aggregate(outcomes.iter().map(|o| o[s].rates[k]), n);
                let sweep_value = match cfg.sweep.kind {
                    SweepKind::None => 0.0,
                    SweepKind::VsSnr => snr_db,
                    _ => point.value,
                };
                result.rows.push(ResultRow {
                    sweep_value,
                    scheme,
                    snr_db,
                    mean_rate: mean,
                    std_rate: std,
                    n_realizations: n,
                    mean_iterations: iters,
                    mean_wall_ms: wall,
                });
            }
        }
    }
    result.rows.sort_by(|a, b| {
        a.sweep_value
            .total_cmp(&b.sweep_value)
            .then(a.scheme.cmp(&b.scheme))
            .then(a.snr_db.total_cmp(&b.snr_db))
    });
    Ok(result)
}

pub fn dump_file_name(point_index: usize, realization: u64) -> String {
    format!("point{point_index:03}_real{realization:05}.dump")
}

fn dump_realization(dir: &Path, point_index: usize, index: u64, real: &ChannelRealization) -> Result<()> {
    let mut hops = vec![real.h1.clone(), real.h2.clone()];
    hops.extend(real.direct.clone());
    let dump = ChannelDump {
        seed: real.seed,
        realization: index,
        hops,
    };
    write_dump(&dir.join(dump_file_name(point_index, index)), &dump)
}

/// Re-evaluates a dumped realization under `cfg` (whose master seed is
/// replaced by the dump's). The sweep point is the first one whose RIS size
/// matches the dump. The result has one row per scheme and SNR with
/// `n_real = 1`.
pub fn replay_dump(cfg: &ExperimentConfig, dump: &ChannelDump) -> Result<SweepResult> {
    let mut cfg = cfg.clone();
    cfg.run.master_seed = dump.seed;
    cfg.run.n_realizations = 1;
    let find = |hop: Hop| dump.hops.iter().find(|h| h.hop == hop).cloned();
    let h1 = find(Hop::BsRis).ok_or_else(|| Error::Usage("dump has no bs_ris hop".into()))?;
    let h2 = find(Hop::RisMs).ok_or_else(|| Error::Usage("dump has no ris_ms hop".into()))?;
    let n_ris = h1.rx.len();
    let points = cfg.sweep_points()?;
    let point = points
        .iter()
        .find(|p| p.model.n_ris == n_ris)
        .ok_or_else(|| Error::Usage(format!("no sweep point has {n_ris} RIS elements")))?;
    let real = ChannelRealization {
        seed: dump.seed,
        h1,
        h2,
        direct: find(Hop::BsMsDirect),
    };
    let cgd_step = cgd_step_for(&cfg, point)?;
    let outcomes = evaluate_realization(&cfg, point, &real, dump.realization, cgd_step)?;
    let sweep_value = |snr: f64| match cfg.sweep.kind {
        SweepKind::None => 0.0,
        SweepKind::VsSnr => snr,
        _ => point.value,
    };
    let mut rows = Vec::new();
    for o in &outcomes {
        for (k, &snr_db) in cfg.snr_grid_db().iter().enumerate() {
            rows.push(ResultRow {
                sweep_value: sweep_value(snr_db),
                scheme: o.scheme,
                snr_db,
                mean_rate: o.rates[k],
                std_rate: 0.0,
                n_realizations: 1,
                mean_iterations: o.iterations,
                mean_wall_ms: o.wall_ms,
            });
        }
    }
    rows.sort_by(|a, b| {
        a.sweep_value
            .total_cmp(&b.sweep_value)
            .then(a.scheme.cmp(&b.scheme))
            .then(a.snr_db.total_cmp(&b.snr_db))
    });
    Ok(SweepResult {
        rows,
        cgd_steps: vec![(point.value, cgd_step)],
    })
}
