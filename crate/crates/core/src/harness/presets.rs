//! Built-in experiment presets: one per figure of merit, each at desk scale
//! (64/64/16 antennas, 50 realizations) and paper scale (512/256/32, 1000
//! realizations).

use super::config::{ExperimentConfig, Scheme, SweepKind};
use crate::graphene::CALIBRATED_MAX_PHASE_DEG;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Desk,
    Paper,
}

pub struct PresetInfo {
    pub name: &'static str,
    pub description: &'static str,
}

pub const PRESETS: [PresetInfo; 8] = [
    PresetInfo { name: "fig5-desk", description: "rate versus maximum phase shift, desk scale" },
    PresetInfo { name: "fig5-paper", description: "rate versus maximum phase shift, paper scale" },
    PresetInfo { name: "fig6-desk", description: "rate versus codebook bit depth, desk scale" },
    PresetInfo { name: "fig6-paper", description: "rate versus codebook bit depth, paper scale" },
    PresetInfo { name: "fig7-desk", description: "rate versus SNR for all schemes, desk scale" },
    PresetInfo { name: "fig7-paper", description: "rate versus SNR for all schemes, paper scale" },
    PresetInfo { name: "fig8-desk", description: "rate versus RIS size, desk scale" },
    PresetInfo { name: "fig8-paper", description: "rate versus RIS size, paper scale" },
];

/// Maximum phase shifts swept by the fig5 presets, degrees.
pub const FIG5_PHI_MAX_DEG: [f64; 6] = [60.0, 120.0, 180.0, 240.0, CALIBRATED_MAX_PHASE_DEG, 360.0];

fn base(scale: Scale) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    match scale {
        Scale::Desk => {
            cfg.system.n_bs = 64;
            cfg.system.n_ris = 64;
            cfg.system.n_ms = 16;
            cfg.run.n_realizations = 50;
        }
        Scale::Paper => {
            cfg.system.n_bs = 512;
            cfg.system.n_ris = 256;
            cfg.system.n_ms = 32;
            cfg.run.n_realizations = 1000;
        }
    }
    cfg.system.m_bs = 6;
    cfg.system.m_ms = 4;
    cfg.system.n_streams = 4;
    cfg.run.master_seed = 42;
    cfg
}

pub fn preset(name: &str) -> Option<ExperimentConfig> {
    let (fig, scale) = name.split_once('-')?;
    let scale = match scale {
        "desk" => Scale::Desk,
        "paper" => Scale::Paper,
        _ => return None,
    };
    let mut cfg = base(scale);
    match fig {
        "fig5" => {
            cfg.run.schemes = vec![Scheme::Agd, Scheme::Cgd, Scheme::Random];
            cfg.run.snr_grid_db = vec![10.0];
            cfg.sweep.kind = SweepKind::VsPhimax;
            cfg.sweep.values = FIG5_PHI_MAX_DEG.to_vec();
        }
        "fig6" => {
            cfg.run.schemes = vec![Scheme::Agd, Scheme::Cgd, Scheme::Random];
            cfg.run.snr_grid_db = vec![10.0];
            cfg.sweep.kind = SweepKind::VsBits;
            cfg.sweep.values = vec![1.0, 2.0, 3.0, 4.0];
        }
        "fig7" => {
            cfg.run.schemes = vec![Scheme::Agd, Scheme::Cgd, Scheme::Random, Scheme::NoRis];
            cfg.run.snr_grid_db = vec![-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0];
            cfg.sweep.kind = SweepKind::VsSnr;
        }
        "fig8" => {
            cfg.run.schemes = vec![Scheme::Agd, Scheme::Cgd, Scheme::Random];
            cfg.run.snr_grid_db = vec![10.0];
            cfg.sweep.kind = SweepKind::VsNris;
            cfg.sweep.values = match scale {
                Scale::Desk => vec![16.0, 32.0, 64.0, 128.0],
                Scale::Paper => vec![64.0, 128.0, 192.0, 256.0],
            };
        }
        _ => return None,
    }
    Some(cfg)
}
