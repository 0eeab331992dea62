use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ris_thz::channel::read_dump;
use ris_thz::harness::presets::{preset, PRESETS};
use ris_thz::harness::{format_csv, load_config, replay_dump, run_experiment, write_csv, ExperimentConfig, RunOptions, SweepKind, CONFIG_REFERENCE};
use ris_thz::Error;

#[derive(Parser)]
#[command(name = "ris-thz", version, about = "Graphene RIS-assisted THz MIMO link simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte-Carlo sweep and write CSV.
    Run {
        /// TOML experiment config.
        #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
        config: Option<PathBuf>,
        /// Built-in preset name (see `presets list`).
        #[arg(long)]
        preset: Option<String>,
        /// Override the master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Write `<name>.csv` into this directory instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads (default: one per core).
        #[arg(long, default_value_t = 0)]
        workers: usize,
        /// Override the sweep kind: none, vs_snr, vs_nris, vs_phimax, vs_bits.
        #[arg(long)]
        sweep: Option<String>,
        /// Override the number of realizations.
        #[arg(long)]
        realizations: Option<usize>,
        /// Dump every sampled channel realization into this directory.
        #[arg(long)]
        dump_channels: Option<PathBuf>,
    },
    /// List or print built-in presets.
    Presets {
        #[command(subcommand)]
        action: PresetAction,
    },
    /// Print every config key with its default value.
    ConfigReference,
    /// Re-evaluate a dumped channel realization.
    Replay {
        #[arg(long)]
        channel_dump: PathBuf,
        /// Config to evaluate under (default config when omitted).
        #[arg(long, conflicts_with = "preset")]
        config: Option<PathBuf>,
        #[arg(long)]
        preset: Option<String>,
    },
}

#[derive(Subcommand)]
enum PresetAction {
    List,
    Show { name: String },
}

fn resolve_config(config: Option<&Path>, preset_name: Option<&str>) -> Result<(ExperimentConfig, String), Error> {
    match (config, preset_name) {
        (Some(path), _) => {
            let name = path.file_stem().map_or_else(|| "result".into(), |s| s.to_string_lossy().into_owned());
            Ok((load_config(path)?, name))
        }
        (None, Some(name)) => preset(name)
            .map(|cfg| (cfg, name.to_string()))
            .ok_or_else(|| Error::Usage(format!("unknown preset `{name}`; see `presets list`"))),
        (None, None) => Ok((ExperimentConfig::default(), "default".into())),
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Run {
            config,
            preset,
            seed,
            out,
            workers,
            sweep,
            realizations,
            dump_channels,
        } => {
            let (mut cfg, name) = resolve_config(config.as_deref(), preset.as_deref())?;
            if let Some(seed) = seed {
                cfg.run.master_seed = seed;
            }
            if let Some(n) = realizations {
                cfg.run.n_realizations = n;
            }
            if let Some(kind) = sweep {
                let kind = SweepKind::from_name(&kind)
                    .ok_or_else(|| Error::Usage(format!("unknown sweep `{kind}`")))?;
                if !kind.uses_values() {
                    cfg.sweep.values.clear();
                }
                cfg.sweep.kind = kind;
            }
            let options = RunOptions {
                workers,
                dump_dir: dump_channels,
            };
            let result = run_experiment(&cfg, &options)?;
            match out {
                Some(dir) => {
                    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
                    let path = dir.join(format!("{name}.csv"));
                    write_csv(&result, &path)?;
                    eprintln!("wrote {} rows to {}", result.rows.len(), path.display());
                }
                None => print!("{}", format_csv(&result)),
            }
            for (value, step) in &result.cgd_steps {
                eprintln!("sweep value {value}: C-GD step {step:e}");
            }
        }
        Command::Presets { action } => match action {
            PresetAction::List => {
                for p in &PRESETS {
                    println!("{:<12} {}", p.name, p.description);
                }
            }
            PresetAction::Show { name } => {
                let cfg = preset(&name).ok_or_else(|| Error::Usage(format!("unknown preset `{name}`")))?;
                print!("{}", cfg.to_toml_string());
            }
        },
        Command::ConfigReference => print!("{CONFIG_REFERENCE}"),
        Command::Replay {
            channel_dump,
            config,
            preset,
        } => {
            let (cfg, _) = resolve_config(config.as_deref(), preset.as_deref())?;
            let dump = read_dump(&channel_dump)?;
            print!("{}", format_csv(&replay_dump(&cfg, &dump)?));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config() || matches!(e, Error::Usage(_)) {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
