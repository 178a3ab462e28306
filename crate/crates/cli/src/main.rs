//! `qutritcr`: Rabi scans, calibration, Bell preparation and gate fidelities.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use qutritcr::calibration::{ControlPrep, Rotation};
use qutritcr::device::Subspace;
use qutritcr::experiments::{cmd_bell, cmd_calibrate, cmd_rabi, linspace, ExperimentConfig, ExperimentResult, StoreGate, StoreStatus};
use qutritcr::simulate::Simulator;

#[derive(Parser)]
#[command(name = "qutritcr", version, about = "Cross-resonance gates on coupled transmon qutrits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Conditional CR Rabi scan; writes a CSV of populations and a JSON sidecar of fits.
    Rabi {
        #[arg(long, value_parser = parse_subspace)]
        subspace: Subspace,
        #[arg(long, default_value_t = 0)]
        control: usize,
        /// Defaults to the configured CR amplitude of the subspace.
        #[arg(long)]
        amp_ghz: Option<f64>,
        #[arg(long)]
        t_max_ns: Option<f64>,
        #[arg(long)]
        points: Option<usize>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Calibration store for the control preparation pulses.
        #[arg(long)]
        store: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Calibrate every gate, reusing the store when its config hash matches.
    Calibrate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        store: PathBuf,
    },
    /// Prepare the two-qutrit Bell state with calibrated pulses.
    Bell {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        shots: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-simulate a stored gate and report its fidelity.
    Gatefid {
        #[arg(long)]
        gate: String,
        #[arg(long)]
        store: PathBuf,
    },
}

fn parse_subspace(s: &str) -> Result<Subspace, String> {
    s.parse().map_err(|e: qutritcr::Error| e.to_string())
}

fn load_config(path: Option<&Path>, seed: Option<u64>) -> Result<ExperimentConfig> {
    let cfg = match path {
        Some(p) => ExperimentConfig::load(p).with_context(|| format!("reading config {}", p.display()))?,
        None => ExperimentConfig::default(),
    };
    let mut cfg = cfg.with_env_seed()?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn write(dir: &Path, name: &str, text: &str) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
}

/// Print to stdout, ignoring a closed pipe.
fn emit(text: &str) {
    use std::io::Write;
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn report(result: &ExperimentResult) -> Result<ExitCode> {
    for c in &result.checks {
        eprintln!("{} {} = {:.6} in [{}, {}]", if c.pass { "ok  " } else { "FAIL" }, c.name, c.value, c.lo, c.hi);
    }
    Ok(if result.passed() { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Rabi {
            subspace,
            control,
            amp_ghz,
            t_max_ns,
            points,
            config,
            store,
            out,
        } => {
            let cfg = load_config(config.as_deref(), None)?;
            let amp = amp_ghz.unwrap_or(match subspace {
                Subspace::S01 => cfg.calibration.cr01_amp_ghz,
                Subspace::S12 => cfg.calibration.cr12_amp_ghz,
            });
            let grid = linspace(t_max_ns.unwrap_or(cfg.rabi.t_max_ns), points.unwrap_or(cfg.rabi.points))?;
            let prep = match store {
                Some(path) => cmd_calibrate(&cfg, &path)?.0.control_prep()?,
                None => {
                    let one = |r: Rotation| StoreGate::Rotation(qutritcr::device::Transmon::One, r).calibrate(&cfg.device, &cfg.calibration);
                    ControlPrep {
                        x01: one(Rotation::x01_pi())?,
                        x12: one(Rotation::x12_pi())?,
                    }
                }
            };
            let run = cmd_rabi(&cfg, subspace, control, amp, &grid, &prep)?;
            let dir = out.unwrap_or_else(|| cfg.output.clone());
            let stem = format!("rabi{}_c{control}", subspace.label());
            write(&dir, &format!("{stem}.csv"), &run.csv)?;
            let json = run.result.to_json()?;
            write(&dir, &format!("{stem}.json"), &json)?;
            emit(&json);
            report(&run.result)
        }
        Command::Calibrate { config, store } => {
            let cfg = load_config(config.as_deref(), None)?;
            let (s, status) = cmd_calibrate(&cfg, &store)?;
            match status {
                StoreStatus::Reused => eprintln!("store up to date: {}", store.display()),
                StoreStatus::Created => eprintln!("created {}", store.display()),
                StoreStatus::Regenerated(why) => eprintln!("regenerated {} ({why})", store.display()),
            }
            emit(s.fidelity_table().trim_end());
            Ok(ExitCode::SUCCESS)
        }
        Command::Bell {
            config,
            store,
            shots,
            seed,
            out,
        } => {
            let mut cfg = load_config(config.as_deref(), seed)?;
            if let Some(n) = shots {
                cfg.shots = n;
            }
            cfg.validate()?;
            let (s, _) = cmd_calibrate(&cfg, &store)?;
            let result = cmd_bell(&cfg, &s)?;
            let json = result.to_json()?;
            write(&out.unwrap_or_else(|| cfg.output.clone()), "bell.json", &json)?;
            emit(&json);
            report(&result)
        }
        Command::Gatefid { gate, store } => {
            let s = qutritcr::experiments::CalibrationStore::load(&store).with_context(|| format!("reading store {}", store.display()))?;
            let g = s.gate(&gate)?;
            let sim = Simulator::new(&s.device, &s.options.evolve)?;
            let u = sim.unitary(&g.schedule)?.value;
            let fidelity = StoreGate::for_key(&g.name)?.fidelity(&u)?;
            let line = serde_json::json!({
                "gate": g.name,
                "duration_ns": g.duration(),
                "stored_fidelity": g.fidelity_to_target,
                "fidelity": fidelity,
            });
            emit(&line.to_string());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
