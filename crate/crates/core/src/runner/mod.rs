//! Experiment documents, presets and the command dispatcher behind the CLI.

pub mod circuit;
pub mod config;
pub mod experiments;
pub mod presets;
pub mod record;

use std::io::Write;
use std::path::Path;

use chrono::Utc;
use serde::Serialize;

use crate::error::Result;

pub use config::{ExperimentConfig, GateKind};
pub use record::{Environment, OutputDir, RunRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    OptimizeAnalytic,
    OptimizeDcrab,
    SweepRobustness,
    SweepBlockade,
    NoiseMc,
    OptimizeCz,
    Decompose,
    ExportSchedule,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::OptimizeAnalytic => "optimize-analytic",
            Command::OptimizeDcrab => "optimize-dcrab",
            Command::SweepRobustness => "sweep-robustness",
            Command::SweepBlockade => "sweep-blockade",
            Command::NoiseMc => "noise-mc",
            Command::OptimizeCz => "optimize-cz",
            Command::Decompose => "decompose",
            Command::ExportSchedule => "export-schedule",
        }
    }
}

fn write_rows<T: Serialize>(out: &mut OutputDir, name: &str, rows: &[T]) -> Result<()> {
    out.write(name, |w| {
        let mut w = csv::Writer::from_writer(w);
        for r in rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    })
}

fn write_toml(out: &mut OutputDir, name: &str, cfg: &ExperimentConfig) -> Result<()> {
    let text = cfg.to_toml_string()?;
    out.write(name, |mut w| {
        w.write_all(text.as_bytes())?;
        Ok(())
    })
}

fn optimization_files(out: &mut OutputDir, run: &experiments::OptimizationRun) -> Result<serde_json::Value> {
    out.write("history.csv", |w| run.report.write_history_csv(w))?;
    write_toml(out, "optimized.toml", &run.optimized)?;
    Ok(serde_json::to_value(run)?)
}

/// Runs `command` on `cfg`, writing artifacts and `record.json` under `out`
/// (nothing is written when `out` is `None`).
pub fn execute(command: Command, cfg: &ExperimentConfig, out: Option<&Path>) -> Result<RunRecord> {
    cfg.validate()?;
    let started_at = Utc::now();
    let mut dir = OutputDir::new(out)?;

    let results = match command {
        Command::Simulate => {
            let r = experiments::run_gate(cfg)?;
            dir.write("trace_gate.csv", |w| r.trace.write_csv(w))?;
            let schedule = cfg.schedule()?;
            let scheme = cfg.level_scheme()?;
            serde_json::json!({
                "gate": r,
                "duration_us": schedule.duration(),
                "peak_omega_mhz": schedule.peak_omega(4001),
                "peak_i1_mw_per_um2": schedule.params.peak_i1(&scheme.calibration),
            })
        }
        Command::OptimizeAnalytic => optimization_files(&mut dir, &experiments::optimize_analytic(cfg)?)?,
        Command::OptimizeDcrab => optimization_files(&mut dir, &experiments::optimize_dcrab(cfg)?)?,
        Command::OptimizeCz => optimization_files(&mut dir, &experiments::run_cz_optimization(cfg)?)?,
        Command::SweepRobustness => {
            let rows = experiments::robustness_sweep(cfg)?;
            write_rows(&mut dir, "sweep_robustness.csv", &rows)?;
            let (lo, hi) = rows
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.fidelity), b.max(p.fidelity)));
            serde_json::json!({ "min_fidelity": lo, "max_fidelity": hi, "points": rows })
        }
        Command::SweepBlockade => {
            let rows = experiments::blockade_sweep(cfg)?;
            write_rows(&mut dir, "sweep_blockade.csv", &rows)?;
            serde_json::to_value(rows)?
        }
        Command::NoiseMc => {
            let points = experiments::noise_monte_carlo(cfg)?;
            #[derive(Serialize)]
            struct Row {
                fwhm_hz: f64,
                shot: usize,
                fidelity: f64,
            }
            let rows: Vec<Row> = points
                .iter()
                .flat_map(|p| {
                    p.fidelities.iter().enumerate().map(|(shot, &fidelity)| Row { fwhm_hz: p.fwhm_hz, shot, fidelity })
                })
                .collect();
            write_rows(&mut dir, "mc_noise.csv", &rows)?;
            serde_json::to_value(points)?
        }
        Command::Decompose => serde_json::to_value(experiments::run_decomposition(cfg)?)?,
        Command::ExportSchedule => {
            let rows = experiments::export_schedule(cfg, cfg.numerics.trace_points)?;
            write_rows(&mut dir, "schedule.csv", &rows)?;
            serde_json::json!({ "samples": rows.len(), "duration_us": cfg.schedule()?.duration() })
        }
    };

    let record = RunRecord {
        experiment: command.name().into(),
        config_digest: cfg.digest()?,
        seed: cfg.seed,
        started_at,
        finished_at: Utc::now(),
        environment: Environment::current(),
        config: cfg.clone(),
        results,
        files: Vec::new(),
    };
    dir.finish(record)
}
