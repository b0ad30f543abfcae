//! Gate runs, parameter sweeps, noise Monte Carlo and the CZ comparison.

use std::sync::Arc;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::atomdata::{InteractionMap, InteractionSource};
use crate::error::{Error, Result};
use crate::fidelity::{self, evaluate_gate, excitation_count, GateResult, GateSetup};
use crate::model::{DriveOffsets, ModelKind};
use crate::optimizer::{self, OptimizationReport};
use crate::pulse::{intensity_schedule, sample_phase_noise, two_photon_detuning, PhaseNoiseModel};
use crate::C64;

use super::circuit::{ccz_decomposition, max_deviation};
use super::config::{CalibrationConfig, DcrabConfig, ExperimentConfig, GateKind, OptimizerConfig};

fn untraced(mut setup: GateSetup) -> GateSetup {
    setup.options.trace_points = 0;
    setup
}

/// Simulates the configured gate, with superposition traces.
pub fn run_gate(cfg: &ExperimentConfig) -> Result<GateResult> {
    evaluate_gate(&cfg.gate_setup()?, true)
}

/// Four-qubit variant of [`run_gate`].
pub fn run_cccz(cfg: &ExperimentConfig) -> Result<GateResult> {
    if cfg.gate != GateKind::Cccz {
        return Err(Error::Config(format!("expected a CCCZ configuration, got {:?}", cfg.gate)));
    }
    run_gate(cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessPoint {
    pub intensity_rel: f64,
    pub detuning_rel: f64,
    pub fidelity: f64,
    pub corrective_phase: f64,
}

fn linspace(half_width: f64, points: usize) -> Vec<f64> {
    (0..points).map(|i| -half_width + 2.0 * half_width * i as f64 / (points - 1) as f64).collect()
}

/// Fidelity over a grid of fixed relative intensity and detuning offsets.
pub fn robustness_sweep(cfg: &ExperimentConfig) -> Result<Vec<RobustnessPoint>> {
    let grid = cfg.robustness.clone().unwrap_or_default();
    let base = untraced(cfg.gate_setup()?);
    let mut cells = Vec::new();
    for ei in linspace(grid.intensity_rel, grid.intensity_points) {
        for ed in linspace(grid.detuning_rel, grid.detuning_points) {
            cells.push((ei, ed));
        }
    }
    cells
        .par_iter()
        .map(|&(ei, ed)| {
            let mut setup = base.clone();
            setup.offsets = DriveOffsets { intensity_rel: ei, detuning_rel: ed };
            let r = evaluate_gate(&setup, true)?;
            Ok(RobustnessPoint {
                intensity_rel: ei,
                detuning_rel: ed,
                fidelity: r.fidelity,
                corrective_phase: r.corrective_phase,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockadePoint {
    pub distance_um: f64,
    /// Weakest pair interaction at this separation, MHz.
    pub v_min_mhz: f64,
    pub fidelity: f64,
    pub corrective_phase: f64,
}

fn map_at_distance(cfg: &ExperimentConfig, base: &InteractionMap, index: usize, d: f64) -> Result<InteractionMap> {
    let b = cfg.blockade.as_ref().ok_or_else(|| Error::Config("missing [blockade] section".into()))?;
    match (&b.v_rr_mhz, b.reference_distance_um) {
        (Some(v), _) => InteractionMap::uniform(base.n_atoms, v[index]),
        (None, Some(d0)) => {
            let s = (d0 / d).powi(6);
            InteractionMap::explicit(base.v_rr.iter().map(|row| row.iter().map(|v| v * s).collect()).collect())
        }
        (None, None) => Err(Error::Config("blockade needs v_rr_mhz or reference_distance_um".into())),
    }
}

/// Fidelity versus atom separation with the pulses held fixed and the
/// corrective phase re-optimized at every point.
pub fn blockade_sweep(cfg: &ExperimentConfig) -> Result<Vec<BlockadePoint>> {
    let b = cfg.blockade.as_ref().ok_or_else(|| Error::Config("missing [blockade] section".into()))?;
    let base = untraced(cfg.gate_setup()?);
    b.distances_um
        .par_iter()
        .enumerate()
        .map(|(i, &d)| {
            let map = map_at_distance(cfg, &base.map, i, d)?;
            let v_min_mhz = map.min_pair().unwrap_or(0.0);
            let setup = GateSetup { map, ..base.clone() };
            let r = evaluate_gate(&setup, true)?;
            Ok(BlockadePoint { distance_um: d, v_min_mhz, fidelity: r.fidelity, corrective_phase: r.corrective_phase })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoisePoint {
    pub fwhm_hz: f64,
    pub shots: usize,
    pub mean_fidelity: f64,
    pub std_fidelity: f64,
    pub fidelities: Vec<f64>,
}

/// Seed of shot `shot`; shared by every linewidth so that the shots differ
/// only through the noise amplitude.
pub fn shot_seed(seed: u64, shot: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(shot as u64)
}

/// Mean and spread of F over independent laser-phase realizations, reduced
/// model.
pub fn noise_monte_carlo(cfg: &ExperimentConfig) -> Result<Vec<NoisePoint>> {
    let noise = cfg.noise.as_ref().ok_or_else(|| Error::Config("missing [noise] section".into()))?;
    let mut base = untraced(cfg.gate_setup()?);
    base.kind = ModelKind::Reduced;
    let duration = base.schedule.duration();
    let noiseless = evaluate_gate(&base, true)?.fidelity;

    let mut out = Vec::with_capacity(noise.fwhm_hz.len());
    for &fwhm_hz in &noise.fwhm_hz {
        let fidelities: Vec<f64> = if fwhm_hz == 0.0 {
            vec![noiseless; noise.shots]
        } else {
            (0..noise.shots)
                .into_par_iter()
                .map(|shot| {
                    let model = PhaseNoiseModel {
                        fwhm: fwhm_hz * 1e-6,
                        dt_noise: noise.dt_us,
                        seed: shot_seed(cfg.seed, shot),
                    };
                    let realization = sample_phase_noise(&model, duration)?;
                    let setup = GateSetup { noise: Some(Arc::new(realization)), ..base.clone() };
                    Ok(evaluate_gate(&setup, true)?.fidelity)
                })
                .collect::<Result<_>>()?
        };
        let n = fidelities.len() as f64;
        let (mean, var) = if fwhm_hz == 0.0 {
            // Identical shots; summing would only add roundoff.
            (noiseless, 0.0)
        } else {
            let mean = fidelities.iter().sum::<f64>() / n;
            (mean, fidelities.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / (n - 1.0))
        };
        log::info!("noise {fwhm_hz} Hz: ⟨F⟩ = {mean:.6}");
        out.push(NoisePoint { fwhm_hz, shots: noise.shots, mean_fidelity: mean, std_fidelity: var.sqrt(), fidelities });
    }
    Ok(out)
}

/// Rewrites `cfg` so that it reproduces `setup` (pulses, detuning, envelope).
pub fn config_from_setup(cfg: &ExperimentConfig, setup: &GateSetup) -> ExperimentConfig {
    let cal = setup.scheme.calibration;
    let p = setup.schedule.params;
    let mut out = cfg.clone();
    if out.manifold.as_ref().is_some_and(|m| m.derive_calibration) {
        out.calibration.delta_int_mhz = cal.delta_int;
    } else {
        out.calibration = CalibrationConfig {
            c_omega_mhz_um2_per_mw: cal.c_omega,
            c_delta1_mhz_um2_per_mw: cal.c_delta1,
            c_deltar_mhz_um2_per_mw: cal.c_deltar,
            c_pe1_um2_per_mw: Some(cal.c_pe1),
            c_per_um2_per_mw: Some(cal.c_per),
            gamma_e_mhz: cal.gamma_e,
            gamma_r_mhz: cal.gamma_r,
            delta_int_mhz: cal.delta_int,
        };
    }
    out.pulse.t1_us = p.t1;
    out.pulse.t2_us = p.t2;
    out.pulse.tau1_us = p.tau1;
    out.pulse.tau2_us = p.tau2;
    out.pulse.delta_r1_mhz = p.delta_r1;
    out.pulse.delta_r2_mhz = p.delta_r2;
    out.pulse.i1_mw_per_um2 = p.peak_i1(&cal);
    out.pulse.ir_mw_per_um2 = p.ir;
    out.pulse.dcrab =
        setup.schedule.envelope.as_ref().map(|e| DcrabConfig { a: e.a.clone(), b: e.b.clone(), r: e.r.clone() });
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationRun {
    pub report: OptimizationReport,
    /// Configuration reproducing the optimum.
    pub optimized: ExperimentConfig,
    pub result: GateResult,
    pub duration_us: f64,
    /// Re-evaluation with the hyperfine-resolved model, when configured.
    pub full_model_fidelity: Option<f64>,
}

fn finish_optimization(cfg: &ExperimentConfig, report: OptimizationReport, best: GateSetup) -> Result<OptimizationRun> {
    let optimized = config_from_setup(cfg, &best);
    let mut reduced = optimized.clone();
    reduced.model = ModelKind::Reduced;
    let result = run_gate(&reduced)?;
    let full_model_fidelity = if optimized.level_scheme()?.has_manifold() {
        let mut full = optimized.clone();
        full.model = ModelKind::Full;
        full.numerics.trace_points = 0;
        Some(run_gate(&full)?.fidelity)
    } else {
        None
    };
    Ok(OptimizationRun { report, duration_us: best.schedule.duration(), optimized, result, full_model_fidelity })
}

fn optimizer_section(cfg: &ExperimentConfig) -> OptimizerConfig {
    cfg.optimizer.clone().unwrap_or_default()
}

/// Analytic-family optimization of the configured gate.
pub fn optimize_analytic(cfg: &ExperimentConfig) -> Result<OptimizationRun> {
    let opts = optimizer_section(cfg).minimize_options(cfg.seed);
    let (report, best) = optimizer::optimize_analytic(&cfg.gate_setup()?, &opts)?;
    finish_optimization(cfg, report, best)
}

/// dCRAB envelope search on top of the configured analytic pulses.
pub fn optimize_dcrab(cfg: &ExperimentConfig) -> Result<OptimizationRun> {
    let section = optimizer_section(cfg);
    let mut base_cfg = cfg.clone();
    base_cfg.pulse.dcrab = None;
    let base = base_cfg.gate_setup()?;
    let report = optimizer::dcrab_search(
        &base,
        section.n_modes,
        section.super_iterations,
        cfg.seed,
        &section.minimize_options(cfg.seed),
    )?;
    let env = optimizer::envelope_from(&report.best)?;
    let schedule = crate::pulse::PulseSchedule::shaped(base.schedule.params, env)?;
    let best = GateSetup { schedule, ..base };
    finish_optimization(cfg, report, best)
}

/// Analytic optimization of a two-atom CZ.
pub fn run_cz_optimization(cfg: &ExperimentConfig) -> Result<OptimizationRun> {
    if cfg.gate != GateKind::Cz {
        return Err(Error::Config(format!("expected a CZ configuration, got {:?}", cfg.gate)));
    }
    optimize_analytic(cfg)
}

/// Simulated CZ channel with its corrective rotation folded in:
/// diag(a_x e^{i n₁(x) φ*}).
pub fn cz_operator(result: &GateResult) -> Result<Array2<C64>> {
    if result.n_qubits != 2 {
        return Err(Error::Config(format!("expected a two-qubit result, got {} qubits", result.n_qubits)));
    }
    let mut u = Array2::zeros((4, 4));
    for x in 0..4 {
        let key = fidelity::bitstring(x, 2);
        let p = result.populations[&key];
        // φ_x already includes n₁(x)·φ*.
        u[[x, x]] = C64::from_polar(p.sqrt(), result.phases[&key]);
        debug_assert!(excitation_count(x) <= 2);
    }
    Ok(u)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    /// Largest entry deviation of the ideal-CZ circuit from the ideal CCZ.
    pub identity_error: f64,
    pub two_qubit_fidelity: f64,
    /// (F₂Q)⁶ estimate.
    pub six_gate_estimate: f64,
    pub result: GateResult,
}

/// Largest deviation tolerated by the ideal-gate identity check.
pub const DECOMPOSITION_IDENTITY_TOL: f64 = 1e-12;

/// Assembles the six-CZ circuit around a simulated CZ channel.
pub fn decompose_with(cz: &Array2<C64>, two_qubit_fidelity: f64) -> Result<Decomposition> {
    let circuit = ccz_decomposition();
    let ideal = circuit.assemble(&fidelity::ideal_ckz(1)?)?;
    let identity_error = max_deviation(&ideal, &fidelity::ideal_ckz(2)?);
    if !(identity_error < DECOMPOSITION_IDENTITY_TOL) {
        return Err(Error::Config(format!(
            "decomposition circuit does not reproduce the ideal CCZ (deviation {identity_error:e})"
        )));
    }
    let u = circuit.assemble(cz)?;
    let result = fidelity::operator_fidelity(&u, true)?;
    Ok(Decomposition { identity_error, two_qubit_fidelity, six_gate_estimate: two_qubit_fidelity.powi(6), result })
}

/// Simulates the configured CZ and scores the decomposed CCZ built from it.
pub fn run_decomposition(cfg: &ExperimentConfig) -> Result<Decomposition> {
    if cfg.gate != GateKind::Cz {
        return Err(Error::Config(format!("decomposition needs a CZ configuration, got {:?}", cfg.gate)));
    }
    let mut quiet = cfg.clone();
    quiet.numerics.trace_points = 0;
    let cz = run_gate(&quiet)?;
    decompose_with(&cz_operator(&cz)?, cz.fidelity)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleSample {
    pub t_us: f64,
    pub omega_mhz: f64,
    pub delta_r_mhz: f64,
    pub i1_mw_per_um2: f64,
    pub ir_mw_per_um2: f64,
    /// Laser two-photon detuning δ, MHz.
    pub delta_mhz: f64,
}

/// Control waveforms on a uniform grid.
pub fn export_schedule(cfg: &ExperimentConfig, points: usize) -> Result<Vec<ScheduleSample>> {
    let scheme = cfg.level_scheme()?;
    let schedule = cfg.schedule()?;
    let n = points.max(2);
    (0..n)
        .map(|i| {
            let t = schedule.duration() * i as f64 / (n - 1) as f64;
            let (i1, ir) = intensity_schedule(&scheme, &schedule, t)?;
            Ok(ScheduleSample {
                t_us: t,
                omega_mhz: schedule.omega(t),
                delta_r_mhz: schedule.delta_r(t),
                i1_mw_per_um2: i1,
                ir_mw_per_um2: ir,
                delta_mhz: two_photon_detuning(&scheme, &schedule, t)?,
            })
        })
        .collect()
}

/// Perfect-blockade copy of a configuration: every pair at `v_mhz`.
pub fn with_uniform_interactions(cfg: &ExperimentConfig, v_mhz: f64) -> ExperimentConfig {
    let n = cfg.gate.n_qubits();
    let mut out = cfg.clone();
    out.interactions = InteractionSource::Explicit {
        v_rr_mhz: (0..n).map(|i| (0..n).map(|j| if i == j { 0.0 } else { v_mhz }).collect()).collect(),
    };
    out
}
