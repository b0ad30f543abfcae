//! Ready-made experiment documents for the published protocols.

use crate::atomdata::InteractionSource;
use crate::model::ModelKind;

use super::config::{
    BlockadeConfig, CalibrationConfig, DcrabConfig, ExperimentConfig, GateKind, LevelConfig, ManifoldConfig,
    NoiseConfig, NumericsConfig, OptimizerConfig, PulseConfig, RobustnessConfig,
};

/// Nearest-neighbour interaction at d = 4 µm, MHz.
pub const V_NN_MHZ: f64 = 608.0;
/// Square diagonal at 4√2 µm, MHz.
pub const V_SQUARE_DIAGONAL_MHZ: f64 = 119.0;
/// In-plane atoms to the out-of-plane apex, MHz.
pub const V_APEX_MHZ: f64 = 612.0;
pub const ATOM_SPACING_UM: f64 = 4.0;

/// Optimal analytic pulses: T₁, T₂ and widths τ = T/2.59, T/3.19.
pub fn optimal_analytic_pulse() -> PulseConfig {
    let (t1, t2) = (0.852, 0.944);
    PulseConfig {
        t1_us: t1,
        t2_us: t2,
        tau1_us: t1 / 2.59,
        tau2_us: t2 / 3.19,
        delta_r1_mhz: 6.270,
        delta_r2_mhz: 5.586,
        i1_mw_per_um2: 0.390,
        ir_mw_per_um2: 6.236,
        dcrab: None,
    }
}

/// Optimized six-mode envelope.
pub fn optimized_envelope() -> DcrabConfig {
    DcrabConfig {
        a: vec![-0.0859, 0.0145, 0.3612, -0.2605, 0.4847, 0.05360],
        b: vec![-0.7250, -1.7963, 0.9775, -0.4293, 0.5623, -0.5406],
        r: vec![0.3930, 0.0402, 0.0597, 0.3959, -0.2616, -0.2132],
    }
}

fn symmetric(n: usize, v: impl Fn(usize, usize) -> f64) -> InteractionSource {
    let v_rr_mhz = (0..n).map(|i| (0..n).map(|j| if i == j { 0.0 } else { v(i.min(j), i.max(j)) }).collect()).collect();
    InteractionSource::Explicit { v_rr_mhz }
}

pub fn uniform(n: usize, v_mhz: f64) -> InteractionSource {
    symmetric(n, |_, _| v_mhz)
}

/// Four atoms on a square, numbered around the perimeter.
pub fn square() -> InteractionSource {
    symmetric(4, |i, j| if j - i == 2 { V_SQUARE_DIAGONAL_MHZ } else { V_NN_MHZ })
}

/// Equilateral base (atoms 0–2) plus an apex (atom 3).
pub fn pyramid() -> InteractionSource {
    symmetric(4, |_, j| if j == 3 { V_APEX_MHZ } else { V_NN_MHZ })
}

fn base(gate: GateKind, interactions: InteractionSource, name: &str) -> ExperimentConfig {
    ExperimentConfig {
        name: Some(name.into()),
        gate,
        model: ModelKind::Reduced,
        seed: 0,
        output_dir: None,
        qubit_splitting_mhz: Some(9_192.631_770),
        calibration: CalibrationConfig::default(),
        manifold: None,
        interactions,
        pulse: optimal_analytic_pulse(),
        numerics: NumericsConfig::default(),
        robustness: None,
        blockade: None,
        noise: None,
        optimizer: None,
    }
}

pub fn ccz_analytic() -> ExperimentConfig {
    base(GateKind::Ccz, uniform(3, V_NN_MHZ), "ccz-analytic")
}

/// Envelope applied on top of the analytic pulses; the shaped peak lower-leg
/// intensity comes out near 0.235 mW/µm².
pub fn ccz_dcrab() -> ExperimentConfig {
    let mut cfg = base(GateKind::Ccz, uniform(3, V_NN_MHZ), "ccz-dcrab");
    cfg.pulse.dcrab = Some(optimized_envelope());
    cfg.robustness = Some(RobustnessConfig::default());
    cfg.blockade = Some(BlockadeConfig {
        distances_um: (0..=8).map(|i| 4.0 + 0.25 * i as f64).collect(),
        v_rr_mhz: None,
        reference_distance_um: Some(ATOM_SPACING_UM),
    });
    cfg.noise = Some(NoiseConfig { fwhm_hz: vec![0.0, 10.0, 100.0, 1000.0], shots: 150, dt_us: 1e-3 });
    cfg.optimizer = Some(OptimizerConfig::default());
    cfg
}

pub fn cccz_square() -> ExperimentConfig {
    base(GateKind::Cccz, square(), "cccz-square")
}

pub fn cccz_pyramid() -> ExperimentConfig {
    base(GateKind::Cccz, pyramid(), "cccz-pyramid")
}

pub fn cz() -> ExperimentConfig {
    let mut cfg = base(GateKind::Cz, uniform(2, V_NN_MHZ), "cz-arp");
    cfg.optimizer = Some(OptimizerConfig { max_evaluations: 6000, restarts: 4, ..OptimizerConfig::default() });
    cfg
}

/// One intermediate level at detuning `delta_mhz` whose couplings reproduce
/// c_omega and c_delta1 of the Cs calibration. Stand-in for the unpublished
/// hyperfine-resolved coefficients.
pub fn synthetic_manifold_at(delta_mhz: f64) -> ManifoldConfig {
    let lower = (4.0 * delta_mhz * 24.006f64).sqrt();
    let upper = 2.0 * delta_mhz * 2.780 / lower;
    ManifoldConfig {
        derive_calibration: true,
        consistency_tol: 1e-9,
        levels: vec![LevelConfig {
            f_e: 4,
            m_fe: 4,
            energy_offset_mhz: 0.0,
            coeff_lower_mhz_um_per_sqrt_mw: lower,
            coeff_upper_mhz_um_per_sqrt_mw: upper,
        }],
    }
}

pub fn synthetic_manifold() -> ManifoldConfig {
    synthetic_manifold_at(CalibrationConfig::default().delta_int_mhz)
}

/// Analytic CCZ on the synthetic single-level manifold at `delta_mhz`.
pub fn ccz_full_synthetic(model: ModelKind, delta_mhz: f64) -> ExperimentConfig {
    let mut cfg = base(GateKind::Ccz, uniform(3, V_NN_MHZ), "ccz-full-synthetic");
    cfg.model = model;
    cfg.calibration.delta_int_mhz = delta_mhz;
    cfg.manifold = Some(synthetic_manifold_at(delta_mhz));
    cfg
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        for cfg in [ccz_analytic(), ccz_dcrab(), cccz_square(), cccz_pyramid(), cz()] {
            cfg.validate().unwrap();
        }
    }

    #[test]
    fn geometries() {
        let sq = cccz_square().interaction_map().unwrap();
        assert_eq!(sq.get(0, 1), 608.0);
        assert_eq!(sq.get(0, 2), 119.0);
        assert_eq!(sq.get(1, 3), 119.0);
        assert_eq!(sq.get(3, 0), 608.0);
        let py = cccz_pyramid().interaction_map().unwrap();
        assert_eq!(py.get(0, 2), 608.0);
        assert_eq!(py.get(2, 3), 612.0);
    }

    #[test]
    fn synthetic_manifold_matches_calibration() {
        for delta in [16_300.0, 163_000.0] {
            let cal = ccz_full_synthetic(ModelKind::Full, delta).level_scheme().unwrap().calibration;
            assert!((cal.c_omega - 2.780).abs() < 1e-12);
            assert!((cal.c_delta1 - 24.006).abs() < 1e-12);
            assert_eq!(cal.delta_int, delta);
        }
    }
}
