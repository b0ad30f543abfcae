//! TOML experiment documents.
//!
//! Every physical quantity carries its unit in the key name. Frequencies are
//! cyclic MHz unless the key says `_hz`; intensities are mW/µm².
//!
//! ```toml
//! gate = "ccz"
//! model = "reduced"
//! seed = 7
//!
//! [interactions]
//! kind = "explicit"
//! v_rr_mhz = [[0, 608, 608], [608, 0, 608], [608, 608, 0]]
//!
//! [pulse]
//! t1_us = 0.852
//! t2_us = 0.944
//! tau1_us = 0.32896
//! tau2_us = 0.29592
//! delta_r1_mhz = 6.270
//! delta_r2_mhz = 5.586
//! i1_mw_per_um2 = 0.390
//! ir_mw_per_um2 = 6.236
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::atomdata::{
    interaction_map, CouplingCalibration, HyperfineLevel, InteractionMap, InteractionSource, LevelScheme,
    DEFAULT_CONSISTENCY_TOL,
};
use crate::error::{Error, Result};
use crate::fidelity::GateSetup;
use crate::model::ModelKind;
use crate::optimizer::MinimizeOptions;
use crate::propagator::{EvolveOptions, DEFAULT_TOL, DEFAULT_TRACE_POINTS};
use crate::pulse::{ArpParams, DcrabEnvelope, PulseSchedule, DEFAULT_NOISE_DT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GateKind {
    Cz,
    Ccz,
    Cccz,
}

impl GateKind {
    pub fn n_qubits(self) -> usize {
        match self {
            GateKind::Cz => 2,
            GateKind::Ccz => 3,
            GateKind::Cccz => 4,
        }
    }

    /// Number of controls k of the CᵏZ gate.
    pub fn controls(self) -> usize {
        self.n_qubits() - 1
    }
}

/// Coupling constants at the reference intermediate detuning. Omitted
/// population coefficients default to Δ_Stark/Δ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationConfig {
    pub c_omega_mhz_um2_per_mw: f64,
    pub c_delta1_mhz_um2_per_mw: f64,
    pub c_deltar_mhz_um2_per_mw: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_pe1_um2_per_mw: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_per_um2_per_mw: Option<f64>,
    pub gamma_e_mhz: f64,
    pub gamma_r_mhz: f64,
    pub delta_int_mhz: f64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        let cs = CouplingCalibration::cesium();
        Self {
            c_omega_mhz_um2_per_mw: cs.c_omega,
            c_delta1_mhz_um2_per_mw: cs.c_delta1,
            c_deltar_mhz_um2_per_mw: cs.c_deltar,
            c_pe1_um2_per_mw: None,
            c_per_um2_per_mw: None,
            gamma_e_mhz: cs.gamma_e,
            gamma_r_mhz: cs.gamma_r,
            delta_int_mhz: cs.delta_int,
        }
    }
}

impl CalibrationConfig {
    pub fn build(&self) -> Result<CouplingCalibration> {
        let mut cal = CouplingCalibration::from_stark(
            self.c_omega_mhz_um2_per_mw,
            self.c_delta1_mhz_um2_per_mw,
            self.c_deltar_mhz_um2_per_mw,
            self.gamma_e_mhz,
            self.gamma_r_mhz,
            self.delta_int_mhz,
        )?;
        if let Some(v) = self.c_pe1_um2_per_mw {
            cal.c_pe1 = v;
        }
        if let Some(v) = self.c_per_um2_per_mw {
            cal.c_per = v;
        }
        cal.validate()?;
        Ok(cal)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelConfig {
    pub f_e: i32,
    pub m_fe: i32,
    pub energy_offset_mhz: f64,
    /// Lower-leg coupling per √intensity, MHz·µm/√mW.
    pub coeff_lower_mhz_um_per_sqrt_mw: f64,
    pub coeff_upper_mhz_um_per_sqrt_mw: f64,
}

/// Hyperfine-resolved intermediate manifold. With `derive_calibration` the
/// coupling constants come from the level sums; otherwise the sums are
/// checked against `[calibration]` within `consistency_tol`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifoldConfig {
    #[serde(default)]
    pub derive_calibration: bool,
    #[serde(default = "default_consistency_tol")]
    pub consistency_tol: f64,
    pub levels: Vec<LevelConfig>,
}

fn default_consistency_tol() -> f64 {
    DEFAULT_CONSISTENCY_TOL
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DcrabConfig {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub r: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseConfig {
    pub t1_us: f64,
    pub t2_us: f64,
    pub tau1_us: f64,
    pub tau2_us: f64,
    pub delta_r1_mhz: f64,
    pub delta_r2_mhz: f64,
    /// Peak lower-leg intensity of the analytic pulse. A dCRAB envelope
    /// multiplies this pulse, so the shaped peak can differ.
    pub i1_mw_per_um2: f64,
    pub ir_mw_per_um2: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dcrab: Option<DcrabConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericsConfig {
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_trace_points")]
    pub trace_points: usize,
}

fn default_tol() -> f64 {
    DEFAULT_TOL
}

fn default_trace_points() -> usize {
    DEFAULT_TRACE_POINTS
}

impl Default for NumericsConfig {
    fn default() -> Self {
        Self { tol: DEFAULT_TOL, trace_points: DEFAULT_TRACE_POINTS }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobustnessConfig {
    /// Half-width of the relative intensity grid.
    #[serde(default = "default_intensity_span")]
    pub intensity_rel: f64,
    #[serde(default = "default_detuning_span")]
    pub detuning_rel: f64,
    #[serde(default = "default_grid")]
    pub intensity_points: usize,
    #[serde(default = "default_grid")]
    pub detuning_points: usize,
}

fn default_intensity_span() -> f64 {
    0.03
}

fn default_detuning_span() -> f64 {
    0.01
}

fn default_grid() -> usize {
    7
}

impl Default for RobustnessConfig {
    fn default() -> Self {
        Self { intensity_rel: 0.03, detuning_rel: 0.01, intensity_points: 7, detuning_points: 7 }
    }
}

/// Interaction strengths per separation: either listed for every distance
/// (applied to every pair) or scaled from the base map as (d₀/d)⁶.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockadeConfig {
    pub distances_um: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_rr_mhz: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_distance_um: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub fwhm_hz: Vec<f64>,
    #[serde(default = "default_shots")]
    pub shots: usize,
    #[serde(default = "default_noise_dt")]
    pub dt_us: f64,
}

fn default_shots() -> usize {
    150
}

fn default_noise_dt() -> f64 {
    DEFAULT_NOISE_DT
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    #[serde(default = "default_max_evaluations")]
    pub max_evaluations: usize,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    #[serde(default = "default_initial_step")]
    pub initial_step: f64,
    #[serde(default = "default_xtol")]
    pub xtol: f64,
    #[serde(default = "default_ftol")]
    pub ftol: f64,
    #[serde(default = "default_super_iterations")]
    pub super_iterations: usize,
    #[serde(default = "default_modes")]
    pub n_modes: usize,
}

fn default_max_evaluations() -> usize {
    2000
}

fn default_restarts() -> usize {
    2
}

fn default_initial_step() -> f64 {
    0.1
}

fn default_xtol() -> f64 {
    1e-7
}

fn default_ftol() -> f64 {
    1e-12
}

fn default_super_iterations() -> usize {
    5
}

fn default_modes() -> usize {
    6
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            max_evaluations: default_max_evaluations(),
            restarts: default_restarts(),
            initial_step: default_initial_step(),
            xtol: default_xtol(),
            ftol: default_ftol(),
            super_iterations: default_super_iterations(),
            n_modes: default_modes(),
        }
    }
}

impl OptimizerConfig {
    pub fn minimize_options(&self, seed: u64) -> MinimizeOptions {
        MinimizeOptions {
            max_evaluations: self.max_evaluations,
            xtol: self.xtol,
            ftol: self.ftol,
            restarts: self.restarts,
            initial_step: self.initial_step,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub gate: GateKind,
    #[serde(default = "default_model")]
    pub model: ModelKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    /// Qubit splitting ω_q; informational only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qubit_splitting_mhz: Option<f64>,
    #[serde(default)]
    pub calibration: CalibrationConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifold: Option<ManifoldConfig>,
    pub interactions: InteractionSource,
    pub pulse: PulseConfig,
    #[serde(default)]
    pub numerics: NumericsConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub robustness: Option<RobustnessConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blockade: Option<BlockadeConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimizer: Option<OptimizerConfig>,
}

fn default_model() -> ModelKind {
    ModelKind::Reduced
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Serialization(e.to_string()))
    }

    /// SHA-256 of the canonical JSON form.
    pub fn digest(&self) -> Result<String> {
        let canonical = serde_json::to_vec(self)?;
        Ok(hex::encode(Sha256::digest(&canonical)))
    }

    /// Checks that sections resolve and the gate matches the atom count.
    pub fn validate(&self) -> Result<()> {
        let map = self.interaction_map()?;
        if map.n_atoms != self.gate.n_qubits() {
            return Err(Error::Config(format!(
                "gate {:?} needs {} atoms but the interaction map has {}",
                self.gate,
                self.gate.n_qubits(),
                map.n_atoms
            )));
        }
        let scheme = self.level_scheme()?;
        if self.model == ModelKind::Full && !scheme.has_manifold() {
            return Err(Error::Config("model = \"full\" needs a [manifold] section".into()));
        }
        self.schedule()?;
        if self.numerics.tol <= 0.0 {
            return Err(Error::Config("numerics.tol must be positive".into()));
        }
        if let Some(r) = &self.robustness {
            if r.intensity_points < 2 || r.detuning_points < 2 {
                return Err(Error::Config("robustness grids need at least 2 points per axis".into()));
            }
        }
        if let Some(b) = &self.blockade {
            if b.distances_um.is_empty() || b.distances_um.iter().any(|d| !(*d > 0.0)) {
                return Err(Error::Config("blockade.distances_um must be positive and nonempty".into()));
            }
            match (&b.v_rr_mhz, b.reference_distance_um) {
                (Some(v), None) if v.len() == b.distances_um.len() => {}
                (None, Some(d0)) if d0 > 0.0 => {}
                _ => {
                    return Err(Error::Config(
                        "blockade needs either v_rr_mhz (one per distance) or reference_distance_um".into(),
                    ))
                }
            }
        }
        if let Some(n) = &self.noise {
            if n.shots < 2 {
                return Err(Error::Config("noise.shots must be at least 2".into()));
            }
            if n.fwhm_hz.is_empty() || n.fwhm_hz.iter().any(|f| !(*f >= 0.0)) {
                return Err(Error::Config("noise.fwhm_hz must be nonnegative and nonempty".into()));
            }
            if !(n.dt_us > 0.0) {
                return Err(Error::Config("noise.dt_us must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn level_scheme(&self) -> Result<LevelScheme> {
        let Some(m) = &self.manifold else {
            return LevelScheme::reduced(self.calibration.build()?);
        };
        let levels: Vec<HyperfineLevel> = m
            .levels
            .iter()
            .map(|l| HyperfineLevel {
                f_e: l.f_e,
                m_fe: l.m_fe,
                energy_offset: l.energy_offset_mhz,
                coeff_lower: l.coeff_lower_mhz_um_per_sqrt_mw,
                coeff_upper: l.coeff_upper_mhz_um_per_sqrt_mw,
            })
            .collect();
        if m.derive_calibration {
            let c = &self.calibration;
            let mut scheme = LevelScheme::from_manifold(levels, c.gamma_e_mhz, c.gamma_r_mhz, c.delta_int_mhz)?;
            scheme.consistency_tol = m.consistency_tol;
            Ok(scheme)
        } else {
            LevelScheme::new(self.calibration.build()?, levels, m.consistency_tol)
        }
    }

    pub fn interaction_map(&self) -> Result<InteractionMap> {
        interaction_map(self.interactions.clone())
    }

    pub fn arp_params(&self) -> Result<ArpParams> {
        let p = &self.pulse;
        let scheme = self.level_scheme()?;
        ArpParams::from_intensities(
            &scheme.calibration,
            p.t1_us,
            p.t2_us,
            p.tau1_us,
            p.tau2_us,
            p.delta_r1_mhz,
            p.delta_r2_mhz,
            p.i1_mw_per_um2,
            p.ir_mw_per_um2,
        )
    }

    pub fn schedule(&self) -> Result<PulseSchedule> {
        let params = self.arp_params()?;
        match &self.pulse.dcrab {
            Some(d) => PulseSchedule::shaped(params, DcrabEnvelope::new(d.a.clone(), d.b.clone(), d.r.clone())?),
            None => PulseSchedule::analytic(params),
        }
    }

    pub fn evolve_options(&self) -> EvolveOptions {
        EvolveOptions { trace_points: self.numerics.trace_points, ..EvolveOptions::with_tol(self.numerics.tol) }
    }

    /// Simulation setup for the configured model, without noise or offsets.
    pub fn gate_setup(&self) -> Result<GateSetup> {
        let mut setup = GateSetup::new(self.model, self.level_scheme()?, self.schedule()?, self.interaction_map()?);
        setup.options = self.evolve_options();
        Ok(setup)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
gate = "cz"

[interactions]
kind = "explicit"
v_rr_mhz = [[0.0, 608.0], [608.0, 0.0]]

[pulse]
t1_us = 0.852
t2_us = 0.944
tau1_us = 0.329
tau2_us = 0.296
delta_r1_mhz = 6.270
delta_r2_mhz = 5.586
i1_mw_per_um2 = 0.390
ir_mw_per_um2 = 6.236
"#;

    #[test]
    fn minimal_document_uses_defaults() {
        let cfg = ExperimentConfig::from_toml_str(MINIMAL).unwrap();
        assert_eq!(cfg.model, ModelKind::Reduced);
        assert_eq!(cfg.numerics, NumericsConfig::default());
        assert_eq!(cfg.calibration.build().unwrap(), CouplingCalibration::cesium());
        assert!((cfg.arp_params().unwrap().omega0 - 4.334).abs() < 3e-3);
    }

    #[test]
    fn gate_must_match_atoms() {
        let text = MINIMAL.replace("gate = \"cz\"", "gate = \"ccz\"");
        assert!(matches!(ExperimentConfig::from_toml_str(&text), Err(Error::Config(_))));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = MINIMAL.replace("[pulse]", "[pulse]\nt3_us = 1.0");
        assert!(matches!(ExperimentConfig::from_toml_str(&text), Err(Error::Config(_))));
    }

    #[test]
    fn full_model_requires_manifold() {
        let text = MINIMAL.replace("gate = \"cz\"", "gate = \"cz\"\nmodel = \"full\"");
        assert!(matches!(ExperimentConfig::from_toml_str(&text), Err(Error::Config(_))));
    }

    #[test]
    fn round_trip_and_digest() {
        let cfg = ExperimentConfig::from_toml_str(MINIMAL).unwrap();
        let again = ExperimentConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(cfg.digest().unwrap(), again.digest().unwrap());
        let mut other = cfg.clone();
        other.seed = 1;
        assert_ne!(cfg.digest().unwrap(), other.digest().unwrap());
    }
}
