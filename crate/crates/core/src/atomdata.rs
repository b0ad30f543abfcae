//! Atomic calibration data, intermediate-level manifolds and pairwise
//! Rydberg interactions.
//!
//! All frequencies are cyclic (MHz, the "/2π" value), intensities are in
//! mW/µm² and distances in µm.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Intensity-to-coupling conversion constants for one choice of
/// intermediate-state detuning.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingCalibration {
    /// Ω_R / √(I₁ᵉ·Iₑʳ), MHz per (mW/µm²).
    pub c_omega: f64,
    /// Δ₁ / I₁ᵉ, MHz·µm²/mW.
    pub c_delta1: f64,
    /// Δ_r / Iₑʳ, MHz·µm²/mW.
    pub c_deltar: f64,
    /// P_e¹ / I₁ᵉ, µm²/mW.
    pub c_pe1: f64,
    /// P_eʳ / Iₑʳ, µm²/mW.
    pub c_per: f64,
    /// Intermediate-state decay rate Γ_e, MHz.
    pub gamma_e: f64,
    /// Rydberg decay rate Γ_r, MHz.
    pub gamma_r: f64,
    /// Centre-of-mass intermediate detuning Δ, MHz.
    pub delta_int: f64,
}

impl CouplingCalibration {
    /// Builds a calibration whose intermediate-population coefficients follow
    /// from the adiabatic-elimination estimate P_e ≈ Δ_Stark / Δ.
    pub fn from_stark(
        c_omega: f64,
        c_delta1: f64,
        c_deltar: f64,
        gamma_e: f64,
        gamma_r: f64,
        delta_int: f64,
    ) -> Result<Self> {
        if delta_int == 0.0 {
            return Err(Error::Validation("intermediate detuning must be nonzero".into()));
        }
        let cal = Self {
            c_omega,
            c_delta1,
            c_deltar,
            c_pe1: c_delta1 / delta_int,
            c_per: c_deltar / delta_int,
            gamma_e,
            gamma_r,
            delta_int,
        };
        cal.validate()?;
        Ok(cal)
    }

    /// Cs 6S₁/₂ → 7P₁/₂ → 82S₁/₂ ladder at Δ = 16.3 GHz and a 10 G bias field.
    pub fn cesium() -> Self {
        Self::from_stark(2.780, 24.006, 0.643, 1.031, 0.280e-3, 16_300.0).expect("built-in calibration is valid")
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.c_omega,
            self.c_delta1,
            self.c_deltar,
            self.c_pe1,
            self.c_per,
            self.gamma_e,
            self.gamma_r,
            self.delta_int,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("calibration constants must be finite".into()));
        }
        if self.gamma_e < 0.0 || self.gamma_r < 0.0 {
            return Err(Error::Validation("decay rates must be nonnegative".into()));
        }
        if self.c_omega <= 0.0 {
            return Err(Error::Validation("c_omega must be positive".into()));
        }
        if self.delta_int == 0.0 {
            return Err(Error::Validation("intermediate detuning must be nonzero".into()));
        }
        if self.c_pe1 <= 0.0 || self.c_per <= 0.0 {
            return Err(Error::Validation("intermediate-population coefficients must be positive".into()));
        }
        Ok(())
    }

    #[inline]
    pub fn rabi(&self, i1: f64, ir: f64) -> f64 {
        self.c_omega * (i1 * ir).sqrt()
    }

    /// Rescales the far-detuned aggregates to a new intermediate detuning:
    /// couplings and Stark shifts go as 1/Δ, populations as 1/Δ².
    pub fn at_detuning(&self, delta_int: f64) -> Result<Self> {
        if delta_int == 0.0 || !delta_int.is_finite() {
            return Err(Error::Domain(format!("invalid intermediate detuning {delta_int}")));
        }
        let s = self.delta_int / delta_int;
        let cal = Self {
            c_omega: self.c_omega * s.abs(),
            c_delta1: self.c_delta1 * s,
            c_deltar: self.c_deltar * s,
            c_pe1: self.c_pe1 * s * s,
            c_per: self.c_per * s * s,
            delta_int,
            ..*self
        };
        cal.validate()?;
        Ok(cal)
    }
}

/// One hyperfine/Zeeman component |f_e, m_fe⟩ of the intermediate state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperfineLevel {
    pub f_e: i32,
    pub m_fe: i32,
    /// E(f_e, m_fe): offset from the centre of mass of |e⟩, MHz.
    pub energy_offset: f64,
    /// Ω₁^{fe,mfe}/√I₁ᵉ, MHz per √(mW/µm²). The sign carries the angular factor.
    pub coeff_lower: f64,
    /// Ω_{fe,mfe}ʳ/√Iₑʳ, MHz per √(mW/µm²).
    pub coeff_upper: f64,
}

impl HyperfineLevel {
    pub fn label(&self) -> (i32, i32) {
        (self.f_e, self.m_fe)
    }
}

/// Sums over the intermediate manifold that define the effective two-level
/// couplings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManifoldAggregates {
    pub c_omega: f64,
    pub c_delta1: f64,
    pub c_deltar: f64,
    pub c_pe1: f64,
    pub c_per: f64,
}

/// Calibration plus an optional hyperfine-resolved intermediate manifold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelScheme {
    pub calibration: CouplingCalibration,
    /// Empty for schemes that only support the reduced model.
    pub hyperfine_levels: Vec<HyperfineLevel>,
    /// Relative tolerance for aggregate consistency with the calibration.
    pub consistency_tol: f64,
}

pub const DEFAULT_CONSISTENCY_TOL: f64 = 0.01;

impl LevelScheme {
    pub fn reduced(calibration: CouplingCalibration) -> Result<Self> {
        Self::new(calibration, Vec::new(), DEFAULT_CONSISTENCY_TOL)
    }

    pub fn new(
        calibration: CouplingCalibration,
        hyperfine_levels: Vec<HyperfineLevel>,
        consistency_tol: f64,
    ) -> Result<Self> {
        calibration.validate()?;
        if !(consistency_tol >= 0.0) {
            return Err(Error::Validation("consistency tolerance must be nonnegative".into()));
        }
        let scheme = Self { calibration, hyperfine_levels, consistency_tol };
        scheme.check_levels()?;
        Ok(scheme)
    }

    /// Scheme whose calibration is derived entirely from the manifold
    /// aggregates, so the consistency check holds exactly.
    pub fn from_manifold(
        hyperfine_levels: Vec<HyperfineLevel>,
        gamma_e: f64,
        gamma_r: f64,
        delta_int: f64,
    ) -> Result<Self> {
        let agg = aggregates_of(&hyperfine_levels, delta_int)?;
        let calibration = CouplingCalibration {
            c_omega: agg.c_omega,
            c_delta1: agg.c_delta1,
            c_deltar: agg.c_deltar,
            c_pe1: agg.c_pe1,
            c_per: agg.c_per,
            gamma_e,
            gamma_r,
            delta_int,
        };
        Self::new(calibration, hyperfine_levels, DEFAULT_CONSISTENCY_TOL)
    }

    pub fn has_manifold(&self) -> bool {
        !self.hyperfine_levels.is_empty()
    }

    pub fn aggregates(&self) -> Option<ManifoldAggregates> {
        if self.hyperfine_levels.is_empty() {
            return None;
        }
        aggregates_of(&self.hyperfine_levels, self.calibration.delta_int).ok()
    }

    fn check_levels(&self) -> Result<()> {
        if self.hyperfine_levels.is_empty() {
            return Ok(());
        }
        let mut labels: Vec<_> = self.hyperfine_levels.iter().map(|l| l.label()).collect();
        labels.sort_unstable();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Validation("hyperfine level labels must be unique".into()));
        }
        if self
            .hyperfine_levels
            .iter()
            .any(|l| !(l.energy_offset.is_finite() && l.coeff_lower.is_finite() && l.coeff_upper.is_finite()))
        {
            return Err(Error::Validation("hyperfine level data must be finite".into()));
        }
        let agg = aggregates_of(&self.hyperfine_levels, self.calibration.delta_int)?;
        let cal = &self.calibration;
        for (name, got, want) in [
            ("c_omega", agg.c_omega, cal.c_omega),
            ("c_delta1", agg.c_delta1, cal.c_delta1),
            ("c_deltar", agg.c_deltar, cal.c_deltar),
        ] {
            let rel = ((got - want) / want).abs();
            if !(rel <= self.consistency_tol) {
                return Err(Error::Validation(format!(
                    "manifold aggregate {name} = {got:.6} disagrees with calibration {want:.6} \
                     (relative {rel:.3e} > {:.3e})",
                    self.consistency_tol
                )));
            }
        }
        Ok(())
    }

    /// Moves the scheme to a different intermediate detuning. Manifold-backed
    /// schemes recompute their aggregates; others rescale the calibration.
    pub fn with_intermediate_detuning(&self, delta_int: f64) -> Result<Self> {
        if self.hyperfine_levels.is_empty() {
            return Self::new(self.calibration.at_detuning(delta_int)?, Vec::new(), self.consistency_tol);
        }
        let agg = aggregates_of(&self.hyperfine_levels, delta_int)?;
        let calibration = CouplingCalibration {
            c_omega: agg.c_omega,
            c_delta1: agg.c_delta1,
            c_deltar: agg.c_deltar,
            c_pe1: agg.c_pe1,
            c_per: agg.c_per,
            delta_int,
            ..self.calibration
        };
        Self::new(calibration, self.hyperfine_levels.clone(), self.consistency_tol)
    }

    /// P_e¹ and P_eʳ per unit intensity, from the manifold when present.
    pub fn population_coefficients(&self) -> (f64, f64) {
        match self.aggregates() {
            Some(agg) => (agg.c_pe1, agg.c_per),
            None => (self.calibration.c_pe1, self.calibration.c_per),
        }
    }
}

fn aggregates_of(levels: &[HyperfineLevel], delta_int: f64) -> Result<ManifoldAggregates> {
    let mut agg = ManifoldAggregates { c_omega: 0.0, c_delta1: 0.0, c_deltar: 0.0, c_pe1: 0.0, c_per: 0.0 };
    for level in levels {
        let det = delta_int - level.energy_offset;
        if det == 0.0 {
            return Err(Error::Singularity { f_e: level.f_e, m_fe: level.m_fe });
        }
        let (lo, up) = (level.coeff_lower, level.coeff_upper);
        agg.c_omega += lo * up / (2.0 * det);
        agg.c_delta1 += lo * lo / (4.0 * det);
        agg.c_deltar += up * up / (4.0 * det);
        agg.c_pe1 += lo * lo / (4.0 * det * det);
        agg.c_per += up * up / (4.0 * det * det);
    }
    Ok(agg)
}

fn check_intensities(i1: f64, ir: f64) -> Result<()> {
    if !(i1 >= 0.0 && ir >= 0.0) {
        return Err(Error::Domain(format!("intensities must be nonnegative (got {i1}, {ir})")));
    }
    Ok(())
}

/// Effective two-photon Rabi frequency c_omega·√(I₁ᵉ·Iₑʳ), MHz.
pub fn effective_rabi(cal: &CouplingCalibration, i1: f64, ir: f64) -> Result<f64> {
    check_intensities(i1, ir)?;
    Ok(cal.rabi(i1, ir))
}

/// AC Stark shifts (Δ₁, Δ_r) of |1⟩ and |r⟩, MHz.
pub fn stark_shifts(cal: &CouplingCalibration, i1: f64, ir: f64) -> Result<(f64, f64)> {
    check_intensities(i1, ir)?;
    Ok((cal.c_delta1 * i1, cal.c_deltar * ir))
}

/// Adiabatic-elimination estimate of the intermediate-state population
/// contributed by each leg, (P_e¹, P_eʳ).
pub fn intermediate_populations(scheme: &LevelScheme, i1: f64, ir: f64) -> Result<(f64, f64)> {
    check_intensities(i1, ir)?;
    if scheme.hyperfine_levels.is_empty() {
        let cal = &scheme.calibration;
        return Ok((cal.c_pe1 * i1, cal.c_per * ir));
    }
    let agg = aggregates_of(&scheme.hyperfine_levels, scheme.calibration.delta_int)?;
    Ok((agg.c_pe1 * i1, agg.c_per * ir))
}

/// Origin of an interaction map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InteractionSource {
    Explicit { v_rr_mhz: Vec<Vec<f64>> },
    PowerLaw { c6_mhz_um6: f64, positions_um: Vec<[f64; 3]> },
}

/// Symmetric matrix of pairwise Rydberg interactions V_rr^{ij}, MHz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionMap {
    pub n_atoms: usize,
    pub v_rr: Vec<Vec<f64>>,
    pub source: InteractionSource,
}

impl InteractionMap {
    pub fn explicit(v_rr: Vec<Vec<f64>>) -> Result<Self> {
        interaction_map(InteractionSource::Explicit { v_rr_mhz: v_rr })
    }

    pub fn power_law(c6: f64, positions: Vec<[f64; 3]>) -> Result<Self> {
        interaction_map(InteractionSource::PowerLaw { c6_mhz_um6: c6, positions_um: positions })
    }

    /// Every pair at the same strength.
    pub fn uniform(n_atoms: usize, v: f64) -> Result<Self> {
        let v_rr = (0..n_atoms).map(|i| (0..n_atoms).map(|j| if i == j { 0.0 } else { v }).collect()).collect();
        Self::explicit(v_rr)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.v_rr[i][j]
    }

    /// Interaction matrix among the listed atoms, in the listed order.
    pub fn restricted(&self, atoms: &[usize]) -> Vec<Vec<f64>> {
        atoms.iter().map(|&i| atoms.iter().map(|&j| self.v_rr[i][j]).collect()).collect()
    }

    pub fn min_pair(&self) -> Option<f64> {
        let mut min: Option<f64> = None;
        for i in 0..self.n_atoms {
            for j in 0..i {
                let v = self.v_rr[i][j];
                min = Some(min.map_or(v, |m| m.min(v)));
            }
        }
        min
    }
}

/// Validates or builds an [`InteractionMap`].
pub fn interaction_map(source: InteractionSource) -> Result<InteractionMap> {
    let v_rr = match &source {
        InteractionSource::Explicit { v_rr_mhz } => {
            let n = v_rr_mhz.len();
            for (i, row) in v_rr_mhz.iter().enumerate() {
                if row.len() != n {
                    return Err(Error::Validation(format!(
                        "interaction matrix row {i} has {} entries, expected {n}",
                        row.len()
                    )));
                }
                if row.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Validation("interaction strengths must be finite".into()));
                }
                if row[i] != 0.0 {
                    return Err(Error::Validation(format!("diagonal entry {i} must be zero")));
                }
            }
            let asymmetric =
                (0..n).flat_map(|i| (0..i).map(move |j| (i, j))).find(|&(i, j)| v_rr_mhz[i][j] != v_rr_mhz[j][i]);
            if let Some((i, j)) = asymmetric {
                return Err(Error::Validation(format!("interaction matrix is not symmetric at ({i}, {j})")));
            }
            v_rr_mhz.clone()
        }
        InteractionSource::PowerLaw { c6_mhz_um6, positions_um } => {
            if !c6_mhz_um6.is_finite() {
                return Err(Error::Domain("c6 must be finite".into()));
            }
            let n = positions_um.len();
            let mut v = vec![vec![0.0; n]; n];
            for i in 0..n {
                for j in 0..i {
                    let d2: f64 = (0..3).map(|k| (positions_um[i][k] - positions_um[j][k]).powi(2)).sum();
                    if d2 == 0.0 {
                        return Err(Error::Domain(format!("atoms {j} and {i} coincide")));
                    }
                    let vij = c6_mhz_um6 / d2.powi(3);
                    v[i][j] = vij;
                    v[j][i] = vij;
                }
            }
            v
        }
    };
    let n_atoms = v_rr.len();
    if n_atoms < 2 {
        return Err(Error::Validation("an interaction map needs at least two atoms".into()));
    }
    Ok(InteractionMap { n_atoms, v_rr, source })
}
