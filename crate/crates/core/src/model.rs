//! Time-dependent non-Hermitian Hamiltonians for one computational input.
//!
//! Atoms in |0⟩ are uncoupled and never enter the basis; a block holds the
//! `n_active` atoms that start in |1⟩. Basis ordering is atom-major: the
//! index of a product state is Σ_a level_a · L^{n−1−a}, so atom 0 is the most
//! significant digit. Level 0 is always |1⟩ and level L−1 is always |r⟩.
//!
//! Matrices are returned in MHz (cyclic); the propagator applies 2π.

use std::sync::Arc;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::atomdata::{InteractionMap, LevelScheme};
use crate::error::{Error, Result};
use crate::propagator::{Generator, Window};
use crate::pulse::{lower_intensity, NoiseRealization, PulseSchedule};
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// Every intermediate hyperfine level explicit.
    Full,
    /// Intermediate levels adiabatically eliminated into |1⟩, |r⟩ terms.
    Reduced,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AtomLevel {
    Qubit,
    Intermediate { f_e: i32, m_fe: i32 },
    Rydberg,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisSpec {
    pub n_active: usize,
    pub levels: Vec<AtomLevel>,
}

impl BasisSpec {
    pub fn reduced(n_active: usize) -> Self {
        Self { n_active, levels: vec![AtomLevel::Qubit, AtomLevel::Rydberg] }
    }

    pub fn full(n_active: usize, scheme: &LevelScheme) -> Self {
        let mut levels = vec![AtomLevel::Qubit];
        levels.extend(scheme.hyperfine_levels.iter().map(|l| AtomLevel::Intermediate { f_e: l.f_e, m_fe: l.m_fe }));
        levels.push(AtomLevel::Rydberg);
        Self { n_active, levels }
    }

    #[inline]
    pub fn levels_per_atom(&self) -> usize {
        self.levels.len()
    }

    pub fn dim(&self) -> usize {
        self.levels_per_atom().pow(self.n_active as u32)
    }

    /// Product-state index of per-atom levels.
    pub fn index_of(&self, levels: &[usize]) -> usize {
        let l = self.levels_per_atom();
        levels.iter().fold(0, |acc, &lv| acc * l + lv)
    }

    pub fn decode(&self, mut index: usize) -> Vec<usize> {
        let l = self.levels_per_atom();
        let mut out = vec![0; self.n_active];
        for slot in out.iter_mut().rev() {
            *slot = index % l;
            index /= l;
        }
        out
    }

    /// Index of the all-|1⟩ state.
    pub fn qubit_index(&self) -> usize {
        0
    }
}

/// Fixed relative deviations of the laser controls over the whole pulse.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DriveOffsets {
    /// Relative change of I₁ᵉ(t).
    pub intensity_rel: f64,
    /// Relative change of the two-photon detuning δ(t).
    pub detuning_rel: f64,
}

/// Instantaneous control values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveSample {
    /// Signed effective Rabi frequency, MHz.
    pub omega: f64,
    pub i1: f64,
    pub ir: f64,
    pub delta1: f64,
    pub deltar: f64,
    /// Laser two-photon detuning δ, MHz.
    pub delta: f64,
    /// Effective detuning seen by the atoms, δ + Δ₁ − Δ_r.
    pub delta_r: f64,
    pub pe1: f64,
    pub per: f64,
    pub phi1: f64,
    pub phi2: f64,
}

fn drive_sample(
    scheme: &LevelScheme,
    schedule: &PulseSchedule,
    noise: Option<&NoiseRealization>,
    offsets: DriveOffsets,
    t: f64,
    window: Window,
) -> DriveSample {
    let cal = &scheme.calibration;
    let pulse = schedule.pulse_at(window.mid());
    let omega_nom = schedule.omega_in(pulse, t);
    let ir = schedule.params.ir;
    let i1_nom = lower_intensity(cal, omega_nom, ir);
    let deltar = cal.c_deltar * ir;
    let delta_nom = schedule.delta_r_in(pulse, t) - cal.c_delta1 * i1_nom + deltar;

    let i_scale = 1.0 + offsets.intensity_rel;
    let i1 = i1_nom * i_scale;
    let omega = omega_nom * i_scale.sqrt();
    let delta1 = cal.c_delta1 * i1;
    let delta = delta_nom * (1.0 + offsets.detuning_rel);
    let (c_pe1, c_per) = scheme.population_coefficients();
    let (phi1, phi2) = match noise {
        Some(n) => {
            let k = n.index_at(window.mid());
            (n.phi1[k], n.phi2[k])
        }
        None => (0.0, 0.0),
    };
    DriveSample {
        omega,
        i1,
        ir,
        delta1,
        deltar,
        delta,
        delta_r: delta + delta1 - deltar,
        pe1: c_pe1 * i1,
        per: c_per * ir,
        phi1,
        phi2,
    }
}

/// Sparse single-atom Hamiltonian: (row, col, value) triples in MHz.
type Entries = Vec<(usize, usize, C64)>;

fn reduced_entries(scheme: &LevelScheme, d: &DriveSample) -> Entries {
    let cal = &scheme.calibration;
    let coupling = C64::from_polar(d.omega / 2.0, d.phi1 + d.phi2);
    vec![
        (0, 0, C64::new(d.delta1, -d.pe1 * cal.gamma_e / 2.0)),
        (1, 1, C64::new(d.deltar - d.delta, -(cal.gamma_r + d.per * cal.gamma_e) / 2.0)),
        (1, 0, coupling),
        (0, 1, coupling.conj()),
    ]
}

fn full_entries(scheme: &LevelScheme, d: &DriveSample) -> Entries {
    let cal = &scheme.calibration;
    let m = scheme.hyperfine_levels.len();
    let r = m + 1;
    let lower_amp = d.omega.signum() * d.i1.sqrt();
    let upper_amp = d.ir.sqrt();
    let lower_phase = C64::from_polar(1.0, d.phi1);
    let upper_phase = C64::from_polar(1.0, d.phi2);
    let mut out = Vec::with_capacity(3 * m + 2);
    out.push((0, 0, C64::new(0.0, 0.0)));
    out.push((r, r, C64::new(-d.delta, -cal.gamma_r / 2.0)));
    for (j, level) in scheme.hyperfine_levels.iter().enumerate() {
        let e = j + 1;
        out.push((e, e, C64::new(-(cal.delta_int - level.energy_offset), -cal.gamma_e / 2.0)));
        let lo = lower_phase * (level.coeff_lower * lower_amp / 2.0);
        if lo != C64::new(0.0, 0.0) {
            out.push((e, 0, lo));
            out.push((0, e, lo.conj()));
        }
        let up = upper_phase * (level.coeff_upper * upper_amp / 2.0);
        if up != C64::new(0.0, 0.0) {
            out.push((r, e, up));
            out.push((e, r, up.conj()));
        }
    }
    out
}

fn dense(dim: usize, entries: &Entries) -> Array2<C64> {
    let mut m = Array2::zeros((dim, dim));
    for &(i, j, v) in entries {
        m[[i, j]] += v;
    }
    m
}

/// Single-atom Hamiltonian over {|1⟩, e-levels…, |r⟩} at time `t`.
pub fn single_atom_full(
    scheme: &LevelScheme,
    schedule: &PulseSchedule,
    noise: Option<&NoiseRealization>,
    t: f64,
) -> Result<Array2<C64>> {
    if !scheme.has_manifold() {
        return Err(Error::Config("the full model needs a hyperfine-resolved intermediate manifold".into()));
    }
    let d = drive_sample(scheme, schedule, noise, DriveOffsets::default(), t, Window::at(t));
    Ok(dense(scheme.hyperfine_levels.len() + 2, &full_entries(scheme, &d)))
}

/// Single-atom reduced Hamiltonian over {|1⟩, |r⟩} at time `t`.
pub fn single_atom_reduced(
    scheme: &LevelScheme,
    schedule: &PulseSchedule,
    noise: Option<&NoiseRealization>,
    t: f64,
) -> Array2<C64> {
    let d = drive_sample(scheme, schedule, noise, DriveOffsets::default(), t, Window::at(t));
    dense(2, &reduced_entries(scheme, &d))
}

/// Hamiltonian of one input block: identical single-atom drives on every
/// active atom plus pairwise interactions on doubly-Rydberg components.
#[derive(Debug, Clone)]
pub struct EnsembleModel {
    pub basis: BasisSpec,
    pub kind: ModelKind,
    pub scheme: LevelScheme,
    pub schedule: PulseSchedule,
    /// Interactions among the active atoms, MHz.
    pub interactions: Vec<Vec<f64>>,
    pub noise: Option<Arc<NoiseRealization>>,
    pub offsets: DriveOffsets,
    dd_diag: Vec<f64>,
    n_qubit: Vec<u8>,
    n_inter: Vec<u8>,
    n_ryd: Vec<u8>,
}

impl EnsembleModel {
    pub fn new(
        kind: ModelKind,
        scheme: LevelScheme,
        schedule: PulseSchedule,
        interactions: Vec<Vec<f64>>,
        noise: Option<Arc<NoiseRealization>>,
        offsets: DriveOffsets,
    ) -> Result<Self> {
        let n = interactions.len();
        if n == 0 {
            return Err(Error::Assembly("a block needs at least one active atom".into()));
        }
        if interactions.iter().any(|row| row.len() != n) {
            return Err(Error::Assembly("interaction matrix does not match the number of active atoms".into()));
        }
        let basis = match kind {
            ModelKind::Reduced => BasisSpec::reduced(n),
            ModelKind::Full => {
                if !scheme.has_manifold() {
                    return Err(Error::Config(
                        "the full model needs a hyperfine-resolved intermediate manifold".into(),
                    ));
                }
                BasisSpec::full(n, &scheme)
            }
        };
        let dim = basis.dim();
        let l = basis.levels_per_atom();
        let mut dd_diag = vec![0.0; dim];
        let mut n_qubit = vec![0u8; dim];
        let mut n_inter = vec![0u8; dim];
        let mut n_ryd = vec![0u8; dim];
        for idx in 0..dim {
            let levels = basis.decode(idx);
            for (a, &la) in levels.iter().enumerate() {
                if la == 0 {
                    n_qubit[idx] += 1;
                } else if la == l - 1 {
                    n_ryd[idx] += 1;
                    for (b, &lb) in levels.iter().enumerate().take(a) {
                        if lb == l - 1 {
                            dd_diag[idx] += interactions[a][b];
                        }
                    }
                } else {
                    n_inter[idx] += 1;
                }
            }
        }
        Ok(Self { basis, kind, scheme, schedule, interactions, noise, offsets, dd_diag, n_qubit, n_inter, n_ryd })
    }

    pub fn drive(&self, t: f64, window: Window) -> DriveSample {
        drive_sample(&self.scheme, &self.schedule, self.noise.as_deref(), self.offsets, t, window)
    }

    fn entries(&self, t: f64, window: Window) -> Entries {
        let d = self.drive(t, window);
        match self.kind {
            ModelKind::Reduced => reduced_entries(&self.scheme, &d),
            ModelKind::Full => full_entries(&self.scheme, &d),
        }
    }

    /// Single-atom block Hamiltonian at `t`, MHz.
    pub fn single_atom(&self, t: f64) -> Array2<C64> {
        dense(self.basis.levels_per_atom(), &self.entries(t, Window::at(t)))
    }

    /// Pair-interaction energy of each basis state, MHz.
    pub fn interaction_diagonal(&self) -> &[f64] {
        &self.dd_diag
    }

    /// Dense block Hamiltonian at `t`, MHz.
    pub fn hamiltonian(&self, t: f64) -> Array2<C64> {
        let dim = self.basis.dim();
        let mut m = Array2::zeros((dim, dim));
        let mut e = vec![C64::new(0.0, 0.0); dim];
        let mut col = vec![C64::new(0.0, 0.0); dim];
        for j in 0..dim {
            e.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
            e[j] = C64::new(1.0, 0.0);
            self.apply(t, Window::at(t), &e, &mut col);
            for i in 0..dim {
                m[[i, j]] = col[i];
            }
        }
        m
    }
}

impl Generator for EnsembleModel {
    fn dim(&self) -> usize {
        self.basis.dim()
    }

    fn apply(&self, t: f64, window: Window, psi: &[C64], out: &mut [C64]) {
        let entries = self.entries(t, window);
        let l = self.basis.levels_per_atom();
        let n = self.basis.n_active;
        let dim = psi.len();
        for i in 0..dim {
            out[i] = psi[i] * self.dd_diag[i];
        }
        for atom in 0..n {
            let stride = l.pow((n - 1 - atom) as u32);
            let block = stride * l;
            for hi in (0..dim).step_by(block) {
                for lo in 0..stride {
                    let base = hi + lo;
                    for &(r, c, v) in &entries {
                        out[base + r * stride] += v * psi[base + c * stride];
                    }
                }
            }
        }
    }

    fn breakpoints(&self, t0: f64, t1: f64) -> Vec<f64> {
        let mut out = vec![self.schedule.params.t1];
        if let Some(noise) = &self.noise {
            out.extend(noise.grid_points(t0, t1));
        }
        out.retain(|&t| t > t0 && t < t1);
        out
    }

    fn intermediate_population(&self, t: f64, window: Window, psi: &[C64]) -> f64 {
        match self.kind {
            ModelKind::Full => psi.iter().zip(&self.n_inter).map(|(a, &k)| a.norm_sqr() * k as f64).sum(),
            ModelKind::Reduced => {
                let d = self.drive(t, window);
                psi.iter()
                    .enumerate()
                    .map(|(i, a)| a.norm_sqr() * (self.n_qubit[i] as f64 * d.pe1 + self.n_ryd[i] as f64 * d.per))
                    .sum()
            }
        }
    }
}

/// Builds the block model for the `active` atoms of `map`.
pub fn compose_ensemble(
    kind: ModelKind,
    scheme: &LevelScheme,
    schedule: &PulseSchedule,
    map: &InteractionMap,
    active: &[usize],
    noise: Option<Arc<NoiseRealization>>,
    offsets: DriveOffsets,
) -> Result<EnsembleModel> {
    if let Some(&bad) = active.iter().find(|&&a| a >= map.n_atoms) {
        return Err(Error::Assembly(format!("atom {bad} is not covered by the interaction map")));
    }
    EnsembleModel::new(kind, scheme.clone(), schedule.clone(), map.restricted(active), noise, offsets)
}

/// Writes H(t) as CSV rows `row,col,re,im` for nonzero entries.
pub fn write_hamiltonian_csv<W: std::io::Write>(model: &EnsembleModel, t: f64, writer: W) -> Result<()> {
    let h = model.hamiltonian(t);
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["row", "col", "re_mhz", "im_mhz"])?;
    for ((i, j), v) in h.indexed_iter() {
        if v.norm() != 0.0 {
            w.write_record([i.to_string(), j.to_string(), v.re.to_string(), v.im.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}
