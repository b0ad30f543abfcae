//! Ideal CᵏZ gates, the corrective Z(φ) rotation and the limited-tomography
//! fidelity.
//!
//! The figure of merit compares the simulated operator with the ideal gate on
//! the uniform superposition |Ψ⟩ of all 2ᴺ computational inputs:
//!
//! F(φ) = |⟨Ψ|U_ideal† Z(φ) U|Ψ⟩|² = |2^{−N} Σ_x s_x e^{i n₁(x) φ} r_x|²,
//!
//! where r_x = Σ_y U_xy, s_x is the ideal diagonal and n₁(x) the number of
//! qubits in |1⟩. When every input evolves in its own block, r_x is simply the
//! diagonal amplitude ⟨x|U|x⟩.
//!
//! Bitstrings list qubit 0 first; qubit 0 is the most significant bit of the
//! input index.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::atomdata::{InteractionMap, LevelScheme};
use crate::error::{Error, Result};
use crate::model::{compose_ensemble, DriveOffsets, EnsembleModel, ModelKind};
use crate::propagator::{evolve_protocol_with, EvolveOptions, QuantumState, Trace};
use crate::pulse::{NoiseRealization, PulseSchedule};
use crate::C64;

/// Scan resolution of the corrective-phase search.
pub const PHASE_SCAN_POINTS: usize = 1024;
/// Largest register the dense helpers accept.
pub const MAX_QUBITS: usize = 12;

fn check_qubits(n_qubits: usize) -> Result<()> {
    if !(2..=MAX_QUBITS).contains(&n_qubits) {
        return Err(Error::Domain(format!(
            "a controlled-phase gate needs between 2 and {MAX_QUBITS} qubits, got {n_qubits}"
        )));
    }
    Ok(())
}

/// Number of qubits in |1⟩ for input index `x`.
#[inline]
pub fn excitation_count(x: usize) -> u32 {
    x.count_ones()
}

pub fn bitstring(x: usize, n_qubits: usize) -> String {
    (0..n_qubits).map(|q| if x >> (n_qubits - 1 - q) & 1 == 1 { '1' } else { '0' }).collect()
}

/// Qubits in |1⟩ for input `x`, in increasing order.
pub fn active_atoms(x: usize, n_qubits: usize) -> Vec<usize> {
    (0..n_qubits).filter(|&q| x >> (n_qubits - 1 - q) & 1 == 1).collect()
}

/// Ideal diagonal: +1 on |0…0⟩ and −1 elsewhere.
#[inline]
pub fn ideal_sign(x: usize) -> f64 {
    if x == 0 {
        1.0
    } else {
        -1.0
    }
}

/// 2|0…0⟩⟨0…0| − I on k + 1 qubits.
pub fn ideal_ckz(k: usize) -> Result<Array2<C64>> {
    if k == 0 {
        return Err(Error::Domain("the gate needs at least one control (k ≥ 1)".into()));
    }
    check_qubits(k + 1)?;
    let dim = 1 << (k + 1);
    let mut u = Array2::zeros((dim, dim));
    for x in 0..dim {
        u[[x, x]] = C64::new(ideal_sign(x), 0.0);
    }
    Ok(u)
}

/// Multiplies the amplitude of input x by e^{i n₁(x) φ}.
pub fn apply_corrective_phase(amplitudes: &[C64], phi: f64) -> Vec<C64> {
    amplitudes.iter().enumerate().map(|(x, a)| a * C64::from_polar(1.0, excitation_count(x) as f64 * phi)).collect()
}

fn register_size(amplitudes: &[C64]) -> Result<usize> {
    let len = amplitudes.len();
    if len < 4 || !len.is_power_of_two() {
        return Err(Error::Evaluation(format!(
            "expected one amplitude per computational input (2ᴺ, N ≥ 2), got {len}"
        )));
    }
    let n = len.trailing_zeros() as usize;
    check_qubits(n)?;
    Ok(n)
}

/// Coefficients c_n = Σ_{n₁(x)=n} s_x r_x, so that F(φ) = |Σ_n c_n e^{inφ}|²/4ᴺ.
fn harmonic_coefficients(amplitudes: &[C64], n: usize) -> Vec<C64> {
    let mut c = vec![C64::new(0.0, 0.0); n + 1];
    for (x, a) in amplitudes.iter().enumerate() {
        c[excitation_count(x) as usize] += a * ideal_sign(x);
    }
    c
}

fn fidelity_from_harmonics(c: &[C64], dim: usize, phi: f64) -> f64 {
    let sum: C64 = c.iter().enumerate().map(|(n, cn)| cn * C64::from_polar(1.0, n as f64 * phi)).sum();
    sum.norm_sqr() / (dim * dim) as f64
}

/// F(φ) for projected amplitudes r_x.
pub fn fidelity_at(amplitudes: &[C64], phi: f64) -> Result<f64> {
    let n = register_size(amplitudes)?;
    Ok(fidelity_from_harmonics(&harmonic_coefficients(amplitudes, n), amplitudes.len(), phi))
}

/// Global maximizer of F(φ): dense scan then golden-section refinement.
/// Returns (φ* ∈ [0, 2π), F(φ*)).
pub fn optimize_corrective_phase(amplitudes: &[C64]) -> Result<(f64, f64)> {
    let n = register_size(amplitudes)?;
    let c = harmonic_coefficients(amplitudes, n);
    let dim = amplitudes.len();
    let f = |phi: f64| fidelity_from_harmonics(&c, dim, phi);

    let step = TAU / PHASE_SCAN_POINTS as f64;
    let (mut best_phi, mut best_f) = (0.0, f(0.0));
    for i in 1..PHASE_SCAN_POINTS {
        let phi = i as f64 * step;
        let v = f(phi);
        if v > best_f {
            best_phi = phi;
            best_f = v;
        }
    }

    let inv_golden = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (best_phi - step, best_phi + step);
    let mut x1 = b - inv_golden * (b - a);
    let mut x2 = a + inv_golden * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while b - a > 1e-10 {
        if f1 > f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_golden * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_golden * (b - a);
            f2 = f(x2);
        }
    }
    let mid = 0.5 * (a + b);
    let f_mid = f(mid);
    if f_mid > best_f {
        best_phi = mid;
        best_f = f_mid;
    }
    Ok((best_phi.rem_euclid(TAU), best_f))
}

/// Uniform-superposition observables averaged over all inputs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GateTrace {
    pub t: Vec<f64>,
    pub p_e: Vec<f64>,
    pub p_d: Vec<f64>,
}

impl GateTrace {
    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["t_us", "P_e", "P_d"])?;
        for i in 0..self.t.len() {
            w.write_record([self.t[i].to_string(), self.p_e[i].to_string(), self.p_d[i].to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateResult {
    pub n_qubits: usize,
    pub fidelity: f64,
    /// F(0), before the corrective rotation.
    pub fidelity_uncorrected: f64,
    /// φ* ∈ [0, 2π); zero when the phase was not optimized.
    pub corrective_phase: f64,
    /// P_x = 2ᴺ |⟨x|U|Ψ⟩|², keyed by bitstring.
    pub populations: BTreeMap<String, f64>,
    /// φ_x = arg r_x + n₁(x) φ*, wrapped to (−π, π].
    pub phases: BTreeMap<String, f64>,
    #[serde(skip)]
    pub trace: GateTrace,
}

impl GateResult {
    pub fn population(&self, bits: &str) -> Option<f64> {
        self.populations.get(bits).copied()
    }

    /// Smallest population among inputs with at least one qubit in |1⟩.
    pub fn worst_population(&self) -> f64 {
        self.populations.iter().filter(|(k, _)| k.contains('1')).map(|(_, &p)| p).fold(f64::INFINITY, f64::min)
    }
}

fn wrap_phase(phi: f64) -> f64 {
    let w = phi.rem_euclid(TAU);
    if w > PI {
        w - TAU
    } else {
        w
    }
}

/// Scores projected amplitudes r_x (one per input).
pub fn evaluate_amplitudes(amplitudes: &[C64], optimize_phase: bool) -> Result<GateResult> {
    let n = register_size(amplitudes)?;
    if amplitudes.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
        return Err(Error::Evaluation("non-finite amplitude".into()));
    }
    let f0 = fidelity_at(amplitudes, 0.0)?;
    let (phi, f) = if optimize_phase { optimize_corrective_phase(amplitudes)? } else { (0.0, f0) };
    let mut populations = BTreeMap::new();
    let mut phases = BTreeMap::new();
    for (x, a) in amplitudes.iter().enumerate() {
        let key = bitstring(x, n);
        populations.insert(key.clone(), a.norm_sqr());
        phases.insert(key, wrap_phase(a.arg() + excitation_count(x) as f64 * phi));
    }
    Ok(GateResult {
        n_qubits: n,
        fidelity: f.min(1.0),
        fidelity_uncorrected: f0.min(1.0),
        corrective_phase: phi,
        populations,
        phases,
        trace: GateTrace::default(),
    })
}

/// Row sums r_x = Σ_y U_xy of a 2ᴺ × 2ᴺ operator.
pub fn projected_amplitudes(u: &Array2<C64>) -> Result<Vec<C64>> {
    if u.nrows() != u.ncols() {
        return Err(Error::Evaluation("operator must be square".into()));
    }
    Ok(u.rows().into_iter().map(|row| row.sum()).collect())
}

/// Limited-tomography fidelity of a full operator.
pub fn operator_fidelity(u: &Array2<C64>, optimize_phase: bool) -> Result<GateResult> {
    evaluate_amplitudes(&projected_amplitudes(u)?, optimize_phase)
}

/// Everything needed to simulate one gate: drive, atoms and numerics.
#[derive(Debug, Clone)]
pub struct GateSetup {
    pub kind: ModelKind,
    pub scheme: LevelScheme,
    pub schedule: PulseSchedule,
    pub map: InteractionMap,
    pub noise: Option<Arc<NoiseRealization>>,
    pub offsets: DriveOffsets,
    pub options: EvolveOptions,
}

impl GateSetup {
    pub fn new(kind: ModelKind, scheme: LevelScheme, schedule: PulseSchedule, map: InteractionMap) -> Self {
        Self {
            kind,
            scheme,
            schedule,
            map,
            noise: None,
            offsets: DriveOffsets::default(),
            options: EvolveOptions::default(),
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.map.n_atoms
    }

    pub fn traced(mut self, points: usize) -> Self {
        self.options.trace_points = points;
        self
    }

    pub fn block(&self, active: &[usize]) -> Result<EnsembleModel> {
        compose_ensemble(self.kind, &self.scheme, &self.schedule, &self.map, active, self.noise.clone(), self.offsets)
    }
}

/// Result of propagating one computational input.
#[derive(Debug, Clone)]
pub struct InputOutcome {
    pub amplitude: C64,
    pub trace: Trace,
}

/// Propagates every computational input. Inputs whose active atoms share the
/// same interaction submatrix evolve identically and are computed once.
pub fn simulate_inputs(setup: &GateSetup) -> Result<Vec<InputOutcome>> {
    let n = setup.n_qubits();
    check_qubits(n)?;
    let dim = 1usize << n;

    let mut unique: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut representatives: Vec<Vec<usize>> = Vec::new();
    let mut block_of = vec![usize::MAX; dim];
    for (x, slot) in block_of.iter_mut().enumerate().skip(1) {
        let active = active_atoms(x, n);
        let key: Vec<u64> = std::iter::once(active.len() as u64)
            .chain(setup.map.restricted(&active).into_iter().flatten().map(f64::to_bits))
            .collect();
        *slot = *unique.entry(key).or_insert_with(|| {
            representatives.push(active);
            representatives.len() - 1
        });
    }

    let outcomes: Vec<InputOutcome> = representatives
        .par_iter()
        .map(|active| {
            let model = setup.block(active)?;
            let initial = QuantumState::basis(model.basis.dim(), model.basis.qubit_index(), 0.0);
            let (state, trace) = evolve_protocol_with(&model, &initial, &setup.options)?;
            Ok(InputOutcome { amplitude: state.amplitudes[model.basis.qubit_index()], trace })
        })
        .collect::<Result<_>>()?;

    let idle = InputOutcome { amplitude: C64::new(1.0, 0.0), trace: Trace::default() };
    Ok(block_of.iter().map(|&b| if b == usize::MAX { idle.clone() } else { outcomes[b].clone() }).collect())
}

/// Averages per-input traces into the uniform-superposition observables.
fn superposition_trace(outcomes: &[InputOutcome]) -> GateTrace {
    let Some(reference) = outcomes.iter().find(|o| !o.trace.samples.is_empty()) else {
        return GateTrace::default();
    };
    let len = reference.trace.samples.len();
    let weight = 1.0 / outcomes.len() as f64;
    let mut out = GateTrace {
        t: reference.trace.samples.iter().map(|s| s.t).collect(),
        p_e: vec![0.0; len],
        p_d: vec![0.0; len],
    };
    for o in outcomes {
        for (i, s) in o.trace.samples.iter().enumerate().take(len) {
            out.p_e[i] += weight * s.p_e;
            out.p_d[i] += weight * s.p_d;
        }
    }
    out
}

/// Simulates all inputs and scores the gate.
pub fn evaluate_gate(setup: &GateSetup, optimize_phase: bool) -> Result<GateResult> {
    let outcomes = simulate_inputs(setup)?;
    let amplitudes: Vec<C64> = outcomes.iter().map(|o| o.amplitude).collect();
    let mut result = evaluate_amplitudes(&amplitudes, optimize_phase)?;
    result.trace = superposition_trace(&outcomes);
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn identity(n: usize) -> Vec<C64> {
        vec![C64::new(1.0, 0.0); 1 << n]
    }

    fn ideal(n: usize) -> Vec<C64> {
        (0..1 << n).map(|x| C64::new(ideal_sign(x), 0.0)).collect()
    }

    #[test]
    fn ideal_gate_diagonals() {
        let u = ideal_ckz(2).unwrap();
        assert_eq!(u[[0, 0]], C64::new(1.0, 0.0));
        assert_eq!(u[[7, 7]], C64::new(-1.0, 0.0));
        let cz = ideal_ckz(1).unwrap();
        let diag: Vec<f64> = (0..4).map(|i| cz[[i, i]].re).collect();
        assert_eq!(diag, vec![1.0, -1.0, -1.0, -1.0]);
        assert_eq!(cz.iter().filter(|v| v.norm() != 0.0).count(), 4);
        assert!(ideal_ckz(0).is_err());
    }

    #[test]
    fn corrective_phase_examples() {
        let a: Vec<C64> = (0..8).map(|x| C64::from_polar(1.0, 0.1 * x as f64)).collect();
        assert_eq!(apply_corrective_phase(&a, 0.0), a);
        let b = apply_corrective_phase(&a, PI / 3.0);
        assert_eq!(b[0], a[0]);
        assert!((b[7] - a[7] * C64::from_polar(1.0, PI)).norm() < 1e-15);
    }

    #[test]
    fn ideal_gate_scores_one() {
        let r = evaluate_amplitudes(&ideal(3), false).unwrap();
        assert!((r.fidelity - 1.0).abs() < 1e-15);
        let (phi, f) = optimize_corrective_phase(&ideal(3)).unwrap();
        assert!((f - 1.0).abs() < 1e-12);
        assert!(phi.min(TAU - phi) < 1e-6, "{phi}");
    }

    #[test]
    fn identity_channel_value() {
        assert!((fidelity_at(&identity(3), 0.0).unwrap() - 0.5625).abs() < 1e-15);
        let r = evaluate_amplitudes(&identity(3), false).unwrap();
        assert_eq!(r.fidelity, 0.5625);
    }

    #[test]
    fn identity_channel_scan_matches_brute_force() {
        let brute = (0..200_000)
            .map(|i| {
                let p = TAU * i as f64 / 200_000.0;
                let s = C64::new(1.0, 0.0)
                    - 3.0 * C64::from_polar(1.0, p)
                    - 3.0 * C64::from_polar(1.0, 2.0 * p)
                    - C64::from_polar(1.0, 3.0 * p);
                s.norm_sqr() / 64.0
            })
            .fold(0.0, f64::max);
        let (_, f) = optimize_corrective_phase(&identity(3)).unwrap();
        assert!(f >= brute - 1e-10 && f - brute < 1e-8, "{f} vs {brute}");
    }

    #[test]
    fn uniform_extra_phase_is_cancelled() {
        let theta = 1.234;
        let a = apply_corrective_phase(&ideal(3), theta);
        let (phi, f) = optimize_corrective_phase(&a).unwrap();
        assert!((f - 1.0).abs() < 1e-10);
        assert!(((phi + theta).rem_euclid(TAU)).min(TAU - (phi + theta).rem_euclid(TAU)) < 1e-5);
        let r = evaluate_amplitudes(&a, true).unwrap();
        assert!(r.phases["111"].abs() > PI - 1e-5);
        assert!(r.phases["000"].abs() < 1e-12);
    }

    #[test]
    fn missing_inputs_are_rejected() {
        assert!(matches!(evaluate_amplitudes(&identity(3)[..7], true), Err(Error::Evaluation(_))));
        assert!(matches!(evaluate_amplitudes(&[C64::new(1.0, 0.0); 2], true), Err(Error::Evaluation(_))));
    }

    #[test]
    fn bitstrings_put_qubit_zero_first() {
        assert_eq!(bitstring(4, 3), "100");
        assert_eq!(active_atoms(5, 3), vec![0, 2]);
        assert_eq!(active_atoms(0b0110, 4), vec![1, 2]);
    }

    #[test]
    fn operator_form_agrees_with_diagonal_form() {
        let u = ideal_ckz(2).unwrap();
        let r = operator_fidelity(&u, false).unwrap();
        assert!((r.fidelity - 1.0).abs() < 1e-15);
        assert!((r.population("101").unwrap() - 1.0).abs() < 1e-15);
    }

    fn amplitudes_strategy() -> impl Strategy<Value = Vec<C64>> {
        prop::collection::vec((0.0..1.0f64, -PI..PI), 8)
            .prop_map(|v| v.into_iter().map(|(r, p)| C64::from_polar(r, p)).collect())
    }

    proptest! {
        #[test]
        fn optimum_dominates_zero_and_periodic(a in amplitudes_strategy(), phi in -10.0..10.0f64) {
            let (best_phi, best) = optimize_corrective_phase(&a).unwrap();
            prop_assert!(best >= fidelity_at(&a, 0.0).unwrap() - 1e-15);
            prop_assert!(best >= fidelity_at(&a, phi).unwrap() - 1e-9);
            prop_assert!((0.0..TAU).contains(&best_phi));
            let f1 = fidelity_at(&a, phi).unwrap();
            let f2 = fidelity_at(&a, phi + TAU).unwrap();
            prop_assert!((f1 - f2).abs() < 1e-12);
            prop_assert!(best <= 1.0 + 1e-12);
        }

        #[test]
        fn common_phase_is_invisible(a in amplitudes_strategy(), g in -PI..PI, phi in 0.0..TAU) {
            let rotated: Vec<C64> = a.iter().map(|x| x * C64::from_polar(1.0, g)).collect();
            prop_assert!((fidelity_at(&a, phi).unwrap() - fidelity_at(&rotated, phi).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn populations_bounded(a in amplitudes_strategy()) {
            let r = evaluate_amplitudes(&a, true).unwrap();
            let total: f64 = r.populations.values().sum();
            prop_assert!(total <= 8.0);
            prop_assert!(r.populations.values().all(|p| (0.0..=1.0).contains(p)));
        }
    }
}
