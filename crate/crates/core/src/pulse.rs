//! Two-pulse ARP drive: analytic and dCRAB-shaped effective Rabi
//! frequency, effective detuning sweeps, the laser controls that realize
//! them, and laser phase-noise realizations.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::atomdata::{CouplingCalibration, LevelScheme};
use crate::error::{Error, Result};

/// Parameters of the two consecutive ARP pulses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArpParams {
    /// Pulse durations T₁, T₂, µs.
    pub t1: f64,
    pub t2: f64,
    /// Super-Gaussian widths τ₁, τ₂, µs.
    pub tau1: f64,
    pub tau2: f64,
    /// Detuning sweep amplitudes δ_R¹, δ_R², MHz.
    pub delta_r1: f64,
    pub delta_r2: f64,
    /// Peak effective Rabi frequency Ω_R⁰, MHz.
    pub omega0: f64,
    /// Fixed upper-leg intensity Iₑʳ, mW/µm².
    pub ir: f64,
}

impl ArpParams {
    /// Parameters with Ω_R⁰ set by the peak lower-leg intensity.
    #[allow(clippy::too_many_arguments)]
    pub fn from_intensities(
        cal: &CouplingCalibration,
        t1: f64,
        t2: f64,
        tau1: f64,
        tau2: f64,
        delta_r1: f64,
        delta_r2: f64,
        i1: f64,
        ir: f64,
    ) -> Result<Self> {
        let omega0 = crate::atomdata::effective_rabi(cal, i1, ir)?;
        let params = Self { t1, t2, tau1, tau2, delta_r1, delta_r2, omega0, ir };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("t1", self.t1),
            ("t2", self.t2),
            ("tau1", self.tau1),
            ("tau2", self.tau2),
            ("omega0", self.omega0),
            ("ir", self.ir),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Validation(format!("{name} must be positive and finite (got {v})")));
            }
        }
        if !(self.delta_r1.is_finite() && self.delta_r2.is_finite()) {
            return Err(Error::Validation("detuning amplitudes must be finite".into()));
        }
        Ok(())
    }

    #[inline]
    pub fn duration(&self) -> f64 {
        self.t1 + self.t2
    }

    /// Peak lower-leg intensity implied by Ω_R⁰.
    pub fn peak_i1(&self, cal: &CouplingCalibration) -> f64 {
        (self.omega0 / cal.c_omega).powi(2) / self.ir
    }
}

/// Which of the two ARP pulses a time belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pulse {
    First,
    Second,
}

/// Normalized super-Gaussian on [0, T]: one at T/2, exactly zero at both ends.
#[inline]
fn super_gaussian(t_local: f64, len: f64, tau: f64) -> f64 {
    if t_local <= 0.0 || t_local >= len {
        return 0.0;
    }
    let edge = ((len / 2.0) / tau).powi(4);
    let x = ((t_local - len / 2.0) / tau).powi(4);
    let floor = (-edge).exp();
    ((-x).exp() - floor) / (1.0 - floor)
}

/// Truncated Fourier envelope g(t) of the dCRAB-shaped pulse.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DcrabEnvelope {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    /// Randomized frequency factors: ω_k = 2πk·r_k / T_i.
    pub r: Vec<f64>,
}

impl DcrabEnvelope {
    pub fn new(a: Vec<f64>, b: Vec<f64>, r: Vec<f64>) -> Result<Self> {
        let env = Self { a, b, r };
        env.validate()?;
        Ok(env)
    }

    /// g ≡ 1 with `n_modes` zero coefficients.
    pub fn unit(n_modes: usize, r: Vec<f64>) -> Result<Self> {
        Self::new(vec![0.0; n_modes], vec![0.0; n_modes], r)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.a.len();
        if self.b.len() != n || self.r.len() != n {
            return Err(Error::Validation(format!(
                "envelope coefficient lists differ in length ({}, {}, {})",
                n,
                self.b.len(),
                self.r.len()
            )));
        }
        if self.a.iter().chain(&self.b).chain(&self.r).any(|v| !v.is_finite()) {
            return Err(Error::Validation("envelope coefficients must be finite".into()));
        }
        Ok(())
    }

    pub fn n_modes(&self) -> usize {
        self.a.len()
    }

    /// g at pulse-local time `t_local` within a pulse of length `len`.
    pub fn value(&self, t_local: f64, len: f64) -> f64 {
        let mut g = 1.0;
        for k in 0..self.a.len() {
            let w = 2.0 * PI * (k + 1) as f64 * self.r[k] / len;
            let (s, c) = (w * t_local).sin_cos();
            g += self.a[k] * c + self.b[k] * s;
        }
        g
    }
}

/// Complete two-pulse drive over [0, T₁ + T₂].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseSchedule {
    pub params: ArpParams,
    pub envelope: Option<DcrabEnvelope>,
}

impl PulseSchedule {
    pub fn analytic(params: ArpParams) -> Result<Self> {
        params.validate()?;
        Ok(Self { params, envelope: None })
    }

    pub fn shaped(params: ArpParams, envelope: DcrabEnvelope) -> Result<Self> {
        params.validate()?;
        envelope.validate()?;
        Ok(Self { params, envelope: Some(envelope) })
    }

    #[inline]
    pub fn duration(&self) -> f64 {
        self.params.duration()
    }

    /// Times at which the controls may be discontinuous.
    pub fn breakpoints(&self) -> [f64; 3] {
        [0.0, self.params.t1, self.duration()]
    }

    /// Pulse owning `t`; T₁ itself belongs to the first pulse.
    #[inline]
    pub fn pulse_at(&self, t: f64) -> Pulse {
        if t <= self.params.t1 {
            Pulse::First
        } else {
            Pulse::Second
        }
    }

    #[inline]
    pub fn local_time(&self, pulse: Pulse, t: f64) -> f64 {
        match pulse {
            Pulse::First => t,
            Pulse::Second => t - self.params.t1,
        }
    }

    #[inline]
    fn pulse_shape(&self, pulse: Pulse) -> (f64, f64, f64) {
        let p = &self.params;
        match pulse {
            Pulse::First => (p.t1, p.tau1, p.delta_r1),
            Pulse::Second => (p.t2, p.tau2, p.delta_r2),
        }
    }

    /// Signed effective Rabi frequency inside `pulse` at global time `t`.
    #[inline]
    pub fn omega_in(&self, pulse: Pulse, t: f64) -> f64 {
        let (len, tau, _) = self.pulse_shape(pulse);
        let local = self.local_time(pulse, t);
        let base = self.params.omega0 * super_gaussian(local, len, tau);
        match &self.envelope {
            Some(env) => env.value(local, len) * base,
            None => base,
        }
    }

    /// Effective detuning δ_R inside `pulse` at global time `t`. Each pulse
    /// sweeps from −δ_R^i to +δ_R^i, so the detuning flips sign at T₁.
    #[inline]
    pub fn delta_r_in(&self, pulse: Pulse, t: f64) -> f64 {
        let (len, _, amp) = self.pulse_shape(pulse);
        let local = self.local_time(pulse, t);
        -amp * (PI * local / len).cos()
    }

    #[inline]
    pub fn omega(&self, t: f64) -> f64 {
        self.omega_in(self.pulse_at(t), t)
    }

    #[inline]
    pub fn delta_r(&self, t: f64) -> f64 {
        self.delta_r_in(self.pulse_at(t), t)
    }

    fn check_window(&self, t: f64) -> Result<()> {
        let slack = 1e-12 * self.duration();
        if !(t >= -slack && t <= self.duration() + slack) {
            return Err(Error::Domain(format!("t = {t} µs lies outside the gate window [0, {}]", self.duration())));
        }
        Ok(())
    }

    /// Maximum |Ω̃_R| on a uniform grid of `samples` points.
    pub fn peak_omega(&self, samples: usize) -> f64 {
        let n = samples.max(2);
        let total = self.duration();
        (0..n).map(|i| self.omega(total * i as f64 / (n - 1) as f64).abs()).fold(0.0, f64::max)
    }
}

/// Analytic ARP Rabi frequency (no envelope).
pub fn analytic_omega(params: &ArpParams, t: f64) -> Result<f64> {
    let schedule = PulseSchedule::analytic(*params)?;
    schedule.check_window(t)?;
    Ok(schedule.omega(t))
}

/// Effective detuning sweep δ_R(t).
pub fn analytic_delta_r(params: &ArpParams, t: f64) -> Result<f64> {
    let schedule = PulseSchedule::analytic(*params)?;
    schedule.check_window(t)?;
    Ok(schedule.delta_r(t))
}

/// Envelope-shaped Rabi frequency g(t)·Ω_R(t). May be negative.
pub fn dcrab_omega(params: &ArpParams, env: &DcrabEnvelope, t: f64) -> Result<f64> {
    let schedule = PulseSchedule::shaped(*params, env.clone())?;
    schedule.check_window(t)?;
    Ok(schedule.omega(t))
}

/// Laser intensities (I₁ᵉ, Iₑʳ) realizing Ω_R(t) with Iₑʳ held fixed.
pub fn intensity_schedule(scheme: &LevelScheme, schedule: &PulseSchedule, t: f64) -> Result<(f64, f64)> {
    schedule.check_window(t)?;
    let ir = schedule.params.ir;
    if ir <= 0.0 {
        return Err(Error::Domain("upper-leg intensity must be positive".into()));
    }
    Ok((lower_intensity(&scheme.calibration, schedule.omega(t), ir), ir))
}

#[inline]
pub(crate) fn lower_intensity(cal: &CouplingCalibration, omega: f64, ir: f64) -> f64 {
    (omega / cal.c_omega).powi(2) / ir
}

/// Two-photon laser detuning δ(t) = δ_R(t) − Δ₁(t) + Δ_r that yields the
/// target effective detuning under the instantaneous Stark shifts.
pub fn two_photon_detuning(scheme: &LevelScheme, schedule: &PulseSchedule, t: f64) -> Result<f64> {
    schedule.check_window(t)?;
    let cal = &scheme.calibration;
    let pulse = schedule.pulse_at(t);
    let i1 = lower_intensity(cal, schedule.omega_in(pulse, t), schedule.params.ir);
    Ok(schedule.delta_r_in(pulse, t) - cal.c_delta1 * i1 + cal.c_deltar * schedule.params.ir)
}

/// White frequency noise with a Lorentzian field line shape.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseNoiseModel {
    /// Lorentzian FWHM h₀, MHz.
    pub fwhm: f64,
    /// Sampling step, µs.
    pub dt_noise: f64,
    pub seed: u64,
}

pub const DEFAULT_NOISE_DT: f64 = 1e-3;

impl PhaseNoiseModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.fwhm >= 0.0 && self.fwhm.is_finite()) {
            return Err(Error::Validation("linewidth must be nonnegative".into()));
        }
        if !(self.dt_noise > 0.0) {
            return Err(Error::Validation("noise sampling step must be positive".into()));
        }
        Ok(())
    }
}

/// Sampled laser phases φ₁, φ₂ (radians), piecewise constant: the value
/// `phi[k]` holds on [k·dt, (k+1)·dt).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseRealization {
    pub dt: f64,
    pub phi1: Vec<f64>,
    pub phi2: Vec<f64>,
}

impl NoiseRealization {
    #[inline]
    pub fn index_at(&self, t: f64) -> usize {
        let k = (t / self.dt).floor();
        if k <= 0.0 {
            0
        } else {
            (k as usize).min(self.phi1.len() - 1)
        }
    }

    #[inline]
    pub fn phases_at(&self, t: f64) -> (f64, f64) {
        let k = self.index_at(t);
        (self.phi1[k], self.phi2[k])
    }

    /// Interior grid times in (t0, t1) where the phases jump.
    pub fn grid_points(&self, t0: f64, t1: f64) -> Vec<f64> {
        let first = (t0 / self.dt).floor() as usize + 1;
        (first..self.phi1.len()).map(|k| k as f64 * self.dt).take_while(|&t| t < t1).filter(|&t| t > t0).collect()
    }
}

/// Draws two independent Wiener phase trajectories with increment variance
/// 2π·h₀·dt. The underlying normal deviates depend only on the seed, so
/// realizations at different linewidths with one seed are rescaled copies.
pub fn sample_phase_noise(model: &PhaseNoiseModel, duration: f64) -> Result<NoiseRealization> {
    model.validate()?;
    if !(duration > 0.0) {
        return Err(Error::Domain("noise duration must be positive".into()));
    }
    let steps = (duration / model.dt_noise).ceil() as usize;
    let sigma = (2.0 * PI * model.fwhm * model.dt_noise).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(model.seed);
    let mut phi1 = Vec::with_capacity(steps + 1);
    let mut phi2 = Vec::with_capacity(steps + 1);
    let (mut p1, mut p2) = (0.0f64, 0.0f64);
    phi1.push(p1);
    phi2.push(p2);
    for _ in 0..steps {
        let z1: f64 = StandardNormal.sample(&mut rng);
        let z2: f64 = StandardNormal.sample(&mut rng);
        p1 += sigma * z1;
        p2 += sigma * z2;
        phi1.push(p1);
        phi2.push(p2);
    }
    Ok(NoiseRealization { dt: model.dt_noise, phi1, phi2 })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fig2() -> ArpParams {
        ArpParams {
            t1: 0.852,
            t2: 0.944,
            tau1: 0.852 / 2.59,
            tau2: 0.944 / 3.19,
            delta_r1: 6.270,
            delta_r2: 5.586,
            omega0: 4.334,
            ir: 6.236,
        }
    }

    fn optimized_envelope() -> DcrabEnvelope {
        DcrabEnvelope::new(
            vec![-0.0859, 0.0145, 0.3612, -0.2605, 0.4847, 0.05360],
            vec![-0.7250, -1.7963, 0.9775, -0.4293, 0.5623, -0.5406],
            vec![0.3930, 0.0402, 0.0597, 0.3959, -0.2616, -0.2132],
        )
        .unwrap()
    }

    #[test]
    fn omega_peaks_and_vanishes() {
        let p = fig2();
        assert!((analytic_omega(&p, p.t1 / 2.0).unwrap() - p.omega0).abs() < 1e-12);
        assert!((analytic_omega(&p, p.t1 + p.t2 / 2.0).unwrap() - p.omega0).abs() < 1e-12);
        for t in [0.0, p.t1, p.t1 + p.t2] {
            assert!(analytic_omega(&p, t).unwrap().abs() < 1e-15);
        }
    }

    #[test]
    fn omega_quarter_point_matches_direct_formula() {
        let p = fig2();
        let t = p.t1 / 4.0;
        // Direct scalar evaluation of the normalized super-Gaussian.
        let e = (-(p.t1 / (2.0 * p.tau1)).powi(4)).exp();
        let want = p.omega0 * ((-(t - p.t1 / 2.0).powi(4) / p.tau1.powi(4)).exp() - e) / (1.0 - e);
        let got = analytic_omega(&p, t).unwrap();
        assert!((got - want).abs() < 1e-12);
        assert!((got - 3.590745).abs() < 1e-6, "{got}");
    }

    #[test]
    fn outside_window_is_domain_error() {
        let p = fig2();
        assert!(matches!(analytic_omega(&p, -1e-9), Err(Error::Domain(_))));
        assert!(matches!(analytic_delta_r(&p, p.t1 + p.t2 + 1e-6), Err(Error::Domain(_))));
    }

    #[test]
    fn detuning_sweeps_and_flips_at_pulse_boundary() {
        let p = fig2();
        assert!((analytic_delta_r(&p, 0.0).unwrap() + p.delta_r1).abs() < 1e-12);
        assert!((analytic_delta_r(&p, p.t1).unwrap() - p.delta_r1).abs() < 1e-12);
        let s = PulseSchedule::analytic(p).unwrap();
        assert!((s.delta_r_in(Pulse::Second, p.t1) + p.delta_r2).abs() < 1e-12);
        assert!((analytic_delta_r(&p, p.t1 + 1e-12).unwrap() + p.delta_r2).abs() < 1e-9);
        assert!((analytic_delta_r(&p, p.t1 + p.t2).unwrap() - p.delta_r2).abs() < 1e-12);
    }

    #[test]
    fn unit_envelope_is_identity() {
        let p = fig2();
        let env = DcrabEnvelope::unit(6, vec![0.3; 6]).unwrap();
        for i in 0..=200 {
            let t = p.duration() * i as f64 / 200.0;
            assert_eq!(dcrab_omega(&p, &env, t).unwrap(), analytic_omega(&p, t).unwrap());
        }
    }

    #[test]
    fn optimized_envelope_start_and_peak() {
        let env = optimized_envelope();
        assert!((env.value(0.0, 0.852) - 1.5676).abs() < 1e-12);
        let s = PulseSchedule::shaped(fig2(), env).unwrap();
        let peak = s.peak_omega(20_001);
        assert!((peak - 3.38).abs() < 0.05, "{peak}");
    }

    #[test]
    fn envelope_length_mismatch_is_rejected() {
        assert!(DcrabEnvelope::new(vec![0.0; 2], vec![0.0; 3], vec![0.0; 2]).is_err());
    }

    #[test]
    fn intensity_from_rabi() {
        let scheme = LevelScheme::reduced(CouplingCalibration::cesium()).unwrap();
        let s = PulseSchedule::analytic(fig2()).unwrap();
        let (i1, ir) = intensity_schedule(&scheme, &s, 0.852 / 2.0).unwrap();
        assert!((i1 - 0.390).abs() < 1e-3, "{i1}");
        assert_eq!(ir, 6.236);
        assert_eq!(intensity_schedule(&scheme, &s, 0.0).unwrap().0, 0.0);
        let cal = scheme.calibration;
        assert!((lower_intensity(&cal, 3.365, 6.236) - 0.235).abs() < 1e-3);
    }

    #[test]
    fn laser_detuning_compensates_stark_shifts() {
        let scheme = LevelScheme::reduced(CouplingCalibration::cesium()).unwrap();
        let mut p = fig2();
        p.omega0 = scheme.calibration.rabi(0.390, 6.236);
        let s = PulseSchedule::analytic(p).unwrap();
        // δ_R crosses zero at the pulse midpoint where Ω_R peaks.
        let d = two_photon_detuning(&scheme, &s, p.t1 / 2.0).unwrap();
        assert!((d - (-5.352)).abs() < 2e-3, "{d}");
        // No drive: only the fixed upper-leg shift remains.
        let d0 = two_photon_detuning(&scheme, &s, 0.0).unwrap();
        assert!((d0 - (-p.delta_r1 + 0.643 * 6.236)).abs() < 1e-12);
    }

    #[test]
    fn noiseless_phases_are_zero() {
        let model = PhaseNoiseModel { fwhm: 0.0, dt_noise: 1e-3, seed: 3 };
        let n = sample_phase_noise(&model, 1.8).unwrap();
        assert!(n.phi1.iter().chain(&n.phi2).all(|&p| p == 0.0));
        assert_eq!(n.phi1.len(), 1801);
    }

    #[test]
    fn seeded_noise_is_deterministic() {
        let model = PhaseNoiseModel { fwhm: 1e-3, dt_noise: 1e-3, seed: 42 };
        assert_eq!(sample_phase_noise(&model, 1.0).unwrap(), sample_phase_noise(&model, 1.0).unwrap());
    }

    #[test]
    fn wiener_variance_matches_linewidth() {
        let (fwhm, t) = (1e-3, 1.8);
        let mut acc = 0.0;
        let n = 10_000;
        for seed in 0..n {
            let model = PhaseNoiseModel { fwhm, dt_noise: 1e-3, seed };
            let real = sample_phase_noise(&model, t).unwrap();
            let (p1, _) = real.phases_at(t);
            acc += p1 * p1;
        }
        let var = acc / n as f64;
        let want = 2.0 * PI * fwhm * t;
        assert!((var / want - 1.0).abs() < 0.05, "{var} vs {want}");
    }

    #[test]
    fn coherence_decays_at_lorentzian_rate() {
        let (fwhm, n) = (0.05, 4000);
        for t in [0.5, 1.0, 2.0] {
            let (mut re, mut im) = (0.0, 0.0);
            for seed in 0..n {
                let model = PhaseNoiseModel { fwhm, dt_noise: 1e-2, seed };
                let real = sample_phase_noise(&model, 2.0).unwrap();
                let (p, _) = real.phases_at(t);
                re += p.cos();
                im += p.sin();
            }
            let mag = (re * re + im * im).sqrt() / n as f64;
            let want = (-PI * fwhm * t).exp();
            assert!((mag - want).abs() < 0.03, "t = {t}: {mag} vs {want}");
        }
    }

    #[test]
    fn noise_grid_points_are_interior() {
        let model = PhaseNoiseModel { fwhm: 1e-3, dt_noise: 0.25, seed: 0 };
        let n = sample_phase_noise(&model, 1.0).unwrap();
        assert_eq!(n.grid_points(0.0, 1.0), vec![0.25, 0.5, 0.75]);
        assert_eq!(n.grid_points(0.3, 0.75), vec![0.5]);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn omega_nonnegative_and_detuning_antisymmetric(frac in 0.0f64..0.5, second in any::<bool>()) {
                let p = fig2();
                let s = PulseSchedule::analytic(p).unwrap();
                let (pulse, start, len) = if second { (Pulse::Second, p.t1, p.t2) } else { (Pulse::First, 0.0, p.t1) };
                let off = frac * len;
                let mid = start + len / 2.0;
                prop_assert!(s.omega_in(pulse, mid + off) >= 0.0);
                let lhs = s.delta_r_in(pulse, mid + off);
                let rhs = s.delta_r_in(pulse, mid - off);
                prop_assert!((lhs + rhs).abs() < 1e-9);
            }
        }
    }
}
