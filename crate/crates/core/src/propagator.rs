//! Adaptive Runge–Kutta integration of the dissipative Schrödinger equation
//! i·dψ/dt = 2π·H(t)·ψ, with H in MHz and t in µs.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::EnsembleModel;
use crate::C64;

/// Interval between consecutive stop points of an integration. Generators
/// use its midpoint to resolve piecewise-defined controls, so that stages
/// evaluated exactly on a discontinuity see the correct side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub start: f64,
    pub end: f64,
}

impl Window {
    #[inline]
    pub fn mid(&self) -> f64 {
        0.5 * (self.start + self.end)
    }

    /// Degenerate window at a single instant.
    pub fn at(t: f64) -> Self {
        Self { start: t, end: t }
    }
}

/// A time-dependent (possibly non-Hermitian) Hamiltonian acting on a
/// fixed-dimension state vector.
pub trait Generator: Sync {
    fn dim(&self) -> usize;

    /// Writes H(t)·ψ (MHz) into `out`, overwriting it.
    fn apply(&self, t: f64, window: Window, psi: &[C64], out: &mut [C64]);

    /// Interior times in (t0, t1) where H may jump.
    fn breakpoints(&self, _t0: f64, _t1: f64) -> Vec<f64> {
        Vec::new()
    }

    /// Intermediate-state population carried by ψ.
    fn intermediate_population(&self, _t: f64, _window: Window, _psi: &[C64]) -> f64 {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantumState {
    pub amplitudes: Vec<C64>,
    /// µs.
    pub time: f64,
}

impl QuantumState {
    pub fn new(amplitudes: Vec<C64>, time: f64) -> Self {
        Self { amplitudes, time }
    }

    /// Unit amplitude on basis state `index`.
    pub fn basis(dim: usize, index: usize, time: f64) -> Self {
        let mut amplitudes = vec![C64::new(0.0, 0.0); dim];
        amplitudes[index] = C64::new(1.0, 0.0);
        Self { amplitudes, time }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSample {
    pub t: f64,
    pub p_e: f64,
    /// Norm loss 1 − ⟨ψ|ψ⟩.
    pub p_d: f64,
    pub norm: f64,
    /// Per-basis-state populations, empty unless requested.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub populations: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub samples: Vec<TraceSample>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolveOptions {
    /// Relative and absolute per-step error tolerance.
    pub tol: f64,
    /// Uniform trace points including both endpoints; below 2 only the
    /// endpoints are recorded.
    pub trace_points: usize,
    pub record_populations: bool,
    pub max_steps: usize,
    /// Optional cap on the step length, µs.
    pub max_step: Option<f64>,
}

pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEFAULT_TRACE_POINTS: usize = 2000;

impl Default for EvolveOptions {
    fn default() -> Self {
        Self { tol: DEFAULT_TOL, trace_points: 0, record_populations: false, max_steps: 50_000_000, max_step: None }
    }
}

impl EvolveOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, ..Self::default() }
    }

    pub fn traced(mut self, points: usize) -> Self {
        self.trace_points = points;
        self
    }
}

// Dormand–Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

struct Workspace {
    k: [Vec<C64>; 7],
    tmp: Vec<C64>,
    next: Vec<C64>,
}

impl Workspace {
    fn new(n: usize) -> Self {
        let z = vec![C64::new(0.0, 0.0); n];
        Self {
            k: [z.clone(), z.clone(), z.clone(), z.clone(), z.clone(), z.clone(), z.clone()],
            tmp: z.clone(),
            next: z,
        }
    }
}

/// dψ/dt = −i·2π·H·ψ.
#[inline]
fn rhs<G: Generator + ?Sized>(gen: &G, t: f64, w: Window, y: &[C64], out: &mut [C64]) {
    gen.apply(t, w, y, out);
    for v in out.iter_mut() {
        *v = C64::new(TAU * v.im, -TAU * v.re);
    }
}

fn sample<G: Generator + ?Sized>(gen: &G, t: f64, w: Window, y: &[C64], record_populations: bool) -> TraceSample {
    let norm: f64 = y.iter().map(|a| a.norm_sqr()).sum();
    TraceSample {
        t,
        p_e: gen.intermediate_population(t, w, y),
        p_d: 1.0 - norm,
        norm,
        populations: if record_populations { y.iter().map(|a| a.norm_sqr()).collect() } else { Vec::new() },
    }
}

/// Integrates from `t0` to `t1`, never stepping across generator
/// breakpoints or trace sample times.
pub fn evolve<G: Generator + ?Sized>(
    gen: &G,
    initial: &QuantumState,
    t0: f64,
    t1: f64,
    opts: &EvolveOptions,
) -> Result<(QuantumState, Trace)> {
    let n = gen.dim();
    if initial.amplitudes.len() != n {
        return Err(Error::Domain(format!("state has dimension {}, generator expects {n}", initial.amplitudes.len())));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::Domain("tolerance must be positive".into()));
    }
    if !(t1 >= t0) {
        return Err(Error::Domain(format!("end time {t1} precedes start time {t0}")));
    }

    let mut y = initial.amplitudes.clone();
    let mut trace = Trace::default();
    trace.samples.push(sample(gen, t0, Window::at(t0), &y, opts.record_populations));
    if t1 == t0 {
        return Ok((QuantumState::new(y, t1), trace));
    }

    // The integrator stops only at breakpoints and t1; trace samples come
    // from the dense-output interpolant, so tracing leaves the step sequence
    // (and the final state) untouched.
    let mut stops: Vec<f64> = gen.breakpoints(t0, t1).into_iter().filter(|&t| t > t0 && t < t1).collect();
    stops.push(t1);
    stops.sort_by(f64::total_cmp);
    stops.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * a.abs().max(1.0));
    let mut sample_times: Vec<f64> = Vec::new();
    if opts.trace_points >= 2 {
        let m = opts.trace_points - 1;
        sample_times.extend((1..m).map(|i| t0 + (t1 - t0) * i as f64 / m as f64));
    }
    sample_times.push(t1);
    let mut next_sample = 0usize;

    let mut ws = Workspace::new(n);
    let mut dense = vec![C64::new(0.0, 0.0); n];
    let tol = opts.tol;
    let mut t = t0;
    let mut h = 0.0;
    let mut steps = 0usize;
    let mut seg_start = t0;

    for &stop in &stops {
        if stop <= t {
            continue;
        }
        let w = Window { start: seg_start, end: stop };
        let snap = 1e-12 * stop.abs().max(1.0);
        rhs(gen, t, w, &y, &mut ws.k[0]);
        if h == 0.0 {
            h = initial_step(&y, &ws.k[0], stop - t);
        }
        if let Some(cap) = opts.max_step {
            h = h.min(cap);
        }

        while t < stop {
            steps += 1;
            if steps > opts.max_steps {
                return Err(Error::Integration { t, reason: format!("exceeded {} steps", opts.max_steps) });
            }
            let remaining = stop - t;
            let last = h >= remaining * (1.0 - 1e-12);
            let hs = if last { remaining } else { h };
            let err = dp_step(gen, t, hs, w, &y, &mut ws, tol);
            if !err.is_finite() {
                return Err(Error::Integration { t, reason: "non-finite state or error estimate".into() });
            }
            if err <= 1.0 {
                let t_new = if last { stop } else { t + hs };
                while let Some(&ts) = sample_times.get(next_sample) {
                    if last && ts <= stop + snap {
                        // Samples at the segment end use the exact state below.
                        if ts >= stop - snap {
                            break;
                        }
                    } else if ts > t_new {
                        break;
                    }
                    interpolate(&y, &ws, hs, (ts - t) / hs, &mut dense);
                    trace.samples.push(sample(gen, ts, w, &dense, opts.record_populations));
                    next_sample += 1;
                }
                t = t_new;
                std::mem::swap(&mut y, &mut ws.next);
                // First-same-as-last: the final stage is f(t + h, y_new).
                let (head, tail) = ws.k.split_at_mut(6);
                head[0].copy_from_slice(&tail[0]);
                let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                // Keep the natural step after a clipped final step.
                h = if last { h.max(hs * factor) } else { hs * factor };
            } else {
                h = hs * (0.9 * err.powf(-0.2)).clamp(0.1, 1.0);
            }
            if let Some(cap) = opts.max_step {
                h = h.min(cap);
            }
            if h < 1e-15 * t.abs().max(1.0) {
                return Err(Error::Integration {
                    t,
                    reason: format!("step size underflow (h = {h:e}); the problem may be stiff"),
                });
            }
        }
        while let Some(&ts) = sample_times.get(next_sample) {
            if ts > stop + snap {
                break;
            }
            trace.samples.push(sample(gen, stop, w, &y, opts.record_populations));
            next_sample += 1;
        }
        seg_start = stop;
    }
    Ok((QuantumState::new(y, t1), trace))
}

// Fourth-order continuous extension of the Dormand–Prince step:
// y(t + θh) = y + h Σ_j k_j Σ_m P[j][m] θ^(m+1).
const DENSE: [[f64; 4]; 7] = [
    [1.0, -8048581381.0 / 2820520608.0, 8663915743.0 / 2820520608.0, -12715105075.0 / 11282082432.0],
    [0.0, 0.0, 0.0, 0.0],
    [0.0, 131558114200.0 / 32700410799.0, -68118460800.0 / 10900136933.0, 87487479700.0 / 32700410799.0],
    [0.0, -1754552775.0 / 470086768.0, 14199869525.0 / 1410260304.0, -10690763975.0 / 1880347072.0],
    [0.0, 127303824393.0 / 49829197408.0, -318862633887.0 / 49829197408.0, 701980252875.0 / 199316789632.0],
    [0.0, -282668133.0 / 205662961.0, 2019193451.0 / 616988883.0, -1453857185.0 / 822651844.0],
    [0.0, 40617522.0 / 29380423.0, -110615467.0 / 29380423.0, 69997945.0 / 29380423.0],
];

fn interpolate(y: &[C64], ws: &Workspace, h: f64, theta: f64, out: &mut [C64]) {
    let powers = [theta, theta * theta, theta.powi(3), theta.powi(4)];
    let weights: Vec<f64> =
        DENSE.iter().map(|row| h * row.iter().zip(powers).map(|(p, x)| p * x).sum::<f64>()).collect();
    for (i, o) in out.iter_mut().enumerate() {
        *o = y[i] + weights.iter().zip(&ws.k).map(|(w, k)| k[i] * *w).sum::<C64>();
    }
}

fn initial_step(y: &[C64], f: &[C64], span: f64) -> f64 {
    let ny: f64 = y.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    let nf: f64 = f.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    if nf == 0.0 {
        return span;
    }
    (1e-3 * ny.max(1e-3) / nf).min(span)
}

/// One Dormand–Prince step of size `h`; returns the scaled error norm and
/// leaves the candidate in `ws.next` and f(t+h, next) in `ws.k[6]`.
fn dp_step<G: Generator + ?Sized>(gen: &G, t: f64, h: f64, w: Window, y: &[C64], ws: &mut Workspace, tol: f64) -> f64 {
    let n = y.len();
    let Workspace { k, tmp, next } = ws;
    let [k1, k2, k3, k4, k5, k6, k7] = k;

    for i in 0..n {
        tmp[i] = y[i] + k1[i] * (h * A21);
    }
    rhs(gen, t + C2 * h, w, tmp, k2);
    for i in 0..n {
        tmp[i] = y[i] + (k1[i] * A31 + k2[i] * A32) * h;
    }
    rhs(gen, t + C3 * h, w, tmp, k3);
    for i in 0..n {
        tmp[i] = y[i] + (k1[i] * A41 + k2[i] * A42 + k3[i] * A43) * h;
    }
    rhs(gen, t + C4 * h, w, tmp, k4);
    for i in 0..n {
        tmp[i] = y[i] + (k1[i] * A51 + k2[i] * A52 + k3[i] * A53 + k4[i] * A54) * h;
    }
    rhs(gen, t + C5 * h, w, tmp, k5);
    for i in 0..n {
        tmp[i] = y[i] + (k1[i] * A61 + k2[i] * A62 + k3[i] * A63 + k4[i] * A64 + k5[i] * A65) * h;
    }
    rhs(gen, t + h, w, tmp, k6);
    for i in 0..n {
        next[i] = y[i] + (k1[i] * B1 + k3[i] * B3 + k4[i] * B4 + k5[i] * B5 + k6[i] * B6) * h;
    }
    rhs(gen, t + h, w, next, k7);

    let mut acc = 0.0;
    for i in 0..n {
        let e = (k1[i] * E1 + k3[i] * E3 + k4[i] * E4 + k5[i] * E5 + k6[i] * E6 + k7[i] * E7) * h;
        let scale = tol + tol * y[i].norm().max(next[i].norm());
        acc += e.norm_sqr() / (scale * scale);
    }
    (acc / n as f64).sqrt()
}

/// Evolves `initial` across the whole two-pulse window of `model`, with the
/// default trace grid.
pub fn evolve_protocol(model: &EnsembleModel, initial: &QuantumState) -> Result<(QuantumState, Trace)> {
    let opts = EvolveOptions { trace_points: DEFAULT_TRACE_POINTS, ..EvolveOptions::default() };
    evolve_protocol_with(model, initial, &opts)
}

pub fn evolve_protocol_with(
    model: &EnsembleModel,
    initial: &QuantumState,
    opts: &EvolveOptions,
) -> Result<(QuantumState, Trace)> {
    evolve(model, initial, 0.0, model.schedule.duration(), opts)
}

/// Writes a trace as CSV: t_us, P_e, P_d, norm and optional populations.
pub fn write_trace_csv<W: std::io::Write>(trace: &Trace, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let n_pop = trace.samples.first().map_or(0, |s| s.populations.len());
    let mut header = vec!["t_us".to_string(), "P_e".into(), "P_d".into(), "norm".into()];
    header.extend((0..n_pop).map(|i| format!("pop_{i}")));
    w.write_record(&header)?;
    for s in &trace.samples {
        let mut row = vec![s.t.to_string(), s.p_e.to_string(), s.p_d.to_string(), s.norm.to_string()];
        row.extend(s.populations.iter().map(|p| p.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
