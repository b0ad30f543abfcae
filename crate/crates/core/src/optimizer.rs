//! Derivative-free search over pulse parameters.
//!
//! [`minimize`] is a Nelder–Mead simplex working in coordinates normalized to
//! the parameter bounds, with clipping, seeded restarts and rejection of
//! non-finite objective values. The presets map a [`ParameterVector`] onto an
//! analytic ARP schedule or a dCRAB envelope and score it by 1 − F with the
//! corrective phase re-optimized every time.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fidelity::{evaluate_gate, GateSetup};
use crate::model::ModelKind;
use crate::pulse::{ArpParams, DcrabEnvelope, PulseSchedule};

/// Named real parameters with box bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterVector {
    pub names: Vec<String>,
    pub values: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl ParameterVector {
    pub fn new(names: Vec<String>, values: Vec<f64>, lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let n = names.len();
        if n == 0 || values.len() != n || lower.len() != n || upper.len() != n {
            return Err(Error::Validation(
                "parameter names, values and bounds must have one common nonzero length".into(),
            ));
        }
        for i in 0..n {
            if !(lower[i] < upper[i]) || !lower[i].is_finite() || !upper[i].is_finite() {
                return Err(Error::Validation(format!("parameter {} has invalid bounds", names[i])));
            }
            if !(values[i] >= lower[i] && values[i] <= upper[i]) {
                return Err(Error::Validation(format!(
                    "parameter {} = {} lies outside [{}, {}]",
                    names[i], values[i], lower[i], upper[i]
                )));
            }
        }
        Ok(Self { names, values, lower, upper })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.values[i])
    }

    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(self.names.clone(), values, self.lower.clone(), self.upper.clone())
    }

    fn normalize(&self, x: &[f64]) -> Vec<f64> {
        x.iter().enumerate().map(|(i, v)| (v - self.lower[i]) / (self.upper[i] - self.lower[i])).collect()
    }

    fn denormalize(&self, u: &[f64]) -> Vec<f64> {
        u.iter().enumerate().map(|(i, v)| self.lower[i] + v.clamp(0.0, 1.0) * (self.upper[i] - self.lower[i])).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimizeOptions {
    pub max_evaluations: usize,
    /// Simplex diameter threshold, in bound-normalized coordinates.
    pub xtol: f64,
    /// Objective spread threshold across the simplex.
    pub ftol: f64,
    /// Additional simplex restarts around the incumbent.
    pub restarts: usize,
    /// Initial simplex edge, as a fraction of each bound interval.
    pub initial_step: f64,
    pub seed: u64,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        Self { max_evaluations: 2000, xtol: 1e-6, ftol: 1e-10, restarts: 1, initial_step: 0.05, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationReport {
    pub names: Vec<String>,
    pub best: Vec<f64>,
    pub best_objective: f64,
    pub evaluations: usize,
    /// Candidates whose objective was not finite.
    pub rejected: usize,
    /// Best-so-far objective after every simplex iteration.
    pub history: Vec<f64>,
}

impl OptimizationReport {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.best[i])
    }

    pub fn write_history_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["iteration", "best_objective"])?;
        for (i, f) in self.history.iter().enumerate() {
            w.write_record([i.to_string(), f.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

struct Counter<'a, F> {
    objective: &'a F,
    space: &'a ParameterVector,
    evaluations: usize,
    rejected: usize,
}

impl<F: Fn(&[f64]) -> f64 + Sync> Counter<'_, F> {
    fn eval_many(&mut self, points: &[Vec<f64>]) -> Vec<f64> {
        let values: Vec<f64> = points.par_iter().map(|u| (self.objective)(&self.space.denormalize(u))).collect();
        self.evaluations += points.len();
        values
            .into_iter()
            .map(|v| {
                if v.is_finite() {
                    v
                } else {
                    self.rejected += 1;
                    log::warn!("rejected candidate with non-finite objective");
                    f64::INFINITY
                }
            })
            .collect()
    }

    fn eval(&mut self, u: &[f64]) -> f64 {
        self.eval_many(&[u.to_vec()])[0]
    }
}

fn clip(u: &mut [f64]) {
    u.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
}

/// One Nelder–Mead run from `start`; returns the best vertex and value.
fn simplex_run<F: Fn(&[f64]) -> f64 + Sync>(
    counter: &mut Counter<'_, F>,
    start: &[f64],
    f_start: f64,
    steps: &[f64],
    opts: &MinimizeOptions,
    history: &mut Vec<f64>,
    incumbent: &mut f64,
) -> (Vec<f64>, f64) {
    let n = start.len();
    let mut vertices = vec![start.to_vec()];
    for i in 0..n {
        let mut v = start.to_vec();
        // Step inward when the seed sits on the upper bound.
        v[i] = if v[i] + steps[i] <= 1.0 { v[i] + steps[i] } else { v[i] - steps[i] };
        clip(&mut v);
        vertices.push(v);
    }
    let mut values = vec![f_start];
    values.extend(counter.eval_many(&vertices[1..]));

    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
    loop {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
        vertices = order.iter().map(|&i| vertices[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();
        *incumbent = incumbent.min(values[0]);
        history.push(*incumbent);

        let diameter = vertices[1..]
            .iter()
            .flat_map(|v| v.iter().zip(&vertices[0]).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        let spread = values[n] - values[0];
        if diameter < opts.xtol
            || (spread.is_finite() && spread < opts.ftol)
            || counter.evaluations >= opts.max_evaluations
        {
            break;
        }

        let centroid: Vec<f64> = (0..n).map(|j| vertices[..n].iter().map(|v| v[j]).sum::<f64>() / n as f64).collect();
        let toward = |coef: f64| -> Vec<f64> {
            let mut p: Vec<f64> = (0..n).map(|j| centroid[j] + coef * (vertices[n][j] - centroid[j])).collect();
            clip(&mut p);
            p
        };

        let xr = toward(-alpha);
        let fr = counter.eval(&xr);
        if fr < values[0] {
            let xe = toward(-alpha * gamma);
            let fe = counter.eval(&xe);
            if fe < fr {
                vertices[n] = xe;
                values[n] = fe;
            } else {
                vertices[n] = xr;
                values[n] = fr;
            }
            continue;
        }
        if fr < values[n - 1] {
            vertices[n] = xr;
            values[n] = fr;
            continue;
        }
        let (xc, fc) = if fr < values[n] {
            let xc = toward(-alpha * rho);
            let fc = counter.eval(&xc);
            (xc, fc)
        } else {
            let xc = toward(rho);
            let fc = counter.eval(&xc);
            (xc, fc)
        };
        if fc < values[n].min(fr) {
            vertices[n] = xc;
            values[n] = fc;
            continue;
        }
        let best = vertices[0].clone();
        let shrunk: Vec<Vec<f64>> =
            vertices[1..].iter().map(|v| v.iter().zip(&best).map(|(a, b)| b + sigma * (a - b)).collect()).collect();
        let shrunk_values = counter.eval_many(&shrunk);
        for (i, (v, f)) in shrunk.into_iter().zip(shrunk_values).enumerate() {
            vertices[i + 1] = v;
            values[i + 1] = f;
        }
    }
    (vertices[0].clone(), values[0])
}

/// Bounded Nelder–Mead with restarts. Deterministic for fixed options.
pub fn minimize<F>(objective: &F, x0: &ParameterVector, opts: &MinimizeOptions) -> Result<OptimizationReport>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if !(opts.initial_step > 0.0 && opts.initial_step <= 1.0) {
        return Err(Error::Validation("initial simplex step must lie in (0, 1]".into()));
    }
    let mut counter = Counter { objective, space: x0, evaluations: 0, rejected: 0 };
    let mut best_u = x0.normalize(&x0.values);
    let mut best_f = counter.eval(&best_u);
    if !best_f.is_finite() {
        return Err(Error::Evaluation("objective is not finite at the starting point".into()));
    }
    let mut history = vec![best_f];
    let mut incumbent = best_f;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let n = x0.len();

    for round in 0..=opts.restarts {
        if counter.evaluations >= opts.max_evaluations {
            break;
        }
        let steps: Vec<f64> = if round == 0 {
            vec![opts.initial_step; n]
        } else {
            (0..n).map(|_| opts.initial_step * rng.random_range(0.5..1.5)).collect()
        };
        let (u, f) = simplex_run(&mut counter, &best_u, best_f, &steps, opts, &mut history, &mut incumbent);
        if f < best_f {
            best_u = u;
            best_f = f;
        }
    }

    Ok(OptimizationReport {
        names: x0.names.clone(),
        best: x0.denormalize(&best_u),
        best_objective: best_f,
        evaluations: counter.evaluations,
        rejected: counter.rejected,
        history,
    })
}

/// Names of the analytic preset, in order.
pub const ANALYTIC_NAMES: [&str; 8] =
    ["delta_int_mhz", "t1_us", "t2_us", "tau1_frac", "tau2_frac", "delta_r1_mhz", "delta_r2_mhz", "i1_scale"];

/// Analytic ARP preset around a seed schedule: {Δ, T₁, T₂, τ₁/T₁, τ₂/T₂,
/// δ_R¹, δ_R², I₁ᵉ scale}. Durations and τ fractions may move within
/// ×[0.5, 2], detunings within ×[1/3, 3], the intensity scale within [0.5, 2].
pub fn analytic_preset(delta_int: f64, params: &ArpParams) -> Result<ParameterVector> {
    let values = vec![
        delta_int,
        params.t1,
        params.t2,
        params.tau1 / params.t1,
        params.tau2 / params.t2,
        params.delta_r1,
        params.delta_r2,
        1.0,
    ];
    let lower = vec![
        delta_int / 3.0,
        0.5 * params.t1,
        0.5 * params.t2,
        0.5 * values[3],
        0.5 * values[4],
        params.delta_r1 / 3.0,
        params.delta_r2 / 3.0,
        0.5,
    ];
    let upper = vec![
        3.0 * delta_int,
        2.0 * params.t1,
        2.0 * params.t2,
        2.0 * values[3],
        2.0 * values[4],
        3.0 * params.delta_r1,
        3.0 * params.delta_r2,
        2.0,
    ];
    ParameterVector::new(ANALYTIC_NAMES.iter().map(|s| s.to_string()).collect(), values, lower, upper)
}

/// Applies an analytic-preset vector to `base`. The lower-leg intensity is
/// scaled, Ω_R⁰ follows from the rescaled calibration.
pub fn apply_analytic(base: &GateSetup, x: &[f64]) -> Result<GateSetup> {
    if x.len() != ANALYTIC_NAMES.len() {
        return Err(Error::Validation(format!(
            "analytic preset has {} entries, got {}",
            ANALYTIC_NAMES.len(),
            x.len()
        )));
    }
    let scheme = base.scheme.with_intermediate_detuning(x[0])?;
    let p0 = &base.schedule.params;
    let i1_seed = p0.peak_i1(&base.scheme.calibration);
    let params = ArpParams::from_intensities(
        &scheme.calibration,
        x[1],
        x[2],
        x[3] * x[1],
        x[4] * x[2],
        x[5],
        x[6],
        x[7] * i1_seed,
        p0.ir,
    )?;
    let schedule = match &base.schedule.envelope {
        Some(env) => PulseSchedule::shaped(params, env.clone())?,
        None => PulseSchedule::analytic(params)?,
    };
    Ok(GateSetup { scheme, schedule, ..base.clone() })
}

/// 1 − F with the corrective phase optimized; errors score +∞.
fn infidelity(setup: &GateSetup) -> f64 {
    match evaluate_gate(setup, true) {
        Ok(r) => 1.0 - r.fidelity,
        Err(e) => {
            log::debug!("objective evaluation failed: {e}");
            f64::INFINITY
        }
    }
}

/// Reduced-model copy of a setup with traces disabled.
fn objective_setup(base: &GateSetup) -> GateSetup {
    let mut s = base.clone();
    s.kind = ModelKind::Reduced;
    s.options.trace_points = 0;
    s
}

/// Optimizes the analytic ARP family of `base` against reduced-model
/// infidelity.
pub fn optimize_analytic(base: &GateSetup, opts: &MinimizeOptions) -> Result<(OptimizationReport, GateSetup)> {
    let base = objective_setup(base);
    let x0 = analytic_preset(base.scheme.calibration.delta_int, &base.schedule.params)?;
    let objective = |x: &[f64]| match apply_analytic(&base, x) {
        Ok(s) => infidelity(&s),
        Err(_) => f64::INFINITY,
    };
    let report = minimize(&objective, &x0, opts)?;
    let best = apply_analytic(&base, &report.best)?;
    Ok((report, best))
}

/// dCRAB preset: {A_k, B_k, r_k}, A and B in [−2, 2], r in [−0.5, 0.5].
pub fn dcrab_preset(env: &DcrabEnvelope) -> Result<ParameterVector> {
    let n = env.n_modes();
    let mut names = Vec::with_capacity(3 * n);
    for prefix in ["a", "b", "r"] {
        names.extend((1..=n).map(|k| format!("{prefix}{k}")));
    }
    let values: Vec<f64> = env.a.iter().chain(&env.b).chain(&env.r).copied().collect();
    let lower: Vec<f64> = [-2.0; 1].repeat(2 * n).into_iter().chain(std::iter::repeat_n(-0.5, n)).collect();
    let upper: Vec<f64> = [2.0; 1].repeat(2 * n).into_iter().chain(std::iter::repeat_n(0.5, n)).collect();
    ParameterVector::new(names, values, lower, upper)
}

pub fn envelope_from(x: &[f64]) -> Result<DcrabEnvelope> {
    if x.is_empty() || !x.len().is_multiple_of(3) {
        return Err(Error::Validation("dCRAB vector length must be a positive multiple of 3".into()));
    }
    let n = x.len() / 3;
    DcrabEnvelope::new(x[..n].to_vec(), x[n..2 * n].to_vec(), x[2 * n..].to_vec())
}

fn with_envelope(base: &GateSetup, env: DcrabEnvelope) -> Result<GateSetup> {
    Ok(GateSetup { schedule: PulseSchedule::shaped(base.schedule.params, env)?, ..base.clone() })
}

/// Simplified dCRAB: each super-iteration draws fresh frequency factors r_k,
/// starts from the unit envelope A = B = 0 and optimizes {A_k, B_k, r_k}.
/// The unit envelope is the first point evaluated, so the result is never
/// worse than the analytic pulse.
pub fn dcrab_search(
    base: &GateSetup,
    n_modes: usize,
    super_iterations: usize,
    seed: u64,
    opts: &MinimizeOptions,
) -> Result<OptimizationReport> {
    if n_modes == 0 {
        return Err(Error::Validation("dCRAB needs at least one mode".into()));
    }
    let base = objective_setup(base);
    let objective = |x: &[f64]| match envelope_from(x).and_then(|e| with_envelope(&base, e)) {
        Ok(s) => infidelity(&s),
        Err(_) => f64::INFINITY,
    };

    let unit = DcrabEnvelope::unit(n_modes, vec![0.0; n_modes])?;
    let unit_f = infidelity(&with_envelope(&base, unit.clone())?);
    if !unit_f.is_finite() {
        return Err(Error::Evaluation("analytic pulse could not be evaluated".into()));
    }
    let space = dcrab_preset(&unit)?;
    let mut report = OptimizationReport {
        names: space.names.clone(),
        best: space.values.clone(),
        best_objective: unit_f,
        evaluations: 1,
        rejected: 0,
        history: vec![unit_f],
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for s in 0..super_iterations {
        let r: Vec<f64> = (0..n_modes).map(|_| rng.random_range(-0.5..0.5)).collect();
        let start = dcrab_preset(&DcrabEnvelope::unit(n_modes, r)?)?;
        let run_opts = MinimizeOptions { seed: opts.seed.wrapping_add(s as u64), ..opts.clone() };
        let run = minimize(&objective, &start, &run_opts)?;
        report.evaluations += run.evaluations;
        report.rejected += run.rejected;
        let floor = report.best_objective;
        report.history.extend(run.history.iter().map(|f| f.min(floor)));
        if run.best_objective < report.best_objective {
            report.best_objective = run.best_objective;
            report.best = run.best;
        }
        log::info!("dCRAB super-iteration {}: best 1 − F = {:.6e}", s + 1, report.best_objective);
    }
    Ok(report)
}
