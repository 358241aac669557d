//! Drives the stepper over `ω ∈ [0, H̄]` and runs convergence studies.

use nalgebra::DVector;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::method::{Ephbvm, MethodParams, StepResult, DEFAULT_FP_MAX_ITER, DEFAULT_FP_TOL};
use crate::poisson::{AugmentedState, PoissonSystem};
use crate::problems::EventProblem;

/// Errors below `SATURATION_FACTOR · ε · (1 + |x*|)` are treated as round-off.
pub const SATURATION_FACTOR: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocateOptions {
    pub s: usize,
    pub k: usize,
    pub steps: usize,
    pub fp_tol: f64,
    pub fp_max_iter: usize,
    /// Keep the stages of every step (for plotting).
    pub dense: bool,
}

impl LocateOptions {
    pub fn new(k: usize, s: usize, steps: usize) -> Self {
        Self {
            s,
            k,
            steps,
            fp_tol: DEFAULT_FP_TOL,
            fp_max_iter: DEFAULT_FP_MAX_ITER,
            dense: false,
        }
    }

    pub fn dense(mut self, on: bool) -> Self {
        self.dense = on;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub state: AugmentedState,
}

#[derive(Debug, Clone)]
pub struct EventResult {
    pub hbar: f64,
    pub x_star: DVector<f64>,
    pub g_residual: f64,
    pub steps: usize,
    /// Step endpoints, starting at `(0, y₀)` and ending at `(H̄, y_N)`.
    pub trajectory: Vec<TrajectoryPoint>,
    pub per_step: Vec<StepResult>,
    /// Stage values of each step, present when requested.
    pub dense_stages: Option<Vec<Vec<AugmentedState>>>,
}

impl EventResult {
    pub fn alpha_max(&self) -> f64 {
        self.per_step
            .iter()
            .map(|r| r.alpha.abs())
            .fold(0.0, f64::max)
    }

    pub fn energy_drift_max(&self) -> f64 {
        self.per_step
            .iter()
            .map(|r| r.energy_drift)
            .fold(0.0, f64::max)
    }

    pub fn energy_residual_max(&self) -> f64 {
        self.per_step
            .iter()
            .map(|r| r.energy_residual)
            .fold(0.0, f64::max)
    }

    pub fn omega_residual_max(&self) -> f64 {
        self.per_step
            .iter()
            .map(|r| r.omega_residual)
            .fold(0.0, f64::max)
    }

    pub fn iterations_max(&self) -> usize {
        self.per_step
            .iter()
            .map(|r| r.iterations)
            .max()
            .unwrap_or(0)
    }
}

/// The `i`-th point of the uniform `ω` grid, landing exactly on `H̄` at `i = N`.
fn grid_point(hbar: f64, i: usize, steps: usize) -> f64 {
    if i == steps {
        hbar
    } else {
        hbar * i as f64 / steps as f64
    }
}

/// Integrates the lifted problem with `N` uniform steps of size `H̄ / N`.
pub fn locate(problem: &EventProblem, opts: &LocateOptions) -> Result<EventResult> {
    if opts.steps == 0 {
        return Err(Error::InvalidParameter(
            "step count must be at least 1".into(),
        ));
    }
    let sys = PoissonSystem::from_problem(problem.clone())?;
    let hbar = sys.hbar;
    let n_steps = opts.steps;
    let params = MethodParams::new(opts.k, opts.s, hbar / n_steps as f64)?
        .with_fp_tol(opts.fp_tol)
        .with_fp_max_iter(opts.fp_max_iter);
    let base = Ephbvm::new(params)?;

    let mut y = sys.initial_state();
    let mut trajectory = vec![TrajectoryPoint {
        t: 0.0,
        state: y.clone(),
    }];
    let mut per_step = Vec::with_capacity(n_steps);
    let mut dense = opts.dense.then(|| Vec::with_capacity(n_steps));

    for i in 1..=n_steps {
        let t0 = grid_point(hbar, i - 1, n_steps);
        let t1 = grid_point(hbar, i, n_steps);
        let stepper = base.with_step(t1 - t0).map_err(|e| e.at_step(i))?;
        let (mut res, stages) = stepper.step_detailed(&sys, &y).map_err(|e| e.at_step(i))?;
        // ω advances along the exact grid; the computed value only feeds the residual
        res.y1.omega = t1;
        problem
            .check_transversality(&res.y1.x)
            .map_err(|e| e.at_step(i))?;
        if let Some(d) = dense.as_mut() {
            d.push(
                stages
                    .stages
                    .iter()
                    .map(AugmentedState::from_vector)
                    .collect(),
            );
        }
        y = res.y1.clone();
        trajectory.push(TrajectoryPoint {
            t: t1,
            state: y.clone(),
        });
        per_step.push(res);
    }

    let g_residual = problem.event(&y.x);
    Ok(EventResult {
        hbar,
        x_star: y.x,
        g_residual,
        steps: n_steps,
        trajectory,
        per_step,
        dense_stages: dense,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReferenceSpec {
    pub s: usize,
    pub k: usize,
    pub steps: usize,
}

impl ReferenceSpec {
    /// Tighter settings than a study with `s` basis functions whose finest grid has
    /// `finest_steps` steps: `s + 2` basis functions, enough nodes for exact
    /// conservation when `g` is polynomial (else `s + 6`), and 16 times the steps.
    pub fn tighter_than(problem: &EventProblem, s: usize, finest_steps: usize) -> Self {
        let s_ref = s + 2;
        let k_ref = match problem.poly_degree {
            Some(nu) => s_ref.max((nu as usize * s_ref).div_ceil(2)),
            None => s_ref + 4,
        };
        Self {
            s: s_ref,
            k: k_ref,
            steps: 16 * finest_steps,
        }
    }
}

pub fn reference_event(problem: &EventProblem, spec: ReferenceSpec) -> Result<DVector<f64>> {
    locate(problem, &LocateOptions::new(spec.k, spec.s, spec.steps)).map(|r| r.x_star)
}

/// How `e_n*` is estimated in a convergence study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorMetric {
    /// `|x_n* - x_{n-1}*|` between consecutive grids.
    #[default]
    Successive,
    /// `|x_n* - x_ref|` against a tighter reference run.
    Reference,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Rate {
    /// Not enough data (`---`).
    Missing,
    Value(f64),
    /// Error already at round-off level (`***`).
    Saturated,
}

impl Rate {
    pub fn value(&self) -> Option<f64> {
        match self {
            Rate::Value(v) => Some(*v),
            _ => None,
        }
    }
}

/// Serialized as a number, `null` when missing, or the string `"***"`.
impl Serialize for Rate {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Rate::Missing => ser.serialize_none(),
            Rate::Value(v) => ser.serialize_f64(*v),
            Rate::Saturated => ser.serialize_str("***"),
        }
    }
}

impl std::fmt::Display for Rate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Rate::Missing => f.write_str("---"),
            Rate::Value(v) => write!(f, "{v:.1}"),
            Rate::Saturated => f.write_str("***"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ConvergenceRow {
    pub n: usize,
    pub steps: usize,
    pub h: f64,
    pub x_star: DVector<f64>,
    pub g_residual: f64,
    pub error: Option<f64>,
    pub rate: Rate,
    pub result: EventResult,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StudyOptions {
    pub s: usize,
    pub k: usize,
    pub n_max: usize,
    pub metric: ErrorMetric,
    /// Overrides [`ReferenceSpec::tighter_than`] for the reference metric.
    pub reference: Option<ReferenceSpec>,
    pub fp_tol: f64,
    pub fp_max_iter: usize,
}

impl StudyOptions {
    pub fn new(k: usize, s: usize, n_max: usize) -> Self {
        Self {
            s,
            k,
            n_max,
            metric: ErrorMetric::default(),
            reference: None,
            fp_tol: DEFAULT_FP_TOL,
            fp_max_iter: DEFAULT_FP_MAX_ITER,
        }
    }

    pub fn metric(mut self, metric: ErrorMetric) -> Self {
        self.metric = metric;
        self
    }
}

/// Steps on level `n` of a study: `10 · 2ⁿ`, i.e. `h_n = H̄ / (10 · 2ⁿ)`.
pub fn level_steps(n: usize) -> usize {
    10 << n
}

pub fn rate_between(prev: Option<f64>, cur: Option<f64>, floor: f64) -> Rate {
    match (prev, cur) {
        (_, Some(e)) if e <= floor => Rate::Saturated,
        (Some(a), Some(b)) if a > floor => Rate::Value((a / b).log2()),
        _ => Rate::Missing,
    }
}

/// Runs levels `n = 0..=n_max` and estimates errors and observed orders.
pub fn convergence_study(
    problem: &EventProblem,
    opts: &StudyOptions,
) -> Result<Vec<ConvergenceRow>> {
    if opts.n_max == 0 {
        return Err(Error::InvalidParameter(
            "a study needs at least two levels".into(),
        ));
    }
    let reference = match opts.metric {
        ErrorMetric::Reference => {
            let spec = opts.reference.unwrap_or_else(|| {
                ReferenceSpec::tighter_than(problem, opts.s, level_steps(opts.n_max))
            });
            Some(reference_event(problem, spec)?)
        }
        ErrorMetric::Successive => None,
    };

    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(opts.n_max + 1);
    for n in 0..=opts.n_max {
        let steps = level_steps(n);
        let lo = LocateOptions {
            fp_tol: opts.fp_tol,
            fp_max_iter: opts.fp_max_iter,
            ..LocateOptions::new(opts.k, opts.s, steps)
        };
        let result = locate(problem, &lo)?;
        let x = result.x_star.clone();
        let error = match (&reference, rows.last()) {
            (Some(r), _) => Some((&x - r).norm()),
            (None, Some(prev)) => Some((&x - &prev.x_star).norm()),
            (None, None) => None,
        };
        let floor = SATURATION_FACTOR * f64::EPSILON * (1.0 + x.norm());
        let rate = rate_between(rows.last().and_then(|r| r.error), error, floor);
        rows.push(ConvergenceRow {
            n,
            steps,
            h: result.hbar / steps as f64,
            x_star: x,
            g_residual: result.g_residual,
            error,
            rate,
            result,
        });
    }
    Ok(rows)
}
