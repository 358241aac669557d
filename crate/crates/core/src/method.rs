//! One step of the enhanced Poisson HBVM with `s` basis functions and `k`
//! Gauss nodes, written EPHBVM(k, s).
//!
//! The stage polynomial is expanded on the first `s` orthonormal Legendre
//! polynomials; its Fourier coefficients are approximated by the `k`-point
//! Gauss rule. A scalar correction `α` along `(d̂₀; 1)` forces the `ω`
//! component to advance by exactly `h`, while the skew-symmetry of the
//! correction keeps `H` unchanged.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::legendre::{BasisTables, QuadratureRule};
use crate::poisson::{structure_from, AugmentedState, PoissonSystem};
use crate::problems::EventProblem;

pub const DEFAULT_FP_TOL: f64 = 1e-14;
pub const DEFAULT_FP_MAX_ITER: usize = 100;

/// An iteration whose change stops shrinking is accepted once the change is
/// within this multiple of the tolerance (round-off floor).
pub const STAGNATION_FACTOR: f64 = 1e3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MethodParams {
    pub s: usize,
    pub k: usize,
    pub h: f64,
    pub fp_tol: f64,
    pub fp_max_iter: usize,
}

impl MethodParams {
    pub fn new(k: usize, s: usize, h: f64) -> Result<Self> {
        let p = Self {
            s,
            k,
            h,
            fp_tol: DEFAULT_FP_TOL,
            fp_max_iter: DEFAULT_FP_MAX_ITER,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_fp_tol(mut self, tol: f64) -> Self {
        self.fp_tol = tol;
        self
    }

    pub fn with_fp_max_iter(mut self, iters: usize) -> Self {
        self.fp_max_iter = iters;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.s == 0 || self.k < self.s {
            return Err(Error::InvalidParameter(format!(
                "need k >= s >= 1, got k = {}, s = {}",
                self.k, self.s
            )));
        }
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "step size must be positive and finite, got {}",
                self.h
            )));
        }
        if !(self.fp_tol > 0.0) || self.fp_max_iter == 0 {
            return Err(Error::InvalidParameter(format!(
                "fixed-point tolerance and iteration cap must be positive, got {} and {}",
                self.fp_tol, self.fp_max_iter
            )));
        }
        Ok(())
    }
}

/// Iteration state of one step, at the last evaluated iterate.
#[derive(Debug, Clone)]
pub struct StageSystem {
    /// `φ_i = Σ_j ρ̂_ij γ̂_j`, `i = 0..s`.
    pub phi: Vec<DVector<f64>>,
    pub alpha: f64,
    /// `Y_ℓ = (x_ℓ; ω_ℓ)` at the Gauss nodes.
    pub stages: Vec<DVector<f64>>,
    pub g0hat: DVector<f64>,
    pub d0hat: DVector<f64>,
    pub gamma_hat: Vec<DVector<f64>>,
    /// `rho_hat[i][j]`, each an `m × m` skew-symmetric block.
    pub rho_hat: Vec<Vec<DMatrix<f64>>>,
}

#[derive(Debug, Clone)]
pub struct StepResult {
    pub y1: AugmentedState,
    pub alpha: f64,
    pub iterations: usize,
    pub fp_residual: f64,
    /// `|H(y₁)|`.
    pub energy_residual: f64,
    /// `|H(y₁) - H(y₀)|`.
    pub energy_drift: f64,
    /// `|ω₁ - (ω₀ + h)|`.
    pub omega_residual: f64,
}

/// `Y_i = y₀ + h Σ_j I_ij φ_j - α h c_i (d̂₀; 1)`.
pub fn assemble_stages(
    tables: &BasisTables,
    y0: &DVector<f64>,
    h: f64,
    phi: &[DVector<f64>],
    alpha: f64,
    d0hat: &DVector<f64>,
) -> Vec<DVector<f64>> {
    let m = y0.len();
    let n = m - 1;
    let corr = DVector::from_fn(m, |r, _| if r < n { d0hat[r] } else { 1.0 });
    (0..tables.k)
        .map(|i| {
            let mut y = y0.clone();
            for (j, phi_j) in phi.iter().enumerate() {
                y.axpy(h * tables.integrals[(i, j)], phi_j, 1.0);
            }
            if alpha != 0.0 {
                y.axpy(-alpha * h * tables.nodes()[i], &corr, 1.0);
            }
            y
        })
        .collect()
}

/// Quadrature approximations `γ̂_j` and `ρ̂_ij`, `i, j < s`.
#[allow(clippy::type_complexity)]
pub fn fourier_hat(
    sys: &PoissonSystem,
    tables: &BasisTables,
    stages: &[DVector<f64>],
) -> Result<(Vec<DVector<f64>>, Vec<Vec<DMatrix<f64>>>)> {
    let m = sys.dim();
    let s = tables.s;
    let mut gamma = vec![DVector::zeros(m); s];
    let mut rho = vec![vec![DMatrix::zeros(m, m); s]; s];
    for (l, y) in stages.iter().enumerate() {
        let dh = sys.grad_energy(y);
        let b_mat = structure_from(&sys.g_field(y)?, &dh);
        let w = tables.weights()[l];
        for i in 0..s {
            let pi = tables.values[(l, i)];
            gamma[i].axpy(w * pi, &dh, 1.0);
            for j in i..s {
                rho[i][j] += &b_mat * (w * pi * tables.values[(l, j)]);
            }
        }
    }
    for i in 0..s {
        for j in 0..i {
            rho[i][j] = rho[j][i].clone();
        }
    }
    Ok((gamma, rho))
}

/// `ĝ₀ = Σ b_ℓ ∇g(x_ℓ)` and `d̂₀ = ĝ₀ / |ĝ₀|²`.
pub fn g0_hat(
    problem: &EventProblem,
    rule: &QuadratureRule,
    stages: &[DVector<f64>],
) -> Result<(DVector<f64>, DVector<f64>)> {
    let n = problem.dim();
    let mut g0 = DVector::zeros(n);
    for (y, &b) in stages.iter().zip(&rule.weights) {
        let x = y.rows(0, n).into_owned();
        g0.axpy(b, &problem.event_gradient(&x), 1.0);
    }
    let norm = g0.norm();
    if !(norm > problem.delta_min) {
        return Err(Error::DegenerateGradient { norm });
    }
    let d0 = &g0 / (norm * norm);
    Ok((g0, d0))
}

/// `α = Σ_j e_mᵀ ρ̂_0j γ̂_j - 1`.
pub fn alpha_update(gamma_hat: &[DVector<f64>], rho_hat: &[Vec<DMatrix<f64>>]) -> f64 {
    let last = gamma_hat[0].len() - 1;
    let sum: f64 = gamma_hat
        .iter()
        .zip(&rho_hat[0])
        .map(|(g, r)| r.row(last).dot(&g.transpose()))
        .sum();
    sum - 1.0
}

fn relative_change(new: &DVector<f64>, old: &DVector<f64>) -> f64 {
    (new - old).amax() / (1.0 + new.amax())
}

/// EPHBVM(k, s) stepper bound to its basis tables.
#[derive(Debug, Clone)]
pub struct Ephbvm {
    pub params: MethodParams,
    pub tables: Arc<BasisTables>,
}

impl Ephbvm {
    pub fn new(params: MethodParams) -> Result<Self> {
        params.validate()?;
        let tables = BasisTables::cached(params.k, params.s)?;
        Ok(Self { params, tables })
    }

    pub fn with_step(&self, h: f64) -> Result<Self> {
        let params = MethodParams { h, ..self.params };
        params.validate()?;
        Ok(Self {
            params,
            tables: Arc::clone(&self.tables),
        })
    }

    pub fn step(&self, sys: &PoissonSystem, y0: &AugmentedState) -> Result<StepResult> {
        self.step_detailed(sys, y0).map(|(r, _)| r)
    }

    /// Solves the discrete stage problem by fixed-point iteration starting
    /// from `φ = 0`, `α = 0`, and returns the step with its final stage data.
    pub fn step_detailed(
        &self,
        sys: &PoissonSystem,
        y0: &AugmentedState,
    ) -> Result<(StepResult, StageSystem)> {
        let MethodParams {
            s,
            h,
            fp_tol,
            fp_max_iter,
            ..
        } = self.params;
        let tables = &*self.tables;
        let m = sys.dim();
        let n = m - 1;
        let y0v = y0.to_vector();

        let mut phi = vec![DVector::zeros(m); s];
        let mut alpha = 0.0;
        let mut d0hat = DVector::zeros(n);
        let mut iterations = 0;
        let mut residual = f64::INFINITY;
        let mut previous;

        let state = loop {
            iterations += 1;
            let stages = assemble_stages(tables, &y0v, h, &phi, alpha, &d0hat);
            let (g0hat, d0_new) = g0_hat(&sys.problem, &tables.rule, &stages)?;
            let (gamma_hat, rho_hat) = fourier_hat(sys, tables, &stages)?;
            let phi_new: Vec<DVector<f64>> = (0..s)
                .map(|i| {
                    let mut acc = DVector::zeros(m);
                    for j in 0..s {
                        acc += &rho_hat[i][j] * &gamma_hat[j];
                    }
                    acc
                })
                .collect();
            let alpha_new = alpha_update(&gamma_hat, &rho_hat);

            previous = residual;
            residual = phi_new
                .iter()
                .zip(&phi)
                .map(|(a, b)| relative_change(a, b))
                .fold((alpha_new - alpha).abs(), f64::max);

            phi = phi_new;
            alpha = alpha_new;
            d0hat = d0_new;

            let stalled = residual >= previous && residual <= STAGNATION_FACTOR * fp_tol;
            if residual <= fp_tol || stalled {
                break StageSystem {
                    phi: phi.clone(),
                    alpha,
                    stages,
                    g0hat,
                    d0hat: d0hat.clone(),
                    gamma_hat,
                    rho_hat,
                };
            }
            if iterations >= fp_max_iter {
                return Err(Error::NoConvergence {
                    iterations,
                    residual,
                });
            }
        };

        // y₁ = y₀ + h φ₀ - α h (d̂₀; 1)
        let mut y1 = y0v.clone();
        y1.axpy(h, &phi[0], 1.0);
        for r in 0..n {
            y1[r] -= alpha * h * d0hat[r];
        }
        y1[n] -= alpha * h;

        let h0 = sys.energy(&y0v);
        let h1 = sys.energy(&y1);
        let result = StepResult {
            y1: AugmentedState::from_vector(&y1),
            alpha,
            iterations,
            fp_residual: residual,
            energy_residual: h1.abs(),
            energy_drift: (h1 - h0).abs(),
            omega_residual: (y1[n] - (y0.omega + h)).abs(),
        };
        Ok((result, state))
    }
}

/// Convenience wrapper: one step of size `params.h` from `y0`.
pub fn step(sys: &PoissonSystem, params: MethodParams, y0: &AugmentedState) -> Result<StepResult> {
    Ephbvm::new(params)?.step(sys, y0)
}
