//! Lift of an event problem to a Poisson system in `ℝ^{n+1}`.
//!
//! With `ω = g(x) + H̄` used as the new time, `y = (x; ω)` solves
//! `y' = G(y) = (f / (∇gᵀf); 1)`, which conserves `H(y) = g(x) - ω + H̄`.
//! Writing `G = B(y) ∇H(y)` with the skew-symmetric
//! `B = (G ∇Hᵀ - ∇H Gᵀ) / |∇H|²` gives the form integrated by the stepper.

use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::problems::EventProblem;

/// `y = (x; ω)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedState {
    pub x: DVector<f64>,
    pub omega: f64,
}

impl AugmentedState {
    pub fn new(x: DVector<f64>, omega: f64) -> Self {
        Self { x, omega }
    }

    pub fn from_vector(y: &DVector<f64>) -> Self {
        let n = y.len() - 1;
        Self {
            x: y.rows(0, n).into_owned(),
            omega: y[n],
        }
    }

    pub fn to_vector(&self) -> DVector<f64> {
        let n = self.x.len();
        DVector::from_fn(n + 1, |i, _| if i < n { self.x[i] } else { self.omega })
    }
}

#[derive(Debug, Clone)]
pub struct PoissonSystem {
    pub problem: EventProblem,
    pub hbar: f64,
}

impl PoissonSystem {
    pub fn lift(problem: EventProblem, hbar: f64) -> Self {
        Self { problem, hbar }
    }

    /// Validates `problem` and lifts it with its own `H̄`.
    pub fn from_problem(problem: EventProblem) -> Result<Self> {
        let barrier = problem.validate()?;
        Ok(Self::lift(problem, barrier.hbar))
    }

    /// `m = n + 1`.
    pub fn dim(&self) -> usize {
        self.problem.dim() + 1
    }

    pub fn initial_state(&self) -> AugmentedState {
        AugmentedState::new(self.problem.x0.clone(), 0.0)
    }

    fn split<'a>(&self, y: &'a DVector<f64>) -> nalgebra::DVectorView<'a, f64> {
        y.rows(0, self.problem.dim())
    }

    pub fn g_field(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        let x = self.split(y).into_owned();
        let f = self.problem.field(&x);
        let denom = self.problem.check_transversality(&x)?;
        let n = f.len();
        Ok(DVector::from_fn(n + 1, |i, _| {
            if i < n {
                f[i] / denom
            } else {
                1.0
            }
        }))
    }

    pub fn energy(&self, y: &DVector<f64>) -> f64 {
        let n = self.problem.dim();
        let x = self.split(y).into_owned();
        self.problem.event(&x) - y[n] + self.hbar
    }

    /// `∇H = (∇g(x); -1)`.
    pub fn grad_energy(&self, y: &DVector<f64>) -> DVector<f64> {
        let x = self.split(y).into_owned();
        let dg = self.problem.event_gradient(&x);
        let n = dg.len();
        DVector::from_fn(n + 1, |i, _| if i < n { dg[i] } else { -1.0 })
    }

    /// Skew-symmetric structure matrix with `B(y) ∇H(y) = G(y)`.
    pub fn structure_matrix(&self, y: &DVector<f64>) -> Result<DMatrix<f64>> {
        let g = self.g_field(y)?;
        let dh = self.grad_energy(y);
        Ok(structure_from(&g, &dh))
    }
}

pub(crate) fn structure_from(g: &DVector<f64>, dh: &DVector<f64>) -> DMatrix<f64> {
    let scale = 1.0 / dh.norm_squared();
    let m = g.len();
    DMatrix::from_fn(m, m, |i, j| scale * (g[i] * dh[j] - dh[i] * g[j]))
}
