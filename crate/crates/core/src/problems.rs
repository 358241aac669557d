//! Event-location problems: `x' = f(x)` from `x0` until `g(x) = 0` is first reached.

use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};

use crate::error::{Error, Result};

pub type VectorField = Arc<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;
pub type ScalarField = Arc<dyn Fn(&DVector<f64>) -> f64 + Send + Sync>;

pub const DEFAULT_DELTA_MIN: f64 = 1e-10;

/// Names accepted by [`builtin`].
pub const BUILTIN_NAMES: [&str; 3] = ["example1", "example2", "example3"];

#[derive(Clone)]
pub struct EventProblem {
    pub name: String,
    pub x0: DVector<f64>,
    pub f: VectorField,
    pub g: ScalarField,
    pub grad_g: VectorField,
    /// Degree of `g` when it is a polynomial.
    pub poly_degree: Option<u32>,
    /// Lower bound required for `∇g(x)ᵀ f(x)`.
    pub delta_min: f64,
}

impl fmt::Debug for EventProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EventProblem")
            .field("name", &self.name)
            .field("x0", &self.x0.as_slice())
            .field("poly_degree", &self.poly_degree)
            .field("delta_min", &self.delta_min)
            .finish_non_exhaustive()
    }
}

/// `H̄ = -g(x0)`, the length of the integration interval in the new time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProblemBarrier {
    pub hbar: f64,
}

impl EventProblem {
    pub fn new<F, G, DG>(name: impl Into<String>, x0: Vec<f64>, f: F, g: G, grad_g: DG) -> Self
    where
        F: Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
        G: Fn(&DVector<f64>) -> f64 + Send + Sync + 'static,
        DG: Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            x0: DVector::from_vec(x0),
            f: Arc::new(f),
            g: Arc::new(g),
            grad_g: Arc::new(grad_g),
            poly_degree: None,
            delta_min: DEFAULT_DELTA_MIN,
        }
    }

    pub fn with_poly_degree(mut self, degree: u32) -> Self {
        self.poly_degree = Some(degree);
        self
    }

    pub fn with_delta_min(mut self, delta_min: f64) -> Self {
        self.delta_min = delta_min;
        self
    }

    pub fn dim(&self) -> usize {
        self.x0.len()
    }

    pub fn field(&self, x: &DVector<f64>) -> DVector<f64> {
        (self.f)(x)
    }

    pub fn event(&self, x: &DVector<f64>) -> f64 {
        (self.g)(x)
    }

    pub fn event_gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        (self.grad_g)(x)
    }

    /// `∇g(x)ᵀ f(x)`, the rate at which `g` grows along the flow.
    pub fn transversality(&self, x: &DVector<f64>) -> f64 {
        self.event_gradient(x).dot(&self.field(x))
    }

    pub(crate) fn check_transversality(&self, x: &DVector<f64>) -> Result<f64> {
        let value = self.transversality(x);
        if value >= self.delta_min {
            Ok(value)
        } else {
            Err(Error::TransversalityViolation {
                value,
                delta_min: self.delta_min,
            })
        }
    }

    /// Whether `k` Gauss nodes integrate the degree-`s` stage polynomials exactly
    /// for this `g`, which makes the method conserve the invariant to round-off.
    pub fn is_exactly_conserved(&self, k: usize, s: usize) -> bool {
        self.poly_degree.is_some_and(|nu| nu as usize * s <= 2 * k)
    }

    pub fn validate(&self) -> Result<ProblemBarrier> {
        if self.x0.is_empty() {
            return Err(Error::InvalidParameter(
                "problem dimension must be positive".into(),
            ));
        }
        if !(self.delta_min > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "delta_min must be positive, got {}",
                self.delta_min
            )));
        }
        let g0 = self.event(&self.x0);
        if !(g0 < 0.0) {
            return Err(Error::NonNegativeStart { g0 });
        }
        self.check_gradient()?;
        self.check_transversality(&self.x0)?;
        Ok(ProblemBarrier { hbar: -g0 })
    }

    /// Compares `grad_g` with central differences of `g` along random directions
    /// at `x0` and at a few nearby points.
    fn check_gradient(&self) -> Result<()> {
        let n = self.dim();
        let mut rng = rand::rngs::StdRng::seed_from_u64(0x5eed);
        let mut points = vec![self.x0.clone()];
        for _ in 0..6 {
            let offset = DVector::from_fn(n, |_, _| rng.gen_range(-0.05..0.05));
            points.push(&self.x0 + offset);
        }
        for x in &points {
            let grad = self.event_gradient(x);
            if grad.len() != n {
                return Err(Error::InvalidParameter(format!(
                    "gradient has length {}, expected {n}",
                    grad.len()
                )));
            }
            for _ in 0..3 {
                let mut dir = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
                let norm = dir.norm();
                if norm == 0.0 {
                    continue;
                }
                dir /= norm;
                let step = 1e-5 * (1.0 + x.amax());
                let numeric = (self.event(&(x + &dir * step)) - self.event(&(x - &dir * step)))
                    / (2.0 * step);
                let analytic = grad.dot(&dir);
                if (numeric - analytic).abs() > 1e-6 * (1.0 + analytic.abs()) {
                    return Err(Error::GradientMismatch {
                        point: x.as_slice().to_vec(),
                        analytic,
                        numeric,
                    });
                }
            }
        }
        Ok(())
    }
}

/// The field shared by the first two registry problems.
fn planar_field(x: &DVector<f64>) -> DVector<f64> {
    DVector::from_vec(vec![x[1], 1.0 / (1.2 - x[1]) - x[0]])
}

pub fn example1() -> EventProblem {
    EventProblem::new(
        "example1",
        vec![-0.2, -0.2],
        planar_field,
        |x| x[0] + x[1] - 0.4,
        |_| DVector::from_vec(vec![1.0, 1.0]),
    )
    .with_poly_degree(1)
}

pub fn example2() -> EventProblem {
    EventProblem::new(
        "example2",
        vec![0.0, -0.2],
        planar_field,
        |x| 20.0 * x[0] + x[1] - 20.0 * x[0].sin() - 0.4,
        |x| DVector::from_vec(vec![20.0 - 20.0 * x[0].cos(), 1.0]),
    )
}

/// Field of the three-dimensional example in forward time.
pub fn example3_forward_field(x: &DVector<f64>) -> DVector<f64> {
    let r2 = x.norm_squared();
    DVector::from_vec(vec![
        1.0 / (1.2 + x[1].sin()),
        1.0 / (1.2 - x[0].cos()),
        1.0 + r2.cos(),
    ])
}

/// `10⁻³ (x₁³ + 4x₂⁷ + x₃⁵)`, positive at the starting point `(3, 2, 4)`.
pub fn example3_surface(x: &DVector<f64>) -> f64 {
    1e-3 * (x[0].powi(3) + 4.0 * x[1].powi(7) + x[2].powi(5))
}

fn example3_surface_gradient(x: &DVector<f64>) -> DVector<f64> {
    DVector::from_vec(vec![
        3e-3 * x[0].powi(2),
        28e-3 * x[1].powi(6),
        5e-3 * x[2].powi(4),
    ])
}

/// The surface `example3_surface = 0` reached from `(3, 2, 4)` by following the
/// forward field backwards. Both the field and the event function are negated
/// so that the start lies on the `g < 0` side with `∇gᵀf > 0`.
pub fn example3() -> EventProblem {
    EventProblem::new(
        "example3",
        vec![3.0, 2.0, 4.0],
        |x| -example3_forward_field(x),
        |x| -example3_surface(x),
        |x| -example3_surface_gradient(x),
    )
    .with_poly_degree(7)
}

pub fn builtin(name: &str) -> Result<EventProblem> {
    match name {
        "example1" => Ok(example1()),
        "example2" => Ok(example2()),
        "example3" => Ok(example3()),
        other => Err(Error::UnknownProblem(other.to_string())),
    }
}
