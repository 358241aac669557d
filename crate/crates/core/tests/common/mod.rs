//! Independent reference computations shared by the integration tests.
//! Nothing outside `measure` calls into the stepper.
#![allow(dead_code)]

pub mod measure;

use ephbvm::EventProblem;
use nalgebra::{DMatrix, DVector};

/// Adaptive Simpson quadrature on `[a, b]`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        (m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb))
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        whole: f64,
        m: f64,
        fm: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let (lm, flm, left) = simpson(f, a, fa, m, fm);
        let (rm, frm, right) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, fa, m, fm, left, lm, flm, tol / 2.0, depth - 1)
            + recurse(f, m, fm, b, fb, right, rm, frm, tol / 2.0, depth - 1)
    }
    if a == b {
        return 0.0;
    }
    let (fa, fb) = (f(a), f(b));
    let (m, fm, whole) = simpson(f, a, fa, b, fb);
    recurse(f, a, fa, b, fb, whole, m, fm, tol, 50)
}

/// Monomial coefficients (lowest first) of the orthonormal basis on `[0, 1]`
/// by Gram-Schmidt with exact moments `∫ x^(i+j) = 1/(i+j+1)`.
pub fn gram_schmidt_basis(max_degree: usize) -> Vec<Vec<f64>> {
    let inner = |p: &[f64], q: &[f64]| {
        let mut s = 0.0;
        for (i, a) in p.iter().enumerate() {
            for (j, b) in q.iter().enumerate() {
                s += a * b / (i + j + 1) as f64;
            }
        }
        s
    };
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for d in 0..=max_degree {
        let mut p = vec![0.0; d + 1];
        p[d] = 1.0;
        for q in &basis {
            let c = inner(&p, q);
            for (i, qi) in q.iter().enumerate() {
                p[i] -= c * qi;
            }
        }
        let norm = inner(&p, &p).sqrt();
        p.iter_mut().for_each(|v| *v /= norm);
        basis.push(p);
    }
    basis
}

pub fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

/// Root of `f` in `[a, b]` by plain bisection.
pub fn bisect_root(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let fa = f(a);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if (f(m) < 0.0) == (fa < 0.0) {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// `y' = (f / (∇gᵀf); 1)` built directly from the problem definition.
pub fn lifted_field(p: &EventProblem, y: &DVector<f64>) -> DVector<f64> {
    let n = p.dim();
    let x = y.rows(0, n).into_owned();
    let f = (p.f)(&x);
    let d = (p.grad_g)(&x).dot(&f);
    DVector::from_fn(n + 1, |i, _| if i < n { f[i] / d } else { 1.0 })
}

/// Classical RK4 on the lifted field with `substeps` equal steps over `[0, h]`.
pub fn rk4_flow(p: &EventProblem, y0: &DVector<f64>, h: f64, substeps: usize) -> DVector<f64> {
    let dt = h / substeps as f64;
    let mut y = y0.clone();
    for _ in 0..substeps {
        let k1 = lifted_field(p, &y);
        let k2 = lifted_field(p, &(&y + &k1 * (dt / 2.0)));
        let k3 = lifted_field(p, &(&y + &k2 * (dt / 2.0)));
        let k4 = lifted_field(p, &(&y + &k3 * dt));
        y += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
    }
    y
}

/// Gauss nodes on `[0, 1]` in closed form for `s ≤ 3`.
pub fn closed_form_gauss_nodes(s: usize) -> Vec<f64> {
    match s {
        1 => vec![0.5],
        2 => {
            let d = 3f64.sqrt() / 6.0;
            vec![0.5 - d, 0.5 + d]
        }
        3 => {
            let d = 15f64.sqrt() / 10.0;
            vec![0.5 - d, 0.5, 0.5 + d]
        }
        _ => panic!("closed-form nodes only for s <= 3"),
    }
}

/// Collocation tableau `(A, b)` from Lagrange polynomials on the nodes.
pub fn collocation_tableau(c: &[f64]) -> (DMatrix<f64>, Vec<f64>) {
    let s = c.len();
    let mut lagrange = Vec::with_capacity(s);
    for j in 0..s {
        let mut poly = vec![1.0];
        for (m, &cm) in c.iter().enumerate() {
            if m == j {
                continue;
            }
            let scale = 1.0 / (c[j] - cm);
            let mut next = vec![0.0; poly.len() + 1];
            for (i, &a) in poly.iter().enumerate() {
                next[i + 1] += a * scale;
                next[i] -= a * cm * scale;
            }
            poly = next;
        }
        lagrange.push(poly);
    }
    let integral = |poly: &[f64], x: f64| -> f64 {
        poly.iter()
            .enumerate()
            .map(|(i, a)| a * x.powi(i as i32 + 1) / (i + 1) as f64)
            .sum()
    };
    let a = DMatrix::from_fn(s, s, |i, j| integral(&lagrange[j], c[i]));
    let b = (0..s).map(|j| integral(&lagrange[j], 1.0)).collect();
    (a, b)
}

/// One `s`-stage Gauss collocation step on the lifted field, stage equations
/// solved by fixed-point iteration to round-off.
pub fn gauss_collocation_step(
    p: &EventProblem,
    y0: &DVector<f64>,
    h: f64,
    s: usize,
) -> DVector<f64> {
    let c = closed_form_gauss_nodes(s);
    let (a, b) = collocation_tableau(&c);
    let mut k: Vec<DVector<f64>> = vec![lifted_field(p, y0); s];
    for _ in 0..500 {
        let next: Vec<DVector<f64>> = (0..s)
            .map(|i| {
                let mut y = y0.clone();
                for j in 0..s {
                    y += &k[j] * (h * a[(i, j)]);
                }
                lifted_field(p, &y)
            })
            .collect();
        let change = next
            .iter()
            .zip(&k)
            .map(|(u, v)| (u - v).amax())
            .fold(0.0, f64::max);
        k = next;
        if change == 0.0 {
            break;
        }
        if change < 1e-17 * (1.0 + k[0].amax()) {
            break;
        }
    }
    let mut y1 = y0.clone();
    for j in 0..s {
        y1 += &k[j] * (h * b[j]);
    }
    y1
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let num: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    num / den
}

/// Helix `x' = (-x₂, x₁, 1)` from `(1, 0, 0)` with
/// `g = x₃ + (x₁² + x₂²)/20 - len`. Since `∇gᵀf ≡ 1` the lifted flow is
/// `(cos ω, sin ω, ω; ω)` in closed form.
pub fn helix_problem(len: f64) -> EventProblem {
    EventProblem::new(
        "helix",
        vec![1.0, 0.0, 0.0],
        |x| DVector::from_vec(vec![-x[1], x[0], 1.0]),
        move |x| x[2] + 0.05 * (x[0] * x[0] + x[1] * x[1]) - len,
        |x| DVector::from_vec(vec![0.1 * x[0], 0.1 * x[1], 1.0]),
    )
}

pub fn helix_exact(omega: f64) -> DVector<f64> {
    DVector::from_vec(vec![omega.cos(), omega.sin(), omega, omega])
}

/// Step sizes `2⁻ᵐ H̄` for `m = 4..=9`.
pub fn scaling_steps(hbar: f64) -> Vec<f64> {
    (4..=9).map(|m| hbar * 0.5f64.powi(m)).collect()
}
