//! Step-size sweeps and per-step comparisons against the oracles in the parent module.

use ephbvm::method::DEFAULT_FP_TOL;
use ephbvm::{AugmentedState, Ephbvm, EventProblem, MethodParams, PoissonSystem};
use nalgebra::DVector;

use super::{gauss_collocation_step, helix_exact, helix_problem, rk4_flow, scaling_steps};

fn stepper(k: usize, s: usize, h: f64) -> Ephbvm {
    Ephbvm::new(MethodParams::new(k, s, h).unwrap()).unwrap()
}

/// Helix length giving local errors well above round-off over the whole sweep.
pub fn helix_len(s: usize) -> f64 {
    match s {
        1 => 4.0,
        2 => 10.0,
        _ => 36.0,
    }
}

/// Single-step errors on the helix against its closed-form flow.
pub fn helix_step_errors(k: usize, s: usize) -> (Vec<f64>, Vec<f64>) {
    let sys = PoissonSystem::from_problem(helix_problem(helix_len(s))).unwrap();
    let y0 = sys.initial_state();
    let hs = scaling_steps(sys.hbar);
    let errs = hs
        .iter()
        .map(|&h| {
            let r = stepper(k, s, h).step(&sys, &y0).unwrap();
            (r.y1.to_vector() - helix_exact(h)).norm()
        })
        .collect();
    (hs, errs)
}

/// Single-step errors from the start against a finely substepped RK4 flow.
pub fn rk4_step_errors(problem: EventProblem, k: usize, s: usize) -> (Vec<f64>, Vec<f64>) {
    let sys = PoissonSystem::from_problem(problem).unwrap();
    let y0 = sys.initial_state();
    let hs = scaling_steps(sys.hbar);
    let errs = hs
        .iter()
        .map(|&h| {
            let r = stepper(k, s, h).step(&sys, &y0).unwrap();
            (r.y1.to_vector() - rk4_flow(&sys.problem, &y0.to_vector(), h, 400)).norm()
        })
        .collect();
    (hs, errs)
}

/// `‖γ̂_j‖` for `j = 0..s` over the sweep, one row per `j`.
pub fn gamma_norms(problem: EventProblem, s: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    let sys = PoissonSystem::from_problem(problem).unwrap();
    let y0 = sys.initial_state();
    let hs = scaling_steps(sys.hbar);
    let mut rows = vec![Vec::with_capacity(hs.len()); s];
    for &h in &hs {
        let (_, st) = stepper(s, s, h).step_detailed(&sys, &y0).unwrap();
        for (row, g) in rows.iter_mut().zip(&st.gamma_hat) {
            row.push(g.norm());
        }
    }
    (hs, rows)
}

/// `|H(y₁) - H(y₀)|` for one step from the start over the sweep.
pub fn drift_series(problem: EventProblem, k: usize, s: usize) -> (Vec<f64>, Vec<f64>) {
    let sys = PoissonSystem::from_problem(problem).unwrap();
    let y0 = sys.initial_state();
    let hs = scaling_steps(sys.hbar);
    let d = hs
        .iter()
        .map(|&h| stepper(k, s, h).step(&sys, &y0).unwrap().energy_drift)
        .collect();
    (hs, d)
}

/// Largest `|α|` and largest deviation from Gauss collocation over `steps`
/// steps of EPHBVM(s, s), each compared from the same starting state.
pub fn collapse_deviation(problem: EventProblem, s: usize, steps: usize) -> (f64, f64) {
    let sys = PoissonSystem::from_problem(problem).unwrap();
    let h = sys.hbar / steps as f64;
    let m = stepper(s, s, h);
    let mut y = sys.initial_state();
    let (mut alpha, mut dev) = (0.0f64, 0.0f64);
    for _ in 0..steps {
        let r = m.step(&sys, &y).unwrap();
        let oracle: DVector<f64> = gauss_collocation_step(&sys.problem, &y.to_vector(), h, s);
        alpha = alpha.max(r.alpha.abs());
        dev = dev.max((r.y1.to_vector() - oracle).amax());
        y = AugmentedState::from_vector(&r.y1.to_vector());
    }
    (alpha, dev)
}

pub const COLLAPSE_TOL: f64 = 10.0 * DEFAULT_FP_TOL;
