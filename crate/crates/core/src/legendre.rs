//! Shifted orthonormal Legendre polynomials on `[0, 1]` and Gauss-Legendre rules.
//!
//! The basis is `P_j(c) = sqrt(2j + 1) L_j(2c - 1)` where `L_j` is the classical
//! Legendre polynomial on `[-1, 1]`, so that `∫₀¹ P_i P_j = δ_ij` and `P_0 ≡ 1`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Largest node count accepted by [`gauss_rule`].
pub const MAX_NODES: usize = 64;

/// Classical Legendre values `(L_j(x), L_{j-1}(x))` via the three-term recurrence.
/// For `j == 0` the second entry is zero.
fn classical_pair(j: usize, x: f64) -> (f64, f64) {
    let mut prev = 0.0;
    let mut cur = 1.0;
    for n in 0..j {
        let n = n as f64;
        let next = ((2.0 * n + 1.0) * x * cur - n * prev) / (n + 1.0);
        prev = cur;
        cur = next;
    }
    (cur, prev)
}

/// `P_j(c)`, the degree-`j` orthonormal shifted Legendre polynomial.
pub fn eval_basis(j: usize, c: f64) -> f64 {
    let (lj, _) = classical_pair(j, 2.0 * c - 1.0);
    (2.0 * j as f64 + 1.0).sqrt() * lj
}

/// `∫₀^c P_j(ξ) dξ`.
///
/// For `j ≥ 1` this uses `∫₀^c P_j = P_{j+1}(c) / (2 sqrt(4(j+1)² - 1)) - P_{j-1}(c) / (2 sqrt(4j² - 1))`,
/// which follows from `(2j + 1) L_j = L'_{j+1} - L'_{j-1}` and `L_{j+1}(-1) = L_{j-1}(-1)`.
pub fn eval_basis_integral(j: usize, c: f64) -> f64 {
    if j == 0 {
        return c;
    }
    let jf = j as f64;
    let up = 2.0 * (4.0 * (jf + 1.0) * (jf + 1.0) - 1.0).sqrt();
    let down = 2.0 * (4.0 * jf * jf - 1.0).sqrt();
    eval_basis(j + 1, c) / up - eval_basis(j - 1, c) / down
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&c, &b)| b * f(c))
            .sum()
    }
}

/// `k`-point Gauss-Legendre rule on `[0, 1]` (exact up to degree `2k - 1`).
///
/// Nodes are found by Newton's method on `L_k` started from Chebyshev-like
/// guesses; only the lower half is computed and the rest is mirrored.
pub fn gauss_rule(k: usize) -> Result<QuadratureRule> {
    if k == 0 || k > MAX_NODES {
        return Err(Error::InvalidParameter(format!(
            "Gauss rule node count must lie in 1..={MAX_NODES}, got {k}"
        )));
    }
    let mut nodes = vec![0.0; k];
    let mut weights = vec![0.0; k];
    let kf = k as f64;
    for i in 0..k.div_ceil(2) {
        // root of L_k in (-1, 1), descending from near +1
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (kf + 0.5)).cos();
        for _ in 0..100 {
            let (lk, lkm1) = classical_pair(k, x);
            let dx = lk / (kf * (x * lk - lkm1) / (x * x - 1.0));
            x -= dx;
            if dx.abs() <= 1e-15 {
                break;
            }
        }
        let (lk, lkm1) = classical_pair(k, x);
        let deriv = kf * (x * lk - lkm1) / (x * x - 1.0);
        // mirror pair: x and -x; on [0,1] weights are halved
        let w = 1.0 / ((1.0 - x * x) * deriv * deriv);
        let hi = 0.5 * (1.0 + x);
        let lo = 0.5 * (1.0 - x);
        nodes[k - 1 - i] = hi;
        weights[k - 1 - i] = w;
        nodes[i] = lo;
        weights[i] = w;
    }
    if k % 2 == 1 {
        nodes[k / 2] = 0.5;
    }
    Ok(QuadratureRule { nodes, weights })
}

/// Basis values and integrals sampled at the Gauss nodes.
#[derive(Debug, Clone)]
pub struct BasisTables {
    pub k: usize,
    pub s: usize,
    pub rule: QuadratureRule,
    /// `k × s`, entry `(i, j)` is `P_j(c_i)`.
    pub values: DMatrix<f64>,
    /// `k × s`, entry `(i, j)` is `∫₀^{c_i} P_j`.
    pub integrals: DMatrix<f64>,
}

type TableCache = Mutex<HashMap<(usize, usize), Arc<BasisTables>>>;

impl BasisTables {
    pub fn build(k: usize, s: usize) -> Result<Self> {
        if s == 0 || k < s {
            return Err(Error::InvalidParameter(format!(
                "basis tables need k >= s >= 1, got k = {k}, s = {s}"
            )));
        }
        let rule = gauss_rule(k)?;
        let values = DMatrix::from_fn(k, s, |i, j| eval_basis(j, rule.nodes[i]));
        let integrals = DMatrix::from_fn(k, s, |i, j| eval_basis_integral(j, rule.nodes[i]));
        Ok(Self {
            k,
            s,
            rule,
            values,
            integrals,
        })
    }

    /// Shared, process-wide copy of the tables for `(k, s)`.
    pub fn cached(k: usize, s: usize) -> Result<Arc<Self>> {
        static CACHE: OnceLock<TableCache> = OnceLock::new();
        let cache = CACHE.get_or_init(Default::default);
        if let Some(t) = cache.lock().expect("table cache poisoned").get(&(k, s)) {
            return Ok(Arc::clone(t));
        }
        let tables = Arc::new(Self::build(k, s)?);
        cache
            .lock()
            .expect("table cache poisoned")
            .entry((k, s))
            .or_insert_with(|| Arc::clone(&tables));
        Ok(tables)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.rule.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.rule.weights
    }

    /// `Pᵀ Ω P`, which is the identity whenever `k ≥ s`.
    pub fn gram(&self) -> DMatrix<f64> {
        let omega = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(self.weights()));
        self.values.transpose() * omega * &self.values
    }
}
