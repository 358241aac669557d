//! Point samples of the event set `g = 0` for three-dimensional problems.
//!
//! `g` is sampled on a regular `(x₁, x₂, x₃)` lattice; every sign change
//! between consecutive samples along `x₃` is refined by bisection.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::problems::EventProblem;

/// Bisection stops once `|g|` is below this value (or the bracket collapses).
pub const BISECTION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceBounds {
    pub lower: [f64; 3],
    pub upper: [f64; 3],
}

impl SurfaceBounds {
    pub fn cube(lo: f64, hi: f64) -> Self {
        Self {
            lower: [lo; 3],
            upper: [hi; 3],
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct SurfaceSamples {
    pub points: Vec<[f64; 3]>,
    /// Lattice samples with `g > 0` and `g < 0`.
    pub positive_samples: usize,
    pub negative_samples: usize,
}

fn bisect(g: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, g_lo: f64) -> f64 {
    let lo_negative = g_lo < 0.0;
    let mut mid = 0.5 * (lo + hi);
    for _ in 0..200 {
        mid = 0.5 * (lo + hi);
        let gm = g(mid);
        if gm.abs() <= BISECTION_TOL || mid <= lo || mid >= hi {
            break;
        }
        if (gm < 0.0) == lo_negative {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    mid
}

/// Samples `resolution³` lattice points and returns the refined crossings.
pub fn emit_surface_samples(
    problem: &EventProblem,
    bounds: SurfaceBounds,
    resolution: usize,
) -> Result<SurfaceSamples> {
    if problem.dim() != 3 {
        return Err(Error::UnsupportedDimension(problem.dim()));
    }
    if resolution < 2 {
        return Err(Error::InvalidParameter(format!(
            "surface resolution must be at least 2, got {resolution}"
        )));
    }
    let axis = |d: usize, i: usize| {
        bounds.lower[d] + (bounds.upper[d] - bounds.lower[d]) * i as f64 / (resolution - 1) as f64
    };
    let mut out = SurfaceSamples::default();
    for i in 0..resolution {
        let x1 = axis(0, i);
        for j in 0..resolution {
            let x2 = axis(1, j);
            let g_at = |x3: f64| problem.event(&DVector::from_vec(vec![x1, x2, x3]));
            let mut prev: Option<(f64, f64)> = None;
            for l in 0..resolution {
                let x3 = axis(2, l);
                let gv = g_at(x3);
                if gv > 0.0 {
                    out.positive_samples += 1;
                } else if gv < 0.0 {
                    out.negative_samples += 1;
                }
                if gv == 0.0 {
                    out.points.push([x1, x2, x3]);
                } else if let Some((x3p, gp)) = prev {
                    if gp != 0.0 && (gp < 0.0) != (gv < 0.0) {
                        out.points.push([x1, x2, bisect(g_at, x3p, x3, gp)]);
                    }
                }
                prev = Some((x3, gv));
            }
        }
    }
    Ok(out)
}

pub fn write_csv<W: std::io::Write>(samples: &SurfaceSamples, writer: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["x1", "x2", "x3"])?;
    for p in &samples.points {
        w.serialize(p)?;
    }
    w.flush()?;
    Ok(())
}
