//! Gauss-Legendre rules and adaptive composite integration.

use crate::error::{Error, Result};
use std::sync::OnceLock;

/// Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Newton iteration on the Legendre polynomial; machine-precision roots.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            // Tricomi-style initial guess
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                // evaluate P_n and P_n' by upward recurrence
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let k = k as f64;
                    let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-15 {
                    break;
                }
            }
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        GaussLegendre { nodes, weights }
    }

    /// Apply the rule to f on [a, b].
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let c = 0.5 * (b + a);
        let h = 0.5 * (b - a);
        let mut acc = 0.0;
        for (&x, &w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(c + h * x);
        }
        acc * h
    }
}

pub(crate) fn gl16() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(16))
}

/// Result of an adaptive integration: value plus an error estimate from the
/// last refinement step.
#[derive(Debug, Clone, Copy)]
pub struct Quad {
    pub value: f64,
    pub abs_error: f64,
    pub nodes: usize,
}

const DEFAULT_ABS_TOL: f64 = 1e-13;
const DEFAULT_REL_TOL: f64 = 1e-11;
const MAX_NODES: usize = 1 << 21;

fn composite(f: &mut dyn FnMut(f64) -> f64, breaks: &[f64], per_segment: &[usize]) -> (f64, usize) {
    let rule = gl16();
    let mut acc = 0.0;
    let mut nodes = 0;
    for (i, win) in breaks.windows(2).enumerate() {
        let (a, b) = (win[0], win[1]);
        let p = per_segment[i];
        let w = (b - a) / p as f64;
        for j in 0..p {
            acc += rule.integrate(a + j as f64 * w, a + (j + 1) as f64 * w, &mut *f);
        }
        nodes += p * 16;
    }
    (acc, nodes)
}

/// Composite 16-point Gauss-Legendre over the segments delimited by `breaks`,
/// doubling the panel count until two refinements agree.
///
/// `osc` is the largest angular frequency present in the integrand; the
/// initial panel width is chosen so each panel sees at most ~2 oscillations.
pub fn adaptive_segmented(
    f: &mut dyn FnMut(f64) -> f64,
    breaks: &[f64],
    osc: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<Quad> {
    assert!(breaks.len() >= 2);
    let mut per_segment: Vec<usize> = breaks
        .windows(2)
        .map(|w| {
            let width = w[1] - w[0];
            ((width * osc.abs().max(1e-9) / 12.0).ceil() as usize).max(1)
        })
        .collect();
    let (mut prev, mut nodes) = composite(f, breaks, &per_segment);
    loop {
        for p in per_segment.iter_mut() {
            *p *= 2;
        }
        let (cur, n) = composite(f, breaks, &per_segment);
        nodes += n;
        let err = (cur - prev).abs();
        let tol = abs_tol.max(rel_tol * cur.abs());
        if err <= tol {
            return Ok(Quad {
                value: cur,
                abs_error: err,
                nodes,
            });
        }
        if n > MAX_NODES {
            return Err(Error::QuadratureNonConvergence {
                estimate: err,
                tolerance: tol,
            });
        }
        prev = cur;
    }
}

/// Adaptive integration of f over [a, b]; see [`adaptive_segmented`].
pub fn adaptive(f: &mut dyn FnMut(f64) -> f64, a: f64, b: f64, osc: f64) -> Result<Quad> {
    adaptive_segmented(f, &[a, b], osc, DEFAULT_ABS_TOL, DEFAULT_REL_TOL)
}
