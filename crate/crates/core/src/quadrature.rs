//! Adaptive 32-point Gauss-Legendre quadrature, with an endpoint rule for
//! integrands behaving like `rho^beta` at 0.

use crate::error::{LabError, Result};
use std::sync::OnceLock;

const ORDER: usize = 32;
const MAX_PANELS: usize = 20_000;
const ROUNDOFF: f64 = 64.0 * f64::EPSILON;

/// Gauss-Legendre nodes and weights on [-1, 1], computed by Newton iteration.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for k in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (k as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for m in 2..=n {
                let p2 = ((2 * m - 1) as f64 * z * p1 - (m - 1) as f64 * p0) / m as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[k] = -z;
        x[n - 1 - k] = z;
        let wk = 2.0 / ((1.0 - z * z) * dp * dp);
        w[k] = wk;
        w[n - 1 - k] = wk;
    }
    (x, w)
}

fn gl32() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(ORDER))
}

fn panel(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let (x, w) = gl32();
    let h = 0.5 * (b - a);
    let m = 0.5 * (a + b);
    let (s, sa) = x.iter().zip(w).fold((0.0, 0.0), |(s, sa), (&xi, &wi)| {
        let v = f(m + h * xi);
        (s + wi * v, sa + wi * v.abs())
    });
    (s * h, sa * h)
}

/// Rule on [0, d] for `g(rho) ~ rho^beta * smooth`, possibly times powers of
/// log rho: substitute rho = d w^e with e = 6/(beta+1) below beta = 5, so the
/// integrand in w vanishes like w^5 (log w)^j. A weaker substitution leaves a
/// fixed relative Gauss error on the first panel at every bisection level.
fn endpoint_panel(g: &dyn Fn(f64) -> f64, beta: f64, d: f64) -> (f64, f64) {
    let e = if beta >= 5.0 { 1.0 } else { 6.0 / (beta + 1.0) };
    let h = |w: f64| {
        let rho = d * w.powf(e);
        if rho <= 0.0 {
            return 0.0;
        }
        g(rho) * d * e * w.powf(e - 1.0)
    };
    panel(&h, 0.0, 1.0)
}

fn adaptive(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    tol: f64,
    endpoint: Option<f64>,
) -> Result<f64> {
    let rule = |lo: f64, hi: f64| -> (f64, f64) {
        match endpoint {
            Some(beta) if lo == a => {
                let shifted = |r: f64| f(a + r);
                endpoint_panel(&shifted, beta, hi - a)
            }
            _ => panel(f, lo, hi),
        }
    };
    let (coarse, coarse_abs) = rule(a, b);
    if !coarse.is_finite() {
        return Err(LabError::Integrability(format!(
            "non-finite integrand on [{a}, {b}]"
        )));
    }
    let scale = coarse_abs.max(coarse.abs());
    if scale == 0.0 {
        return Ok(0.0);
    }
    let eps = tol * scale;
    let len = b - a;
    let mut stack = vec![(a, b, coarse)];
    let mut total = Vec::new();
    let mut panels = 0usize;
    while let Some((lo, hi, est)) = stack.pop() {
        panels += 1;
        if panels > MAX_PANELS {
            return Err(LabError::Quadrature(format!(
                "panel budget exhausted on [{a}, {b}]"
            )));
        }
        let mid = 0.5 * (lo + hi);
        let (l, la) = rule(lo, mid);
        let (r, ra) = rule(mid, hi);
        let refined = l + r;
        if !refined.is_finite() {
            return Err(LabError::Integrability(format!(
                "non-finite integrand near [{lo}, {hi}]"
            )));
        }
        // the last test stops refinement at roundoff level, which near a
        // strong endpoint singularity sits above eps * width
        if (refined - est).abs() <= eps * (hi - lo) / len
            || hi - lo < 1e-15 * len
            || (refined - est).abs() <= ROUNDOFF * (la + ra)
        {
            total.push(refined);
        } else {
            stack.push((lo, mid, l));
            stack.push((mid, hi, r));
        }
    }
    total.sort_by(|x, y| x.abs().total_cmp(&y.abs()));
    Ok(crate::boundary_algebra::neumaier_sum(&total))
}

/// Integral of a smooth function on [a, b] to relative tolerance `tol`.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    if b == a {
        return Ok(0.0);
    }
    if b < a {
        return integrate(f, b, a, tol).map(|v| -v);
    }
    adaptive(f, a, b, tol, None)
}

/// Integral over [0, 1] of `g`, which behaves like `rho^beta * smooth` at 0.
pub fn integrate_endpoint(g: &dyn Fn(f64) -> f64, beta: f64, tol: f64) -> Result<f64> {
    if beta <= -1.0 {
        return Err(LabError::Integrability(format!(
            "endpoint exponent {beta} <= -1 makes the integral diverge"
        )));
    }
    adaptive(g, 0.0, 1.0, tol, Some(beta))
}
