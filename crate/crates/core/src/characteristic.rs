//! Indicial analysis: the operator, its characteristic polynomial at t = 0, the
//! two roots as polynomial surrogates, and the model-ODE coefficients.

use crate::boundary_algebra::{chebyshev_nodes, fit_certified, BiPoly, Poly};
use crate::error::{LabError, Result};
use serde::{Deserialize, Serialize};

/// Certified accuracy demanded of the root surrogates.
pub const ROOT_FIT_TOL: f64 = 1e-8;
/// Admissible band for the fractional part of the positive root.
pub const GAMMA_BAND: (f64, f64) = (1e-3, 1.0 - 1e-3);

/// `L = t^2 (a_xx D_xx + 2 a_xt D_xt + a_tt D_tt) + t (b_x D_x + b_t D_t) + c`
/// on `[-1, 1] x (0, r]`, all coefficients bivariate polynomials in (x, t).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorSpec {
    #[serde(default)]
    pub a_xx: BiPoly,
    #[serde(default)]
    pub a_xt: BiPoly,
    pub a_tt: BiPoly,
    #[serde(default)]
    pub b_x: BiPoly,
    #[serde(default)]
    pub b_t: BiPoly,
    pub c: BiPoly,
    pub r: f64,
}

/// Ellipticity constants observed on the validation grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Ellipticity {
    pub lambda: f64,
    pub big_lambda: f64,
}

impl OperatorSpec {
    /// `a t^2 (D_xx + D_tt) + b t D_t + c` with `c(x) = -(a s(s-1) + b s)`, so that
    /// `s(x)` is a root of the characteristic polynomial.
    pub fn with_root(a: f64, b: f64, s: &Poly, r: f64) -> OperatorSpec {
        let s_minus_1 = s - &Poly::constant(1.0);
        let c = -&(&(s * &s_minus_1).scale(a) + &s.scale(b));
        OperatorSpec {
            a_xx: BiPoly::constant(a),
            a_xt: BiPoly::zero(),
            a_tt: BiPoly::constant(a),
            b_x: BiPoly::zero(),
            b_t: BiPoly::constant(b),
            c: BiPoly::from(c),
            r,
        }
    }

    /// Operator whose characteristic roots are the given polynomials, with
    /// boundary principal coefficient `a_nn(x)`; no tangential terms.
    pub fn from_roots(m_lower: &Poly, m_upper: &Poly, a_nn: &Poly, r: f64) -> OperatorSpec {
        let one = Poly::constant(1.0);
        let b = a_nn * &(&(&one - m_lower) - m_upper);
        let c = &(a_nn * m_lower) * m_upper;
        OperatorSpec {
            a_xx: BiPoly::zero(),
            a_xt: BiPoly::zero(),
            a_tt: BiPoly::from(a_nn.clone()),
            b_x: BiPoly::zero(),
            b_t: BiPoly::from(b),
            c: BiPoly::from(c),
            r,
        }
    }

    /// Whether any tangential derivative enters the operator.
    pub fn has_tangential_terms(&self) -> bool {
        !(self.a_xx.is_zero() && self.a_xt.is_zero() && self.b_x.is_zero())
    }

    /// Checks ellipticity on a tensor grid and `c(x, 0) < 0` on the validation nodes.
    pub fn validate(&self) -> Result<Ellipticity> {
        if !(self.r > 0.0 && self.r <= 1.0) {
            return Err(LabError::Parameter(format!("domain height r = {} not in (0, 1]", self.r)));
        }
        let mut lambda = f64::INFINITY;
        let mut big = 0.0f64;
        for x in chebyshev_nodes(64) {
            for k in 0..=16 {
                let t = self.r * k as f64 / 16.0;
                let (p, q, s) = (self.a_xx.eval(x, t), self.a_xt.eval(x, t), self.a_tt.eval(x, t));
                let mean = 0.5 * (p + s);
                let rad = (0.25 * (p - s) * (p - s) + q * q).sqrt();
                let (lo, hi) = (mean - rad, mean + rad);
                if !(lo.is_finite() && hi.is_finite()) {
                    return Err(LabError::Ellipticity(format!("non-finite coefficient at ({x}, {t})")));
                }
                lambda = lambda.min(lo);
                big = big.max(hi);
            }
            let c0 = self.c.eval(x, 0.0);
            if c0 >= 0.0 {
                return Err(LabError::Sign(format!("c({x:.4}, 0) = {c0}")));
            }
        }
        // The tangential block may vanish identically for pure ODE operators;
        // only the normal coefficient must then stay positive.
        if !self.has_tangential_terms() {
            let amin = chebyshev_nodes(64)
                .flat_map(|x| (0..=16).map(move |k| (x, k)))
                .map(|(x, k)| self.a_tt.eval(x, self.r * k as f64 / 16.0))
                .fold(f64::INFINITY, f64::min);
            if amin <= 0.0 {
                return Err(LabError::Ellipticity(format!("a_tt reaches {amin}")));
            }
            return Ok(Ellipticity { lambda: amin, big_lambda: big });
        }
        if lambda <= 0.0 {
            return Err(LabError::Ellipticity(format!("smallest eigenvalue {lambda}")));
        }
        Ok(Ellipticity { lambda, big_lambda: big })
    }
}

/// `P(mu) = A mu^2 + (B - A) mu + C`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CharPoly {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl CharPoly {
    pub fn eval(&self, mu: f64) -> f64 {
        (self.a * mu + (self.b - self.a)) * mu + self.c
    }

    /// (negative root, positive root) by the cancellation-free quadratic formula.
    pub fn roots(&self) -> (f64, f64) {
        let bb = self.b - self.a;
        let disc = bb * bb - 4.0 * self.a * self.c;
        let sgn = if bb >= 0.0 { 1.0 } else { -1.0 };
        let q = -0.5 * (bb + sgn * disc.sqrt());
        let (r1, r2) = (q / self.a, self.c / q);
        (r1.min(r2), r1.max(r2))
    }
}

pub fn char_poly(op: &OperatorSpec, x: f64) -> Result<CharPoly> {
    let a = op.a_tt.eval(x, 0.0);
    if a <= 0.0 {
        return Err(LabError::Ellipticity(format!("a_nn({x}, 0) = {a}")));
    }
    let c = op.c.eval(x, 0.0);
    if c >= 0.0 {
        return Err(LabError::Sign(format!("c({x}, 0) = {c}")));
    }
    Ok(CharPoly { a, b: op.b_t.eval(x, 0.0), c })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CharacteristicData {
    pub m_lower: Poly,
    pub m_upper: Poly,
    pub int_part: i32,
    pub gamma: Poly,
    /// Constant integer positive root: `t^{m_upper} log t` replaces the second power.
    pub resonant: bool,
    /// Certified sup error of the root surrogates.
    pub fit_error: f64,
    /// Sampled (min, max) of gamma; (0, 0) in the resonant case.
    pub gamma_range: (f64, f64),
}

impl CharacteristicData {
    pub fn gamma_min(&self) -> f64 {
        self.gamma_range.0
    }
}

/// Roots at every node of `grid` plus certified polynomial surrogates.
pub fn indicial_roots(op: &OperatorSpec, grid: &[f64]) -> Result<CharacteristicData> {
    let mut ints = Vec::with_capacity(grid.len());
    for &x in grid {
        let cp = char_poly(op, x)?;
        let (lo, hi) = cp.roots();
        if !(lo < 0.0 && hi > 0.0) {
            return Err(LabError::Sign(format!("roots ({lo}, {hi}) at x = {x}")));
        }
        ints.push((x, hi));
    }
    let first = ints.first().ok_or_else(|| LabError::Grid("empty validation grid".into()))?.1;
    let nearest = first.round();
    let resonant = nearest >= 1.0 && ints.iter().all(|(_, m)| (m - nearest).abs() <= 1e-12);
    let int_part = if resonant { nearest } else { first.floor() };
    if let Some(&(x, m)) = ints.iter().find(|(_, m)| !resonant && m.floor() != int_part) {
        return Err(LabError::VaryingIntegerPart(format!(
            "[m] = {} at x = {x} but {} at x = {}",
            m.floor(),
            int_part,
            grid[0]
        )));
    }

    let max_deg = [&op.a_tt, &op.b_t, &op.c]
        .iter()
        .map(|b| b.at_t0().degree())
        .max()
        .unwrap_or(0)
        + 2;
    let lower = |x: f64| char_poly(op, x).map(|c| c.roots().0).unwrap_or(f64::NAN);
    let upper = |x: f64| char_poly(op, x).map(|c| c.roots().1).unwrap_or(f64::NAN);
    let (m_lower, e1) = fit_certified(&lower, max_deg, ROOT_FIT_TOL)?;
    if resonant {
        return Ok(CharacteristicData {
            m_lower,
            m_upper: Poly::constant(nearest),
            int_part: nearest as i32,
            gamma: Poly::zero(),
            resonant: true,
            fit_error: e1,
            gamma_range: (0.0, 0.0),
        });
    }
    let (m_upper, e2) = fit_certified(&upper, max_deg, ROOT_FIT_TOL)?;
    let gamma = &m_upper - &Poly::constant(int_part);
    let (gmin, gmax) = grid
        .iter()
        .map(|&x| gamma.eval(x))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), g| (a.min(g), b.max(g)));
    let (gr_lo, gr_hi) = gamma.range();
    let (glo, ghi) = (gmin.min(gr_lo), gmax.max(gr_hi));
    if glo < GAMMA_BAND.0 || ghi > GAMMA_BAND.1 {
        return Err(LabError::NearIntegerExponent(format!(
            "gamma ranges over [{glo:.6}, {ghi:.6}], outside [{}, {}]",
            GAMMA_BAND.0, GAMMA_BAND.1
        )));
    }
    Ok(CharacteristicData {
        m_lower,
        m_upper,
        int_part: int_part as i32,
        gamma,
        resonant: false,
        fit_error: e1.max(e2),
        gamma_range: (glo, ghi),
    })
}

/// Validation nodes: 64 Chebyshev points on [-1, 1].
pub fn validation_grid() -> Vec<f64> {
    chebyshev_nodes(64).collect()
}

/// `p = 1 - (m_lower + m_upper)`, `q = m_lower * m_upper`.
pub fn p_q_from_roots(cd: &CharacteristicData) -> (Poly, Poly) {
    let p = &Poly::constant(1.0) - &(&cd.m_lower + &cd.m_upper);
    let q = &cd.m_lower * &cd.m_upper;
    (p, q)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant_op(b: f64, c: f64) -> OperatorSpec {
        OperatorSpec {
            a_xx: BiPoly::constant(1.0),
            a_xt: BiPoly::zero(),
            a_tt: BiPoly::constant(1.0),
            b_x: BiPoly::zero(),
            b_t: BiPoly::constant(b),
            c: BiPoly::constant(c),
            r: 1.0,
        }
    }

    #[test]
    fn char_poly_examples() {
        let cp = char_poly(&constant_op(0.0, -0.75), 0.0).unwrap();
        assert_eq!((cp.a, cp.b - cp.a, cp.c), (1.0, -1.0, -0.75));
        let (lo, hi) = cp.roots();
        assert!((hi - 1.5).abs() < 1e-15 && (lo + 0.5).abs() < 1e-15);
        assert!(matches!(char_poly(&constant_op(0.0, 0.5), 0.0), Err(LabError::Sign(_))));
        let mut bad = constant_op(0.0, -1.0);
        bad.a_tt = BiPoly::constant(-1.0);
        assert!(matches!(char_poly(&bad, 0.0), Err(LabError::Ellipticity(_))));
    }

    #[test]
    fn constant_roots() {
        let cd = indicial_roots(&constant_op(0.0, -0.75), &validation_grid()).unwrap();
        assert_eq!(cd.int_part, 1);
        assert!(cd.gamma.approx_eq(&Poly::constant(0.5), 1e-14));
        assert!(!cd.resonant);
        let (p, q) = p_q_from_roots(&cd);
        assert!(p.approx_eq(&Poly::zero(), 1e-14));
        assert!(q.approx_eq(&Poly::constant(-0.75), 1e-14));
    }

    #[test]
    fn resonant_roots() {
        let cd = indicial_roots(&constant_op(0.0, -2.0), &validation_grid()).unwrap();
        assert!(cd.resonant);
        assert_eq!(cd.int_part, 2);
        assert_eq!(cd.m_upper, Poly::constant(2.0));
        assert!(cd.m_lower.approx_eq(&Poly::constant(-1.0), 1e-14));
    }

    #[test]
    fn varying_roots() {
        let s = Poly::new(vec![1.5, 0.2]);
        let op = OperatorSpec::with_root(1.0, 0.0, &s, 1.0);
        let cd = indicial_roots(&op, &validation_grid()).unwrap();
        assert!(cd.m_upper.approx_eq(&s, 1e-12));
        assert!(cd.gamma.approx_eq(&Poly::new(vec![0.5, 0.2]), 1e-12));
        assert!(cd.m_lower.approx_eq(&Poly::new(vec![-0.5, -0.2]), 1e-12));
    }

    #[test]
    fn p_q_example() {
        let cd = CharacteristicData {
            m_lower: Poly::constant(-0.5),
            m_upper: Poly::new(vec![1.5, 0.2]),
            int_part: 1,
            gamma: Poly::new(vec![0.5, 0.2]),
            resonant: false,
            fit_error: 0.0,
            gamma_range: (0.3, 0.7),
        };
        let (p, q) = p_q_from_roots(&cd);
        assert!(p.approx_eq(&Poly::new(vec![0.0, -0.2]), 1e-15));
        assert!(q.approx_eq(&Poly::new(vec![-0.75, -0.1]), 1e-15));
    }

    #[test]
    fn rejects_bad_inputs() {
        let s = Poly::new(vec![1.9, 0.3]);
        let op = OperatorSpec::with_root(1.0, 0.0, &s, 1.0);
        assert!(matches!(
            indicial_roots(&op, &validation_grid()),
            Err(LabError::VaryingIntegerPart(_))
        ));
        let near = OperatorSpec::with_root(1.0, 0.0, &Poly::constant(2.0 + 1e-7), 1.0);
        assert!(matches!(
            indicial_roots(&near, &validation_grid()),
            Err(LabError::NearIntegerExponent(_))
        ));
        let mut nonell = constant_op(0.0, -1.0);
        nonell.a_xt = BiPoly::constant(2.0);
        assert!(matches!(nonell.validate(), Err(LabError::Ellipticity(_))));
    }
}
