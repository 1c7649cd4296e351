//! Univariate polynomials in the tangential variable on [-1, 1], stored as
//! Chebyshev coefficients. Constructors and the wire format use monomials.

use crate::error::{LabError, Result};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

/// Trailing Chebyshev coefficients below this fraction of the largest are dropped.
const CHOP: f64 = 2e-16;
/// Relative accuracy demanded of polynomial surrogates for quotients.
const QUOTIENT_TOL: f64 = 1e-13;
/// Wire format switches to Chebyshev coefficients above this degree.
const MONOMIAL_WIRE_DEGREE: usize = 8;

/// `sum_m a[m] T_m(x)`; the zero polynomial has no coefficients.
#[derive(Clone, Default, PartialEq)]
pub struct Poly {
    a: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum PolyWire {
    Monomial(Vec<f64>),
    Chebyshev { chebyshev: Vec<f64> },
}

impl Serialize for Poly {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.degree() <= MONOMIAL_WIRE_DEGREE {
            PolyWire::Monomial(self.monomial()).serialize(s)
        } else {
            PolyWire::Chebyshev { chebyshev: self.a.clone() }.serialize(s)
        }
    }
}

impl<'de> Deserialize<'de> for Poly {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let w = PolyWire::deserialize(d)?;
        let v = match &w {
            PolyWire::Monomial(v) | PolyWire::Chebyshev { chebyshev: v } => v,
        };
        if v.iter().any(|c| !c.is_finite()) {
            return Err(serde::de::Error::custom("non-finite polynomial coefficient"));
        }
        Ok(match w {
            PolyWire::Monomial(v) => Poly::new(v),
            PolyWire::Chebyshev { chebyshev } => Poly::from_chebyshev(chebyshev),
        })
    }
}

impl fmt::Debug for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.degree() <= MONOMIAL_WIRE_DEGREE {
            write!(f, "Poly{:?}", self.monomial())
        } else {
            write!(f, "Poly(chebyshev){:?}", self.a)
        }
    }
}

/// `x * sum a_m T_m` in the Chebyshev basis.
fn times_x(a: &[f64]) -> Vec<f64> {
    if a.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0.0; a.len() + 1];
    for (m, &v) in a.iter().enumerate() {
        if m == 0 {
            out[1] += v;
        } else {
            out[m + 1] += 0.5 * v;
            out[m - 1] += 0.5 * v;
        }
    }
    out
}

impl Poly {
    /// From monomial coefficients `c[0] + c[1] x + ...`.
    pub fn new(c: Vec<f64>) -> Self {
        let mut a: Vec<f64> = Vec::new();
        for &ck in c.iter().rev() {
            a = times_x(&a);
            if a.is_empty() {
                a.push(0.0);
            }
            a[0] += ck;
        }
        Poly::from_chebyshev(a)
    }

    pub fn from_chebyshev(mut a: Vec<f64>) -> Self {
        let amax = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        while let Some(&last) = a.last() {
            if last.abs() <= CHOP * amax || last == 0.0 {
                a.pop();
            } else {
                break;
            }
        }
        Poly { a }
    }

    pub fn zero() -> Self {
        Poly { a: Vec::new() }
    }

    pub fn constant(v: f64) -> Self {
        Poly::from_chebyshev(vec![v])
    }

    /// The identity polynomial `x`.
    pub fn x() -> Self {
        Poly::from_chebyshev(vec![0.0, 1.0])
    }

    pub fn chebyshev(&self) -> &[f64] {
        &self.a
    }

    /// Monomial coefficients (ill-conditioned for high degrees).
    pub fn monomial(&self) -> Vec<f64> {
        chebyshev_to_monomial(&self.a)
    }

    pub fn is_zero(&self) -> bool {
        self.a.is_empty()
    }

    /// Degree, with the zero polynomial reported as degree 0.
    pub fn degree(&self) -> usize {
        self.a.len().saturating_sub(1)
    }

    pub fn is_constant(&self) -> bool {
        self.a.len() <= 1
    }

    /// Value at x = 0.
    pub fn c0(&self) -> f64 {
        if self.is_constant() {
            return self.a.first().copied().unwrap_or(0.0);
        }
        self.eval(0.0)
    }

    /// Clenshaw recurrence.
    pub fn eval(&self, x: f64) -> f64 {
        let mut b1 = 0.0;
        let mut b2 = 0.0;
        for &c in self.a.iter().skip(1).rev() {
            let b0 = 2.0 * x * b1 - b2 + c;
            b2 = b1;
            b1 = b0;
        }
        match self.a.first() {
            Some(&c0) => x * b1 - b2 + c0,
            None => 0.0,
        }
    }

    pub fn deriv(&self) -> Poly {
        let n = self.a.len();
        if n <= 1 {
            return Poly::zero();
        }
        let mut b = vec![0.0; n + 1];
        for k in (0..n - 1).rev() {
            b[k] = b[k + 2] + 2.0 * (k + 1) as f64 * self.a[k + 1];
        }
        b[0] *= 0.5;
        b.truncate(n - 1);
        Poly::from_chebyshev(b)
    }

    pub fn deriv_n(&self, n: usize) -> Poly {
        (0..n).fold(self.clone(), |p, _| p.deriv())
    }

    pub fn scale(&self, s: f64) -> Poly {
        Poly::from_chebyshev(self.a.iter().map(|v| v * s).collect())
    }

    /// Largest absolute Chebyshev coefficient.
    pub fn max_coeff(&self) -> f64 {
        self.a.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Sampled supremum of |p| on [lo, hi].
    pub fn sup_abs(&self, lo: f64, hi: f64) -> f64 {
        if self.is_constant() {
            return self.c0().abs();
        }
        let n = 512;
        (0..=n)
            .map(|k| self.eval(lo + (hi - lo) * k as f64 / n as f64).abs())
            .fold(0.0, f64::max)
    }

    /// Sampled supremum of |p| on [-1, 1].
    pub fn sup_norm(&self) -> f64 {
        self.sup_abs(-1.0, 1.0)
    }

    /// Minimum and maximum of p sampled on the validation nodes and a dense grid.
    pub fn range(&self) -> (f64, f64) {
        if self.is_constant() {
            let v = self.c0();
            return (v, v);
        }
        dense_grid()
            .chain(chebyshev_nodes(64))
            .map(|x| self.eval(x))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(v), hi.max(v))
            })
    }

    /// Coefficientwise comparison in the Chebyshev basis.
    pub fn approx_eq(&self, other: &Poly, tol: f64) -> bool {
        let n = self.a.len().max(other.a.len());
        (0..n).all(|k| {
            let a = self.a.get(k).copied().unwrap_or(0.0);
            let b = other.a.get(k).copied().unwrap_or(0.0);
            (a - b).abs() <= tol
        })
    }

    /// `self / d`: exact for constant `d`, otherwise a Chebyshev interpolant
    /// certified to relative accuracy 1e-13 on [-1, 1] (exact when `d` divides).
    pub fn quotient(&self, d: &Poly) -> Result<Poly> {
        if d.is_zero() {
            return Err(LabError::Quotient("division by the zero polynomial".into()));
        }
        if self.is_zero() {
            return Ok(Poly::zero());
        }
        if d.is_constant() {
            return Ok(self.scale(1.0 / d.c0()));
        }
        let (lo, hi) = d.range();
        if lo <= 0.0 && hi >= 0.0 {
            return Err(LabError::Quotient(format!(
                "divisor changes sign or vanishes on [-1,1] (range [{lo:.3e}, {hi:.3e}])"
            )));
        }
        let f = |x: f64| self.eval(x) / d.eval(x);
        approximate(&f, 255, QUOTIENT_TOL).map_err(|e| match e {
            LabError::Fit(m) => LabError::Quotient(m),
            other => other,
        })
    }
}

impl Add for &Poly {
    type Output = Poly;
    fn add(self, o: &Poly) -> Poly {
        let n = self.a.len().max(o.a.len());
        Poly::from_chebyshev(
            (0..n)
                .map(|k| self.a.get(k).unwrap_or(&0.0) + o.a.get(k).unwrap_or(&0.0))
                .collect(),
        )
    }
}

impl Sub for &Poly {
    type Output = Poly;
    fn sub(self, o: &Poly) -> Poly {
        let n = self.a.len().max(o.a.len());
        Poly::from_chebyshev(
            (0..n)
                .map(|k| self.a.get(k).unwrap_or(&0.0) - o.a.get(k).unwrap_or(&0.0))
                .collect(),
        )
    }
}

impl Mul for &Poly {
    type Output = Poly;
    /// `T_i T_j = (T_{i+j} + T_{|i-j|}) / 2`.
    fn mul(self, o: &Poly) -> Poly {
        if self.is_zero() || o.is_zero() {
            return Poly::zero();
        }
        if self.is_constant() {
            return o.scale(self.a[0]);
        }
        if o.is_constant() {
            return self.scale(o.a[0]);
        }
        let mut c = vec![0.0; self.a.len() + o.a.len() - 1];
        for (i, x) in self.a.iter().enumerate() {
            for (j, y) in o.a.iter().enumerate() {
                let h = 0.5 * x * y;
                c[i + j] += h;
                c[i.abs_diff(j)] += h;
            }
        }
        Poly::from_chebyshev(c)
    }
}

impl Neg for &Poly {
    type Output = Poly;
    fn neg(self) -> Poly {
        self.scale(-1.0)
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr for Poly {
            type Output = Poly;
            fn $m(self, o: Poly) -> Poly {
                (&self).$m(&o)
            }
        }
        impl $tr<&Poly> for Poly {
            type Output = Poly;
            fn $m(self, o: &Poly) -> Poly {
                (&self).$m(o)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

/// Chebyshev points of the first kind on [-1, 1], ascending.
pub fn chebyshev_nodes(n: usize) -> impl Iterator<Item = f64> + Clone {
    (0..n).map(move |k| -(std::f64::consts::PI * (k as f64 + 0.5) / n as f64).cos())
}

fn dense_grid() -> impl Iterator<Item = f64> + Clone {
    (0..=256).map(|k| -1.0 + 2.0 * k as f64 / 256.0)
}

/// Monomial coefficients of sum_m a_m T_m(x).
fn chebyshev_to_monomial(a: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len()];
    let mut t_prev = vec![1.0];
    let mut t_cur = vec![0.0, 1.0];
    for (m, &am) in a.iter().enumerate() {
        let tm: &Vec<f64> = if m == 0 { &t_prev } else { &t_cur };
        for (k, &v) in tm.iter().enumerate() {
            out[k] += am * v;
        }
        if m >= 1 {
            let mut next = vec![0.0; t_cur.len() + 1];
            for (k, &v) in t_cur.iter().enumerate() {
                next[k + 1] += 2.0 * v;
            }
            for (k, &v) in t_prev.iter().enumerate() {
                next[k] -= v;
            }
            t_prev = std::mem::replace(&mut t_cur, next);
        }
    }
    out
}

fn max_error(p: &Poly, f: &dyn Fn(f64) -> f64) -> (f64, f64) {
    dense_grid()
        .chain(chebyshev_nodes(97))
        .fold((0.0, 0.0), |(err, scale), x| {
            let v = f(x);
            ((p.eval(x) - v).abs().max(err), v.abs().max(scale))
        })
}

/// Chebyshev interpolant of `f`, certified to relative `tol` on a dense grid.
/// Interpolation orders are tried in increasing order up to `max_degree`.
pub fn approximate(f: &dyn Fn(f64) -> f64, max_degree: usize, tol: f64) -> Result<Poly> {
    let mut last = f64::INFINITY;
    for n in [4usize, 8, 12, 16, 24, 32, 48, 64, 96, 128, 192, 256] {
        if n > max_degree + 1 {
            break;
        }
        let xs: Vec<f64> = chebyshev_nodes(n).collect();
        let vs: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
        if vs.iter().any(|v| !v.is_finite()) {
            return Err(LabError::Fit("function is not finite on the interpolation nodes".into()));
        }
        let mut a: Vec<f64> = (0..n)
            .map(|m| {
                let s: f64 = xs
                    .iter()
                    .zip(&vs)
                    .map(|(&x, &v)| v * cheb_t(m, x))
                    .sum();
                2.0 * s / n as f64
            })
            .collect();
        a[0] *= 0.5;
        let amax = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        while a.len() > 1 && a.last().unwrap().abs() <= 1e-17 * amax {
            a.pop();
        }
        let p = Poly::from_chebyshev(a);
        let (err, scale) = max_error(&p, f);
        if scale == 0.0 {
            return Ok(Poly::zero());
        }
        last = err / scale;
        if last <= tol {
            return Ok(p);
        }
    }
    Err(LabError::Fit(format!(
        "relative surrogate error {last:.3e} exceeds {tol:.1e} at degree <= {max_degree}"
    )))
}

fn cheb_t(m: usize, x: f64) -> f64 {
    (m as f64 * x.clamp(-1.0, 1.0).acos()).cos()
}

/// Lowest-degree least-squares polynomial (degree <= `max_degree`) whose
/// maximum deviation from `f` on a dense certification grid is at most `tol`.
/// Returns the fit and its certified error.
pub fn fit_certified(
    f: &dyn Fn(f64) -> f64,
    max_degree: usize,
    tol: f64,
) -> Result<(Poly, f64)> {
    let xs: Vec<f64> = chebyshev_nodes(64).collect();
    let ys = DVector::from_iterator(xs.len(), xs.iter().map(|&x| f(x)));
    let cert: Vec<(f64, f64)> = dense_grid().chain(chebyshev_nodes(97)).map(|x| (x, f(x))).collect();
    let mut best = f64::INFINITY;
    for deg in 0..=max_degree.min(48) {
        let a = DMatrix::from_fn(xs.len(), deg + 1, |r, m| cheb_t(m, xs[r]));
        let sol = a
            .svd(true, true)
            .solve(&ys, 1e-14)
            .map_err(|e| LabError::Fit(e.to_string()))?;
        let p = Poly::from_chebyshev(sol.as_slice().to_vec());
        let err = cert.iter().fold(0.0f64, |e, &(x, v)| e.max((p.eval(x) - v).abs()));
        best = best.min(err);
        if err <= tol {
            return Ok((p, err));
        }
    }
    Err(LabError::Fit(format!(
        "best max error {best:.3e} exceeds {tol:.1e} at degree <= {max_degree}"
    )))
}
