//! Bivariate polynomials `sum_k p_k(x) t^k`, used for operator coefficients and data.

use super::poly::Poly;
use super::series::{Series, TermExponent};
use serde::{Deserialize, Serialize};

/// Stored as tangential polynomials indexed by the power of `t`; serialized as
/// `[[x-coeffs of t^0], [x-coeffs of t^1], ...]`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<Poly>", into = "Vec<Poly>")]
pub struct BiPoly {
    t: Vec<Poly>,
}

impl From<Vec<Poly>> for BiPoly {
    fn from(mut t: Vec<Poly>) -> Self {
        while t.last().is_some_and(Poly::is_zero) {
            t.pop();
        }
        BiPoly { t }
    }
}

impl From<BiPoly> for Vec<Poly> {
    fn from(b: BiPoly) -> Self {
        b.t
    }
}

impl From<Poly> for BiPoly {
    fn from(p: Poly) -> Self {
        BiPoly::from(vec![p])
    }
}

impl BiPoly {
    pub fn new(t: Vec<Poly>) -> Self {
        BiPoly::from(t)
    }

    pub fn constant(a: f64) -> Self {
        BiPoly::from(Poly::constant(a))
    }

    pub fn zero() -> Self {
        BiPoly { t: Vec::new() }
    }

    pub fn is_zero(&self) -> bool {
        self.t.is_empty()
    }

    /// Coefficient of `t^k`.
    pub fn t_coeff(&self, k: usize) -> Poly {
        self.t.get(k).cloned().unwrap_or_default()
    }

    pub fn t_coeffs(&self) -> &[Poly] {
        &self.t
    }

    pub fn degree_t(&self) -> usize {
        self.t.len().saturating_sub(1)
    }

    pub fn degree_x(&self) -> usize {
        self.t.iter().map(Poly::degree).max().unwrap_or(0)
    }

    /// Restriction to the boundary t = 0.
    pub fn at_t0(&self) -> Poly {
        self.t_coeff(0)
    }

    pub fn eval(&self, x: f64, t: f64) -> f64 {
        self.t.iter().rev().fold(0.0, |acc, p| acc * t + p.eval(x))
    }

    /// Whether the polynomial depends on `t`.
    pub fn depends_on_t(&self) -> bool {
        self.t.len() > 1
    }

    pub fn to_series(&self, gamma: &Poly) -> Series {
        Series::from_terms(
            gamma.clone(),
            self.t
                .iter()
                .enumerate()
                .map(|(k, p)| (TermExponent::new(k as i32, 0, 0), p.clone())),
        )
    }
}
