//! Finite sums of terms `c(x) t^{i + g*gamma(x)} (log t)^j`.

use super::poly::Poly;
use crate::error::{LabError, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Terms whose coefficient entries all fall below this are dropped.
pub const PRUNE_TOL: f64 = 1e-13;

/// Exponent `i + g*gamma` with log power `j`. The derived ordering is the
/// lattice order `(i + g*gamma_min, j)` because gamma lies strictly inside (0, 1).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TermExponent {
    pub i: i32,
    pub g: u8,
    pub j: u32,
}

impl TermExponent {
    pub const fn new(i: i32, g: u8, j: u32) -> Self {
        TermExponent { i, g, j }
    }

    /// Pointwise power `i + g*gamma(x)`.
    pub fn mu(&self, gamma: &Poly) -> Poly {
        let base = Poly::constant(self.i as f64);
        if self.g == 1 {
            &base + gamma
        } else {
            base
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Term {
    pub exponent: TermExponent,
    pub coeff: Poly,
}

fn negligible(p: &Poly) -> bool {
    p.chebyshev().iter().all(|a| a.abs() < PRUNE_TOL)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    terms: BTreeMap<TermExponent, Poly>,
    gamma: Poly,
}

impl Series {
    pub fn new(gamma: Poly) -> Self {
        Series {
            terms: BTreeMap::new(),
            gamma,
        }
    }

    pub fn from_terms(gamma: Poly, terms: impl IntoIterator<Item = (TermExponent, Poly)>) -> Self {
        let mut s = Series::new(gamma);
        for (e, c) in terms {
            s.add_term(e, &c);
        }
        s
    }

    /// Single term `c t^{e}`.
    pub fn monomial(gamma: Poly, e: TermExponent, c: Poly) -> Self {
        Series::from_terms(gamma, [(e, c)])
    }

    pub fn gamma(&self) -> &Poly {
        &self.gamma
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&TermExponent, &Poly)> {
        self.terms.iter()
    }

    pub fn to_terms(&self) -> Vec<Term> {
        self.terms
            .iter()
            .map(|(e, c)| Term {
                exponent: *e,
                coeff: c.clone(),
            })
            .collect()
    }

    pub fn coeff(&self, e: TermExponent) -> Poly {
        self.terms.get(&e).cloned().unwrap_or_default()
    }

    fn gamma_is_zero(&self) -> bool {
        self.gamma.is_zero()
    }

    /// Adds `c t^{e}` in place, merging equal exponents and pruning negligible coefficients.
    pub fn add_term(&mut self, mut e: TermExponent, c: &Poly) {
        if e.g == 1 && self.gamma_is_zero() {
            e.g = 0;
        }
        let merged = match self.terms.get(&e) {
            Some(old) => old + c,
            None => c.clone(),
        };
        if negligible(&merged) {
            self.terms.remove(&e);
        } else {
            self.terms.insert(e, merged);
        }
    }

    fn check_gamma(&self, other: &Series) -> Result<()> {
        if self.gamma.approx_eq(&other.gamma, 1e-14) {
            Ok(())
        } else {
            Err(LabError::IncompatibleSeries(format!(
                "gamma {:?} vs {:?}",
                self.gamma, other.gamma
            )))
        }
    }

    pub fn add(&self, other: &Series) -> Result<Series> {
        self.check_gamma(other)?;
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.add_term(*e, c);
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Series) -> Result<Series> {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, s: f64) -> Series {
        let mut out = Series::new(self.gamma.clone());
        for (e, c) in &self.terms {
            out.add_term(*e, &c.scale(s));
        }
        out
    }

    /// Multiplies every coefficient by the polynomial `p(x)`.
    pub fn mul_poly(&self, p: &Poly) -> Series {
        let mut out = Series::new(self.gamma.clone());
        for (e, c) in &self.terms {
            out.add_term(*e, &(c * p));
        }
        out
    }

    /// Multiplies by `t^k`.
    pub fn shift(&self, k: i32) -> Series {
        let mut out = Series::new(self.gamma.clone());
        for (e, c) in &self.terms {
            out.add_term(TermExponent::new(e.i + k, e.g, e.j), c);
        }
        out
    }

    pub fn mul(&self, other: &Series) -> Result<Series> {
        self.check_gamma(other)?;
        let mut out = Series::new(self.gamma.clone());
        for (e1, c1) in &self.terms {
            for (e2, c2) in &other.terms {
                let g = e1.g + e2.g;
                if g >= 2 {
                    return Err(LabError::UnrepresentableExponent(format!(
                        "product of {e1:?} and {e2:?} carries t^(2 gamma)"
                    )));
                }
                out.add_term(TermExponent::new(e1.i + e2.i, g, e1.j + e2.j), &(c1 * c2));
            }
        }
        Ok(out)
    }

    pub fn diff_t(&self) -> Series {
        let mut out = Series::new(self.gamma.clone());
        for (e, c) in &self.terms {
            let lowered = TermExponent::new(e.i - 1, e.g, e.j);
            out.add_term(lowered, &(c * &e.mu(&self.gamma)));
            if e.j > 0 {
                out.add_term(TermExponent::new(e.i - 1, e.g, e.j - 1), &c.scale(e.j as f64));
            }
        }
        out
    }

    pub fn diff_t_n(&self, n: usize) -> Series {
        (0..n).fold(self.clone(), |s, _| s.diff_t())
    }

    pub fn diff_x(&self) -> Series {
        let dgamma = self.gamma.deriv();
        let mut out = Series::new(self.gamma.clone());
        for (e, c) in &self.terms {
            out.add_term(*e, &c.deriv());
            if e.g == 1 && !dgamma.is_zero() {
                out.add_term(TermExponent::new(e.i, 1, e.j + 1), &(c * &dgamma));
            }
        }
        out
    }

    /// Terms with integer part at most `n`.
    pub fn truncate(&self, n: i32) -> Series {
        Series::from_terms(
            self.gamma.clone(),
            self.terms.iter().filter(|(e, _)| e.i <= n).map(|(e, c)| (*e, c.clone())),
        )
    }

    /// Terms with integer part exactly `n`.
    pub fn block(&self, n: i32) -> Vec<(TermExponent, Poly)> {
        self.terms
            .iter()
            .filter(|(e, _)| e.i == n)
            .map(|(e, c)| (*e, c.clone()))
            .collect()
    }

    pub fn min_int_part(&self) -> Option<i32> {
        self.terms.keys().map(|e| e.i).min()
    }

    pub fn max_log_power(&self) -> u32 {
        self.terms.keys().map(|e| e.j).max().unwrap_or(0)
    }

    /// Largest sampled sup-norm of any coefficient.
    pub fn max_coeff_norm(&self) -> f64 {
        self.terms.values().map(Poly::sup_norm).fold(0.0, f64::max)
    }

    /// Smallest pointwise exponent `i + g*gamma_min` among the terms.
    pub fn leading_power(&self) -> Option<f64> {
        let gmin = self.gamma.range().0;
        self.terms
            .keys()
            .map(|e| e.i as f64 + if e.g == 1 { gmin } else { 0.0 })
            .reduce(f64::min)
    }

    pub fn evaluate(&self, x: f64, t: f64) -> Result<f64> {
        if t <= 0.0 {
            if let Some(e) = self
                .terms
                .keys()
                .find(|e| e.j > 0 || e.g == 1 || (e.i < 0 && t == 0.0))
            {
                return Err(LabError::Domain(format!("t = {t} with term {e:?}")));
            }
        }
        let gx = self.gamma.eval(x);
        let lt = if t > 0.0 { t.ln() } else { 0.0 };
        let mut parts: Vec<f64> = self
            .terms
            .iter()
            .map(|(e, c)| {
                let pw = if e.g == 1 {
                    (lt * (e.i as f64 + gx)).exp()
                } else {
                    t.powi(e.i)
                };
                c.eval(x) * pw * lt.powi(e.j as i32)
            })
            .collect();
        parts.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
        Ok(neumaier_sum(&parts))
    }

    /// `d^n/dt^n` of the series at (x, t).
    pub fn evaluate_dt(&self, n: usize, x: f64, t: f64) -> Result<f64> {
        self.diff_t_n(n).evaluate(x, t)
    }

    /// Value at t = 1, where every log term vanishes: a polynomial in x.
    pub fn at_t_one(&self) -> Poly {
        self.terms
            .iter()
            .filter(|(e, _)| e.j == 0)
            .fold(Poly::zero(), |acc, (_, c)| &acc + c)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(SeriesJson::from(self)).expect("series serializes")
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Series> {
        let sj: SeriesJson =
            serde_json::from_value(v.clone()).map_err(|e| LabError::Config(e.to_string()))?;
        sj.try_into()
    }
}

pub fn neumaier_sum(xs: &[f64]) -> f64 {
    let mut s = 0.0;
    let mut comp = 0.0;
    for &x in xs {
        let t = s + x;
        if s.abs() >= x.abs() {
            comp += (s - t) + x;
        } else {
            comp += (x - t) + s;
        }
        s = t;
    }
    s + comp
}

#[derive(Serialize, Deserialize)]
struct TermJson {
    i: i32,
    g: u8,
    j: u32,
    coeff: Poly,
}

/// Wire format `{"gamma": [..], "terms": [{"i", "g", "j", "coeff"}]}`.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeriesJson {
    gamma: Poly,
    terms: Vec<TermJson>,
}

impl From<&Series> for SeriesJson {
    fn from(s: &Series) -> Self {
        SeriesJson {
            gamma: s.gamma.clone(),
            terms: s
                .terms
                .iter()
                .map(|(e, c)| TermJson {
                    i: e.i,
                    g: e.g,
                    j: e.j,
                    coeff: c.clone(),
                })
                .collect(),
        }
    }
}

impl TryFrom<SeriesJson> for Series {
    type Error = LabError;
    fn try_from(sj: SeriesJson) -> Result<Series> {
        let mut s = Series::new(sj.gamma);
        for t in sj.terms {
            if t.g > 1 {
                return Err(LabError::Config(format!("gamma flag {} not in {{0,1}}", t.g)));
            }
            s.add_term(TermExponent::new(t.i, t.g, t.j), &t.coeff);
        }
        Ok(s)
    }
}

impl Serialize for Series {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        SeriesJson::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for Series {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let sj = SeriesJson::deserialize(d)?;
        sj.try_into().map_err(serde::de::Error::custom)
    }
}
