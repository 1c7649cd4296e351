//! The model ODE `t^2 u_tt + p t u_t + q u = F`: assembling `F` from a candidate
//! solution, termwise series solutions and the quadrature solution.

use crate::boundary_algebra::{chebyshev_nodes, BiPoly, Poly, Series, TermExponent};
use crate::characteristic::{CharacteristicData, OperatorSpec};
use crate::error::{LabError, Result};
use crate::quadrature::{integrate, integrate_endpoint};
use rayon::prelude::*;
use serde::Serialize;

/// |P~(mu)| below this on a validation node counts as resonance.
pub const RESONANCE_TOL: f64 = 1e-8;
/// Residual probes stay above this height.
pub const T_FLOOR: f64 = 1e-6;
const QUAD_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModelODE {
    pub p: Poly,
    pub q: Poly,
    pub m_lower: Poly,
    pub m_upper: Poly,
    pub gamma: Poly,
    pub int_part: i32,
    pub resonant: bool,
    pub r: f64,
}

impl ModelODE {
    pub fn new(cd: &CharacteristicData, r: f64) -> ModelODE {
        let (p, q) = crate::characteristic::p_q_from_roots(cd);
        ModelODE {
            p,
            q,
            m_lower: cd.m_lower.clone(),
            m_upper: cd.m_upper.clone(),
            gamma: cd.gamma.clone(),
            int_part: cd.int_part,
            resonant: cd.resonant,
            r,
        }
    }

    /// `P~(mu) = (mu - m_lower)(mu - m_upper)`.
    pub fn ptilde(&self, mu: &Poly) -> Poly {
        &(mu - &self.m_lower) * &(mu - &self.m_upper)
    }

    /// `P~'(mu) = 2 mu + p - 1`.
    pub fn ptilde_prime(&self, mu: &Poly) -> Poly {
        &(mu - &self.m_lower) + &(mu - &self.m_upper)
    }

    /// Pointwise discrepancy between `(mu-m_lower)(mu-m_upper)` and `mu^2 + (p-1)mu + q`.
    pub fn consistency_error(&self) -> f64 {
        let lhs_lin = -(&(&self.m_lower + &self.m_upper));
        let rhs_lin = &self.p - &Poly::constant(1.0);
        let lhs_c = &self.m_lower * &self.m_upper;
        (&lhs_lin - &rhs_lin).sup_norm().max((&lhs_c - &self.q).sup_norm())
    }

    pub fn empty_series(&self) -> Series {
        Series::new(self.gamma.clone())
    }

    /// `M[u] = t^2 u_tt + p t u_t + q u`, exactly.
    pub fn apply(&self, u: &Series) -> Series {
        let ut = u.diff_t();
        let utt = ut.diff_t().shift(2);
        let a = utt.add(&ut.shift(1).mul_poly(&self.p)).expect("shared gamma");
        a.add(&u.mul_poly(&self.q)).expect("shared gamma")
    }

    /// `M[t^m]` evaluated pointwise for an arbitrary exponent function `m(x)`.
    pub fn power_residual(&self, m: &Poly, x: f64, t: f64) -> f64 {
        let mx = m.eval(x);
        (mx * (mx - 1.0) + self.p.eval(x) * mx + self.q.eval(x)) * t.powf(mx)
    }
}

/// Taylor polynomial of `1 / a(x, t)` in `t` up to `order`, with coefficient
/// quotients taken through polynomial surrogates.
pub fn inverse_taylor(a: &BiPoly, order: usize, gamma: &Poly, r: f64) -> Result<Series> {
    let a0 = a.at_t0();
    let (lo, _) = a0.range();
    if lo <= 0.0 {
        return Err(LabError::Ellipticity(format!("a_nn(x, 0) reaches {lo}")));
    }
    let one = Poly::constant(1.0);
    let mut d: Vec<Poly> = vec![one.quotient(&a0)?];
    if a.depends_on_t() {
        for k in 1..=order {
            let mut acc = Poly::zero();
            for m in 1..=k.min(a.degree_t()) {
                acc = &acc + &(&a.t_coeff(m) * &d[k - m]);
            }
            d.push((-&acc).quotient(&a0)?);
        }
        let amin = chebyshev_nodes(16)
            .flat_map(|x| (0..=20).map(move |k| (x, r * k as f64 / 20.0)))
            .map(|(x, t)| a.eval(x, t))
            .fold(f64::INFINITY, f64::min);
        if amin <= 0.0 {
            return Err(LabError::Ellipticity(format!("a_nn reaches {amin} on the strip")));
        }
        let worst = chebyshev_nodes(16)
            .flat_map(|x| (0..=20).map(move |k| (x, T_FLOOR.max(r * k as f64 / 20.0))))
            .map(|(x, t)| {
                let taylor = d.iter().rev().fold(0.0, |acc, p| acc * t + p.eval(x));
                (taylor - 1.0 / a.eval(x, t)).abs()
            })
            .fold(0.0, f64::max);
        if worst > 1e-10 * amin {
            return Err(LabError::Convergence(format!(
                "Taylor remainder of 1/a_nn is {worst:.3e} at order {order}, above 1e-10 min|a_nn|"
            )));
        }
    }
    Ok(BiPoly::new(d).to_series(gamma))
}

/// Coefficient series with its t^0 part removed after checking it vanishes.
fn drop_boundary_value(s: Series, what: &str) -> Result<Series> {
    let c0 = s.coeff(TermExponent::new(0, 0, 0));
    let err = c0.sup_norm();
    if err > 1e-7 {
        return Err(LabError::Parameter(format!(
            "{what} does not vanish at t = 0 (sup {err:.3e}); characteristic data inconsistent with operator"
        )));
    }
    let rest = s
        .terms()
        .filter(|(e, _)| **e != TermExponent::new(0, 0, 0))
        .map(|(e, c)| (*e, c.clone()))
        .collect::<Vec<_>>();
    Ok(Series::from_terms(s.gamma().clone(), rest))
}

/// Precomputed coefficient series for repeated `F` assembly.
#[derive(Clone, Debug)]
pub struct Assembler {
    gamma: Poly,
    inv_ann: Series,
    a_xx: Series,
    a_xt2: Series,
    b_x: Series,
    b_rest: Series,
    c_rest: Series,
}

impl Assembler {
    pub fn new(op: &OperatorSpec, ode: &ModelODE, taylor_order: usize) -> Result<Assembler> {
        let g = &ode.gamma;
        let inv_ann = inverse_taylor(&op.a_tt, taylor_order, g, op.r)?;
        let b_rest = op.b_t.to_series(g).mul(&inv_ann)?;
        let b_rest = b_rest.sub(&Series::monomial(g.clone(), TermExponent::new(0, 0, 0), ode.p.clone()))?;
        let c_rest = op.c.to_series(g).mul(&inv_ann)?;
        let c_rest = c_rest.sub(&Series::monomial(g.clone(), TermExponent::new(0, 0, 0), ode.q.clone()))?;
        Ok(Assembler {
            gamma: g.clone(),
            a_xx: op.a_xx.to_series(g),
            a_xt2: op.a_xt.to_series(g).scale(2.0),
            b_x: op.b_x.to_series(g),
            b_rest: drop_boundary_value(b_rest, "b_n/a_nn - p")?,
            c_rest: drop_boundary_value(c_rest, "c/a_nn - q")?,
            inv_ann,
        })
    }

    /// `F = (f - t^2 a_xx u_xx - 2 t^2 a_xt u_xt - t b_x u_x)/a_nn - (b_n/a_nn - p) t u_t - (c/a_nn - q) u`.
    pub fn assemble(&self, f: &Series, u: &Series) -> Result<Series> {
        let ux = u.diff_x();
        let uxx = ux.diff_x();
        let ut = u.diff_t();
        let uxt = ux.diff_t();
        let tangential = self
            .a_xx
            .mul(&uxx)?
            .add(&self.a_xt2.mul(&uxt)?)?
            .shift(2)
            .add(&self.b_x.mul(&ux)?.shift(1))?;
        let inner = f.sub(&tangential)?;
        let lower = self.b_rest.mul(&ut.shift(1))?.add(&self.c_rest.mul(u)?)?;
        self.inv_ann.mul(&inner)?.sub(&lower)
    }

    pub fn gamma(&self) -> &Poly {
        &self.gamma
    }
}

/// One-shot `F` assembly; see [`Assembler::assemble`].
pub fn assemble_f(
    op: &OperatorSpec,
    ode: &ModelODE,
    f: &Series,
    u: &Series,
    taylor_order: usize,
) -> Result<Series> {
    Assembler::new(op, ode, taylor_order)?.assemble(f, u)
}

/// `L u`, exactly, as a series.
pub fn apply_operator(op: &OperatorSpec, u: &Series) -> Result<Series> {
    let g = u.gamma();
    let ux = u.diff_x();
    let ut = u.diff_t();
    let second = op
        .a_xx
        .to_series(g)
        .mul(&ux.diff_x())?
        .add(&op.a_xt.to_series(g).scale(2.0).mul(&ux.diff_t())?)?
        .add(&op.a_tt.to_series(g).mul(&ut.diff_t())?)?;
    let first = op.b_x.to_series(g).mul(&ux)?.add(&op.b_t.to_series(g).mul(&ut)?)?;
    second.shift(2).add(&first.shift(1))?.add(&op.c.to_series(g).mul(u)?)
}

fn check_nonresonant(p: &Poly, e: TermExponent) -> Result<()> {
    if let Some(x) = chebyshev_nodes(64).find(|&x| p.eval(x).abs() < RESONANCE_TOL) {
        return Err(LabError::Resonance(format!(
            "|P~(mu)| = {:.3e} at x = {x:.4} for exponent {e:?}",
            p.eval(x).abs()
        )));
    }
    Ok(())
}

/// Solution of `M[v] = a t^{mu} (log t)^J` within the lattice.
pub fn solve_term(ode: &ModelODE, e: TermExponent, a: &Poly) -> Result<Series> {
    let mut out = ode.empty_series();
    if a.is_zero() {
        return Ok(out);
    }
    let mu = e.mu(&ode.gamma);
    let pt = ode.ptilde(&mu);
    let dpt = ode.ptilde_prime(&mu);
    if ode.resonant && e.g == 0 && e.i == ode.int_part {
        if e.j > 0 {
            return Err(LabError::UnsupportedResonance(format!(
                "resonant exponent {} with log power {}",
                e.i, e.j
            )));
        }
        out.add_term(TermExponent::new(e.i, 0, 1), &a.quotient(&dpt)?);
        return Ok(out);
    }
    check_nonresonant(&pt, e)?;
    let jmax = e.j as usize;
    let mut c = vec![Poly::zero(); jmax + 3];
    c[jmax] = a.quotient(&pt)?;
    for j in (0..jmax).rev() {
        let rhs = &(&dpt * &c[j + 1]).scale((j + 1) as f64)
            + &c[j + 2].scale(((j + 2) * (j + 1)) as f64);
        c[j] = (-&rhs).quotient(&pt)?;
    }
    for (j, cj) in c.iter().enumerate().take(jmax + 1) {
        out.add_term(TermExponent::new(e.i, e.g, j as u32), cj);
    }
    Ok(out)
}

/// Termwise particular solution of `M[v] = F`.
pub fn solve_series(ode: &ModelODE, f: &Series) -> Result<Series> {
    let mut out = ode.empty_series();
    for (e, a) in f.terms() {
        out = out.add(&solve_term(ode, *e, a)?)?;
    }
    Ok(out)
}

/// Quadrature solution of the model ODE with `u(x, r) = data(x)`, bounded at t = 0:
///
/// `u = [d r^{-m} + r^{l-m}/(m-l) I_l(r)] t^m - t^l/(m-l) I_l(t) - t^m/(m-l) J_m(t)`
/// with `I_l(t) = int_0^t s^{-1-l} F`, `J_m(t) = int_t^r s^{-1-m} F`.
/// `vanishing_order` is the declared power of F at t = 0.
pub fn solve_quadrature(
    ode: &ModelODE,
    f: &(dyn Fn(f64, f64) -> f64 + Sync),
    data: &Poly,
    x_nodes: &[f64],
    t_points: &[f64],
    vanishing_order: f64,
) -> Result<Vec<Vec<f64>>> {
    let r = ode.r;
    x_nodes
        .par_iter()
        .map(|&x| {
            let (l, m) = (ode.m_lower.eval(x), ode.m_upper.eval(x));
            let beta = vanishing_order - 1.0 - l;
            if beta <= -1.0 {
                return Err(LabError::Integrability(format!(
                    "F ~ t^{vanishing_order} does not decay against s^(-1-{l:.4})"
                )));
            }
            // t^{-l} I_l(t) = int_0^1 rho^{-1-l} F(t rho) drho
            let scaled_lower = |t: f64| -> Result<f64> {
                integrate_endpoint(&|rho: f64| rho.powf(-1.0 - l) * f(x, t * rho), beta, QUAD_TOL)
            };
            let i_r = r.powf(-l) * scaled_lower(r)?;
            let bracket = data.eval(x) * r.powf(-m) + r.powf(l - m) / (m - l) * i_r;
            t_points
                .iter()
                .map(|&t| {
                    let low = scaled_lower(t)?;
                    let tail = integrate(&|s: f64| s.powf(-1.0 - m) * f(x, s), t, r, QUAD_TOL)?;
                    Ok(bracket * t.powf(m) - t.powf(l) * t.powf(-l) * low / (m - l)
                        - t.powf(m) / (m - l) * tail)
                })
                .collect()
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ResidualReport {
    pub max: f64,
    pub l2: f64,
}

/// Which operator the residual is taken against.
pub enum ResidualTarget<'a> {
    Model(&'a ModelODE),
    Full(&'a OperatorSpec),
}

/// `L u - f` on a probe grid (16 Chebyshev x-nodes, 32 log-spaced t in [t_floor, r]).
pub fn verify_residual(target: ResidualTarget, u: &Series, f: &Series, r: f64) -> Result<ResidualReport> {
    let lu = match target {
        ResidualTarget::Model(ode) => ode.apply(u),
        ResidualTarget::Full(op) => apply_operator(op, u)?,
    };
    let diff = lu.sub(f)?;
    let mut max = 0.0f64;
    let mut sq = 0.0;
    let mut n = 0usize;
    for x in chebyshev_nodes(16) {
        for k in 0..32 {
            let t = T_FLOOR * (r / T_FLOOR).powf(k as f64 / 31.0);
            let v = diff.evaluate(x, t)?;
            max = max.max(v.abs());
            sq += v * v;
            n += 1;
        }
    }
    Ok(ResidualReport { max, l2: (sq / n as f64).sqrt() })
}
