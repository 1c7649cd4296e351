//! Manufactured solutions: choose the coefficients of `u` order by order so that
//! `f = L u` vanishes to a prescribed order at t = 0.

use crate::boundary_algebra::{chebyshev_nodes, Poly, Series, TermExponent};
use crate::characteristic::OperatorSpec;
use crate::error::{LabError, Result};
use crate::ode_core::{apply_operator, solve_term, ModelODE};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExampleMode {
    /// `u = sum psi_i t^{s+i}`, s a non-integer constant.
    NonintegerConstant,
    /// `u = sum psi_i t^{s+i} log t`, s a positive integer.
    IntegerConstant,
    /// `u = sum_i sum_j psi_{i,j} t^{s+i} (log t)^j`, s varying in x.
    Varying,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PsiEntry {
    pub i: usize,
    pub j: u32,
    pub coeff: Poly,
}

#[derive(Clone, Debug)]
pub struct ManufacturedExample {
    pub mode: ExampleMode,
    pub u: Series,
    pub f: Series,
    pub psis: Vec<PsiEntry>,
    /// Model ODE whose positive root is s; shares the lattice of `u` and `f`.
    pub ode: ModelODE,
    /// Largest coefficient left in the blocks that were meant to cancel.
    pub cancellation_residual: f64,
}

impl ManufacturedExample {
    pub fn psi(&self, i: usize, j: u32) -> Poly {
        self.psis
            .iter()
            .find(|p| p.i == i && p.j == j)
            .map(|p| p.coeff.clone())
            .unwrap_or_else(Poly::zero)
    }
}

/// `A mu(mu-1) + B mu + C` with `A, B, C` the operator coefficients at t = 0.
fn char_poly_at(op: &OperatorSpec, mu: &Poly) -> Poly {
    let a = op.a_tt.at_t0();
    let b = op.b_t.at_t0();
    let c = op.c.at_t0();
    &(&(&a * mu) * &(mu - &Poly::constant(1.0))) + &(&(&b * mu) + &c)
}

fn model_ode(op: &OperatorSpec, s: &Poly, gamma: &Poly, int_part: i32, resonant: bool) -> Result<ModelODE> {
    let a = op.a_tt.at_t0();
    let b = op.b_t.at_t0();
    // roots sum to (A - B)/A
    let m_lower = &(&a - &b).quotient(&a)? - s;
    let one = Poly::constant(1.0);
    Ok(ModelODE {
        p: &(&one - &m_lower) - s,
        q: &m_lower * s,
        m_lower,
        m_upper: s.clone(),
        gamma: gamma.clone(),
        int_part,
        resonant,
        r: op.r,
    })
}

pub fn construct_example(
    op: &OperatorSpec,
    mode: ExampleMode,
    s: &Poly,
    psi0: &Poly,
    m: usize,
) -> Result<ManufacturedExample> {
    op.validate()?;
    let (lo, hi) = s.range();
    if lo <= 0.0 {
        return Err(LabError::Parameter(format!("s must be positive, reaches {lo}")));
    }
    let int_part = lo.floor() as i32;
    if hi.floor() as i32 != int_part {
        return Err(LabError::VaryingIntegerPart(format!("s ranges over [{lo}, {hi}]")));
    }
    let integer = (hi - hi.round()).abs() < 1e-12 && (lo - lo.round()).abs() < 1e-12;
    match mode {
        ExampleMode::IntegerConstant if !(s.is_constant() && integer) => {
            return Err(LabError::Parameter("integer mode needs a constant positive integer s".into()))
        }
        ExampleMode::NonintegerConstant if !s.is_constant() || integer => {
            return Err(LabError::Parameter("non-integer mode needs a constant non-integer s".into()))
        }
        ExampleMode::Varying if s.is_constant() => {
            return Err(LabError::Parameter("varying mode needs a non-constant s".into()))
        }
        _ => {}
    }
    let p_at_s = char_poly_at(op, s);
    let scale = 1.0 + op.c.at_t0().sup_norm();
    if p_at_s.sup_norm() > 1e-10 * scale {
        return Err(LabError::Parameter(format!(
            "s is not a root of the characteristic polynomial (|P(s)| up to {:.3e})",
            p_at_s.sup_norm()
        )));
    }
    for i in 1..=m {
        let mu = s + &Poly::constant(i as f64);
        let p = char_poly_at(op, &mu);
        if let Some(x) = chebyshev_nodes(64).find(|&x| p.eval(x).abs() < 1e-8) {
            return Err(LabError::CharacteristicCollision(format!(
                "P(s + {i}) vanishes at x = {x:.4}"
            )));
        }
    }

    let integer_mode = mode == ExampleMode::IntegerConstant;
    let gamma = if integer_mode { Poly::zero() } else { s - &Poly::constant(int_part as f64) };
    let ode = model_ode(op, s, &gamma, int_part, integer_mode)?;
    let a0 = op.a_tt.at_t0();
    let g = if integer_mode { 0 } else { 1 };
    let lead = if integer_mode {
        TermExponent::new(int_part, 0, 1)
    } else {
        TermExponent::new(int_part, 1, 0)
    };
    let mut u = Series::monomial(gamma.clone(), lead, psi0.clone());
    let mut psis = vec![PsiEntry { i: 0, j: lead.j, coeff: psi0.clone() }];

    // Order-(s+i) blocks of L u: the leading part of L there is a_nn(x,0) times the model operator.
    let wanted = |e: &TermExponent, n: i32| {
        e.i == n && if integer_mode { e.g == 0 && e.j >= 1 } else { e.g == g }
    };
    for i in 1..=m {
        let n = int_part + i as i32;
        let lu = apply_operator(op, &u)?;
        let mut v = Series::new(gamma.clone());
        for (e, c) in lu.terms().filter(|(e, _)| wanted(e, n)) {
            let rhs = (-c).quotient(&a0)?;
            if integer_mode {
                if e.j > 1 {
                    return Err(LabError::UnrepresentableExponent(format!(
                        "log power {} at order s + {i} in integer mode",
                        e.j
                    )));
                }
                // only the log column is cancelled; t^{s+i} stays in f
                let mu = Poly::constant(n as f64);
                v.add_term(*e, &rhs.quotient(&ode.ptilde(&mu))?);
            } else {
                v = v.add(&solve_term(&ode, *e, &rhs)?)?;
            }
        }
        for (e, c) in v.terms() {
            psis.push(PsiEntry { i, j: e.j, coeff: c.clone() });
        }
        u = u.add(&v)?;
    }
    let f = apply_operator(op, &u)?;
    let cancellation_residual = f
        .terms()
        .filter(|(e, _)| (0..=m as i32).any(|i| wanted(e, int_part + i)))
        .map(|(_, c)| c.sup_norm())
        .fold(0.0, f64::max);
    if cancellation_residual > 1e-8 * (1.0 + psi0.sup_norm()) {
        return Err(LabError::Convergence(format!(
            "lower-order blocks of f do not cancel (residual {cancellation_residual:.3e})"
        )));
    }
    psis.sort_by_key(|p| (p.i, std::cmp::Reverse(p.j)));
    Ok(ManufacturedExample { mode, u, f, psis, ode, cancellation_residual })
}
