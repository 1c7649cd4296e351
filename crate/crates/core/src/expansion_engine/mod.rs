//! Boundary expansions `u ~ sum c_i t^i + sum c_{i,j} t^{i+gamma} (log t)^j`:
//! the order-by-order recursion, manufactured examples, the v/w split and
//! cutoff summation.

mod borel;
mod example;
mod extension;

pub use borel::{borel_sum, BorelEntry, BorelResult, BOREL_LAMBDA_MAX};
pub use example::{construct_example, ExampleMode, ManufacturedExample, PsiEntry};
pub use extension::{decompose_vw, extend_taylor, Cutoff, DecompositionVW, TaylorExtension};

use crate::boundary_algebra::{chebyshev_nodes, Poly, Series, TermExponent};
use crate::characteristic::OperatorSpec;
use crate::error::{LabError, Result};
use crate::grid::GridFunction;
use crate::ode_core::{solve_series, solve_term, Assembler, ModelODE};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

/// Coefficients below this sup-norm count as vanishing in structural checks.
pub const COEFF_ZERO_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExpansionOptions {
    pub k_max: usize,
    /// Tangential smoothness of the data; orders beyond it are refused.
    pub smoothness: Option<usize>,
    /// Hoelder index of f in t.
    pub alpha: f64,
    /// Chebyshev degree bound for the free coefficient.
    pub fit_degree: usize,
    pub fit_tol: f64,
}

impl Default for ExpansionOptions {
    fn default() -> Self {
        ExpansionOptions {
            k_max: 12,
            smoothness: None,
            alpha: 1.0,
            fit_degree: 24,
            fit_tol: 1e-11,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExpansionMode {
    Regular,
    /// alpha below gamma: two remainders are tracked.
    SmallIndex,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RemainderEntry {
    pub name: String,
    /// Predicted power of t.
    pub decay: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LogCoeff {
    pub i: i32,
    pub j: u32,
    pub coeff: Poly,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Expansion {
    pub k: usize,
    pub int_part: i32,
    pub gamma: Poly,
    pub resonant: bool,
    /// `c_0 .. c_k`, coefficients of `t^i`.
    pub c_int: Vec<Poly>,
    /// Coefficients of `t^{i+gamma} (log t)^j`; in the resonant case `t^i (log t)^j`, j >= 1.
    pub c_log: Vec<LogCoeff>,
    pub mode: ExpansionMode,
    pub ledger: Vec<RemainderEntry>,
    pub note: String,
    /// Chebyshev degree of the free coefficient.
    pub matching_degree: usize,
    /// Certified mismatch at t = r, scaled by `r^{-m_upper}`.
    pub matching_residual: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub remainder_probe: Option<GridFunction>,
}

impl Expansion {
    pub fn c_log_at(&self, i: i32, j: u32) -> Poly {
        self.c_log
            .iter()
            .find(|c| c.i == i && c.j == j)
            .map(|c| c.coeff.clone())
            .unwrap_or_else(Poly::zero)
    }

    fn log_exponent(&self, i: i32, j: u32) -> TermExponent {
        TermExponent::new(i, if self.resonant { 0 } else { 1 }, j)
    }

    pub fn to_series(&self) -> Series {
        let mut s = Series::new(self.gamma.clone());
        for (i, c) in self.c_int.iter().enumerate() {
            s.add_term(TermExponent::new(i as i32, 0, 0), c);
        }
        for c in &self.c_log {
            s.add_term(self.log_exponent(c.i, c.j), &c.coeff);
        }
        s
    }

    /// Truncation to order `k` (coefficients with integer part above k dropped).
    pub fn truncated(&self, k: usize) -> Expansion {
        let mut e = self.clone();
        e.k = k.min(self.k);
        e.c_int.truncate(e.k + 1);
        e.c_log.retain(|c| c.i <= e.k as i32);
        e.ledger = remainder_ledger(e.k, self.alpha_from_ledger(), self.mode);
        e.remainder_probe = None;
        e
    }

    fn alpha_from_ledger(&self) -> f64 {
        self.ledger
            .iter()
            .find(|l| l.name == "R_k")
            .map(|l| l.decay - self.k as f64)
            .unwrap_or(1.0)
    }

    pub fn evaluate(&self, x: f64, t: f64) -> Result<f64> {
        self.to_series().evaluate(x, t)
    }

    /// Largest `|c_{i,j}|` over entries with `j >= 1`.
    pub fn max_log_coeff(&self) -> f64 {
        self.c_log
            .iter()
            .filter(|c| c.j >= 1 && !(self.resonant && c.i == self.int_part && c.j == 1))
            .map(|c| c.coeff.sup_norm())
            .fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("expansion serializes")
    }
}

fn remainder_ledger(k: usize, alpha: f64, mode: ExpansionMode) -> Vec<RemainderEntry> {
    let mut v = Vec::new();
    if mode == ExpansionMode::SmallIndex && k >= 1 {
        v.push(RemainderEntry { name: "R'_{k-1}".into(), decay: k as f64 });
    }
    v.push(RemainderEntry { name: "R_k".into(), decay: k as f64 + alpha.min(1.0) });
    v
}

fn from_series(ode: &ModelODE, u: &Series, k: usize) -> Result<(Vec<Poly>, Vec<LogCoeff>)> {
    let m = ode.int_part;
    let mut c_int = vec![Poly::zero(); k + 1];
    let mut c_log = Vec::new();
    for (e, c) in u.terms() {
        if e.i > k as i32 {
            continue;
        }
        let is_log = if ode.resonant { e.j >= 1 } else { e.g == 1 };
        if !is_log {
            if e.j > 0 || e.i < 0 {
                return Err(LabError::UnrepresentableExponent(format!(
                    "integer-power term {e:?} carries a log factor or negative power"
                )));
            }
            c_int[e.i as usize] = c.clone();
            continue;
        }
        let allowed = e.i - m + if ode.resonant { 1 } else { 0 };
        if (e.j as i32) > allowed && c.sup_norm() > COEFF_ZERO_TOL {
            return Err(LabError::UnrepresentableExponent(format!(
                "coefficient at {e:?} lies outside the triangle j <= i - [m]"
            )));
        }
        c_log.push(LogCoeff { i: e.i, j: e.j, coeff: c.clone() });
    }
    Ok((c_int, c_log))
}

/// Order-by-order construction of the expansion of the solution of `L u = f`,
/// `u(., r) = data`, bounded at t = 0.
///
/// At order n the partial expansion is fed back through `F` assembly and the
/// terms of `F` with integer part n are solved termwise. The free coefficient X
/// of `t^{m_upper}` is fixed by matching the data at t = r. The mismatch is
/// affine in X but involves its x-derivatives, so it is solved by Chebyshev
/// collocation and least squares instead of iteration, then certified on a
/// dense grid.
pub fn expand(
    ode: &ModelODE,
    op: &OperatorSpec,
    f: &Series,
    data: &Poly,
    k: usize,
    opts: &ExpansionOptions,
) -> Result<Expansion> {
    if k > opts.k_max {
        return Err(LabError::Parameter(format!("k = {k} exceeds k_max = {}", opts.k_max)));
    }
    if let Some(l) = opts.smoothness {
        if k > l {
            return Err(LabError::SmoothnessBudget(format!(
                "order {k} needs {k} tangential derivatives of the data but only {l} are available"
            )));
        }
    }
    if ode.int_part < 0 {
        return Err(LabError::Parameter("positive root below zero".into()));
    }
    if f.gamma() != &ode.gamma {
        if f.terms().any(|(e, _)| e.g == 1) {
            return Err(LabError::IncompatibleSeries(
                "f carries gamma-powers for a different gamma".into(),
            ));
        }
    }
    let f = Series::from_terms(ode.gamma.clone(), f.terms().map(|(e, c)| (*e, c.clone())));
    if let Some(n) = f.min_int_part().filter(|&n| n < 0) {
        return Err(LabError::Parameter(format!("f has a t^{n} term")));
    }

    let r = ode.r;
    let asm = Assembler::new(op, ode, opts.k_max + 2)?;
    let free = TermExponent::new(ode.int_part, if ode.resonant { 0 } else { 1 }, 0);
    let build = |x_coeff: &Poly| -> Result<Series> {
        let mut u = Series::monomial(ode.gamma.clone(), free, x_coeff.clone());
        for n in 0..=k as i32 {
            let big_f = asm.assemble(&f, &u)?;
            for (e, a) in big_f.block(n) {
                u = u.add(&solve_term(ode, e, &a)?)?;
            }
        }
        Ok(u)
    };
    // G(X) = X + r^{-m_upper} u_p(X)(., r), with u_p the particular part of u(X).
    let m_upper = ode.m_upper.clone();
    let gap = |x_coeff: &Poly| -> Result<Series> {
        let u = build(x_coeff)?;
        let big_f = asm.assemble(&f, &u)?;
        solve_series(ode, &big_f)
    };
    let weight = |x: f64| r.powf(-m_upper.eval(x));
    let g_at = |x_coeff: &Poly, up: &Series, x: f64| -> f64 {
        match up.evaluate(x, r) {
            Ok(v) => x_coeff.eval(x) + weight(x) * v,
            Err(_) => f64::NAN,
        }
    };
    let nodes: Vec<f64> = chebyshev_nodes(64).collect();
    let cert: Vec<f64> = (0..=256)
        .map(|k| -1.0 + k as f64 / 128.0)
        .chain(chebyshev_nodes(97))
        .collect();
    let target = |x: f64| data.eval(x) * weight(x);
    let scale = 1.0 + cert.iter().map(|&x| target(x).abs()).fold(0.0, f64::max);

    let up0 = gap(&Poly::zero())?;
    let g0: Vec<f64> = nodes.iter().map(|&x| g_at(&Poly::zero(), &up0, x)).collect();
    let ncols = opts.fit_degree.min(nodes.len() - 1) + 1;
    let columns: Vec<Vec<f64>> = (0..ncols)
        .into_par_iter()
        .map(|m| {
            let mut a = vec![0.0; m + 1];
            a[m] = 1.0;
            let basis = Poly::from_chebyshev(a);
            let up = gap(&basis)?;
            Ok(nodes.iter().zip(&g0).map(|(&x, g)| g_at(&basis, &up, x) - g).collect())
        })
        .collect::<Result<_>>()?;
    let rhs = DVector::from_iterator(nodes.len(), nodes.iter().zip(&g0).map(|(&x, g)| target(x) - g));
    if columns.iter().flatten().chain(rhs.iter()).any(|v| !v.is_finite()) {
        return Err(LabError::Fit("data-matching system is not finite".into()));
    }
    // High-degree columns carry rounding amplified by x-derivatives, so the
    // lowest degree that certifies is taken.
    let mut best: Option<(f64, Poly, Series)> = None;
    for d in [2usize, 4, 6, 8, 12, 16, 20, 24, 32, 40, 48, 63] {
        let d = d.min(ncols - 1);
        let mat = DMatrix::from_fn(nodes.len(), d + 1, |i, m| columns[m][i]);
        let sol = mat
            .svd(true, true)
            .solve(&rhs, 1e-13)
            .map_err(|e| LabError::Fit(e.to_string()))?;
        let x_coeff = Poly::from_chebyshev(sol.as_slice().to_vec());
        let u = build(&x_coeff)?;
        let up = solve_series(ode, &asm.assemble(&f, &u)?)?;
        let residual = cert
            .iter()
            .map(|&x| (g_at(&x_coeff, &up, x) - target(x)).abs())
            .fold(0.0, f64::max);
        if best.as_ref().map_or(true, |b| residual < b.0) {
            best = Some((residual, x_coeff, u));
        }
        if residual <= opts.fit_tol * scale || d == ncols - 1 {
            break;
        }
    }
    let (residual, x_coeff, u) = best.expect("at least one degree is tried");
    if !(residual <= opts.fit_tol * scale) {
        return Err(LabError::Fit(format!(
            "free coefficient matches the data only to {residual:.3e} (target {:.1e}) at degree <= {}",
            opts.fit_tol * scale,
            ncols - 1
        )));
    }

    let (c_int, c_log) = from_series(ode, &u, k)?;
    let mode = if !ode.resonant && opts.alpha < ode.gamma.range().0 {
        ExpansionMode::SmallIndex
    } else {
        ExpansionMode::Regular
    };
    let note = match mode {
        ExpansionMode::SmallIndex => {
            "small-index bookkeeping: the recursion is the regular one; R'_{k-1} tracks the expansion without the t^{k+gamma} column"
                .to_string()
        }
        ExpansionMode::Regular => String::new(),
    };
    Ok(Expansion {
        k,
        int_part: ode.int_part,
        gamma: ode.gamma.clone(),
        resonant: ode.resonant,
        c_int,
        c_log,
        mode,
        ledger: remainder_ledger(k, opts.alpha, mode),
        note,
        matching_degree: x_coeff.degree(),
        matching_residual: residual,
        remainder_probe: None,
    })
}
