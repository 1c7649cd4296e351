//! Finite-difference reference solver for `L u = f` on `[-1, 1] x [0, r]` with
//! the forced boundary value `u(x, 0) = f(x, 0) / c(x, 0)`, data at t = r and
//! periodic or Dirichlet conditions in x. Graded t-mesh, direct banded LU.

use crate::boundary_algebra::{Poly, Series};
use crate::characteristic::OperatorSpec;
use crate::error::{LabError, Result};
use crate::expansion_engine::Expansion;
use crate::grid::GridFunction;
use crate::ode_core::apply_operator;
use crate::singular_integrals::{decay_rate_fit, DecayFit};
use rayon::prelude::*;
use serde::Serialize;
use std::sync::Arc;

/// Relative residual accepted after the direct solve.
pub const RESIDUAL_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Mesh {
    pub x_nodes: Vec<f64>,
    /// `0 = t_0 < ... < t_N = r`
    pub t_nodes: Vec<f64>,
    pub beta: f64,
    pub periodic: bool,
}

impl Mesh {
    /// `nx` uniform x-nodes (endpoints included unless periodic) and
    /// `t_j = r (j / nt)^beta`, j = 0..=nt.
    pub fn graded(nx: usize, nt: usize, r: f64, beta: f64, periodic: bool) -> Result<Mesh> {
        if nx < 3 || nt < 2 {
            return Err(LabError::Grid(format!("mesh {nx} x {nt} is too small")));
        }
        let x_nodes = if periodic {
            (0..nx).map(|i| -1.0 + 2.0 * i as f64 / nx as f64).collect()
        } else {
            (0..nx).map(|i| -1.0 + 2.0 * i as f64 / (nx - 1) as f64).collect()
        };
        let t_nodes = (0..=nt).map(|j| r * (j as f64 / nt as f64).powf(beta)).collect();
        let mesh = Mesh { x_nodes, t_nodes, beta, periodic };
        mesh.validate()?;
        Ok(mesh)
    }

    /// First index from which the graded mesh keeps `t_{j+1} / t_j <= 2`.
    pub fn ratio_start(beta: f64) -> usize {
        (1.0 / (2f64.powf(1.0 / beta) - 1.0)).ceil().max(1.0) as usize
    }

    pub fn validate(&self) -> Result<()> {
        let t = &self.t_nodes;
        let n = t.len();
        if n < 3 || t[0] != 0.0 || t.windows(2).any(|w| w[1] <= w[0]) {
            return Err(LabError::Grid("t nodes must increase strictly from 0".into()));
        }
        let r = t[n - 1];
        if t[1] > 1e-3 * r {
            return Err(LabError::Grid(format!("first node {:.3e} above 1e-3 r", t[1])));
        }
        let j0 = Mesh::ratio_start(self.beta);
        if let Some(j) = (j0.max(1)..n - 1).find(|&j| t[j + 1] / t[j] > 2.0 + 1e-12) {
            return Err(LabError::Grid(format!("mesh ratio t[{}]/t[{j}] exceeds 2", j + 1)));
        }
        if self.x_nodes.len() < 3 || self.x_nodes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(LabError::Grid("x nodes must increase strictly".into()));
        }
        Ok(())
    }

    pub fn r(&self) -> f64 {
        *self.t_nodes.last().expect("validated mesh")
    }

    fn hx(&self) -> f64 {
        self.x_nodes[1] - self.x_nodes[0]
    }
}

pub type Field2 = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
pub type Field1 = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum XBoundary {
    Periodic,
    Dirichlet(Field2),
}

#[derive(Clone)]
pub struct BvpProblem {
    pub op: OperatorSpec,
    pub f: Field2,
    pub top_data: Field1,
    pub x_bc: XBoundary,
}

/// Series value, with the limit at t = 0 when every term vanishes there.
fn series_value(s: &Series, x: f64, t: f64) -> f64 {
    if t > 0.0 {
        return s.evaluate(x, t).unwrap_or(f64::NAN);
    }
    let gamma = s.gamma().eval(x);
    s.terms()
        .map(|(e, c)| {
            let power = e.i as f64 + if e.g == 1 { gamma } else { 0.0 };
            if power > 0.0 {
                0.0
            } else if power == 0.0 && e.j == 0 {
                c.eval(x)
            } else {
                f64::NAN
            }
        })
        .sum()
}

impl BvpProblem {
    pub fn new(op: OperatorSpec, f: Field2, top_data: Field1, x_bc: XBoundary) -> BvpProblem {
        BvpProblem { op, f, top_data, x_bc }
    }

    /// Problem solved by the series `u`: `f = L u` as a series, data and
    /// Dirichlet values from `u`.
    pub fn manufactured(op: &OperatorSpec, f: &Series, u: &Series) -> BvpProblem {
        let (f, u1, u2) = (f.clone(), u.clone(), u.clone());
        let r = op.r;
        BvpProblem {
            op: op.clone(),
            f: Arc::new(move |x, t| series_value(&f, x, t)),
            top_data: Arc::new(move |x| series_value(&u1, x, r)),
            x_bc: XBoundary::Dirichlet(Arc::new(move |x, t| series_value(&u2, x, t))),
        }
    }

    pub fn with_polynomial_data(op: &OperatorSpec, f: Field2, top: &Poly, x_bc: XBoundary) -> BvpProblem {
        let top = top.clone();
        BvpProblem { op: op.clone(), f, top_data: Arc::new(move |x| top.eval(x)), x_bc }
    }

    /// Problem for `R = u - e`: `L R = f - L e`, data shifted by `e`.
    pub fn subtract(&self, e: &Series) -> Result<BvpProblem> {
        let le = apply_operator(&self.op, e)?;
        let (f, top) = (self.f.clone(), self.top_data.clone());
        let r = self.op.r;
        let e1 = e.clone();
        let x_bc = match &self.x_bc {
            XBoundary::Periodic => XBoundary::Periodic,
            XBoundary::Dirichlet(g) => {
                let (g, e3) = (g.clone(), e.clone());
                XBoundary::Dirichlet(Arc::new(move |x, t| g(x, t) - series_value(&e3, x, t)))
            }
        };
        Ok(BvpProblem {
            op: self.op.clone(),
            f: Arc::new(move |x, t| f(x, t) - series_value(&le, x, t)),
            top_data: Arc::new(move |x| top(x) - series_value(&e1, x, r)),
            x_bc,
        })
    }
}

/// Band matrix in LAPACK layout: `A(i, j)` at `kv + i - j + j * ldab`, with
/// room for the fill of partial pivoting.
struct Band {
    n: usize,
    kl: usize,
    ku: usize,
    ab: Vec<f64>,
    ipiv: Vec<usize>,
}

impl Band {
    fn new(n: usize, kl: usize, ku: usize) -> Band {
        Band { n, kl, ku, ab: vec![0.0; (2 * kl + ku + 1) * n], ipiv: Vec::new() }
    }

    fn ldab(&self) -> usize {
        2 * self.kl + self.ku + 1
    }

    fn idx(&self, i: usize, j: usize) -> usize {
        self.kl + self.ku + i - j + j * self.ldab()
    }

    fn add(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i <= j + self.kl && j <= i + self.ku);
        let k = self.idx(i, j);
        self.ab[k] += v;
    }

    /// In-place LU with partial pivoting; returns the column of a zero pivot.
    fn factor(&mut self) -> std::result::Result<(), usize> {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        let ld = self.ldab();
        let kv = kl + ku;
        self.ipiv = vec![0; n];
        let mut ju = 0usize;
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            let col = kv + j * ld;
            let jp = (0..=km)
                .max_by(|&a, &b| self.ab[col + a].abs().total_cmp(&self.ab[col + b].abs()))
                .unwrap_or(0);
            self.ipiv[j] = j + jp;
            let piv = self.ab[col + jp];
            if piv == 0.0 || !piv.is_finite() {
                return Err(j);
            }
            ju = ju.max((j + ku + jp).min(n - 1));
            if jp != 0 {
                for c in j..=ju {
                    let (a, b) = (self.idx(j, c), self.idx(j + jp, c));
                    self.ab.swap(a, b);
                }
            }
            if km > 0 {
                let inv = 1.0 / piv;
                for v in &mut self.ab[col + 1..=col + km] {
                    *v *= inv;
                }
                for c in j + 1..=ju {
                    let top = self.idx(j, c);
                    let a = self.ab[top];
                    if a != 0.0 {
                        for i in 1..=km {
                            self.ab[top + i] -= self.ab[col + i] * a;
                        }
                    }
                }
            }
        }
        Ok(())
    }

    fn solve(&self, b: &mut [f64]) {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        let kv = kl + ku;
        for j in 0..n {
            let p = self.ipiv[j];
            if p != j {
                b.swap(j, p);
            }
            let km = kl.min(n - 1 - j);
            let col = self.idx(j, j);
            let bj = b[j];
            if bj != 0.0 {
                for i in 1..=km {
                    b[j + i] -= self.ab[col + i] * bj;
                }
            }
        }
        for j in (0..n).rev() {
            let d = self.ab[self.idx(j, j)];
            b[j] /= d;
            let bj = b[j];
            if bj != 0.0 {
                for i in j.saturating_sub(kv)..j {
                    b[i] -= self.ab[self.idx(i, j)] * bj;
                }
            }
        }
    }
}

/// Three-point weights for the first and second derivative at a node with
/// left gap `hm` and right gap `hp`.
fn t_weights(hm: f64, hp: f64) -> ([f64; 3], [f64; 3]) {
    let s = hm + hp;
    let d1 = [-hp / (hm * s), (hp - hm) / (hm * hp), hm / (hp * s)];
    let d2 = [2.0 / (hm * s), -2.0 / (hm * hp), 2.0 / (hp * s)];
    (d1, d2)
}

/// 64-bit FNV-1a of the operator's JSON form.
fn fingerprint(op: &OperatorSpec) -> String {
    let text = serde_json::to_string(op).unwrap_or_default();
    let h = text.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
    });
    format!("{h:016x}")
}

/// Solve the discrete problem; the result includes the t = 0 and t = r rows.
pub fn solve_bvp(p: &BvpProblem, mesh: &Mesh) -> Result<GridFunction> {
    mesh.validate()?;
    let op = &p.op;
    let c0 = op.c.at_t0();
    if let Some(&x) = mesh.x_nodes.iter().find(|&&x| c0.eval(x) >= 0.0) {
        return Err(LabError::Sign(format!("c({x}, 0) = {} is not negative", c0.eval(x))));
    }
    if (mesh.r() - op.r).abs() > 1e-12 * op.r {
        return Err(LabError::Grid(format!("mesh height {} differs from r = {}", mesh.r(), op.r)));
    }
    let periodic = matches!(p.x_bc, XBoundary::Periodic);
    if periodic != mesh.periodic {
        return Err(LabError::Grid("x boundary condition does not match the mesh".into()));
    }
    let (xs, ts) = (&mesh.x_nodes, &mesh.t_nodes);
    let (nx, nt) = (xs.len(), ts.len() - 1);

    // known values: bottom, top, x-boundary columns
    let mut known = vec![vec![f64::NAN; nt + 1]; nx];
    for (i, &x) in xs.iter().enumerate() {
        known[i][0] = (p.f)(x, 0.0) / c0.eval(x);
        known[i][nt] = (p.top_data)(x);
    }
    if let XBoundary::Dirichlet(g) = &p.x_bc {
        for j in 1..nt {
            known[0][j] = g(xs[0], ts[j]);
            known[nx - 1][j] = g(xs[nx - 1], ts[j]);
        }
    }
    if let Some((i, j)) = known
        .iter()
        .enumerate()
        .find_map(|(i, row)| row.iter().enumerate().find(|(j, v)| (*j == 0 || *j == nt) && !v.is_finite()).map(|(j, _)| (i, j)))
    {
        return Err(LabError::Domain(format!("boundary data not finite at x = {}, t = {}", xs[i], ts[j])));
    }

    let (first, nxu) = if periodic { (0, nx) } else { (1, nx - 2) };
    let unknown = |i: usize, j: usize| -> Option<usize> {
        if j == 0 || j == nt || i < first || i >= first + nxu {
            None
        } else {
            Some((j - 1) * nxu + (i - first))
        }
    };
    let n = nxu * (nt - 1);
    let bw = if periodic { 2 * nxu - 1 } else { nxu + 1 };
    let hx = mesh.hx();
    let dx = [-0.5 / hx, 0.0, 0.5 / hx];
    let dxx = [1.0 / (hx * hx), -2.0 / (hx * hx), 1.0 / (hx * hx)];

    // rows of (column, value) plus right-hand sides, one t-row at a time
    let rows: Vec<(Vec<Vec<(usize, f64)>>, Vec<f64>, Vec<f64>)> = (1..nt)
        .into_par_iter()
        .map(|j| {
            let t = ts[j];
            let (d1, d2) = t_weights(t - ts[j - 1], ts[j + 1] - t);
            let mut eqs = Vec::with_capacity(nxu);
            let mut rhs = Vec::with_capacity(nxu);
            let mut fs = Vec::with_capacity(nxu);
            for iu in 0..nxu {
                let i = iu + first;
                let x = xs[i];
                let (axx, axt, att) = (op.a_xx.eval(x, t), op.a_xt.eval(x, t), op.a_tt.eval(x, t));
                let (bx, bt, c) = (op.b_x.eval(x, t), op.b_t.eval(x, t), op.c.eval(x, t));
                let fv = (p.f)(x, t);
                let mut b = fv;
                let mut eq: Vec<(usize, f64)> = Vec::with_capacity(9);
                for di in 0..3 {
                    for dj in 0..3 {
                        let dd = |k: usize| if k == 1 { 1.0 } else { 0.0 };
                        let w = t * t * (axx * dxx[di] * dd(dj) + 2.0 * axt * dx[di] * d1[dj] + att * d2[dj] * dd(di))
                            + t * (bx * dx[di] * dd(dj) + bt * d1[dj] * dd(di))
                            + c * dd(di) * dd(dj);
                        if w == 0.0 {
                            continue;
                        }
                        let ii = if periodic { (i + nx + di - 1) % nx } else { i + di - 1 };
                        let jj = j + dj - 1;
                        match unknown(ii, jj) {
                            Some(k) => eq.push((k, w)),
                            None => b -= w * known[ii][jj],
                        }
                    }
                }
                eqs.push(eq);
                rhs.push(b);
                fs.push(fv);
            }
            (eqs, rhs, fs)
        })
        .collect();
    let mut eqs = Vec::with_capacity(n);
    let mut rhs = Vec::with_capacity(n);
    let mut fnorm = 0.0f64;
    for (e, b, f) in rows {
        eqs.extend(e);
        rhs.extend(b);
        fnorm = f.iter().fold(fnorm, |m, v| m.max(v.abs()));
    }
    if rhs.iter().any(|v| !v.is_finite()) {
        return Err(LabError::Domain("right-hand side or boundary data not finite".into()));
    }

    let mut band = Band::new(n, bw, bw);
    for (row, eq) in eqs.iter().enumerate() {
        for &(col, v) in eq {
            band.add(row, col, v);
        }
    }
    band.factor().map_err(|col| {
        LabError::Solver(format!(
            "singular system at unknown {col} on the {nx} x {nt} mesh (beta {}), operator {}",
            mesh.beta,
            fingerprint(op)
        ))
    })?;
    let mut sol = rhs.clone();
    band.solve(&mut sol);

    let bnorm = rhs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let res = eqs
        .par_iter()
        .zip(&rhs)
        .map(|(eq, b)| (eq.iter().map(|&(k, v)| v * sol[k]).sum::<f64>() - b).abs())
        .reduce(|| 0.0, f64::max);
    let scale = fnorm.max(bnorm);
    if !(res <= RESIDUAL_TOL * scale) && !(scale == 0.0 && res == 0.0) {
        return Err(LabError::Convergence(format!(
            "residual {res:.3e} after the direct solve exceeds {RESIDUAL_TOL:.0e} x {scale:.3e}"
        )));
    }

    let mut values = known;
    for j in 1..nt {
        for iu in 0..nxu {
            values[iu + first][j] = sol[(j - 1) * nxu + iu];
        }
    }
    GridFunction::new(xs.clone(), ts.clone(), values)
}

/// Solve for `R = u - e` and return `e + R_h`, which removes the
/// discretisation error of the resolved singular part `e`.
pub fn solve_bvp_subtracted(p: &BvpProblem, mesh: &Mesh, e: &Series) -> Result<GridFunction> {
    let rem = solve_bvp(&p.subtract(e)?, mesh)?;
    rem.map(|x, t, v| v + series_value(e, x, t))
}

#[derive(Clone, Debug, Serialize)]
pub struct DecayReport {
    pub window: (f64, f64),
    pub fit: DecayFit,
    pub predicted: f64,
    pub max_remainder: f64,
    /// The remainder is within the discretisation error, so the slope says little.
    pub discretization_limited: bool,
}

/// Default fit window `[max(10 t_1, 1e-4), 1e-1]`.
pub fn default_window(u_fd: &GridFunction) -> (f64, f64) {
    let t1 = u_fd.t_nodes.iter().copied().find(|&t| t > 0.0).unwrap_or(1e-4);
    ((10.0 * t1).max(1e-4), 1e-1)
}

/// Remainder `u_fd - e` on the positive-t nodes and its decay against `predicted`.
pub fn oracle_compare(
    u_fd: &GridFunction,
    e: &Expansion,
    predicted: f64,
    window: (f64, f64),
    fd_error: Option<f64>,
) -> Result<(GridFunction, DecayReport)> {
    let series = e.to_series();
    let start = u_fd.t_nodes.iter().position(|&t| t > 0.0).unwrap_or(u_fd.t_nodes.len());
    let ts = u_fd.t_nodes[start..].to_vec();
    let values = u_fd
        .x_nodes
        .iter()
        .zip(&u_fd.values)
        .map(|(&x, row)| {
            ts.iter()
                .zip(&row[start..])
                .map(|(&t, &v)| series.evaluate(x, t).map(|s| v - s))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let rem = GridFunction::new(u_fd.x_nodes.clone(), ts, values)?;
    let fit = decay_rate_fit(&rem, window)?;
    let max_remainder = rem
        .t_nodes
        .iter()
        .enumerate()
        .filter(|(_, &t)| t >= window.0 && t <= window.1)
        .map(|(j, _)| rem.max_abs_at(j))
        .fold(0.0, f64::max);
    let discretization_limited = fd_error.is_some_and(|h| max_remainder <= 10.0 * h);
    Ok((rem, DecayReport { window, fit, predicted, max_remainder, discretization_limited }))
}

/// Observed orders `log2(e_k / e_{k+1})` for a sequence of doubled meshes.
pub fn convergence_orders(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}
