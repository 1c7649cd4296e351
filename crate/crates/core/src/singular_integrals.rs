//! The two singular integral operators of the boundary analysis, evaluated by
//! quadrature after the substitution s = t rho, and the grid estimators
//! (Hoelder seminorms, decay fits) used to check their mapping properties.

use crate::boundary_algebra::{Poly, Series};
use crate::error::{LabError, Result};
pub use crate::grid::GridFunction;
use crate::quadrature::integrate_endpoint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Relative tolerance of the operator quadratures.
pub const OP_TOL: f64 = 1e-12;
const STRATA: usize = 64;
const BOUNDARY_PAIRS: usize = 512;

/// A function on the half-strip with exact t-derivatives.
pub trait TField: Sync {
    /// `d_t^nu f(x, t)` for t > 0.
    fn dt(&self, nu: usize, x: f64, t: f64) -> f64;

    fn value(&self, x: f64, t: f64) -> f64 {
        self.dt(0, x, t)
    }

    /// Exponent p with `f = O(t^p)` as t -> 0 at this x, if known.
    fn vanishing_order(&self, x: f64) -> Option<f64>;
}

/// `g(x) t^{p(x)} (log t)^j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerLogTerm {
    pub coeff: Poly,
    pub power: Poly,
    #[serde(default)]
    pub log_power: u32,
}

impl PowerLogTerm {
    pub fn new(coeff: Poly, power: f64, log_power: u32) -> PowerLogTerm {
        PowerLogTerm { coeff, power: Poly::constant(power), log_power }
    }
}

impl TField for PowerLogTerm {
    fn dt(&self, nu: usize, x: f64, t: f64) -> f64 {
        // d_t [t^p sum_j b_j L^j] = t^{p-1} sum_j (p b_j + (j+1) b_{j+1}) L^j
        let mut p = self.power.eval(x);
        let mut b = vec![0.0; self.log_power as usize + 1];
        b[self.log_power as usize] = 1.0;
        for _ in 0..nu {
            let next: Vec<f64> = (0..b.len())
                .map(|j| p * b[j] + b.get(j + 1).map_or(0.0, |v| (j + 1) as f64 * v))
                .collect();
            b = next;
            p -= 1.0;
        }
        let l = t.ln();
        let logs = b.iter().rev().fold(0.0, |acc, c| acc * l + c);
        self.coeff.eval(x) * t.powf(p) * logs
    }

    fn vanishing_order(&self, x: f64) -> Option<f64> {
        Some(self.power.eval(x))
    }
}

/// Finite sum of power-log terms.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PowerLogSum {
    pub terms: Vec<PowerLogTerm>,
}

impl PowerLogSum {
    pub fn single(coeff: Poly, power: f64, log_power: u32) -> PowerLogSum {
        PowerLogSum { terms: vec![PowerLogTerm::new(coeff, power, log_power)] }
    }

    pub fn scaled(&self, s: f64) -> PowerLogSum {
        PowerLogSum {
            terms: self
                .terms
                .iter()
                .map(|t| PowerLogTerm { coeff: t.coeff.scale(s), ..t.clone() })
                .collect(),
        }
    }

    pub fn plus(&self, other: &PowerLogSum) -> PowerLogSum {
        PowerLogSum { terms: self.terms.iter().chain(&other.terms).cloned().collect() }
    }
}

impl TField for PowerLogSum {
    fn dt(&self, nu: usize, x: f64, t: f64) -> f64 {
        self.terms.iter().map(|term| term.dt(nu, x, t)).sum()
    }

    fn vanishing_order(&self, x: f64) -> Option<f64> {
        self.terms
            .iter()
            .filter(|term| term.coeff.eval(x) != 0.0)
            .map(|term| term.power.eval(x))
            .min_by(f64::total_cmp)
            .or(Some(f64::INFINITY))
    }
}

impl TField for Series {
    fn dt(&self, nu: usize, x: f64, t: f64) -> f64 {
        self.evaluate_dt(nu, x, t).unwrap_or(f64::NAN)
    }

    fn vanishing_order(&self, x: f64) -> Option<f64> {
        let g = self.gamma().eval(x);
        self.terms()
            .map(|(e, _)| e.i as f64 + if e.g == 1 { g } else { 0.0 })
            .min_by(f64::total_cmp)
            .or(Some(f64::INFINITY))
    }
}

/// `d_t^nu` of `t^{-a} int_0^t s^{a-1} f(x, s) ds = int_0^1 rho^{nu+a-1} d_t^nu f(x, t rho) d rho`.
pub fn op_lower(f: &dyn TField, a: &Poly, nu: usize, x: f64, t: f64) -> Result<f64> {
    let av = a.eval(x);
    if !(av > 0.0) {
        return Err(LabError::Parameter(format!("exponent a = {av} is not positive at x = {x}")));
    }
    if t <= 0.0 {
        return Err(LabError::Domain(format!("t = {t} outside (0, r]")));
    }
    let lead = f.vanishing_order(x).unwrap_or(0.0).max(nu as f64) - nu as f64;
    let beta = av + nu as f64 - 1.0 + lead.min(8.0);
    integrate_endpoint(&|rho: f64| rho.powf(nu as f64 + av - 1.0) * f.dt(nu, x, t * rho), beta, OP_TOL)
}

/// `d_t^nu` of `t^a int_0^t s^{-a-1} f(x, s) ds = int_0^1 rho^{nu-a-1} d_t^nu f(x, t rho) d rho`.
/// Requires a declared vanishing order of f above a.
pub fn op_upper(f: &dyn TField, a: &Poly, nu: usize, x: f64, t: f64) -> Result<f64> {
    let av = a.eval(x);
    if !(av > 0.0) {
        return Err(LabError::Parameter(format!("exponent a = {av} is not positive at x = {x}")));
    }
    if t <= 0.0 {
        return Err(LabError::Domain(format!("t = {t} outside (0, r]")));
    }
    let order = f.vanishing_order(x).ok_or_else(|| {
        LabError::Integrability("no vanishing order declared for the integrand".into())
    })?;
    if order <= av + 1e-12 {
        return Err(LabError::Integrability(format!(
            "vanishing order {order} does not exceed a = {av} at x = {x}"
        )));
    }
    // rho^{nu-a-1} (t rho)^{order-nu} near rho = 0
    let beta = (order - av - 1.0).min(8.0);
    integrate_endpoint(&|rho: f64| rho.powf(nu as f64 - av - 1.0) * f.dt(nu, x, t * rho), beta, OP_TOL)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kernel {
    Lower,
    Upper,
}

/// Operator output on a grid, with the declared vanishing order of the result.
pub fn op_grid(
    kernel: Kernel,
    f: &dyn TField,
    a: &Poly,
    nu: usize,
    x_nodes: &[f64],
    t_nodes: &[f64],
) -> Result<GridFunction> {
    let g = GridFunction::try_from_fn(x_nodes, t_nodes, |x, t| match kernel {
        Kernel::Lower => op_lower(f, a, nu, x, t),
        Kernel::Upper => op_upper(f, a, nu, x, t),
    })?;
    let order = x_nodes
        .iter()
        .filter_map(|&x| f.vanishing_order(x))
        .fold(f64::INFINITY, f64::min);
    Ok(if order.is_finite() { g.with_vanishing_order(order - nu as f64) } else { g })
}

/// Which mapping property applies to an operator call.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    /// Lower kernel; decay `k - nu + alpha`.
    Lower,
    /// Upper kernel, non-integer a, alpha above the fractional part; decay `[a] - nu + alpha`.
    UpperAlphaAbove,
    /// Upper kernel, non-integer a, alpha below the fractional part; decay `[a] - nu + 1`.
    UpperAlphaBelow,
    /// Upper kernel, non-integer a, `k >= [a] + 1`; decay `k - nu + alpha`.
    UpperHighOrder,
    /// Upper kernel, integer a, `k <= a`; decay `a - nu + alpha`.
    IntegerLow,
    /// Upper kernel, integer a, `k >= a + 1`; decay `k - nu + alpha`.
    IntegerHigh,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegimeReport {
    pub regime: Regime,
    pub warnings: Vec<String>,
}

impl Regime {
    /// Predicted decay exponent of `d_t^nu F` for data vanishing like `t^{k + alpha}`.
    pub fn predicted_decay(&self, a: &Poly, k: usize, alpha: f64, nu: usize) -> f64 {
        let floor = a.range().0.floor();
        let (k, nu) = (k as f64, nu as f64);
        match self {
            Regime::Lower | Regime::UpperHighOrder | Regime::IntegerHigh => k - nu + alpha,
            Regime::UpperAlphaAbove => floor - nu + alpha,
            Regime::UpperAlphaBelow => floor - nu + 1.0,
            Regime::IntegerLow => a.range().0.round() - nu + alpha,
        }
    }
}

/// Classify `(kernel, a, [a], alpha, k)`. Borderline cases are reported as
/// warnings; the operators are defined regardless.
pub fn classify_regime(kernel: Kernel, a: &Poly, alpha: f64, k: usize) -> RegimeReport {
    let mut warnings = Vec::new();
    if kernel == Kernel::Lower {
        return RegimeReport { regime: Regime::Lower, warnings };
    }
    let (lo, hi) = a.range();
    if lo.floor() != hi.floor() {
        warnings.push(format!("[a] varies over [{lo}, {hi}]"));
    }
    let floor = lo.floor();
    let integer = a.is_constant() && (lo - lo.round()).abs() < 1e-12;
    if integer {
        let ai = lo.round() as usize;
        let regime = if k > ai { Regime::IntegerHigh } else { Regime::IntegerLow };
        return RegimeReport { regime, warnings };
    }
    if k as f64 >= floor + 1.0 {
        return RegimeReport { regime: Regime::UpperHighOrder, warnings };
    }
    let (flo, fhi) = (lo - floor, hi - floor);
    let regime = if alpha > fhi {
        Regime::UpperAlphaAbove
    } else if alpha < flo {
        Regime::UpperAlphaBelow
    } else {
        warnings.push(format!(
            "alpha = {alpha} lies inside the range [{flo}, {fhi}] of the fractional part of a"
        ));
        if alpha > 0.5 * (flo + fhi) {
            Regime::UpperAlphaAbove
        } else {
            Regime::UpperAlphaBelow
        }
    };
    RegimeReport { regime, warnings }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    T,
    X,
}

/// Seed for pair sampling: `INDICIAL_LAB_SEED`, default 0.
pub fn sampling_seed() -> u64 {
    std::env::var("INDICIAL_LAB_SEED")
        .ok()
        .and_then(|s| s.trim().parse().ok())
        .unwrap_or(0)
}

/// One index per stratum of `0..n`, first and last always included.
fn stratified(n: usize, strata: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    if n <= strata {
        return (0..n).collect();
    }
    let mut picks: Vec<usize> = (0..strata)
        .map(|k| {
            let lo = k * n / strata;
            let hi = ((k + 1) * n / strata).max(lo + 1);
            rng.gen_range(lo..hi)
        })
        .collect();
    picks[0] = 0;
    picks[strata - 1] = n - 1;
    picks
}

/// Lower bound for the Hoelder-`alpha` seminorm in one direction, using
/// [`sampling_seed`].
pub fn holder_seminorm_est(g: &GridFunction, alpha: f64, direction: Direction) -> Result<f64> {
    holder_seminorm_seeded(g, alpha, direction, sampling_seed())
}

/// Max of `|dg| / |d|^alpha` over pairs on each line of the grid: all pairs
/// among 64 stratified nodes, all neighbours, and (in t) 512 stratified nodes
/// paired with the smallest node.
pub fn holder_seminorm_seeded(g: &GridFunction, alpha: f64, direction: Direction, seed: u64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(LabError::Parameter(format!("Hoelder index {alpha} outside (0, 1)")));
    }
    let (nodes, lines) = match direction {
        Direction::T => (&g.t_nodes, g.x_nodes.len()),
        Direction::X => (&g.x_nodes, g.t_nodes.len()),
    };
    let n = nodes.len();
    if n < 2 {
        return Err(LabError::Grid(format!("{n} node(s) in the {direction:?} direction")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let strata = stratified(n, STRATA, &mut rng);
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for (a, &i) in strata.iter().enumerate() {
        pairs.extend(strata[a + 1..].iter().map(|&j| (i, j)));
    }
    pairs.extend((0..n - 1).map(|i| (i, i + 1)));
    if direction == Direction::T {
        pairs.extend(stratified(n - 1, BOUNDARY_PAIRS, &mut rng).into_iter().map(|j| (0, j + 1)));
    }
    let value = |line: usize, i: usize| match direction {
        Direction::T => g.values[line][i],
        Direction::X => g.values[i][line],
    };
    Ok((0..lines)
        .into_par_iter()
        .map(|line| {
            pairs
                .iter()
                .map(|&(i, j)| {
                    (value(line, i) - value(line, j)).abs() / (nodes[i] - nodes[j]).abs().powf(alpha)
                })
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DecayFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual of the log-log fit.
    pub residual: f64,
    pub points: usize,
}

/// Least-squares line through `(log t, log max_x |g(., t)|)` for the nodes in the window.
pub fn decay_rate_fit(g: &GridFunction, window: (f64, f64)) -> Result<DecayFit> {
    let (lo, hi) = window;
    if !(lo > 0.0 && hi > lo) {
        return Err(LabError::Parameter(format!("window [{lo}, {hi}] is not a positive interval")));
    }
    let pts: Vec<(f64, f64)> = g
        .t_nodes
        .iter()
        .enumerate()
        .filter(|(_, &t)| t >= lo && t <= hi)
        .map(|(j, &t)| (t, g.max_abs_at(j)))
        .filter(|&(_, v)| v > 0.0)
        .map(|(t, v)| (t.ln(), v.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(LabError::UndefinedFit(format!(
            "{} nonzero node(s) in the window [{lo:e}, {hi:e}]",
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(LabError::UndefinedFit("window holds a single distinct t".into()));
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum::<f64>() / n).sqrt();
    Ok(DecayFit { slope, intercept, residual, points: pts.len() })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Multiplier {
    /// `t^{-gamma(x)} f`
    InversePower,
    /// `f log t`
    Log,
    /// `f / log t`
    InverseLog,
}

#[derive(Clone, Debug, Serialize)]
pub struct MultiplyReport {
    pub multiplier: Multiplier,
    pub epsilon: f64,
    pub holder_t: f64,
    pub holder_x: f64,
    pub decay: DecayFit,
    pub predicted_slope: f64,
    #[serde(skip)]
    pub transformed: GridFunction,
}

/// Apply a power or log multiplier pointwise and report Hoelder-`epsilon`
/// estimates in both directions with a decay fit over `window`.
pub fn power_log_multiply_check(
    f: &GridFunction,
    gamma: &Poly,
    multiplier: Multiplier,
    epsilon: f64,
    window: (f64, f64),
) -> Result<MultiplyReport> {
    let order = f.vanishing_order;
    let gmax = gamma.range().1;
    if multiplier == Multiplier::InversePower && !order.is_some_and(|m| m > gmax) {
        return Err(LabError::Domain(format!(
            "t^(-gamma) needs a declared vanishing order above max gamma = {gmax}, got {order:?}"
        )));
    }
    if f.t_nodes.iter().any(|&t| t <= 0.0 || t >= 1.0) && multiplier == Multiplier::InverseLog {
        return Err(LabError::Domain("1/log t needs t in (0, 1)".into()));
    }
    let transformed = f.map(|x, t, v| match multiplier {
        Multiplier::InversePower => v * t.powf(-gamma.eval(x)),
        Multiplier::Log => v * t.ln(),
        Multiplier::InverseLog => v / t.ln(),
    })?;
    let m = order.unwrap_or(0.0);
    let predicted_slope = match multiplier {
        Multiplier::InversePower => m - gmax,
        Multiplier::Log | Multiplier::InverseLog => m,
    };
    let transformed = match order {
        Some(_) => transformed.with_vanishing_order(predicted_slope),
        None => transformed,
    };
    Ok(MultiplyReport {
        multiplier,
        epsilon,
        holder_t: holder_seminorm_est(&transformed, epsilon, Direction::T)?,
        holder_x: holder_seminorm_est(&transformed, epsilon, Direction::X)?,
        decay: decay_rate_fit(&transformed, window)?,
        predicted_slope,
        transformed,
    })
}

/// One line of an operator sweep report.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub scenario: String,
    pub check: String,
    pub regime: String,
    pub fitted_slope: f64,
    pub predicted_slope: f64,
    pub holder_t: f64,
    pub holder_x: f64,
    pub tolerance: f64,
    pub pass: bool,
}

pub fn write_sweep_csv(rows: &[SweepRow], w: impl Write) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for row in rows {
        wr.serialize(row).map_err(|e| LabError::Config(format!("csv output: {e}")))?;
    }
    wr.flush().map_err(|e| LabError::Config(format!("csv output: {e}")))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{graded_nodes, log_spaced};

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn lower_kernel_closed_forms() {
        let a = Poly::constant(2.0);
        let one = PowerLogSum::single(Poly::constant(1.0), 0.0, 0);
        assert!(rel(op_lower(&one, &a, 0, 0.3, 0.4).unwrap(), 0.5) < 1e-12);
        let f = PowerLogSum::single(Poly::constant(1.0), 1.5, 0);
        let t: f64 = 0.2;
        assert!(rel(op_lower(&f, &a, 0, 0.0, t).unwrap(), t.powf(1.5) / 3.5) < 1e-12);
        // derivative through the integrand: d_t (t^1.5 / 3.5)
        assert!(rel(op_lower(&f, &a, 1, 0.0, t).unwrap(), 1.5 * t.sqrt() / 3.5) < 1e-12);
        let g = PowerLogSum::single(Poly::new(vec![0.5, 1.0]), 1.0, 0);
        assert!(rel(op_lower(&g, &a, 0, 0.4, t).unwrap(), t * 0.9 / 3.0) < 1e-12);
        assert!(matches!(op_lower(&g, &Poly::constant(0.0), 0, 0.0, t), Err(LabError::Parameter(_))));
    }

    #[test]
    fn upper_kernel_closed_forms() {
        let f = PowerLogSum::single(Poly::x(), 2.0, 0);
        let a = Poly::constant(1.5);
        let t: f64 = 0.3;
        assert!(rel(op_upper(&f, &a, 0, 0.7, t).unwrap(), 0.7 * t * t / 0.5) < 1e-12);
        let g = PowerLogSum::single(Poly::constant(1.0), 2.25, 0);
        for nu in 0..=2 {
            let exact = (0..nu).fold(t.powf(2.25 - nu as f64), |acc, k| acc * (2.25 - k as f64)) / 0.75;
            assert!(rel(op_upper(&g, &a, nu, 0.0, t).unwrap(), exact) < 1e-11, "nu {nu}");
        }
        let border = PowerLogSum::single(Poly::constant(1.0), 1.5, 0);
        assert!(matches!(op_upper(&border, &a, 0, 0.0, t), Err(LabError::Integrability(_))));
    }

    #[test]
    fn log_integrands() {
        // int_0^1 rho^{a-1} rho^q (log t + log rho) = t^q (log t/(a+q) - 1/(a+q)^2)
        let f = PowerLogSum::single(Poly::constant(1.0), 1.0, 1);
        let t: f64 = 0.1;
        let exact = t * (t.ln() / 3.0 - 1.0 / 9.0);
        assert!(rel(op_lower(&f, &Poly::constant(2.0), 0, 0.0, t).unwrap(), exact) < 1e-11);
    }

    #[test]
    fn varying_exponent() {
        let a = Poly::new(vec![1.5, 0.2]);
        let f = PowerLogSum::single(Poly::constant(1.0), 1.0, 0);
        for &x in &[-1.0, 0.0, 0.8] {
            let v = op_lower(&f, &a, 0, x, 0.5).unwrap();
            assert!(rel(v, 0.5 / (a.eval(x) + 1.0)) < 1e-12);
        }
    }

    #[test]
    fn regimes() {
        let a = Poly::constant(1.3);
        assert_eq!(classify_regime(Kernel::Upper, &a, 0.5, 1).regime, Regime::UpperAlphaAbove);
        assert_eq!(classify_regime(Kernel::Upper, &a, 0.2, 1).regime, Regime::UpperAlphaBelow);
        assert_eq!(classify_regime(Kernel::Upper, &a, 0.2, 2).regime, Regime::UpperHighOrder);
        assert_eq!(classify_regime(Kernel::Upper, &Poly::constant(2.0), 0.5, 2).regime, Regime::IntegerLow);
        assert_eq!(classify_regime(Kernel::Upper, &Poly::constant(2.0), 0.5, 3).regime, Regime::IntegerHigh);
        let mixed = classify_regime(Kernel::Upper, &Poly::new(vec![1.3, 0.2]), 0.3, 1);
        assert_eq!(mixed.warnings.len(), 1);
        assert_eq!(Regime::UpperAlphaBelow.predicted_decay(&a, 1, 0.2, 0), 2.0);
        assert_eq!(Regime::UpperAlphaAbove.predicted_decay(&a, 1, 0.5, 1), 0.5);
    }

    #[test]
    fn holder_examples() {
        let xs = [0.0, 0.5];
        let ts = graded_nodes(1.0, 2048, 4.0);
        let alpha = 0.4;
        let g = GridFunction::from_fn(&xs, &ts, |_, t| t.powf(alpha)).unwrap();
        let est = holder_seminorm_est(&g, alpha, Direction::T).unwrap();
        assert!(est <= 1.0 + 1e-12 && est > 0.98, "{est}");
        let c = GridFunction::from_fn(&xs, &ts, |_, _| 3.0).unwrap();
        assert_eq!(holder_seminorm_est(&c, 0.5, Direction::T).unwrap(), 0.0);
        let r = 0.6;
        let lin = GridFunction::from_fn(&xs, &graded_nodes(r, 64, 2.0), |_, t| t).unwrap();
        let est = holder_seminorm_est(&lin, 0.5, Direction::T).unwrap();
        let expect = (r - lin.t_nodes[0]).sqrt();
        assert!((est - expect).abs() < 1e-12);
        let one = GridFunction::from_fn(&[0.0], &ts, |_, t| t).unwrap();
        assert!(matches!(holder_seminorm_est(&one, 0.5, Direction::X), Err(LabError::Grid(_))));
    }

    #[test]
    fn holder_is_seed_independent_on_small_grids() {
        let g = GridFunction::from_fn(&[0.0, 0.5], &graded_nodes(1.0, 40, 2.0), |x, t| x * t.sqrt()).unwrap();
        let a = holder_seminorm_seeded(&g, 0.5, Direction::T, 1).unwrap();
        let b = holder_seminorm_seeded(&g, 0.5, Direction::T, 99).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn decay_examples() {
        let ts = log_spaced(1e-6, 1e-1, 200);
        let g = GridFunction::from_fn(&[0.0, 1.0], &ts, |_, t| t.powf(1.5)).unwrap();
        let fit = decay_rate_fit(&g, (1e-6, 1e-1)).unwrap();
        assert!((fit.slope - 1.5).abs() < 1e-6);
        let p = GridFunction::from_fn(&[0.0, 1.0], &ts, |x, t| t.powf(1.5) * (1.0 + 0.1 * (1.0 + x) * t)).unwrap();
        let s = decay_rate_fit(&p, (1e-4, 1e-2)).unwrap().slope;
        assert!((1.45..=1.55).contains(&s));
        // the log factor shifts the slope by about 1/log t over the window
        let m = 1.5;
        let l = GridFunction::from_fn(&[0.0], &ts, |_, t| t.powf(m) * t.ln()).unwrap();
        let fit = decay_rate_fit(&l, (1e-6, 1e-4)).unwrap();
        let shift = 1.0 / (1e-5f64).ln();
        assert!((fit.slope - (m + shift)).abs() < 0.01, "{}", fit.slope);
        assert!(fit.residual > 1e-4);
        let z = GridFunction::from_fn(&[0.0], &ts, |_, _| 0.0).unwrap();
        assert!(matches!(decay_rate_fit(&z, (1e-6, 1e-1)), Err(LabError::UndefinedFit(_))));
    }

    #[test]
    fn multiplier_checks() {
        let xs: Vec<f64> = (0..9).map(|k| -1.0 + 0.25 * k as f64).collect();
        let ts = graded_nodes(0.5, 1024, 4.0);
        let alpha = 0.7;
        let c = 0.3;
        let f = GridFunction::from_fn(&xs, &ts, |_, t| t.powf(alpha)).unwrap().with_vanishing_order(alpha);
        let rep = power_log_multiply_check(&f, &Poly::constant(c), Multiplier::InversePower, alpha - c - 0.01, (1e-6, 1e-2))
            .unwrap();
        assert!((rep.decay.slope - (alpha - c)).abs() < 1e-9);
        assert!(rep.holder_t <= 1.0 + 1e-12);
        let lin = GridFunction::from_fn(&xs, &ts, |_, t| t).unwrap().with_vanishing_order(1.0);
        let rep = power_log_multiply_check(&lin, &Poly::zero(), Multiplier::Log, 0.9, (1e-6, 1e-4)).unwrap();
        assert!((rep.decay.slope - 1.0).abs() < 0.1);
        assert!(rep.holder_t < 10.0);
        let rep = power_log_multiply_check(&lin, &Poly::zero(), Multiplier::InverseLog, 0.99, (1e-6, 1e-4)).unwrap();
        // |d_t (t / log t)| <= 3.5 on (0, 0.5]
        assert!(rep.holder_t < 4.0);
        let undeclared = GridFunction::from_fn(&xs, &ts, |_, t| t).unwrap();
        assert!(matches!(
            power_log_multiply_check(&undeclared, &Poly::constant(0.5), Multiplier::InversePower, 0.3, (1e-6, 1e-2)),
            Err(LabError::Domain(_))
        ));
    }

    #[test]
    fn sweep_csv() {
        let row = SweepRow {
            scenario: "s".into(),
            check: "lower".into(),
            regime: "lower".into(),
            fitted_slope: 1.5,
            predicted_slope: 1.5,
            holder_t: 0.1,
            holder_x: 0.2,
            tolerance: 0.05,
            pass: true,
        };
        let mut out = Vec::new();
        write_sweep_csv(&[row], &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("scenario,check,regime,fitted_slope"));
    }
}
